//! Finite populations: a study variable `y`, an optional size measure `x`
//! for inclusion probabilities and an optional evaluation variable `z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub ids: Vec<String>,
    pub y: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

impl Population {
    pub fn new(ids: Vec<String>, y: Option<Vec<f64>>, x: Option<Vec<f64>>, z: Option<Vec<f64>>) -> Result<Population> {
        if ids.is_empty() {
            return Err(Error::InvalidParameter("empty population".into()));
        }
        for col in [&y, &x, &z].into_iter().flatten() {
            if col.len() != ids.len() {
                return Err(Error::LengthMismatch {
                    expected: ids.len(),
                    actual: col.len(),
                });
            }
        }
        Ok(Population { ids, y, x, z })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Evaluation variable `z`, falling back to the study variable `y`.
    pub fn evaluation(&self) -> Option<&[f64]> {
        self.z.as_deref().or(self.y.as_deref())
    }

    /// Seeded synthetic population: `y` and `z` share a normal factor so that
    /// their correlation is close to `rho`; `x` is unrelated noise.
    pub fn synthetic(n: usize, rho: f64, seed: u64) -> Result<Population> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("correlation {rho} is outside [-1, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let rest = (1.0 - rho * rho).sqrt();
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let (a, b, c) = (draw(), draw(), draw());
            y.push(100.0 + 20.0 * a);
            z.push(100.0 + 20.0 * (rho * a + rest * b));
            x.push(100.0 + 20.0 * c);
        }
        let ids = (1..=n).map(|k| k.to_string()).collect();
        Population::new(ids, Some(y), Some(x), Some(z))
    }
}

/// Sample correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
