//! Brute-force reference designs used to check layouts: Poisson sampling,
//! fixed-size maximum-entropy (conditional Poisson) sampling, simple random
//! sampling without replacement, and total-variation distance.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::Serialize;

use crate::design::{entropy_of, Design, Sample, SipMatrix};
use crate::error::{Error, Result};

/// Largest population enumerated over all subsets.
pub const POISSON_LIMIT: usize = 20;
/// Largest number of fixed-size subsets enumerated by [`maxent_design`].
pub const MAXENT_SUBSET_LIMIT: u128 = 2_000_000;

const FIT_TOLERANCE: f64 = 1e-13;
const FIT_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Poisson,
    Maxent,
    Srs,
}

/// A design with real-valued sample probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDesign {
    kind: ReferenceKind,
    n_units: usize,
    probs: BTreeMap<Sample, f64>,
}

impl ReferenceDesign {
    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn probability(&self, sample: &Sample) -> f64 {
        self.probs.get(sample).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sample, f64)> {
        self.probs.iter().map(|(s, p)| (s, *p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.probs.values().copied())
    }

    pub fn first_order(&self) -> Vec<f64> {
        let mut fip = vec![0.0; self.n_units];
        for (s, p) in &self.probs {
            for &k in s.units() {
                fip[k] += p;
            }
        }
        fip
    }

    pub fn second_order(&self) -> JointProbabilities {
        let n = self.n_units;
        let mut values = vec![0.0; n * n];
        for (s, p) in &self.probs {
            for &k in s.units() {
                for &l in s.units() {
                    values[k * n + l] += p;
                }
            }
        }
        JointProbabilities { n, values }
    }
}

/// Dense real-valued matrix of joint inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbabilities {
    n: usize,
    values: Vec<f64>,
}

impl JointProbabilities {
    pub fn from_fn<F: Fn(usize, usize) -> f64>(n: usize, f: F) -> JointProbabilities {
        let values = (0..n * n).map(|i| f(i / n, i % n)).collect();
        JointProbabilities { n, values }
    }

    pub fn n_units(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.n + l]
    }

    pub fn fip(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.get(k, k)).collect()
    }
}

impl From<&SipMatrix> for JointProbabilities {
    fn from(sip: &SipMatrix) -> Self {
        JointProbabilities::from_fn(sip.n_units(), |k, l| sip.prob(k, l))
    }
}

/// Anything that assigns probabilities to samples of a population.
pub trait ProbabilityLaw {
    fn population_size(&self) -> usize;
    fn sample_probabilities(&self) -> Vec<(Sample, f64)>;
}

impl ProbabilityLaw for Design {
    fn population_size(&self) -> usize {
        self.n_units()
    }

    fn sample_probabilities(&self) -> Vec<(Sample, f64)> {
        self.probabilities().map(|(s, p)| (s.clone(), p)).collect()
    }
}

impl ProbabilityLaw for ReferenceDesign {
    fn population_size(&self) -> usize {
        self.n_units
    }

    fn sample_probabilities(&self) -> Vec<(Sample, f64)> {
        self.probs.iter().map(|(s, p)| (s.clone(), *p)).collect()
    }
}

/// `1/2 * sum_s |p_a(s) - p_b(s)|` over the union of supports.
pub fn total_variation<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: ProbabilityLaw + ?Sized,
    B: ProbabilityLaw + ?Sized,
{
    if a.population_size() != b.population_size() {
        return Err(Error::LengthMismatch {
            expected: a.population_size(),
            actual: b.population_size(),
        });
    }
    let mut diff: BTreeMap<Sample, f64> = a.sample_probabilities().into_iter().collect();
    for (s, p) in b.sample_probabilities() {
        *diff.entry(s).or_default() -= p;
    }
    Ok((0.5 * diff.values().map(|d| d.abs()).sum::<f64>()).min(1.0))
}

fn check_probabilities(fip: &[f64]) -> Result<()> {
    match fip.iter().find(|p| !p.is_finite() || !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::Infeasible(format!("probability {p} is outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Independent inclusion of every unit with probability `pi_k`.
pub fn poisson_design(fip: &[f64]) -> Result<ReferenceDesign> {
    check_probabilities(fip)?;
    let n = fip.len();
    if n > POISSON_LIMIT {
        return Err(Error::TooLarge { n, limit: POISSON_LIMIT });
    }
    let mut probs = BTreeMap::new();
    for mask in 0u32..(1u32 << n) {
        let p: f64 = fip
            .iter()
            .enumerate()
            .map(|(k, &pk)| if mask >> k & 1 == 1 { pk } else { 1.0 - pk })
            .product();
        if p > 0.0 {
            probs.insert(Sample::new((0..n).filter(|k| mask >> k & 1 == 1)), p);
        }
    }
    Ok(ReferenceDesign {
        kind: ReferenceKind::Poisson,
        n_units: n,
        probs,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// The fixed-size design of maximum entropy with the given inclusion
/// probabilities: `p(s)` proportional to `prod_{k in s} w_k` over samples of
/// size `n`, with the weights fitted by Newton's method on the dual problem.
///
/// Units with probability 0 or 1 are excluded or forced before fitting.
pub fn maxent_design(fip: &[f64], n: usize) -> Result<ReferenceDesign> {
    check_probabilities(fip)?;
    let total: f64 = fip.iter().sum();
    if (total - n as f64).abs() > 1e-9 {
        return Err(Error::Infeasible(format!(
            "inclusion probabilities sum to {total}, not {n}"
        )));
    }
    let edge = 1e-12;
    let forced: Vec<usize> = (0..fip.len()).filter(|&k| fip[k] >= 1.0 - edge).collect();
    let free: Vec<usize> = (0..fip.len()).filter(|&k| fip[k] > edge && fip[k] < 1.0 - edge).collect();
    let size = n.checked_sub(forced.len()).ok_or_else(|| {
        Error::Infeasible(format!("{} certainty units exceed sample size {n}", forced.len()))
    })?;
    if size > free.len() {
        return Err(Error::Infeasible(format!(
            "sample size {n} needs more units than have positive probability"
        )));
    }
    if binomial(free.len(), size) > MAXENT_SUBSET_LIMIT {
        return Err(Error::TooLarge {
            n: fip.len(),
            limit: free.len(),
        });
    }

    let subsets: Vec<Vec<usize>> = (0..free.len()).combinations(size).collect();
    let target: Vec<f64> = free.iter().map(|&k| fip[k]).collect();
    let mut log_w: Vec<f64> = target.iter().map(|p| (p / (1.0 - p)).ln()).collect();
    // The last weight is pinned: scaling every weight by the same factor
    // leaves a fixed-size design unchanged.
    let m = free.len().saturating_sub(1);
    if let Some(&last) = log_w.last() {
        log_w.iter_mut().for_each(|lw| *lw -= last);
    }

    let mut iterations = 0;
    let probs = loop {
        let f = fit_weights(&subsets, &log_w);
        let grad: Vec<f64> = f.incl.iter().zip(&target).map(|(a, b)| a - b).collect();
        let residual = grad.iter().fold(0.0f64, |r, g| r.max(g.abs()));
        if residual <= FIT_TOLERANCE || m == 0 {
            break f.probs;
        }
        iterations += 1;
        if iterations > FIT_MAX_ITERATIONS {
            if residual <= 1e-10 {
                break f.probs;
            }
            return Err(Error::NoConvergence { iterations, residual });
        }
        // Newton step on the convex dual log Z(w) - <w, pi>, whose Hessian is
        // the covariance of the inclusion indicators.
        let hessian: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| f.joint[i][j] - f.incl[i] * f.incl[j]).collect())
            .collect();
        let Some(step) = solve_spd(hessian, &grad[..m]) else {
            return Err(Error::NoConvergence { iterations, residual });
        };
        let slope: f64 = step.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let dual = |lw: &[f64], z: f64| z - lw.iter().zip(&target).map(|(w, t)| w * t).sum::<f64>();
        let current = dual(&log_w, f.log_z);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = log_w
                .iter()
                .enumerate()
                .map(|(i, w)| if i < m { w - t * step[i] } else { *w })
                .collect();
            if dual(&trial, fit_weights(&subsets, &trial).log_z) <= current - 1e-4 * t * slope {
                log_w = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if residual <= 1e-10 {
                break f.probs;
            }
            return Err(Error::NoConvergence { iterations, residual });
        }
    };

    let probs = subsets
        .iter()
        .zip(probs)
        .filter(|(_, p)| *p > 0.0)
        .map(|(s, p)| {
            let units = s.iter().map(|&i| free[i]).chain(forced.iter().copied());
            (Sample::new(units), p)
        })
        .collect();
    Ok(ReferenceDesign {
        kind: ReferenceKind::Maxent,
        n_units: fip.len(),
        probs,
    })
}

/// Joint inclusion probabilities of simple random sampling without
/// replacement of `n` out of `n_units`.
pub fn srs_sip(n_units: usize, n: usize) -> Result<JointProbabilities> {
    if n > n_units || n_units == 0 {
        return Err(Error::Infeasible(format!("cannot draw {n} of {n_units} units")));
    }
    let (big, small) = (n_units as f64, n as f64);
    let first = small / big;
    let joint = if n_units > 1 {
        small * (small - 1.0) / (big * (big - 1.0))
    } else {
        first
    };
    Ok(JointProbabilities::from_fn(n_units, |k, l| if k == l { first } else { joint }))
}

struct WeightFit {
    probs: Vec<f64>,
    incl: Vec<f64>,
    joint: Vec<Vec<f64>>,
    log_z: f64,
}

fn fit_weights(subsets: &[Vec<usize>], log_w: &[f64]) -> WeightFit {
    let scores: Vec<f64> = subsets
        .iter()
        .map(|s| s.iter().map(|&i| log_w[i]).sum::<f64>())
        .collect();
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = scores.iter().map(|&x| (x - top).exp()).collect();
    let norm: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= norm);
    let n = log_w.len();
    let mut incl = vec![0.0; n];
    let mut joint = vec![vec![0.0; n]; n];
    for (s, &p) in subsets.iter().zip(&probs) {
        for &i in s {
            incl[i] += p;
            for &j in s {
                joint[i][j] += p;
            }
        }
    }
    WeightFit {
        probs,
        incl,
        joint,
        log_z: top + norm.ln(),
    }
}

/// Cholesky solve of `a x = b` for symmetric positive definite `a`.
fn solve_spd(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        a[j][j] = d.sqrt();
        for i in j + 1..n {
            a[i][j] = (a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>()) / a[j][j];
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        x[i] = (x[i] - (0..i).map(|k| a[i][k] * x[k]).sum::<f64>()) / a[i][i];
    }
    for i in (0..n).rev() {
        x[i] = (x[i] - (i + 1..n).map(|k| a[k][i] * x[k]).sum::<f64>()) / a[i][i];
    }
    Some(x)
}
