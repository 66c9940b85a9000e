//! The probability law induced by a bar layout.
//!
//! A horizontal line at a uniformly drawn cell selects every unit whose bar
//! contains the cell. Sweeping the bar endpoints partitions `[0, grid)` into
//! elementary strips over which the selected sample is constant; summing
//! strip heights per sample gives the design.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::GridMass;
use crate::layout::BarLayout;
use crate::par::{stream_rng, Execution};

/// A sample as a sorted set of zero-based unit indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sample(Vec<usize>);

impl Sample {
    pub fn new<I: IntoIterator<Item = usize>>(units: I) -> Sample {
        let mut v: Vec<usize> = units.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Sample(v)
    }

    /// Builds a sample from one-based unit labels.
    pub fn from_labels<I: IntoIterator<Item = usize>>(labels: I) -> Sample {
        Sample::new(labels.into_iter().map(|l| l - 1))
    }

    pub fn units(&self) -> &[usize] {
        &self.0
    }

    /// One-based unit labels.
    pub fn labels(&self) -> Vec<usize> {
        self.0.iter().map(|k| k + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, unit: usize) -> bool {
        self.0.binary_search(&unit).is_ok()
    }

    /// Units in `self` but not in `other`.
    pub fn difference(&self, other: &Sample) -> Vec<usize> {
        self.0.iter().copied().filter(|k| !other.contains(*k)).collect()
    }

    pub fn with(&self, unit: usize) -> Sample {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&unit) {
            v.insert(pos, unit);
        }
        Sample(v)
    }

    pub fn without(&self, unit: usize) -> Sample {
        let mut v = self.0.clone();
        if let Ok(pos) = v.binary_search(&unit) {
            v.remove(pos);
        }
        Sample(v)
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", k + 1)?;
        }
        write!(f, "}}")
    }
}

/// Elementary strip `[lo, hi)` and the units whose bars cover it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strip {
    pub lo: u64,
    pub hi: u64,
    pub sample: Sample,
}

impl Strip {
    pub fn height(&self) -> u64 {
        self.hi - self.lo
    }
}

/// Partition of `[0, grid)` into elementary strips, in increasing order.
///
/// Breakpoints are the interval endpoints of all bars, so every bar either
/// covers a strip completely or misses it.
pub fn strips(layout: &BarLayout) -> Vec<Strip> {
    let mut events: Vec<(u64, bool, usize)> = layout
        .bars()
        .iter()
        .enumerate()
        .flat_map(|(k, bar)| {
            bar.intervals()
                .iter()
                .flat_map(move |iv| [(iv.lo, true, k), (iv.hi, false, k)])
        })
        .collect();
    events.sort_unstable();

    let grid = layout.grid();
    let mut active: BTreeSet<usize> = BTreeSet::new();
    let mut out = Vec::with_capacity(events.len() + 1);
    let mut cursor = 0u64;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        if pos > cursor {
            out.push(Strip {
                lo: cursor,
                hi: pos,
                sample: Sample(active.iter().copied().collect()),
            });
            cursor = pos;
        }
        while i < events.len() && events[i].0 == pos {
            let (_, start, k) = events[i];
            if start {
                active.insert(k);
            } else {
                active.remove(&k);
            }
            i += 1;
        }
    }
    if cursor < grid {
        out.push(Strip {
            lo: cursor,
            hi: grid,
            sample: Sample(active.into_iter().collect()),
        });
    }
    out
}

/// A sampling design with exact grid masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    grid: u64,
    n_units: usize,
    masses: BTreeMap<Sample, GridMass>,
}

impl Design {
    /// Sums strip heights per sample.
    pub fn aggregate(strips: &[Strip], n_units: usize, grid: u64) -> Design {
        let mut masses: BTreeMap<Sample, GridMass> = BTreeMap::new();
        for s in strips {
            *masses.entry(s.sample.clone()).or_default() += GridMass(s.height());
        }
        Design {
            grid,
            n_units,
            masses,
        }
    }

    pub fn from_layout(layout: &BarLayout) -> Design {
        Design::aggregate(&strips(layout), layout.n_units(), layout.grid())
    }

    /// Design from explicit masses, which must be positive and sum to `grid`.
    pub fn from_masses<I>(n_units: usize, grid: u64, entries: I) -> Result<Design>
    where
        I: IntoIterator<Item = (Sample, GridMass)>,
    {
        let mut masses: BTreeMap<Sample, GridMass> = BTreeMap::new();
        for (s, m) in entries {
            if let Some(&bad) = s.units().iter().find(|&&k| k >= n_units) {
                return Err(Error::InvalidParameter(format!(
                    "unit {} is outside a population of {n_units}",
                    bad + 1
                )));
            }
            if m.0 > 0 {
                *masses.entry(s).or_default() += m;
            }
        }
        if masses.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let total: u64 = masses.values().map(|m| m.0).sum();
        if total != grid {
            return Err(Error::InvalidParameter(format!(
                "design masses sum to {total} cells instead of {grid}"
            )));
        }
        Ok(Design {
            grid,
            n_units,
            masses,
        })
    }

    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// Number of distinct samples with positive mass.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, sample: &Sample) -> GridMass {
        self.masses.get(sample).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sample, GridMass)> {
        self.masses.iter().map(|(s, m)| (s, *m))
    }

    /// `(sample, probability)` pairs in canonical order.
    pub fn probabilities(&self) -> impl Iterator<Item = (&Sample, f64)> {
        let g = self.grid as f64;
        self.masses.iter().map(move |(s, m)| (s, m.0 as f64 / g))
    }

    pub fn total_mass(&self) -> u64 {
        self.masses.values().map(|m| m.0).sum()
    }

    pub fn first_order(&self) -> Result<Vec<GridMass>> {
        if self.masses.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let mut fip = vec![GridMass::ZERO; self.n_units];
        for (s, m) in &self.masses {
            for &k in s.units() {
                fip[k] += *m;
            }
        }
        Ok(fip)
    }

    /// Joint inclusion masses summed over samples.
    pub fn second_order(&self) -> SipMatrix {
        let n = self.n_units;
        let mut cells = vec![0u64; n * n];
        for (s, m) in &self.masses {
            let u = s.units();
            for (a, &k) in u.iter().enumerate() {
                cells[k * n + k] += m.0;
                for &l in &u[a + 1..] {
                    cells[k * n + l] += m.0;
                    cells[l * n + k] += m.0;
                }
            }
        }
        SipMatrix {
            grid: self.grid,
            n,
            cells,
        }
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of(self.probabilities().map(|(_, p)| p))
    }

    /// Exact expected sample size as a grid mass (cells times units).
    pub fn expected_size_cells(&self) -> u64 {
        self.masses.iter().map(|(s, m)| s.len() as u64 * m.0).sum()
    }

    pub fn expected_size(&self) -> f64 {
        self.expected_size_cells() as f64 / self.grid as f64
    }

    pub fn size_variance(&self) -> f64 {
        let mean = self.expected_size();
        self.probabilities()
            .map(|(s, p)| (s.len() as f64 - mean).powi(2) * p)
            .sum()
    }

    /// `Some(n)` when every sample has size `n`.
    pub fn fixed_size(&self) -> Option<usize> {
        let mut sizes = self.masses.keys().map(Sample::len);
        let first = sizes.next()?;
        sizes.all(|l| l == first).then_some(first)
    }
}

pub(crate) fn entropy_of<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    -probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Symmetric matrix of joint inclusion masses; the diagonal holds the
/// first-order masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SipMatrix {
    grid: u64,
    n: usize,
    cells: Vec<u64>,
}

impl SipMatrix {
    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn n_units(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> GridMass {
        GridMass(self.cells[k * self.n + l])
    }

    pub fn prob(&self, k: usize, l: usize) -> f64 {
        self.cells[k * self.n + l] as f64 / self.grid as f64
    }

    pub fn fip(&self) -> Vec<GridMass> {
        (0..self.n).map(|k| self.get(k, k)).collect()
    }

    pub fn fip_f64(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.prob(k, k)).collect()
    }

    /// `Some(n)` when the matrix belongs to a fixed-size design of size `n`,
    /// checked exactly through `sum_l pi_kl = n pi_k` for every row.
    pub fn fixed_size(&self) -> Option<u64> {
        let total: u64 = (0..self.n).map(|k| self.cells[k * self.n + k]).sum();
        if !total.is_multiple_of(self.grid) {
            return None;
        }
        let size = total / self.grid;
        (0..self.n)
            .all(|k| {
                let row: u128 = self.cells[k * self.n..(k + 1) * self.n]
                    .iter()
                    .map(|&c| c as u128)
                    .sum();
                row == size as u128 * self.cells[k * self.n + k] as u128
            })
            .then_some(size)
    }

    /// Largest `|pi_kl - pi_k pi_l|` over pairs `k < l`.
    pub fn max_independence_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n {
            for l in k + 1..self.n {
                let gap = self.prob(k, l) - self.prob(k, k) * self.prob(l, l);
                worst = worst.max(gap.abs());
            }
        }
        worst
    }

    /// Pairs `k < l` with zero joint inclusion.
    pub fn zero_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.n {
            for l in k + 1..self.n {
                if self.cells[k * self.n + l] == 0 {
                    out.push((k, l));
                }
            }
        }
        out
    }
}

/// Joint inclusion masses from pairwise bar intersections.
pub fn second_order(layout: &BarLayout) -> SipMatrix {
    second_order_with(layout, Execution::default())
}

pub fn second_order_with(layout: &BarLayout, exec: Execution) -> SipMatrix {
    let n = layout.n_units();
    let bars = layout.bars();
    let rows = exec.map(n, |k| {
        (0..n)
            .map(|l| {
                bars[k]
                    .intersection_measure(&bars[l])
                    .expect("bars of one layout share a grid")
                    .0
            })
            .collect::<Vec<u64>>()
    });
    SipMatrix {
        grid: layout.grid(),
        n,
        cells: rows.into_iter().flatten().collect(),
    }
}

/// Sample selected by the line at `cell`.
pub fn draw_at(layout: &BarLayout, cell: u64) -> Result<Sample> {
    if cell >= layout.grid() {
        return Err(Error::PointOutOfRange {
            point: cell,
            grid: layout.grid(),
        });
    }
    Ok(Sample(
        layout
            .bars()
            .iter()
            .enumerate()
            .filter(|(_, bar)| bar.contains_unchecked(cell))
            .map(|(k, _)| k)
            .collect(),
    ))
}

/// Draws a uniform cell and returns the units whose bars contain it.
pub fn draw_sample<R: Rng + ?Sized>(layout: &BarLayout, rng: &mut R) -> Sample {
    let cell = rng.random_range(0..layout.grid());
    draw_at(layout, cell).expect("cell drawn inside the grid")
}

const DRAWS_PER_CHUNK: usize = 8192;

/// Empirical inclusion frequencies over `draws` independent draws. Chunks use
/// separate random streams so the result does not depend on `exec`.
pub fn inclusion_frequencies(layout: &BarLayout, draws: usize, seed: u64, exec: Execution) -> Vec<f64> {
    let n = layout.n_units();
    let chunks = draws.div_ceil(DRAWS_PER_CHUNK);
    let counts = exec.map(chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let todo = DRAWS_PER_CHUNK.min(draws - c * DRAWS_PER_CHUNK);
        let mut counts = vec![0u64; n];
        for _ in 0..todo {
            for k in draw_sample(layout, &mut rng).units() {
                counts[*k] += 1;
            }
        }
        counts
    });
    let mut total = vec![0u64; n];
    for chunk in counts {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t += c;
        }
    }
    total.into_iter().map(|c| c as f64 / draws.max(1) as f64).collect()
}
