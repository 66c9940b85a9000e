//! Bar layouts: one interval set per unit, each of measure equal to the
//! unit's inclusion probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridMass, Interval, IntervalSet};

/// Per-unit bars over `[0, grid)` together with their target inclusion
/// probabilities. Every bar has measure exactly equal to its target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarLayout {
    grid: u64,
    bars: Vec<IntervalSet>,
    fip: Vec<GridMass>,
}

impl BarLayout {
    pub fn new(grid: u64, fip: Vec<GridMass>, bars: Vec<IntervalSet>) -> Result<BarLayout> {
        let layout = BarLayout { grid, bars, fip };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 {
            return Err(Error::InvalidLayout("grid resolution must be positive".into()));
        }
        if self.bars.len() != self.fip.len() {
            return Err(Error::LengthMismatch {
                expected: self.fip.len(),
                actual: self.bars.len(),
            });
        }
        for (k, (bar, target)) in self.bars.iter().zip(&self.fip).enumerate() {
            if bar.grid() != self.grid {
                return Err(Error::GridMismatch { left: self.grid, right: bar.grid() });
            }
            if !bar.is_canonical() {
                return Err(Error::InvalidLayout(format!("bar of unit {} is not canonical", k + 1)));
            }
            if bar.measure() != *target {
                return Err(Error::InvalidLayout(format!(
                    "bar of unit {} has measure {} but its inclusion probability is {}",
                    k + 1,
                    bar.measure(),
                    target
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn n_units(&self) -> usize {
        self.bars.len()
    }

    pub fn bars(&self) -> &[IntervalSet] {
        &self.bars
    }

    pub fn bar(&self, unit: usize) -> &IntervalSet {
        &self.bars[unit]
    }

    pub(crate) fn bar_mut(&mut self, unit: usize) -> &mut IntervalSet {
        &mut self.bars[unit]
    }

    pub fn fip(&self) -> &[GridMass] {
        &self.fip
    }

    pub fn fip_f64(&self) -> Vec<f64> {
        self.fip.iter().map(|m| m.to_f64(self.grid)).collect()
    }

    /// Total cell mass of all targets.
    pub fn total_mass(&self) -> u64 {
        self.fip.iter().map(|m| m.0).sum()
    }

    /// `Some(n)` when the targets sum to exactly `n` whole units.
    pub fn integer_size(&self) -> Option<u64> {
        let total = self.total_mass();
        total.is_multiple_of(self.grid).then_some(total / self.grid)
    }

    pub fn interval_count(&self) -> usize {
        self.bars.iter().map(IntervalSet::len).sum()
    }

    /// Number of distinct interior interval endpoints (cells in `(0, grid)`).
    pub fn breakpoint_count(&self) -> usize {
        let mut points: Vec<u64> = self
            .bars
            .iter()
            .flat_map(|b| b.intervals().iter().flat_map(|iv| [iv.lo, iv.hi]))
            .filter(|&p| p > 0 && p < self.grid)
            .collect();
        points.sort_unstable();
        points.dedup();
        points.len()
    }

    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            grid_resolution: self.grid,
            fip: self.fip.iter().map(|m| m.0).collect(),
            intervals: self.bars.iter().map(|b| b.intervals().to_vec()).collect(),
        }
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<BarLayout> {
        if doc.intervals.len() != doc.fip.len() {
            return Err(Error::LengthMismatch {
                expected: doc.fip.len(),
                actual: doc.intervals.len(),
            });
        }
        let bars = doc
            .intervals
            .iter()
            .map(|ivs| IntervalSet::from_intervals(doc.grid_resolution, ivs.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        BarLayout::new(
            doc.grid_resolution,
            doc.fip.iter().map(|&c| GridMass(c)).collect(),
            bars,
        )
    }
}

/// Persistence form of a [`BarLayout`]: exact integers only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub grid_resolution: u64,
    pub fip: Vec<u64>,
    pub intervals: Vec<Vec<Interval>>,
}

/// Inclusion probabilities placed on the grid, with the rounding error.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFip {
    pub grid: u64,
    pub fip: Vec<GridMass>,
    /// Largest per-unit `|cells / grid - p|`.
    pub max_residual: f64,
    /// `sum(cells) / grid - sum(p)`.
    pub total_residual: f64,
}

/// Rounds probabilities onto the grid with the largest-remainder rule so the
/// total equals the nearest whole number of cells to `grid * sum(p)`.
pub fn round_to_grid(probs: &[f64], grid: u64) -> Result<GridFip> {
    round_with_total(probs, grid, None)
}

fn round_with_total(probs: &[f64], grid: u64, total: Option<u64>) -> Result<GridFip> {
    if grid == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let mut floors = Vec::with_capacity(probs.len());
    let mut fractions = Vec::with_capacity(probs.len());
    let mut scaled_total = 0.0;
    for &p in probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Infeasible(format!("probability {p} is outside [0, 1]")));
        }
        let scaled = p * grid as f64;
        scaled_total += scaled;
        let floor = (scaled.floor() as u64).min(grid);
        floors.push(floor);
        fractions.push(scaled - floor as f64);
    }
    let target = total.unwrap_or(scaled_total.round() as u64);
    let floor_total: u64 = floors.iter().sum();
    if floor_total > target {
        return Err(Error::Infeasible("could not place probabilities on the grid".into()));
    }
    let mut deficit = target - floor_total;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| fractions[b].total_cmp(&fractions[a]).then(a.cmp(&b)));
    for &k in &order {
        if deficit == 0 {
            break;
        }
        if floors[k] < grid {
            floors[k] += 1;
            deficit -= 1;
        }
    }
    if deficit > 0 {
        return Err(Error::Infeasible("could not place probabilities on the grid".into()));
    }
    let fip: Vec<GridMass> = floors.into_iter().map(GridMass).collect();
    let max_residual = fip
        .iter()
        .zip(probs)
        .map(|(m, &p)| (m.to_f64(grid) - p).abs())
        .fold(0.0, f64::max);
    let total_residual = fip.iter().map(|m| m.0).sum::<u64>() as f64 / grid as f64
        - probs.iter().sum::<f64>();
    Ok(GridFip {
        grid,
        fip,
        max_residual,
        total_residual,
    })
}

/// Probability-proportional-to-size inclusion probabilities
/// `pi_k = min(c * x_k, 1)` with `sum(pi) = n`, placed on the grid so the
/// total is exactly `n * grid` cells.
///
/// Units whose scaled size reaches 1 are fixed at 1 and `c` is recomputed
/// over the rest until no new unit saturates.
pub fn fip_from_aux(x: &[f64], n: usize, grid: u64) -> Result<GridFip> {
    if n == 0 {
        return Err(Error::Infeasible("expected sample size must be at least 1".into()));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Infeasible(format!(
            "size variable must be finite and non-negative, found {bad}"
        )));
    }
    let positive = x.iter().filter(|&&v| v > 0.0).count();
    if n > x.len() || positive < n {
        return Err(Error::Infeasible(format!(
            "cannot reach sample size {n} with {} units of which {positive} have positive size",
            x.len()
        )));
    }
    let mut saturated = vec![false; x.len()];
    let mut n_saturated = 0usize;
    let scale = loop {
        let rest: f64 = x
            .iter()
            .zip(&saturated)
            .filter(|(_, &s)| !s)
            .map(|(v, _)| v)
            .sum();
        let c = (n - n_saturated) as f64 / rest;
        let mut grew = false;
        for (k, &v) in x.iter().enumerate() {
            if !saturated[k] && c * v >= 1.0 {
                saturated[k] = true;
                n_saturated += 1;
                grew = true;
            }
        }
        if !grew || n_saturated == n {
            break c;
        }
    };
    let probs: Vec<f64> = x
        .iter()
        .zip(&saturated)
        .map(|(&v, &s)| if s { 1.0 } else { (scale * v).min(1.0) })
        .collect();
    round_with_total(&probs, grid, Some(n as u64 * grid))
}

/// Equal inclusion probabilities `n / N` on the grid, summing to exactly `n`.
pub fn equal_fip(n_units: usize, n: usize, grid: u64) -> Result<GridFip> {
    fip_from_aux(&vec![1.0; n_units], n, grid)
}

/// One contiguous bar per unit at an offset drawn uniformly from the
/// admissible positions `[0, grid - pi_k]`.
pub fn random_layout<R: Rng + ?Sized>(fip: &[GridMass], grid: u64, rng: &mut R) -> Result<BarLayout> {
    let mut offsets = Vec::with_capacity(fip.len());
    for m in fip {
        if m.0 > grid {
            return Err(Error::Infeasible(format!("probability of {} cells exceeds the grid", m.0)));
        }
        offsets.push(rng.random_range(0..=grid - m.0));
    }
    layout_from_offsets(fip, &offsets, grid)
}

/// Contiguous bars `[offset_k, offset_k + pi_k)` at explicit offsets.
pub fn layout_from_offsets(fip: &[GridMass], offsets: &[u64], grid: u64) -> Result<BarLayout> {
    if offsets.len() != fip.len() {
        return Err(Error::LengthMismatch {
            expected: fip.len(),
            actual: offsets.len(),
        });
    }
    let bars = fip
        .iter()
        .zip(offsets)
        .map(|(m, &o)| {
            let hi = o.checked_add(m.0).filter(|&hi| hi <= grid).ok_or(Error::BadRange {
                lo: o,
                hi: o.saturating_add(m.0),
                grid,
            })?;
            IntervalSet::from_intervals(grid, [Interval::new(o, hi)])
        })
        .collect::<Result<Vec<_>>>()?;
    BarLayout::new(grid, fip.to_vec(), bars)
}

/// Cumulative placement with wrap-around at 1 (systematic sampling). When
/// the probabilities sum to a whole number `n`, every cell is covered by
/// exactly `n` bars.
pub fn madow_layout(fip: &[GridMass], grid: u64) -> Result<BarLayout> {
    let mut bars = Vec::with_capacity(fip.len());
    let mut end = 0u64;
    for m in fip {
        if m.0 > grid {
            return Err(Error::Infeasible(format!("probability of {} cells exceeds the grid", m.0)));
        }
        let start = if end == grid { 0 } else { end };
        let ranges = if start + m.0 <= grid {
            end = start + m.0;
            vec![Interval::new(start, end)]
        } else {
            end = start + m.0 - grid;
            vec![Interval::new(start, grid), Interval::new(0, end)]
        };
        bars.push(IntervalSet::from_intervals(grid, ranges)?);
    }
    BarLayout::new(grid, fip.to_vec(), bars)
}
