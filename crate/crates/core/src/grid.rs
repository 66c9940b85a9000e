//! Exact integer-grid probabilities and interval-set algebra.
//!
//! The unit interval is discretized into `G` cells. A probability is a count
//! of cells, and the bar of a unit is a canonical set of half-open cell
//! ranges `[lo, hi)`. Every operation keeps the set sorted, disjoint and
//! non-adjacent, so structural equality is the same as equality of the
//! covered cells.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of cells per unit probability.
pub const DEFAULT_GRID: u64 = 1_000_000_000;

/// A probability stored as a count of grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridMass(pub u64);

impl GridMass {
    pub const ZERO: GridMass = GridMass(0);

    pub fn cells(self) -> u64 {
        self.0
    }

    /// Probability value `cells / grid` in floating point.
    pub fn to_f64(self, grid: u64) -> f64 {
        self.0 as f64 / grid as f64
    }

    /// Nearest grid cell count for a probability.
    pub fn from_probability(p: f64, grid: u64) -> Result<GridMass> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
        Ok(GridMass(((p * grid as f64).round() as u64).min(grid)))
    }
}

impl std::ops::Add for GridMass {
    type Output = GridMass;
    fn add(self, rhs: GridMass) -> GridMass {
        GridMass(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for GridMass {
    fn add_assign(&mut self, rhs: GridMass) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for GridMass {
    fn sum<I: Iterator<Item = GridMass>>(iter: I) -> GridMass {
        GridMass(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for GridMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Half-open range of cells `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u64, u64)", into = "(u64, u64)")]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Interval {
        Interval { lo, hi }
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

impl From<(u64, u64)> for Interval {
    fn from((lo, hi): (u64, u64)) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for (u64, u64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

/// Canonical union of half-open cell ranges inside `[0, grid)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    grid: u64,
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty(grid: u64) -> IntervalSet {
        IntervalSet {
            grid,
            intervals: Vec::new(),
        }
    }

    pub fn single(grid: u64, lo: u64, hi: u64) -> Result<IntervalSet> {
        let mut set = IntervalSet::empty(grid);
        if lo < hi {
            set.insert_range(lo, hi)?;
        } else if lo > hi || hi > grid {
            return Err(Error::BadRange { lo, hi, grid });
        }
        Ok(set)
    }

    /// Builds a canonical set from arbitrary ranges. Overlapping input is
    /// rejected; adjacent ranges are merged and empty ranges dropped.
    pub fn from_intervals<I>(grid: u64, ranges: I) -> Result<IntervalSet>
    where
        I: IntoIterator<Item = Interval>,
    {
        let mut ranges: Vec<Interval> = ranges.into_iter().filter(|iv| !iv.is_empty()).collect();
        ranges.sort_unstable();
        let mut intervals: Vec<Interval> = Vec::with_capacity(ranges.len());
        for iv in ranges {
            if iv.hi > grid {
                return Err(Error::BadRange { lo: iv.lo, hi: iv.hi, grid });
            }
            match intervals.last_mut() {
                Some(last) if iv.lo < last.hi => {
                    return Err(Error::RangeOverlaps { lo: iv.lo, hi: iv.hi })
                }
                Some(last) if iv.lo == last.hi => last.hi = iv.hi,
                _ => intervals.push(iv),
            }
        }
        Ok(IntervalSet { grid, intervals })
    }

    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> GridMass {
        GridMass(self.intervals.iter().map(Interval::len).sum())
    }

    fn check_range(&self, lo: u64, hi: u64) -> Result<()> {
        if lo >= hi || hi > self.grid {
            return Err(Error::BadRange { lo, hi, grid: self.grid });
        }
        Ok(())
    }

    /// Index of the last interval starting at or before `point`.
    fn floor_index(&self, point: u64) -> Option<usize> {
        self.intervals
            .partition_point(|iv| iv.lo <= point)
            .checked_sub(1)
    }

    pub fn contains(&self, point: u64) -> Result<bool> {
        if point >= self.grid {
            return Err(Error::PointOutOfRange { point, grid: self.grid });
        }
        Ok(self.contains_unchecked(point))
    }

    pub(crate) fn contains_unchecked(&self, point: u64) -> bool {
        self.floor_index(point)
            .is_some_and(|i| point < self.intervals[i].hi)
    }

    /// The `rank`-th covered cell in increasing order.
    pub fn nth_cell(&self, mut rank: u64) -> Option<u64> {
        for iv in &self.intervals {
            if rank < iv.len() {
                return Some(iv.lo + rank);
            }
            rank -= iv.len();
        }
        None
    }

    /// The `rank`-th cell of the grid not covered by the set.
    pub fn nth_uncovered_cell(&self, mut rank: u64) -> Option<u64> {
        let mut start = 0;
        for iv in &self.intervals {
            let gap = iv.lo - start;
            if rank < gap {
                return Some(start + rank);
            }
            rank -= gap;
            start = iv.hi;
        }
        (rank < self.grid - start).then(|| start + rank)
    }

    /// True iff `[lo, hi)` lies inside the set.
    pub fn covers_range(&self, lo: u64, hi: u64) -> Result<bool> {
        self.check_range(lo, hi)?;
        Ok(self
            .floor_index(lo)
            .is_some_and(|i| hi <= self.intervals[i].hi))
    }

    /// True iff `[lo, hi)` shares no cell with the set.
    pub fn is_disjoint_from_range(&self, lo: u64, hi: u64) -> Result<bool> {
        self.check_range(lo, hi)?;
        let idx = self.intervals.partition_point(|iv| iv.lo < hi);
        Ok(idx == 0 || self.intervals[idx - 1].hi <= lo)
    }

    /// Removes `[lo, hi)`, which must be fully covered.
    pub fn remove_range(&mut self, lo: u64, hi: u64) -> Result<()> {
        self.check_range(lo, hi)?;
        let i = match self.floor_index(lo) {
            Some(i) if hi <= self.intervals[i].hi => i,
            _ => return Err(Error::RangeNotCovered { lo, hi }),
        };
        let Interval { lo: a, hi: b } = self.intervals[i];
        match (a < lo, hi < b) {
            (false, false) => {
                self.intervals.remove(i);
            }
            (true, false) => self.intervals[i].hi = lo,
            (false, true) => self.intervals[i].lo = hi,
            (true, true) => {
                self.intervals[i].hi = lo;
                self.intervals.insert(i + 1, Interval::new(hi, b));
            }
        }
        Ok(())
    }

    /// Adds `[lo, hi)`, which must not overlap the set.
    pub fn insert_range(&mut self, lo: u64, hi: u64) -> Result<()> {
        self.check_range(lo, hi)?;
        let idx = self.intervals.partition_point(|iv| iv.lo < lo);
        let joins_prev = match idx.checked_sub(1).map(|p| self.intervals[p]) {
            Some(prev) if prev.hi > lo => return Err(Error::RangeOverlaps { lo, hi }),
            Some(prev) => prev.hi == lo,
            None => false,
        };
        let joins_next = match self.intervals.get(idx) {
            Some(next) if next.lo < hi => return Err(Error::RangeOverlaps { lo, hi }),
            Some(next) => next.lo == hi,
            None => false,
        };
        match (joins_prev, joins_next) {
            (true, true) => {
                self.intervals[idx - 1].hi = self.intervals[idx].hi;
                self.intervals.remove(idx);
            }
            (true, false) => self.intervals[idx - 1].hi = hi,
            (false, true) => self.intervals[idx].lo = lo,
            (false, false) => self.intervals.insert(idx, Interval::new(lo, hi)),
        }
        Ok(())
    }

    /// Value-returning form of [`IntervalSet::remove_range`].
    pub fn without_range(&self, lo: u64, hi: u64) -> Result<IntervalSet> {
        let mut out = self.clone();
        out.remove_range(lo, hi)?;
        Ok(out)
    }

    /// Value-returning form of [`IntervalSet::insert_range`].
    pub fn with_range(&self, lo: u64, hi: u64) -> Result<IntervalSet> {
        let mut out = self.clone();
        out.insert_range(lo, hi)?;
        Ok(out)
    }

    pub fn intersection_measure(&self, other: &IntervalSet) -> Result<GridMass> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid,
                right: other.grid,
            });
        }
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j, mut total) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if lo < hi {
                total += hi - lo;
            }
            if a[i].hi <= b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(GridMass(total))
    }

    /// Checks the canonical-form invariants.
    pub fn is_canonical(&self) -> bool {
        self.intervals.iter().all(|iv| iv.lo < iv.hi && iv.hi <= self.grid)
            && self.intervals.windows(2).all(|w| w[0].hi < w[1].lo)
    }
}
