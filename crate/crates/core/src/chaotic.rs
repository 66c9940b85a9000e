//! Entropy-increasing rearrangements of bar layouts.
//!
//! A move picks two elementary strips, carves an equal-height substrip out
//! of each and relocates bar segments between them. A free move moves one
//! unit's segment into a strip where that unit is absent, so the sample size
//! may change; repeated free moves drive the design toward Poisson sampling.
//! A fixed move swaps the segments of two units that are each absent from
//! the other's strip, preserving every strip's sample size; repeated fixed
//! moves drive a fixed-size design toward maximum entropy. Neither kind of
//! move changes any first-order inclusion probability.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::design::{strips, Design, Sample, Strip};
use crate::error::{Error, Result};
use crate::layout::BarLayout;
use crate::oracle::{total_variation, ReferenceDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Free,
    Fixed,
}

/// Where the substrip sits inside each chosen strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    #[default]
    Bottom,
    Random,
}

/// How the two strips (and the moving unit) are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StripChoice {
    /// Each elementary strip equally likely, then a unit uniformly from the
    /// difference of the two samples.
    #[default]
    Uniform,
    /// Strips chosen with probability proportional to their height, then a
    /// unit as for `Uniform`.
    MassWeighted,
    /// A unit uniformly from the population first, then the source strip
    /// through a uniform cell of its bar and the target strip through a
    /// uniform cell outside it. Every proposal is valid and a move is as
    /// likely as its reverse, which the difference-set rule of the other
    /// choices is not for free moves: the reverse of a free move draws from
    /// a difference set one unit larger.
    UnitFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveParams {
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
    pub anchor: Anchor,
    pub choice: StripChoice,
    /// Number of evenly spaced trace rows after the initial one.
    pub checkpoints: usize,
}

impl MoveParams {
    pub fn new(alpha: f64, iterations: usize, seed: u64) -> MoveParams {
        MoveParams {
            alpha,
            iterations,
            seed,
            anchor: Anchor::Bottom,
            choice: StripChoice::Uniform,
            checkpoints: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    TooFewStrips,
    /// The substrip height rounds to zero cells.
    ZeroWidth,
    /// No unit can be moved between the chosen strips.
    NoCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveOutcome {
    Applied {
        /// Unit moved out of the first strip.
        unit: usize,
        /// Unit moved out of the second strip (fixed moves only).
        partner: Option<usize>,
        width: u64,
    },
    Skipped(SkipReason),
}

impl MoveOutcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, MoveOutcome::Applied { .. })
    }
}

/// Elementary strips indexed both by slot (for uniform choice) and by lower
/// endpoint (for location). Adjacent strips never share a sample.
#[derive(Debug, Clone)]
struct StripTable {
    slots: Vec<Strip>,
    by_lo: BTreeMap<u64, usize>,
}

impl StripTable {
    fn new(strips: Vec<Strip>) -> StripTable {
        let by_lo = strips.iter().enumerate().map(|(i, s)| (s.lo, i)).collect();
        StripTable { slots: strips, by_lo }
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn locate(&self, cell: u64) -> usize {
        *self
            .by_lo
            .range(..=cell)
            .next_back()
            .expect("strips partition the grid")
            .1
    }

    /// Removes a slot, returning the index the last slot moved from.
    fn remove_slot(&mut self, slot: usize) -> usize {
        self.by_lo.remove(&self.slots[slot].lo);
        let last = self.slots.len() - 1;
        self.slots.swap_remove(slot);
        if slot != last {
            self.by_lo.insert(self.slots[slot].lo, slot);
        }
        last
    }

    fn push(&mut self, strip: Strip) -> usize {
        let slot = self.slots.len();
        self.by_lo.insert(strip.lo, slot);
        self.slots.push(strip);
        slot
    }

    /// Gives `[lo, hi)` the sample `sample`. The range must lie inside one
    /// strip; neighbours with an equal sample are merged.
    fn assign(&mut self, lo: u64, hi: u64, sample: Sample) {
        let slot = self.locate(lo);
        let Strip { lo: a, hi: b, sample: old } = self.slots[slot].clone();
        assert!(a <= lo && hi <= b, "substrip [{lo}, {hi}) crosses strip [{a}, {b})");
        let mut mid = if a < lo {
            self.slots[slot].hi = lo;
            self.push(Strip { lo, hi, sample })
        } else {
            self.slots[slot].hi = hi;
            self.slots[slot].sample = sample;
            slot
        };
        if hi < b {
            self.push(Strip { lo: hi, hi: b, sample: old });
        }
        if let Some(&next) = self.by_lo.get(&hi) {
            if self.slots[next].sample == self.slots[mid].sample {
                self.slots[mid].hi = self.slots[next].hi;
                if self.remove_slot(next) == mid {
                    mid = next;
                }
            }
        }
        if let Some((_, &prev)) = self.by_lo.range(..lo).next_back() {
            if self.slots[prev].sample == self.slots[mid].sample {
                self.slots[prev].hi = self.slots[mid].hi;
                self.remove_slot(mid);
            }
        }
    }

    fn sorted(&self) -> Vec<Strip> {
        self.by_lo.values().map(|&i| self.slots[i].clone()).collect()
    }
}

struct Proposal {
    first: Strip,
    second: Strip,
    width: u64,
    unit: Option<usize>,
}

/// A layout paired with an incrementally maintained strip partition, so
/// long move sequences never re-sweep the whole layout.
#[derive(Debug, Clone)]
pub struct ChaoticLayout {
    layout: BarLayout,
    table: StripTable,
}

impl ChaoticLayout {
    pub fn new(layout: BarLayout) -> ChaoticLayout {
        let table = StripTable::new(strips(&layout));
        ChaoticLayout { layout, table }
    }

    pub fn layout(&self) -> &BarLayout {
        &self.layout
    }

    pub fn into_layout(self) -> BarLayout {
        self.layout
    }

    pub fn strip_count(&self) -> usize {
        self.table.len()
    }

    /// Strips in increasing order.
    pub fn strips(&self) -> Vec<Strip> {
        self.table.sorted()
    }

    pub fn design(&self) -> Design {
        Design::aggregate(&self.table.slots, self.layout.n_units(), self.layout.grid())
    }

    /// Smallest and largest strip sample size.
    pub fn size_range(&self) -> (usize, usize) {
        self.table.slots.iter().fold((usize::MAX, 0), |(lo, hi), s| {
            (lo.min(s.sample.len()), hi.max(s.sample.len()))
        })
    }

    fn choose_pair<R: Rng + ?Sized>(&self, rng: &mut R, choice: StripChoice) -> (usize, usize) {
        let d = self.table.len();
        match choice {
            StripChoice::Uniform => {
                let i = rng.random_range(0..d);
                let mut j = rng.random_range(0..d - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            }
            StripChoice::MassWeighted | StripChoice::UnitFirst => {
                let grid = self.layout.grid();
                let i = self.table.locate(rng.random_range(0..grid));
                loop {
                    let j = self.table.locate(rng.random_range(0..grid));
                    if j != i {
                        return (i, j);
                    }
                }
            }
        }
    }

    /// Picks strips, the substrip width and, for `UnitFirst`, the unit.
    fn prepare<R: Rng + ?Sized>(&self, rng: &mut R, alpha: f64, choice: StripChoice) -> std::result::Result<Proposal, SkipReason> {
        if self.table.len() < 2 {
            return Err(SkipReason::TooFewStrips);
        }
        let (i, j, unit) = match choice {
            StripChoice::UnitFirst => {
                let k = rng.random_range(0..self.layout.n_units());
                let bar = self.layout.bar(k);
                let inside = bar.measure().0;
                let grid = self.layout.grid();
                if inside == 0 || inside == grid {
                    return Err(SkipReason::NoCandidate);
                }
                let x = bar.nth_cell(rng.random_range(0..inside)).expect("rank below bar measure");
                let y = bar
                    .nth_uncovered_cell(rng.random_range(0..grid - inside))
                    .expect("rank below uncovered measure");
                (self.table.locate(x), self.table.locate(y), Some(k))
            }
            _ => {
                let (i, j) = self.choose_pair(rng, choice);
                (i, j, None)
            }
        };
        let (first, second) = (self.table.slots[i].clone(), self.table.slots[j].clone());
        let smaller = first.height().min(second.height());
        let width = ((alpha * smaller as f64).floor() as u64).min(smaller);
        if width == 0 {
            return Err(SkipReason::ZeroWidth);
        }
        Ok(Proposal { first, second, width, unit })
    }

    fn anchor<R: Rng + ?Sized>(rng: &mut R, strip: &Strip, width: u64, anchor: Anchor) -> u64 {
        match anchor {
            Anchor::Bottom => strip.lo,
            Anchor::Random => strip.lo + rng.random_range(0..=strip.height() - width),
        }
    }

    /// One free move: a unit present in the first strip but absent from the
    /// second hands a substrip-high segment over to the second strip.
    pub fn free_move<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        alpha: f64,
        anchor: Anchor,
        choice: StripChoice,
    ) -> MoveOutcome {
        let Proposal { first: si, second: sj, width, unit } = match self.prepare(rng, alpha, choice) {
            Ok(p) => p,
            Err(reason) => return MoveOutcome::Skipped(reason),
        };
        let unit = match unit {
            Some(k) => k,
            None => {
                let movable = si.sample.difference(&sj.sample);
                if movable.is_empty() {
                    return MoveOutcome::Skipped(SkipReason::NoCandidate);
                }
                movable[rng.random_range(0..movable.len())]
            }
        };
        let from = Self::anchor(rng, &si, width, anchor);
        let to = Self::anchor(rng, &sj, width, anchor);

        let bar = self.layout.bar_mut(unit);
        bar.remove_range(from, from + width)
            .expect("moved unit covers its source substrip");
        bar.insert_range(to, to + width)
            .expect("moved unit is absent from its target substrip");
        self.table.assign(from, from + width, si.sample.without(unit));
        self.table.assign(to, to + width, sj.sample.with(unit));
        MoveOutcome::Applied {
            unit,
            partner: None,
            width,
        }
    }

    /// One fixed-size move: units `k` in the first strip only and `l` in the
    /// second strip only exchange substrip segments.
    pub fn fixed_move<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        alpha: f64,
        anchor: Anchor,
        choice: StripChoice,
    ) -> MoveOutcome {
        let Proposal { first: si, second: sj, width, unit } = match self.prepare(rng, alpha, choice) {
            Ok(p) => p,
            Err(reason) => return MoveOutcome::Skipped(reason),
        };
        let only_i = si.sample.difference(&sj.sample);
        let only_j = sj.sample.difference(&si.sample);
        if only_i.is_empty() || only_j.is_empty() {
            return MoveOutcome::Skipped(SkipReason::NoCandidate);
        }
        let k = unit.unwrap_or_else(|| only_i[rng.random_range(0..only_i.len())]);
        let l = only_j[rng.random_range(0..only_j.len())];
        let from = Self::anchor(rng, &si, width, anchor);
        let to = Self::anchor(rng, &sj, width, anchor);

        let bar_k = self.layout.bar_mut(k);
        bar_k.remove_range(from, from + width).expect("k covers its source substrip");
        bar_k.insert_range(to, to + width).expect("k is absent from its target substrip");
        let bar_l = self.layout.bar_mut(l);
        bar_l.remove_range(to, to + width).expect("l covers its source substrip");
        bar_l.insert_range(from, from + width).expect("l is absent from its target substrip");
        self.table.assign(from, from + width, si.sample.without(k).with(l));
        self.table.assign(to, to + width, sj.sample.without(l).with(k));
        MoveOutcome::Applied {
            unit: k,
            partner: Some(l),
            width,
        }
    }

    pub fn apply<R: Rng + ?Sized>(&mut self, kind: MoveKind, rng: &mut R, params: &MoveParams) -> MoveOutcome {
        match kind {
            MoveKind::Free => self.free_move(rng, params.alpha, params.anchor, params.choice),
            MoveKind::Fixed => self.fixed_move(rng, params.alpha, params.anchor, params.choice),
        }
    }
}

/// Moves the segment `[from, from + width)` of `unit` to `[to, to + width)`.
pub fn relocate_segment(layout: &BarLayout, unit: usize, from: u64, to: u64, width: u64) -> Result<BarLayout> {
    let mut out = layout.clone();
    let bar = out.bar_mut(unit);
    bar.remove_range(from, from + width)?;
    bar.insert_range(to, to + width)?;
    Ok(out)
}

/// Exchanges the segment of `k` at `[from, from + width)` with the segment of
/// `l` at `[to, to + width)`. The two segments must be interchangeable: `k`
/// covers the first range and misses the second, `l` the reverse.
pub fn swap_segments(layout: &BarLayout, k: usize, l: usize, from: u64, to: u64, width: u64) -> Result<BarLayout> {
    let (src, dst) = ((from, from + width), (to, to + width));
    let bk = layout.bar(k);
    let bl = layout.bar(l);
    if !bk.covers_range(src.0, src.1)? || !bl.covers_range(dst.0, dst.1)? {
        return Err(Error::RangeNotCovered { lo: src.0, hi: src.1 });
    }
    if !bk.is_disjoint_from_range(dst.0, dst.1)? || !bl.is_disjoint_from_range(src.0, src.1)? {
        return Err(Error::RangeOverlaps { lo: dst.0, hi: dst.1 });
    }
    let mut out = relocate_segment(layout, k, from, to, width)?;
    let bar = out.bar_mut(l);
    bar.remove_range(dst.0, dst.1)?;
    bar.insert_range(src.0, src.1)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub moves: usize,
    pub applied: usize,
    pub skipped: usize,
    pub entropy: f64,
    pub strips: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Largest `|pi_kl - pi_k pi_l|`, reported for free moves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independence_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_to_reference: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub applied: usize,
    pub skipped_zero_width: usize,
    pub skipped_no_candidate: usize,
    pub skipped_too_few_strips: usize,
}

fn trace_row(state: &ChaoticLayout, kind: MoveKind, moves: usize, applied: usize, reference: Option<&ReferenceDesign>) -> TraceRow {
    let design = state.design();
    let (min_size, max_size) = state.size_range();
    TraceRow {
        moves,
        applied,
        skipped: moves - applied,
        entropy: design.entropy(),
        strips: state.strip_count(),
        min_size,
        max_size,
        independence_gap: (kind == MoveKind::Free)
            .then(|| design.second_order().max_independence_gap()),
        tv_to_reference: reference.map(|r| total_variation(&design, r).expect("same population")),
    }
}

/// Applies `params.iterations` moves of one kind, recording trace rows at
/// evenly spaced checkpoints. Fixed moves require a fixed-size layout.
pub fn run_chaotic(
    layout: BarLayout,
    params: &MoveParams,
    kind: MoveKind,
    reference: Option<&ReferenceDesign>,
) -> Result<(BarLayout, Trace)> {
    params.validate()?;
    if let Some(r) = reference {
        if r.n_units() != layout.n_units() {
            return Err(Error::LengthMismatch {
                expected: layout.n_units(),
                actual: r.n_units(),
            });
        }
    }
    let mut state = ChaoticLayout::new(layout);
    if kind == MoveKind::Fixed {
        let (lo, hi) = state.size_range();
        if lo != hi {
            return Err(Error::NotFixedSize);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = Trace::default();
    let every = if params.checkpoints == 0 {
        usize::MAX
    } else {
        params.iterations.div_ceil(params.checkpoints).max(1)
    };
    trace.rows.push(trace_row(&state, kind, 0, 0, reference));
    for m in 1..=params.iterations {
        match state.apply(kind, &mut rng, params) {
            MoveOutcome::Applied { .. } => trace.applied += 1,
            MoveOutcome::Skipped(SkipReason::ZeroWidth) => trace.skipped_zero_width += 1,
            MoveOutcome::Skipped(SkipReason::NoCandidate) => trace.skipped_no_candidate += 1,
            MoveOutcome::Skipped(SkipReason::TooFewStrips) => trace.skipped_too_few_strips += 1,
        }
        if m % every == 0 || m == params.iterations {
            trace.rows.push(trace_row(&state, kind, m, trace.applied, reference));
        }
    }
    Ok((state.into_layout(), trace))
}
