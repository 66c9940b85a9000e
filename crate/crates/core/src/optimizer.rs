//! Greedy best-first search over fixed-size layouts.
//!
//! The search starts from the systematic (Madow) layout, repeatedly expands
//! the cheapest open design by applying fixed-size moves to it, and keeps the
//! best design seen. Candidates of one expansion are generated in parallel
//! from per-candidate random streams and then merged in index order, so the
//! result does not depend on the number of worker threads.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::chaotic::{Anchor, ChaoticLayout, MoveParams, StripChoice};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{criterion_with_fip, Criterion};
use crate::grid::GridMass;
use crate::layout::{madow_layout, BarLayout};
use crate::par::{stream_rng, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub iterations: usize,
    pub nodes_per_iteration: usize,
    pub max_open_set_size: usize,
    pub moves_per_candidate: usize,
    pub alpha: f64,
    pub criterion: Criterion,
    pub seed: u64,
    pub anchor: Anchor,
    pub choice: StripChoice,
}

impl SearchParams {
    pub fn new(iterations: usize, nodes_per_iteration: usize, seed: u64) -> SearchParams {
        SearchParams {
            iterations,
            nodes_per_iteration,
            max_open_set_size: 100,
            moves_per_candidate: 1,
            alpha: 1.0,
            criterion: Criterion::C1,
            seed,
            anchor: Anchor::Bottom,
            choice: StripChoice::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("iterations", self.iterations),
            ("nodes per iteration", self.nodes_per_iteration),
            ("maximum open set size", self.max_open_set_size),
            ("moves per candidate", self.moves_per_candidate),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
        }
        self.move_params().validate()
    }

    fn move_params(&self) -> MoveParams {
        MoveParams {
            anchor: self.anchor,
            choice: self.choice,
            ..MoveParams::new(self.alpha, self.moves_per_candidate, self.seed)
        }
    }
}

/// SHA-256 digest of a design's canonical `(sample, mass)` listing.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesignKey([u8; 32]);

impl DesignKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for DesignKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

impl fmt::Debug for DesignKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DesignKey({self})")
    }
}

impl Serialize for DesignKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn design_key(design: &Design) -> DesignKey {
    let mut h = Sha256::new();
    h.update((design.n_units() as u64).to_le_bytes());
    h.update(design.grid().to_le_bytes());
    for (sample, mass) in design.iter() {
        h.update((sample.len() as u64).to_le_bytes());
        for &k in sample.units() {
            h.update((k as u64).to_le_bytes());
        }
        h.update(mass.0.to_le_bytes());
    }
    DesignKey(h.finalize().into())
}

/// An open-set entry.
#[derive(Debug, Clone)]
pub struct SearchNode {
    state: ChaoticLayout,
    pub key: DesignKey,
    pub cost: f64,
}

impl SearchNode {
    pub fn layout(&self) -> &BarLayout {
        self.state.layout()
    }
}

/// Open-set priority: cost, then insertion order.
#[derive(Debug, Clone, Copy)]
struct Priority {
    cost: f64,
    seq: u64,
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchReport {
    pub criterion: String,
    pub initial_cost: f64,
    pub best_cost: f64,
    /// Best cost after each completed iteration.
    pub trajectory: Vec<f64>,
    pub iterations_run: usize,
    pub expanded: usize,
    pub candidates: usize,
    pub duplicates: usize,
    pub evicted: usize,
    pub improvements: usize,
    pub max_open_set: usize,
    pub terminated_early: bool,
    pub best_key: String,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: BarLayout,
    pub report: SearchReport,
}

struct Evaluator<'a> {
    values: &'a [f64],
    fip: Vec<f64>,
    criterion: Criterion,
}

impl Evaluator<'_> {
    fn node(&self, state: ChaoticLayout) -> Result<SearchNode> {
        let design = state.design();
        let cost = criterion_with_fip(&design, self.values, &self.fip, self.criterion)?;
        Ok(SearchNode {
            key: design_key(&design),
            state,
            cost,
        })
    }
}

/// Minimizes the criterion for estimating the total of `values` over
/// fixed-size layouts with first-order masses `fip`.
pub fn search(values: &[f64], fip: &[GridMass], grid: u64, params: &SearchParams, exec: Execution) -> Result<SearchResult> {
    params.validate()?;
    if values.len() != fip.len() {
        return Err(Error::LengthMismatch {
            expected: fip.len(),
            actual: values.len(),
        });
    }
    let initial = madow_layout(fip, grid)?;
    if initial.integer_size().is_none() {
        return Err(Error::NotFixedSize);
    }
    let eval = Evaluator {
        values,
        fip: initial.fip_f64(),
        criterion: params.criterion,
    };
    let moves = params.move_params();

    let root = eval.node(ChaoticLayout::new(initial))?;
    let mut report = SearchReport {
        criterion: params.criterion.to_string(),
        initial_cost: root.cost,
        best_cost: root.cost,
        ..SearchReport::default()
    };
    let mut best = root.clone();
    let mut closed: HashSet<DesignKey> = HashSet::new();
    let mut open: BTreeMap<Priority, SearchNode> = BTreeMap::new();
    let mut seq = 0u64;
    open.insert(Priority { cost: root.cost, seq }, root);
    report.max_open_set = 1;

    for iteration in 0..params.iterations {
        let current = loop {
            match open.pop_first() {
                Some((_, node)) if closed.contains(&node.key) => continue,
                Some((_, node)) => break Some(node),
                None => break None,
            }
        };
        let Some(current) = current else {
            report.terminated_early = true;
            break;
        };
        closed.insert(current.key);
        report.expanded += 1;

        let candidates = exec.map(params.nodes_per_iteration, |c| {
            let mut rng = stream_rng(params.seed, (iteration as u64) << 32 | c as u64);
            let mut state = current.state.clone();
            for _ in 0..params.moves_per_candidate {
                state.fixed_move(&mut rng, moves.alpha, moves.anchor, moves.choice);
            }
            eval.node(state)
        });

        for node in candidates {
            let node = node?;
            report.candidates += 1;
            if closed.contains(&node.key) {
                report.duplicates += 1;
                continue;
            }
            if node.cost < best.cost {
                best = node.clone();
                report.improvements += 1;
            }
            if open.len() >= params.max_open_set_size {
                let worst = open.last_key_value().map(|(p, _)| p.cost).expect("open set is full");
                let oldest = *open
                    .range(Priority { cost: worst, seq: 0 }..)
                    .next()
                    .expect("worst entry exists")
                    .0;
                open.remove(&oldest);
                report.evicted += 1;
            }
            seq += 1;
            open.insert(Priority { cost: node.cost, seq }, node);
            report.max_open_set = report.max_open_set.max(open.len());
        }
        report.iterations_run += 1;
        report.trajectory.push(best.cost);
    }

    report.best_cost = best.cost;
    report.best_key = best.key.to_string();
    let layout = best.state.into_layout();
    layout.validate()?;
    Ok(SearchResult { best: layout, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Sample;
    use crate::layout::{equal_fip, layout_from_offsets, round_to_grid};

    const PI: [f64; 7] = [0.38, 0.30, 0.42, 0.65, 0.25, 0.10, 0.90];

    #[test]
    fn key_depends_only_on_design() {
        let fip = round_to_grid(&[0.5, 0.5], 10).unwrap().fip;
        let a = layout_from_offsets(&fip, &[0, 5], 10).unwrap();
        let b = layout_from_offsets(&fip, &[5, 0], 10).unwrap();
        assert_ne!(a, b);
        assert_eq!(design_key(&Design::from_layout(&a)), design_key(&Design::from_layout(&b)));

        let s = |l: &[usize]| Sample::from_labels(l.iter().copied());
        let x = Design::from_masses(2, 10, [(s(&[1]), GridMass(5)), (s(&[2]), GridMass(5))]).unwrap();
        let y = Design::from_masses(2, 10, [(s(&[1]), GridMass(4)), (s(&[2]), GridMass(6))]).unwrap();
        assert_ne!(design_key(&x), design_key(&y));
    }

    #[test]
    fn madow_key_is_stable() {
        let fip = round_to_grid(&PI, 100).unwrap().fip;
        let d = Design::from_layout(&madow_layout(&fip, 100).unwrap());
        assert_eq!(design_key(&d), design_key(&d.clone()));
        assert_eq!(design_key(&d).to_string().len(), 64);
    }

    #[test]
    fn no_op_search_returns_initial() {
        // One unit of certainty and one of zero probability admit only the
        // initial design.
        let fip = round_to_grid(&[1.0, 0.0], 100).unwrap().fip;
        let r = search(&[3.0, 0.0], &fip, 100, &SearchParams::new(1, 1, 0), Execution::Sequential).unwrap();
        assert_eq!(r.best, madow_layout(&fip, 100).unwrap());
        assert_eq!(r.report.best_cost, r.report.initial_cost);
        assert_eq!(r.report.duplicates, 1);
    }

    #[test]
    fn search_improves_and_is_deterministic() {
        let fip = equal_fip(12, 3, 1000).unwrap().fip;
        let z: Vec<f64> = (0..12).map(|k| ((k * 7) % 12) as f64 + 1.0).collect();
        let mut params = SearchParams::new(40, 6, 9);
        params.max_open_set_size = 8;
        let a = search(&z, &fip, 1000, &params, Execution::Sequential).unwrap();
        let b = search(&z, &fip, 1000, &params, Execution::Parallel).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.report, b.report);
        let t = &a.report.trajectory;
        assert!(t.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.report.best_cost < a.report.initial_cost);
        assert!(a.report.max_open_set <= 8);
        assert_eq!(a.best.fip(), &fip[..]);
        assert_eq!(a.best.integer_size(), Some(3));
        let d = Design::from_layout(&a.best);
        assert_eq!(d.fixed_size(), Some(3));
        let cost = crate::estimator::criterion(&d, &z, Criterion::C1).unwrap();
        assert!((cost - a.report.best_cost).abs() <= 1e-12 * cost.max(1.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let fip = equal_fip(4, 2, 100).unwrap().fip;
        let mut p = SearchParams::new(1, 1, 0);
        p.max_open_set_size = 0;
        assert!(search(&[1.0; 4], &fip, 100, &p, Execution::Sequential).is_err());
        assert!(search(&[1.0; 3], &fip, 100, &SearchParams::new(1, 1, 0), Execution::Sequential).is_err());
    }
}
