//! NHT estimation, exact design variance, sample-based variance estimators
//! and the design criteria used by the optimizer.
//!
//! Everything here works in `f64`; grid masses are converted on entry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{Design, Sample};
use crate::error::{Error, Result};
use crate::oracle::JointProbabilities;

/// Relative tolerance of the built-in variance cross-check.
pub const VARIANCE_CHECK_TOLERANCE: f64 = 1e-9;

fn check_len(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: values.len(),
        });
    }
    Ok(())
}

/// `sum_{k in S} y_k / pi_k`.
pub fn nht_total(sample: &Sample, values: &[f64], fip: &[f64]) -> Result<f64> {
    check_len(values, fip.len())?;
    sample
        .units()
        .iter()
        .map(|&k| match fip.get(k) {
            Some(&p) if p > 0.0 => Ok(values[k] / p),
            Some(_) => Err(Error::ZeroInclusion { unit: k }),
            None => Err(Error::LengthMismatch {
                expected: k + 1,
                actual: fip.len(),
            }),
        })
        .sum()
}

/// First-order probabilities of a design, rejecting units that can never be
/// selected while carrying a nonzero value (their total is not estimable).
fn design_fip(design: &Design, values: &[f64]) -> Result<Vec<f64>> {
    check_len(values, design.n_units())?;
    let g = design.grid() as f64;
    let fip: Vec<f64> = design.first_order()?.iter().map(|m| m.0 as f64 / g).collect();
    if let Some(k) = (0..fip.len()).find(|&k| fip[k] == 0.0 && values[k] != 0.0) {
        return Err(Error::ZeroInclusion { unit: k });
    }
    Ok(fip)
}

/// `(p_t, estimate_t)` for every sample of the design.
fn sample_estimates(design: &Design, values: &[f64], fip: &[f64]) -> Vec<(f64, f64)> {
    design
        .probabilities()
        .map(|(s, p)| {
            let est = s.units().iter().map(|&k| values[k] / fip[k]).sum();
            (p, est)
        })
        .collect()
}

/// Exact expectation of the NHT estimator over the design.
pub fn expected_estimate(design: &Design, values: &[f64]) -> Result<f64> {
    let fip = design_fip(design, values)?;
    Ok(sample_estimates(design, values, &fip).iter().map(|(p, e)| p * e).sum())
}

/// `sum_k sum_l (pi_kl - pi_k pi_l) y_k y_l / (pi_k pi_l)`, skipping units
/// with zero inclusion probability.
pub fn variance_from_sip(values: &[f64], sip: &JointProbabilities) -> Result<f64> {
    let n = sip.n_units();
    check_len(values, n)?;
    let fip = sip.fip();
    let mut total = 0.0;
    for k in (0..n).filter(|&k| fip[k] > 0.0) {
        let a = values[k] / fip[k];
        for l in (0..n).filter(|&l| fip[l] > 0.0) {
            total += (sip.get(k, l) - fip[k] * fip[l]) * a * values[l] / fip[l];
        }
    }
    Ok(total)
}

/// Exact variance of the NHT estimator, computed over the enumerated design
/// and checked against the pairwise formula on the joint probabilities.
pub fn design_variance(design: &Design, values: &[f64]) -> Result<f64> {
    let fip = design_fip(design, values)?;
    let total: f64 = values.iter().sum();
    let definitional: f64 = sample_estimates(design, values, &fip)
        .iter()
        .map(|(p, e)| (e - total).powi(2) * p)
        .sum();
    let sip = JointProbabilities::from(&design.second_order());
    let pairwise = variance_from_sip(values, &sip)?;
    let scale: f64 = (0..fip.len())
        .filter(|&k| fip[k] > 0.0)
        .map(|k| (values[k] / fip[k]).abs())
        .sum::<f64>()
        .powi(2);
    if (definitional - pairwise).abs() > VARIANCE_CHECK_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::VarianceMismatch {
            definitional,
            pairwise,
        });
    }
    Ok(definitional)
}

fn sample_pairs(sample: &Sample, sip: &JointProbabilities) -> Result<()> {
    let u = sample.units();
    if let Some(&k) = u.iter().find(|&&k| k >= sip.n_units()) {
        return Err(Error::LengthMismatch {
            expected: k + 1,
            actual: sip.n_units(),
        });
    }
    for (a, &k) in u.iter().enumerate() {
        if sip.get(k, k) <= 0.0 {
            return Err(Error::ZeroInclusion { unit: k });
        }
        for &l in &u[a + 1..] {
            if sip.get(k, l) <= 0.0 {
                return Err(Error::ZeroJointInclusion { k, l });
            }
        }
    }
    Ok(())
}

/// Unbiased variance estimator
/// `sum_{k,l in S} (pi_kl - pi_k pi_l) / pi_kl * y_k y_l / (pi_k pi_l)`.
pub fn variance_estimator_ht(sample: &Sample, values: &[f64], sip: &JointProbabilities) -> Result<f64> {
    check_len(values, sip.n_units())?;
    sample_pairs(sample, sip)?;
    let u = sample.units();
    let mut total = 0.0;
    for &k in u {
        let pk = sip.get(k, k);
        for &l in u {
            let pl = sip.get(l, l);
            let pkl = sip.get(k, l);
            total += (pkl - pk * pl) / pkl * (values[k] / pk) * (values[l] / pl);
        }
    }
    Ok(total)
}

/// Relative tolerance for recognising a fixed-size design from real-valued
/// joint probabilities.
const FIXED_SIZE_TOLERANCE: f64 = 1e-9;

fn is_fixed_size(sip: &JointProbabilities) -> bool {
    let n = sip.n_units();
    let fip = sip.fip();
    let size: f64 = fip.iter().sum();
    if (size - size.round()).abs() > FIXED_SIZE_TOLERANCE * size.max(1.0) {
        return false;
    }
    (0..n).all(|k| {
        let row: f64 = (0..n).map(|l| sip.get(k, l)).sum();
        (row - size.round() * fip[k]).abs() <= FIXED_SIZE_TOLERANCE * size.max(1.0)
    })
}

/// Sen-Yates-Grundy estimator
/// `1/2 sum_{k != l in S} (pi_k pi_l - pi_kl) / pi_kl (y_k/pi_k - y_l/pi_l)^2`,
/// unbiased for fixed-size designs only.
pub fn variance_estimator_syg(sample: &Sample, values: &[f64], sip: &JointProbabilities) -> Result<f64> {
    check_len(values, sip.n_units())?;
    if !is_fixed_size(sip) {
        return Err(Error::NotFixedSize);
    }
    sample_pairs(sample, sip)?;
    let u = sample.units();
    let mut total = 0.0;
    for (a, &k) in u.iter().enumerate() {
        let pk = sip.get(k, k);
        for &l in &u[a + 1..] {
            let pl = sip.get(l, l);
            let pkl = sip.get(k, l);
            total += (pk * pl - pkl) / pkl * (values[k] / pk - values[l] / pl).powi(2);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Mean squared error, the design variance of the estimator.
    C1,
    /// Mean absolute error.
    C2,
    /// Largest absolute error over samples.
    C3,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::C1, Criterion::C2, Criterion::C3];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::C1 => "c1",
            Criterion::C2 => "c2",
            Criterion::C3 => "c3",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Criterion::C1),
            "c2" => Ok(Criterion::C2),
            "c3" => Ok(Criterion::C3),
            other => Err(Error::InvalidParameter(format!("unknown criterion '{other}'"))),
        }
    }
}

fn criterion_from_estimates(estimates: &[(f64, f64)], total: f64, which: Criterion) -> f64 {
    let errors = estimates.iter().map(|&(p, e)| (p, e - total));
    match which {
        Criterion::C1 => errors.map(|(p, d)| d * d * p).sum(),
        Criterion::C2 => errors.map(|(p, d)| d.abs() * p).sum(),
        Criterion::C3 => errors.map(|(_, d)| d.abs()).fold(0.0, f64::max),
    }
}

/// Criterion value of the design for estimating the total of `values`.
pub fn criterion(design: &Design, values: &[f64], which: Criterion) -> Result<f64> {
    let fip = design_fip(design, values)?;
    criterion_with_fip(design, values, &fip, which)
}

/// As [`criterion`] with the first-order probabilities supplied by the
/// caller, which must match the design.
pub fn criterion_with_fip(design: &Design, values: &[f64], fip: &[f64], which: Criterion) -> Result<f64> {
    check_len(values, design.n_units())?;
    check_len(fip, design.n_units())?;
    if let Some(k) = (0..fip.len()).find(|&k| fip[k] == 0.0 && values[k] != 0.0) {
        return Err(Error::ZeroInclusion { unit: k });
    }
    let total: f64 = values.iter().sum();
    Ok(criterion_from_estimates(&sample_estimates(design, values, fip), total, which))
}

/// `baseline / candidate`; above one means the candidate is better. A zero
/// candidate variance against a positive baseline gives `+inf`.
pub fn efficiency(baseline_variance: f64, candidate_variance: f64) -> f64 {
    if candidate_variance == 0.0 {
        if baseline_variance == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        baseline_variance / candidate_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub total_estimate: f64,
    /// Exact variance over the design.
    pub variance: f64,
    /// Sample-based estimate: Sen-Yates-Grundy on fixed-size designs,
    /// otherwise the unbiased pairwise form. Absent when some joint
    /// probability in the sample is zero.
    pub variance_estimate: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl EstimateReport {
    pub fn new(design: &Design, sample: &Sample, values: &[f64]) -> Result<EstimateReport> {
        let fip = design_fip(design, values)?;
        let sip = JointProbabilities::from(&design.second_order());
        let total = values.iter().sum();
        let estimates = sample_estimates(design, values, &fip);
        let variance_estimate = if design.fixed_size().is_some() {
            variance_estimator_syg(sample, values, &sip)
        } else {
            variance_estimator_ht(sample, values, &sip)
        };
        let variance_estimate = match variance_estimate {
            Ok(v) => Some(v),
            Err(Error::ZeroJointInclusion { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(EstimateReport {
            total_estimate: nht_total(sample, values, &fip)?,
            variance: design_variance(design, values)?,
            variance_estimate,
            c1: criterion_from_estimates(&estimates, total, Criterion::C1),
            c2: criterion_from_estimates(&estimates, total, Criterion::C2),
            c3: criterion_from_estimates(&estimates, total, Criterion::C3),
        })
    }
}
