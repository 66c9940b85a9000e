use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell {point} is outside the grid [0, {grid})")]
    PointOutOfRange { point: u64, grid: u64 },

    #[error("range [{lo}, {hi}) is empty or exceeds the grid of {grid} cells")]
    BadRange { lo: u64, hi: u64, grid: u64 },

    #[error("range [{lo}, {hi}) is not fully covered by the bar")]
    RangeNotCovered { lo: u64, hi: u64 },

    #[error("range [{lo}, {hi}) overlaps the bar")]
    RangeOverlaps { lo: u64, hi: u64 },

    #[error("grid resolutions differ ({left} vs {right})")]
    GridMismatch { left: u64, right: u64 },

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("infeasible inclusion probabilities: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("design has no samples")]
    EmptyDesign,

    #[error("unit {unit} has zero inclusion probability")]
    ZeroInclusion { unit: usize },

    #[error("units {k} and {l} have zero joint inclusion probability; no unbiased variance estimator exists")]
    ZeroJointInclusion { k: usize, l: usize },

    #[error("design is not fixed-size")]
    NotFixedSize,

    #[error("population of {n} units is too large for enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("maximum-entropy fit did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("variance cross-check failed: definitional {definitional} vs pairwise {pairwise}")]
    VarianceMismatch { definitional: f64, pairwise: f64 },
}
