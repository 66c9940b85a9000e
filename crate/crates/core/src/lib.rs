//! Geometric finite-population sampling.
//!
//! Inclusion probabilities are drawn as bars over the unit interval, which is
//! discretized into an exact integer grid. A horizontal random line selects
//! the sample. Moving pieces of bars changes the joint inclusion
//! probabilities while every first-order probability stays fixed, which is
//! the basis for the entropy-increasing moves in [`chaotic`] and the design
//! search in [`optimizer`].

pub mod chaotic;
pub mod design;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod layout;
pub mod optimizer;
pub mod oracle;
pub mod par;
pub mod population;

pub use design::{Design, Sample, SipMatrix, Strip};
pub use error::{Error, Result};
pub use grid::{GridMass, Interval, IntervalSet, DEFAULT_GRID};
pub use layout::{BarLayout, GridFip, LayoutDocument};
pub use oracle::{JointProbabilities, ReferenceDesign};
pub use par::Execution;
pub use population::Population;
