//! Recovery of jointly row-sparse matrices from multiple measurement vectors.
//!
//! Given `B = A·X + noise` with `X` having few nonzero rows, the crate
//! provides
//!
//! * a smoothed first-order solver of `min ‖α‖_{1,2} s.t. ‖AΨα − B‖_F ≤ ε`
//!   with continuation ([`nesta::nesta_solve`]), partial-support masking, and
//!   an outer support-refinement loop ([`nesta::iterative_nesta`]);
//! * iterative hard thresholding ([`iht::iht_solve`]);
//! * MUSIC subspace support detection ([`music::music_support`]);
//! * seeded instance generation ([`synth`]) and an experiment harness
//!   ([`harness`]) behind the `mmv` binary.

pub mod error;
pub mod harness;
pub mod iht;
pub mod io;
pub mod kv;
pub mod linalg;
pub mod music;
pub mod nesta;
pub mod norms;
pub mod problem;
pub mod projection;
pub mod report;
pub mod smoothing;
pub mod spark;
pub mod support;
pub mod synth;

pub use error::{MmvError, Result};
pub use nesta::{iterative_nesta, nesta_solve, IterativeConfig, NestaConfig};
pub use problem::{CoefficientMatrix, MeasurementMatrix, MmvProblem};
pub use report::RecoveryReport;
pub use support::SupportSet;
