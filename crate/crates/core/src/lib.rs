//! Range-Doppler segment detection of large automotive radar targets.
//!
//! The crate covers the whole chain: FMCW scene synthesis ([`sim`]),
//! square-law RD maps and segment histograms ([`rdmap`]), the OS-CFAR
//! baseline ([`oscfar`]), a small Kolmogorov-Arnold network trained on
//! segment histograms ([`kan`]), closed-form decision rules distilled from it
//! ([`symbolic`]), the segment detection pipeline ([`pipeline`]) and the
//! Monte-Carlo evaluation harness ([`eval`]).

pub mod error;
pub mod eval;
pub mod grid;
pub mod hypothesis;
pub mod kan;
mod linalg;
pub mod oscfar;
pub mod pipeline;
pub mod rdmap;
pub mod sim;
pub mod stats;
pub mod symbolic;

pub use error::{Error, Result};
pub use grid::Grid;
pub use hypothesis::{Hypothesis, SegmentClassifier};
