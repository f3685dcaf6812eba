//! Fixed-point iteration schemes for contraction mappings, with rate
//! analysis, closed-form error bounds, data-dependence experiments, and an
//! exact rational oracle for affine problems.
//!
//! The crate revolves around [`problem::ContractionProblem`] (the mapping
//! under iteration), [`schemes::run_scheme`] (one of ten iteration schemes
//! driven by a [`problem::ControlSchedule`]), and the analysis helpers in
//! [`analysis`] and [`datadep`]. [`oracle`] replays the same iterations in
//! exact rational arithmetic for cross-checking, and [`verify`] bundles the
//! whole desk-check suite.

pub mod analysis;
pub mod datadep;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod schemes;
pub mod verify;

pub use error::{Error, Result};
pub use problem::{ContractionProblem, ControlSchedule, Point};
pub use schemes::{run_scheme, IterationTrace, SchemeId, StopRule, Termination};
