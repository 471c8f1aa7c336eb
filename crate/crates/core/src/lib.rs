//! Decomposition of variation in sampled curves along predetermined,
//! nonlinear modes of variation of a common template.
//!
//! Curves are modeled as `w·z(w·(t − m)) + h` (or with a custom warp), fitted
//! by alternating projection and template estimation, and their spread is
//! split into per-mode sums of squares about a Fréchet mean.

pub mod decompose;
pub mod error;
pub mod fitting;
pub mod frechet;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod workbench;
