//! Out-of-core lasso / elastic-net path solver.
//!
//! Fits penalized linear and logistic regression paths over design matrices
//! that live in memory-mapped files and may be much larger than RAM. Columns
//! are standardized on the fly (no standardized copy is ever materialized),
//! and feature screening (sequential strong rules plus a safe dome test)
//! keeps the per-lambda work proportional to the surviving feature set.

pub mod bigmat;
pub mod cv;
pub mod error;
pub mod kernels;
pub mod oracle;
pub mod par;
pub mod screen;
pub mod solver;

pub use bigmat::{attach_matrix, setup_matrix, Descriptor, FileMatrix, MatrixView};
pub use error::{Error, Result};
pub use screen::ScreenPolicy;
pub use solver::{fit, Family, FitConfig, LambdaSpacing, PathFit};
