//! Meshfree gradient-projection solver for stochastic optimal control.

pub mod bsde;
pub mod condexp;
pub mod csvio;
pub mod error;
pub mod expcli;
pub mod linalg;
pub mod meshfree;
pub mod optimizer;
pub mod pointcloud;
pub mod problems;
pub mod quadrature;

pub use error::{Error, Result};
