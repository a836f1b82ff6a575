//! Hermitian curvature flow `∂ₜg = -R̃` on complex parallelizable manifolds,
//! discretized on periodic lattices with spectral frame derivatives.

pub mod algebra;
pub mod discretization;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod recipe;

pub use error::{Error, Result};
