//! Kernel density and regression estimation on functional data after
//! projection onto the leading empirical principal components.
//!
//! Data live in a truncated Hilbert space: each observation is a finite
//! coefficient vector in an orthonormal basis. The empirical covariance is
//! eigendecomposed, the sample is projected on the top `D` eigenvectors, and
//! kernel estimates are computed in the projected coordinates. The same code
//! evaluated with the true projector gives the pseudo-estimate, which the
//! [`experiments`] module compares against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod hilbert;
pub mod kernels;
mod quadrature;
pub mod rate;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use hilbert::HilbertVector;
pub use kernels::{KernelFamily, KernelSpec};
pub use rate::RateFit;
pub use spectral::{Projector, SpectralDecomposition, SymmetricOperator};
