//! Numerical laboratory for the one-dimensional logarithmic and the radial
//! two-dimensional Keller-Segel systems.

// `!(a > b)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod density;
pub mod error;
pub mod inequality;
pub mod initial;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod physical;
pub mod profiles;
pub mod quadrature;
pub mod record;
pub mod spectral;
pub mod spectrum;

pub use density::{normalize, normalize_radial, AnyDensity, Density1D, RadialDensity2D, TOL_MASS};
pub use error::{Error, Result};
pub use spectrum::{fourier_transform, inverse_transform, Reconstruction, SpectralState};
