//! Simulation and analysis of frequency-dependent squeezed light.
//!
//! A squeezed Gaussian state from a parametric amplifier is reflected off a
//! detuned filter cavity, whose sideband-dependent phase rotates the
//! squeezing ellipse. The crate predicts homodyne noise spectra and simulates
//! locked quadrature tomography with filtered-backprojection reconstruction.
//!
//! Quadrature variances are in shot-noise units (vacuum = 1), frequencies are
//! sideband offsets in Hz and angles are radians.

// Negated comparisons deliberately reject NaN in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod chain;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod lock;
pub mod tomography;

pub use cavity::{CavityFigures, CavityParams, TransferMode};
pub use chain::{ChainConfig, OpaParams};
pub use error::{Error, Result};
pub use gaussian::{Covariance, Ellipse, QuadratureState, SqueezeParams};
pub use lock::{ErrorSignalModel, LockPlan};
pub use tomography::{GridSpec, RunSpec, Sinogram, TomographyRun, WignerGrid};
