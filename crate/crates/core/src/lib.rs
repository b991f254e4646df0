//! Forward model and verification engine for single-tone microwave
//! optomechanics described as a parallel RLC circuit whose capacitance is
//! modulated by a mechanical element.
//!
//! * [`params`] turns lumped circuit elements into cavity and optomechanical rates.
//! * [`analytic`] evaluates the closed-form susceptibilities, back-action,
//!   displacement and output spectra, sideband asymmetry and readout limits.
//! * [`sim`] integrates the stochastic rotating-frame equations (and the full
//!   laboratory-frame circuit ODE) as a brute-force oracle.
//! * [`spectral`] turns time traces back into spectra and fitted quantities.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod constants;
pub mod error;
pub mod params;
pub mod sim;
pub mod spectral;
pub mod spectrum;

pub use error::ModelError;
pub use params::{CircuitParams, DerivedParams, DriveParams, Scheme, Topology};
pub use spectrum::{SpectrumKind, SpectrumResult, SpectrumWarning};
