//! Spectral estimation of recorded traces.
//!
//! Estimates follow the two-sided angular convention of
//! [`SpectrumResult`]: `∫ S dω/(2π)` over the returned grid is the mean
//! square of the input. For complex input the frequency axis is the signal
//! processing one, a tone `e^{+iωt}` appearing at `+ω`.

mod fit;
mod sidebands;
mod welch;

pub use fit::{lorentzian, lorentzian_fit, FitResult};
pub use sidebands::{output_spectrum, sideband_areas, SidebandAreas, EXCLUSION_WIDTHS};
pub use welch::{welch_psd, welch_psd_real, Window, MIN_SEGMENTS};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("record holds {segments} segments, at least {MIN_SEGMENTS} are needed")]
    TooShort { segments: usize },
    #[error("fit did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("more than one peak of comparable height in the fit window")]
    AmbiguousPeak,
    #[error("sideband windows overlap: {0}")]
    OverlapError(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}
