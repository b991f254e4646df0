//! Closed-form optomechanical results.
//!
//! Conventions: complex amplitudes rotate as `e^{-iωt}`, spectra are
//! two-sided in angular frequency with `∫ S dω/(2π)` equal to the
//! variance, and the mechanical susceptibility carries the extra factor
//! `i` relative to the usual optomechanics convention:
//! `χ_m(ω) = 1/(2mΩ_m(−ω − iΓ_m/2) + Σ)`.

mod backaction;
mod output;
mod readout;

pub use backaction::{
    back_action, displacement_psd, lab_force_psd, mechanical_susceptibility, BackActionResult, Frame,
};
pub use output::{
    apparent_force, output_psd, sideband_asymmetry, ApparentForces, OutputSpectrum, Sideband, OVERLAP_THRESHOLD,
};
pub use readout::{
    closed_form_optimum, imprecision_psd, quantum_reference_ratio, scan_inverse_ratio, scl_optimum, signal_noise,
    SclOptimum, SignalNoise, SignalNoiseTerm,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Cavity susceptibilities of the pump and the two motional sidebands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Susceptibilities {
    pub chi_p: Complex64,
    pub chi_l: Complex64,
    pub chi_h: Complex64,
}

/// Cavity response `1/(−i·offset + κ_t/2)` for a tone `offset` away from ω_c.
pub fn cavity_response(offset: f64, kappa_t: f64) -> Complex64 {
    1.0 / Complex64::new(0.5 * kappa_t, -offset)
}

pub fn susceptibilities(delta: f64, omega_m: f64, kappa_t: f64) -> Susceptibilities {
    Susceptibilities {
        chi_p: cavity_response(delta, kappa_t),
        chi_l: cavity_response(delta - omega_m, kappa_t),
        chi_h: cavity_response(delta + omega_m, kappa_t),
    }
}
