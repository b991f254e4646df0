//! Stochastic time-domain integration.
//!
//! The rotating-frame model evolves the slow envelopes of the three comb
//! components and of the motion,
//!
//! ```text
//! dμ_l/dt = (i(Δ−Ω_m) − κ_t/2)·μ_l + (i/2)(G·x0*·μ_p + δI_l/(ω_c·C_t))
//! dμ_h/dt = (i(Δ+Ω_m) − κ_t/2)·μ_h + (i/2)(G·x0·μ_p + δI_h/(ω_c·C_t))
//! dμ_p/dt = (iΔ − κ_t/2)·μ_p + (i/2)(I_p + δI_p)/(ω_c·C_t)
//! dx0/dt  = −(Γ_m/2)·x0 + i(L0 + F0)/(2mΩ_m),  F0 = C_t·ω_c·G·(μ_p·μ_l* + μ_p*·μ_h)
//! ```
//!
//! Their steady states are the quasi-static amplitudes and their Fourier
//! transform gives back `χ_m` with the self-energy. Each line is stepped
//! with an exponential integrator: the linear part is propagated exactly
//! and the white noise enters through its exact one-step convolution.
//! Plain Euler–Maruyama amplifies the fast rotating terms at the step sizes
//! the configuration allows.

mod envelope;
mod lab;
mod noise;
mod rotating;
mod trace;

pub use envelope::{band_limit, demodulate, output_envelope, output_psd_scale};
pub use lab::{comb_amplitudes, simulate_lab};
pub use noise::{ComplexNormal, NoiseSampler};
pub use rotating::simulate_rotating;
pub use trace::{channel_unit, Channel, ChannelData, TimeTrace, TraceMeta};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::Frame;
use crate::error::ModelError;
use crate::params::DerivedParams;

/// Excursion of |x0| over its initial thermal RMS that ends a run.
pub const INSTABILITY_FACTOR: f64 = 1e3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("motion exceeded {INSTABILITY_FACTOR}x its thermal amplitude at t = {time:.6e} s")]
    InstabilityTerminated { time: f64, trace: Box<TimeTrace> },
    #[error("non-finite sample in channel {channel} at t = {time:.6e} s")]
    NonFiniteSample { time: f64, channel: String },
}

/// Treatment of the mechanical degree of freedom. Imposed motion is the
/// constant envelope `x0` in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// Integrated with its Langevin force and the back-action force.
    Free,
    /// Held at rest.
    Frozen,
    /// `x(t) = Re(amplitude·e^{−iΩ_m t})` [m].
    Imposed { amplitude_re: f64, amplitude_im: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Recorded span after burn-in [s].
    pub duration: f64,
    pub seed: u64,
    pub frame: Frame,
    pub record_decimation: usize,
    /// Laboratory frame: comb orders either side of the pump to demodulate
    /// (see [`comb_amplitudes`]); requires whole recorded samples per
    /// mechanical period when non-zero.
    pub harmonics_kept: usize,
    /// Discarded settling time [s]; defaults to 10/Γ_eff for free motion
    /// and 20/κ_t for frozen or imposed motion.
    pub burn_in: Option<f64>,
    /// Let the pump-line noise act on the sidebands and the mechanics.
    pub noisy_pump: bool,
    pub motion: Motion,
}

impl SimConfig {
    /// Rotating-frame run at the largest allowed step.
    pub fn rotating(derived: &DerivedParams, duration: f64, seed: u64) -> Self {
        Self {
            dt: Self::max_dt(derived, Frame::Rotating),
            duration,
            seed,
            frame: Frame::Rotating,
            record_decimation: 1,
            harmonics_kept: 0,
            burn_in: None,
            noisy_pump: false,
            motion: Motion::Free,
        }
    }

    /// Laboratory-frame run whose step divides the mechanical period.
    pub fn lab(derived: &DerivedParams, duration: f64, seed: u64) -> Self {
        let period = 2.0 * std::f64::consts::PI / derived.omega_m;
        let steps = (period / Self::max_dt(derived, Frame::Lab)).ceil();
        Self {
            dt: period / steps,
            duration,
            seed,
            frame: Frame::Lab,
            record_decimation: 1,
            harmonics_kept: 1,
            burn_in: None,
            noisy_pump: false,
            motion: Motion::Free,
        }
    }

    pub fn max_dt(derived: &DerivedParams, frame: Frame) -> f64 {
        match frame {
            Frame::Rotating => {
                let slowest = (2.0 / derived.kappa_t)
                    .min(2.0 / derived.gamma_m)
                    .min(2.0 * std::f64::consts::PI / derived.omega_m);
                slowest / 20.0
            }
            Frame::Lab => 2.0 * std::f64::consts::PI / (derived.omega_c * 50.0),
        }
    }

    pub fn validate(&self, derived: &DerivedParams) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.record_decimation == 0 {
            return bad("record_decimation must be at least 1".into());
        }
        if matches!(self.burn_in, Some(b) if !(b >= 0.0)) {
            return bad("burn_in must be non-negative".into());
        }
        let limit = Self::max_dt(derived, self.frame);
        if self.dt > limit * (1.0 + 1e-12) {
            return bad(format!(
                "dt = {:e} s exceeds the {:?}-frame limit {:e} s",
                self.dt, self.frame, limit
            ));
        }
        if self.frame == Frame::Lab && self.harmonics_kept > 0 {
            let per_period = 2.0 * std::f64::consts::PI / derived.omega_m / (self.dt * self.record_decimation as f64);
            if (per_period - per_period.round()).abs() > 1e-6 * per_period {
                return bad("lab demodulation needs a whole number of recorded samples per mechanical period".into());
            }
        }
        Ok(())
    }
}

/// Stable identifier of a parameter set for trace metadata.
pub(crate) fn params_hash(derived: &DerivedParams) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    format!("{derived:?}").hash(&mut h);
    h.finish()
}
