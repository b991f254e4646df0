//! Parameter sets shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use optomech_core::params::{derive, RateDesign};
use optomech_core::{DerivedParams, DriveParams, Scheme};

pub const TWO_PI: f64 = 2.0 * PI;

/// Single-port device specified by its rates; temperatures in kelvin.
#[derive(Debug, Clone, Copy)]
pub struct Device {
    pub omega_c: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    /// κ_t/Ω_m.
    pub resolution: f64,
    /// κ_in/κ_t.
    pub internal_fraction: f64,
    pub t_mech: f64,
    pub t_internal: f64,
    pub t_external: f64,
}

impl Device {
    /// 5 GHz cavity, 1 MHz mechanics, Ω_m/Γ_m = 1000.
    pub fn bench() -> Self {
        Self {
            omega_c: TWO_PI * 5e9,
            omega_m: TWO_PI * 1e6,
            gamma_m: TWO_PI * 1e3,
            resolution: 0.05,
            internal_fraction: 0.2,
            t_mech: 0.1,
            t_internal: 0.05,
            t_external: 0.2,
        }
    }

    pub fn silent(mut self) -> Self {
        self.t_mech = 0.0;
        self.t_internal = 0.0;
        self.t_external = 0.0;
        self
    }

    pub fn design(&self) -> RateDesign {
        let kappa = self.resolution * self.omega_m;
        RateDesign {
            omega_c: self.omega_c,
            kappa_ex: kappa * (1.0 - self.internal_fraction),
            kappa_in: kappa * self.internal_fraction,
            z0: 50.0,
            c_total: 1e-12,
            gate_fraction: 0.1,
            coupling_g: TWO_PI * 1e15,
            mass: 1e-15,
            omega_m: self.omega_m,
            gamma_m: self.gamma_m,
            t_mech: self.t_mech,
            t_internal: self.t_internal,
            t_external: self.t_external,
            n_det: 10.0,
        }
    }

    pub fn derived(&self) -> DerivedParams {
        derive(&self.design().to_circuit()).expect("valid test device")
    }
}

/// Drive that sets the coupling rate to `g2` [rad²/s²].
pub fn drive_for_g2(d: &DerivedParams, scheme: Scheme, g2: f64) -> DriveParams {
    let e_c = g2 / (d.coupling_g * d.coupling_g * d.xbar2);
    DriveParams::for_stored_energy(d, scheme, e_c)
}

/// Thermal displacement variance ⟨δx²⟩ = k_B·T/(2mΩ²) of one quadrature.
pub fn thermal_variance(d: &DerivedParams, temperature: f64) -> f64 {
    optomech_core::constants::K_B * temperature / (2.0 * d.mass * d.omega_m * d.omega_m)
}

/// Mean of `|z|²/4` over a record together with its batch-means standard error.
pub fn mean_quarter_power(samples: &[Complex64], batches: usize) -> (f64, f64) {
    let per = samples.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            samples[b * per..(b + 1) * per]
                .iter()
                .map(|z| z.norm_sqr() / 4.0)
                .sum::<f64>()
                / per as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}
