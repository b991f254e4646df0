use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::susceptibilities;
use crate::constants::K_B;
use crate::params::{DerivedParams, DriveParams};
use crate::spectrum::{SpectrumKind, SpectrumResult, SpectrumWarning};

/// Dynamic and stochastic back-action of the cavity on the mechanics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackActionResult {
    /// Single-photon-independent coupling squared, g² = G²·x̄²·E_c [rad²/s²].
    pub g2: f64,
    /// Self-energy Σ [N/m].
    pub sigma: Complex64,
    pub delta_omega_m: f64,
    pub gamma_opt: f64,
    /// Back-action heating rate Γ'_opt.
    pub gamma_opt_prime: f64,
    /// Rotating-frame force noise S_δF0 [N²·s].
    pub s_df0: f64,
    pub t_eff: f64,
    pub gamma_eff: f64,
    /// Γ_eff ≤ 0: the linear model predicts self-oscillation.
    pub unstable: bool,
}

/// Back-action for a cavity storing `e_c` joules at the drive's detuning.
pub fn back_action(derived: &DerivedParams, drive: &DriveParams, e_c: f64) -> BackActionResult {
    let delta = drive.detuning(derived);
    let om = derived.omega_m;
    let kappa = derived.kappa_t;
    let g = derived.coupling_g;

    let g2 = g * g * derived.xbar2 * e_c;
    let chi = susceptibilities(delta, om, kappa);
    let sigma = Complex64::new(0.0, -g * g / derived.omega_c * e_c) * (chi.chi_h - chi.chi_l.conj());

    let quarter_k2 = 0.25 * kappa * kappa;
    let d_plus = (delta + om).powi(2) + quarter_k2;
    let d_minus = (delta - om).powi(2) + quarter_k2;

    let delta_omega_m = g2 * ((delta + om) / d_plus + (delta - om) / d_minus);
    let gamma_opt = g2 * (kappa / d_plus - kappa / d_minus);
    let bracket_sum = kappa / d_plus + kappa / d_minus;
    let gamma_opt_prime = g2 * (om / derived.omega_c) * bracket_sum;

    // S_δI_n = 8 k_B T_c / R_t, so R_t·S_δI_n/2 = 4 k_B T_c.
    let s_df0 = g * g / derived.omega_c.powi(2) * e_c * 4.0 * K_B * derived.t_cavity * bracket_sum;

    let gamma_eff = derived.gamma_m + gamma_opt;
    let t_eff = (derived.t_mech * derived.gamma_m + derived.t_cavity * gamma_opt_prime) / gamma_eff;

    BackActionResult {
        g2,
        sigma,
        delta_omega_m,
        gamma_opt,
        gamma_opt_prime,
        s_df0,
        t_eff,
        gamma_eff,
        unstable: gamma_eff <= 0.0,
    }
}

/// Laboratory-frame back-action force PSD, `S_δF = S_δF0/4` [N²·s].
pub fn lab_force_psd(back_action: &BackActionResult) -> f64 {
    0.25 * back_action.s_df0
}

/// `χ_m(ω) = 1/(2mΩ_m(−ω − iΓ_m/2) + Σ)` in the frame rotating at Ω_m.
pub fn mechanical_susceptibility(derived: &DerivedParams, sigma: Complex64, omega: f64) -> Complex64 {
    let two_m_om = 2.0 * derived.mass * derived.omega_m;
    1.0 / (Complex64::new(-two_m_om * omega, -two_m_om * 0.5 * derived.gamma_m) + sigma)
}

/// Rotating-frame Langevin force PSD S_L0 = 8 k_B T_m m Γ_m [N²·s].
pub(crate) fn langevin_psd(derived: &DerivedParams) -> f64 {
    8.0 * K_B * derived.t_mech * derived.mass * derived.gamma_m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Offsets from Ω_m; spectrum of the complex amplitude x₀.
    Rotating,
    /// Absolute frequency; even spectrum with peaks at ±Ω_m.
    Lab,
}

/// Displacement spectrum. In the rotating frame this is `S_x0`; in the
/// laboratory frame the two peaks `S_x^∓` carry `S_x0/4` each, the peak
/// at −Ω_m being the mirror image.
pub fn displacement_psd(
    derived: &DerivedParams,
    drive: &DriveParams,
    e_c: f64,
    omega_grid: &[f64],
    frame: Frame,
) -> SpectrumResult {
    let ba = back_action(derived, drive, e_c);
    let force = langevin_psd(derived) + ba.s_df0;
    let s_x0 = |nu: f64| mechanical_susceptibility(derived, ba.sigma, nu).norm_sqr() * force;

    let mut spectrum = match frame {
        Frame::Rotating => {
            let values = omega_grid.iter().map(|&w| s_x0(w)).collect();
            SpectrumResult::new(omega_grid.to_vec(), values, SpectrumKind::Displacement)
        }
        Frame::Lab => {
            let om = derived.omega_m;
            let minus: Vec<f64> = omega_grid.iter().map(|&w| 0.25 * s_x0(-w - om)).collect();
            let plus: Vec<f64> = omega_grid.iter().map(|&w| 0.25 * s_x0(w - om)).collect();
            let values = minus.iter().zip(&plus).map(|(a, b)| a + b).collect();
            let mut s = SpectrumResult::new(omega_grid.to_vec(), values, SpectrumKind::Displacement);
            s.push_component("peak_minus", minus);
            s.push_component("peak_plus", plus);
            s
        }
    };
    if ba.unstable {
        spectrum.warnings.push(SpectrumWarning::Unstable);
    }
    spectrum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive, fixtures::five_ghz, Scheme};
    use crate::spectrum::linear_grid;
    use proptest::prelude::*;

    fn derived() -> DerivedParams {
        derive(&five_ghz()).unwrap()
    }

    #[test]
    fn green_has_no_optical_damping() {
        let d = derived();
        let ba = back_action(&d, &DriveParams::new(0.0, Scheme::Green), 1e-14);
        assert_eq!(ba.gamma_opt, 0.0);
        let t_eff = (d.t_mech * d.gamma_m + d.t_cavity * ba.gamma_opt_prime) / d.gamma_m;
        assert!((ba.t_eff - t_eff).abs() < 1e-14 * t_eff);
    }

    #[test]
    fn blue_resolved_limit_damping() {
        let mut d = derived();
        d.kappa_t = 0.01 * d.omega_m;
        let ba = back_action(&d, &DriveParams::new(0.0, Scheme::Blue), 1e-14);
        let approx = -4.0 * ba.g2 / d.kappa_t;
        assert!(((ba.gamma_opt - approx) / approx).abs() < 1e-4);
    }

    #[test]
    fn self_energy_consistency_fixed_point() {
        let d = derived();
        let ba = back_action(&d, &DriveParams::new(0.0, Scheme::Custom(0.3 * d.omega_m)), 2e-14);
        let two_m_om = 2.0 * d.mass * d.omega_m;
        assert!((ba.sigma.re / two_m_om - ba.delta_omega_m).abs() < 1e-12 * ba.delta_omega_m.abs());
        assert!((-ba.sigma.im / (d.mass * d.omega_m) - ba.gamma_opt).abs() < 1e-12 * ba.gamma_opt.abs());
    }

    #[test]
    fn force_noise_reconstructs_effective_temperature() {
        // S_L0 + S_δF0 = 8 k_B m Γ_eff T_eff.
        let d = derived();
        for scheme in [Scheme::Red, Scheme::Green, Scheme::Blue] {
            let ba = back_action(&d, &DriveParams::new(0.0, scheme), 1e-15);
            let total = langevin_psd(&d) + ba.s_df0;
            let expected = 8.0 * K_B * d.mass * ba.gamma_eff * ba.t_eff;
            assert!(((total - expected) / expected).abs() < 1e-12);
        }
    }

    #[test]
    fn bare_peak_width_is_gamma_m() {
        let mut d = derived();
        d.coupling_g = 0.0;
        let drive = DriveParams::new(0.0, Scheme::Custom(1234.0));
        let gm = d.gamma_m;
        let s = displacement_psd(&d, &drive, 1e-14, &[0.0, 0.5 * gm], Frame::Rotating);
        assert!((s.values[1] / s.values[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bare_lab_peak_area_is_equipartition() {
        let mut d = derived();
        d.coupling_g = 0.0;
        let drive = DriveParams::new(0.0, Scheme::Green);
        let gm = d.gamma_m;
        let grid = linear_grid(d.omega_m - 200.0 * gm, d.omega_m + 200.0 * gm, 400_001);
        let s = displacement_psd(&d, &drive, 0.0, &grid, Frame::Lab);
        let expected = K_B * d.t_mech / (2.0 * d.mass * d.omega_m.powi(2));
        // Lorentzian tails beyond ±200Γ hold 2/(400π) ≈ 0.16% of the area.
        let area = s.integrated_variance();
        assert!(((area - expected) / expected).abs() < 2e-3, "{area} vs {expected}");
        let tail = 1.0 - 2.0 / std::f64::consts::PI * (400.0f64).atan();
        assert!(((area / (1.0 - tail) - expected) / expected).abs() < 1e-4);
    }

    #[test]
    fn unstable_flagged() {
        let d = derived();
        let gm = d.gamma_m;
        let drive = DriveParams::new(0.0, Scheme::Blue);
        let per_joule = back_action(&d, &drive, 1.0).gamma_opt;
        let e_c = -2.0 * gm / per_joule;
        let s = displacement_psd(&d, &drive, e_c, &[0.0], Frame::Rotating);
        assert!(s.has_warning(SpectrumWarning::Unstable));
    }

    proptest! {
        #[test]
        fn detuning_parity(
            delta_frac in -3.0f64..3.0,
            kappa_frac in 0.01f64..2.0,
            e_c in 1e-18f64..1e-13,
        ) {
            let mut d = derived();
            d.kappa_t = kappa_frac * d.omega_m;
            let delta = delta_frac * d.omega_m;
            let a = back_action(&d, &DriveParams::new(0.0, Scheme::Custom(delta)), e_c);
            let b = back_action(&d, &DriveParams::new(0.0, Scheme::Custom(-delta)), e_c);
            let tol = 1e-12;
            prop_assert!((a.delta_omega_m + b.delta_omega_m).abs() <= tol * a.delta_omega_m.abs().max(1e-300));
            prop_assert!((a.gamma_opt + b.gamma_opt).abs() <= tol * a.gamma_opt.abs().max(1e-300));
            prop_assert!((a.gamma_opt_prime - b.gamma_opt_prime).abs() <= tol * a.gamma_opt_prime);
            prop_assert!(a.gamma_opt_prime >= 0.0 && a.s_df0 >= 0.0);

            // Relative to |Σ|: either part may cancel to nearly zero.
            let two_m_om = 2.0 * d.mass * d.omega_m;
            let scale = a.sigma.norm() / (d.mass * d.omega_m);
            prop_assert!((a.sigma.re / two_m_om - a.delta_omega_m).abs() <= 1e-12 * scale);
            prop_assert!((a.sigma.im / (d.mass * d.omega_m) + a.gamma_opt).abs() <= 1e-12 * scale);
        }
    }
}
