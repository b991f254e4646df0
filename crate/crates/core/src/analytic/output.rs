//! Detected output spectrum and the apparent (cross-correlation) forces.
//!
//! The output PSD is folded onto positive frequencies in W/(rad/s). Around
//! the pump it is split into three windows of full width Ω_m centred on
//! ω_l, ω_p and ω_h. Inside window `n` the cavity noise term and the
//! motional sideband of component `n` are evaluated with the cavity
//! response at the actual output frequency, so the three cavity pieces
//! join into one Lorentzian of width κ_t at ω_c.
//!
//! The same port current noise that sets the detection background also
//! drives the cavity and, through the back-action force, the mechanics.
//! Its correlation with the detected sideband adds, per sideband, an
//! absorptive piece that looks like an extra force noise `S_δFex` plus a
//! small dispersive piece. With `χ` the cavity response and
//! `B = κ_t·T_c·|χ|²·χ − T_ex·χ²`, the absorptive part is
//!
//! ```text
//! S_δFex,l = +2mΩ_m·Γ_eff·k_B·Re(B_l) / (ω_c·|χ_l|²)
//! S_δFex,h = −2mΩ_m·Γ_eff·k_B·Re(B_h) / (ω_c·|χ_h|²)
//! ```
//!
//! which reduces exactly to `2mΓ_eff k_B(2T_c − T_ex)Ω_m/ω_c` (blue, l)
//! and `2mΓ_eff k_B(T_ex − 2T_c)Ω_m/ω_c` (red, h), and to `±2mΓ_m k_B
//! T_ex Ω_m/ω_c` for green pumping in the resolved-sideband limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::backaction::{back_action, langevin_psd, mechanical_susceptibility};
use super::{cavity_response, susceptibilities};
use crate::constants::K_B;
use crate::error::ModelError;
use crate::params::{topology_map, DerivedParams, DriveParams, Scheme};
use crate::spectrum::{SpectrumKind, SpectrumResult, SpectrumWarning};

/// κ_t/Ω_m above which the component windows are flagged as overlapping.
pub const OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sideband {
    /// 'l', at ω_p − Ω_m.
    Lower,
    /// 'h', at ω_p + Ω_m.
    Upper,
}

/// Apparent force noises [N²·s] of the two sidebands; `None` where the
/// scheme leaves that sideband unresolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApparentForces {
    pub s_dfex_l: Option<f64>,
    pub s_dfex_h: Option<f64>,
}

/// Closed-form apparent forces at the three canonical detunings.
pub fn sideband_asymmetry(
    derived: &DerivedParams,
    drive: &DriveParams,
    e_c: f64,
) -> Result<ApparentForces, ModelError> {
    let ratio = derived.omega_m / derived.omega_c;
    let (t_c, t_ex) = (derived.t_cavity, derived.t_external);
    let m = derived.mass;
    match drive.scheme {
        Scheme::Blue => {
            let gamma_eff = back_action(derived, drive, e_c).gamma_eff;
            Ok(ApparentForces {
                s_dfex_l: Some(2.0 * m * gamma_eff * K_B * (2.0 * t_c - t_ex) * ratio),
                s_dfex_h: None,
            })
        }
        Scheme::Red => {
            let gamma_eff = back_action(derived, drive, e_c).gamma_eff;
            Ok(ApparentForces {
                s_dfex_l: None,
                s_dfex_h: Some(2.0 * m * gamma_eff * K_B * (t_ex - 2.0 * t_c) * ratio),
            })
        }
        Scheme::Green => {
            let f = 2.0 * m * derived.gamma_m * K_B * t_ex * ratio;
            Ok(ApparentForces {
                s_dfex_l: Some(f),
                s_dfex_h: Some(-f),
            })
        }
        Scheme::Custom(delta) => Err(ModelError::UnsupportedScheme { delta }),
    }
}

fn correlation_weight(derived: &DerivedParams, chi: Complex64) -> Complex64 {
    derived.kappa_t * derived.t_cavity * chi.norm_sqr() * chi - derived.t_external * chi * chi
}

/// Absorptive apparent force of one sideband at any detuning, with the
/// cavity response taken at the sideband centre.
pub fn apparent_force(derived: &DerivedParams, delta: f64, gamma_eff: f64, sideband: Sideband) -> f64 {
    let chi = susceptibilities(delta, derived.omega_m, derived.kappa_t);
    let (chi, sign) = match sideband {
        Sideband::Lower => (chi.chi_l, 1.0),
        Sideband::Upper => (chi.chi_h, -1.0),
    };
    let b = correlation_weight(derived, chi);
    sign * 2.0 * derived.mass * derived.omega_m * gamma_eff * K_B * b.re / (derived.omega_c * chi.norm_sqr())
}

/// Analytic output PSD with its discrete pump line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpectrum {
    /// Density on the requested absolute-frequency grid, with components
    /// `background`, `cavity`, `sideband_l`, `sideband_h`, `asymmetry_l`
    /// and `asymmetry_h`.
    pub spectrum: SpectrumResult,
    /// Power of the pump line at ω_p [W]; not rasterised onto the grid.
    pub p_pump: f64,
    pub omega_p: f64,
    /// κ_t/Ω_m.
    pub resolution: f64,
}

pub fn output_psd(derived: &DerivedParams, drive: &DriveParams, e_c: f64, omega_grid: &[f64]) -> OutputSpectrum {
    let delta = drive.detuning(derived);
    let om = derived.omega_m;
    let kappa = derived.kappa_t;
    let omega_p = derived.omega_c + delta;
    let kappa_det = topology_map(derived).kappa_detect;
    let ba = back_action(derived, drive, e_c);
    let force = langevin_psd(derived) + ba.s_df0;
    let g2_e = derived.coupling_g.powi(2) * e_c;
    let two_m_om = 2.0 * derived.mass * om;
    let asym_prefactor = 2.0 * e_c * derived.coupling_g.powi(2) * kappa_det * K_B / derived.omega_c;
    let background = 2.0 * K_B * derived.t_external;

    let n = omega_grid.len();
    let mut parts = [
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    for (i, &w) in omega_grid.iter().enumerate() {
        parts[0][i] = background;
        let window = ((w - omega_p) / om + 0.5).floor();
        if !(-1.0..=1.0).contains(&window) {
            continue;
        }
        let chi = cavity_response(w - derived.omega_c, kappa);
        let chi2 = chi.norm_sqr();
        parts[1][i] = kappa_det * K_B * (derived.t_cavity - derived.t_external) * kappa * chi2;
        if window == 0.0 {
            continue;
        }
        let (nu, slot, sign) = if window < 0.0 {
            (omega_p - om - w, 2, 1.0)
        } else {
            (w - omega_p - om, 3, -1.0)
        };
        let chi_m2 = mechanical_susceptibility(derived, ba.sigma, nu).norm_sqr();
        parts[slot][i] = kappa_det * g2_e * chi2 * 0.25 * chi_m2 * force;
        let b = correlation_weight(derived, chi);
        let detuned = two_m_om * (nu - ba.delta_omega_m);
        parts[slot + 2][i] = asym_prefactor * chi_m2 * (detuned * b.im + sign * 0.5 * two_m_om * ba.gamma_eff * b.re);
    }

    let values = (0..n).map(|i| parts.iter().map(|p| p[i]).sum()).collect();
    let mut spectrum = SpectrumResult::new(omega_grid.to_vec(), values, SpectrumKind::OutputPsd);
    let [bg, cav, sl, sh, al, ah] = parts;
    spectrum.push_component("background", bg);
    spectrum.push_component("cavity", cav);
    spectrum.push_component("sideband_l", sl);
    spectrum.push_component("sideband_h", sh);
    spectrum.push_component("asymmetry_l", al);
    spectrum.push_component("asymmetry_h", ah);

    let resolution = kappa / om;
    if resolution > OVERLAP_THRESHOLD {
        spectrum.warnings.push(SpectrumWarning::SidebandOverlap);
    }
    if ba.unstable {
        spectrum.warnings.push(SpectrumWarning::Unstable);
    }

    OutputSpectrum {
        spectrum,
        p_pump: e_c * kappa_det,
        omega_p,
        resolution,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{displacement_psd, Frame};
    use crate::params::{derive, energy_flow, fixtures::five_ghz, Topology};
    use crate::spectrum::{integrate, linear_grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn derived() -> DerivedParams {
        derive(&five_ghz()).unwrap()
    }

    fn around_pump(d: &DerivedParams, delta: f64, n: usize) -> Vec<f64> {
        let wp = d.omega_c + delta;
        linear_grid(wp - 2.0 * d.omega_m, wp + 2.0 * d.omega_m, n)
    }

    #[test]
    fn equal_temperatures_cancel_cavity_term() {
        let mut d = derived();
        d.t_external = 0.07;
        d.t_internal = 0.07;
        d.t_cavity = 0.07;
        let drive = DriveParams::new(0.0, Scheme::Green);
        let out = output_psd(&d, &drive, 1e-15, &around_pump(&d, 0.0, 2001));
        assert!(out.spectrum.component("cavity").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bare_cavity_is_background_plus_lorentzian() {
        let mut d = derived();
        d.coupling_g = 0.0;
        let drive = DriveParams::new(0.0, Scheme::Green);
        let grid = around_pump(&d, 0.0, 4001);
        let out = output_psd(&d, &drive, 1e-15, &grid);
        let bg = 2.0 * K_B * d.t_external;
        let wc = d.omega_c;
        let k = d.kappa_t;
        for (w, v) in grid.iter().zip(&out.spectrum.values) {
            let inside = (w - wc).abs() < 1.5 * d.omega_m;
            let lorentz = d.kappa_ex * K_B * (d.t_cavity - d.t_external) * k / ((w - wc).powi(2) + k * k / 4.0);
            let expected = if inside { bg + lorentz } else { bg };
            assert!((v - expected).abs() <= 1e-12 * expected.abs().max(bg), "{w}");
        }
        // Peak width κ_t at half maximum above background.
        let half = bg + 0.5 * (d.kappa_ex * K_B * (d.t_cavity - d.t_external) * 4.0 / k);
        let at = output_psd(&d, &drive, 1e-15, &[wc + 0.5 * k]);
        assert!((at.spectrum.values[0] - half).abs() < 1e-12 * half);
    }

    #[test]
    fn pump_line_calibration() {
        let d = derived();
        let drive = DriveParams::new(2e-6, Scheme::Custom(0.2 * d.kappa_t));
        let flow = energy_flow(&d, &drive);
        let out = output_psd(&d, &drive, flow.e_c, &[d.omega_c]);
        assert!((out.p_pump - flow.e_c * d.kappa_ex).abs() < 1e-12 * out.p_pump);
        let chi_p2 = susceptibilities(0.2 * d.kappa_t, d.omega_m, d.kappa_t).chi_p.norm_sqr();
        let ratio = out.p_pump / flow.p_in;
        assert!((ratio - d.kappa_ex.powi(2) * chi_p2).abs() < 1e-12 * ratio);
    }

    #[test]
    fn overlap_flagged() {
        let mut d = derived();
        d.kappa_t = 0.6 * d.omega_m;
        let out = output_psd(&d, &DriveParams::new(0.0, Scheme::Green), 0.0, &[d.omega_c]);
        assert!(out.spectrum.has_warning(SpectrumWarning::SidebandOverlap));
    }

    #[test]
    fn canonical_closed_forms() {
        let d = derived();
        let e_c = 1e-16;
        let green = sideband_asymmetry(&d, &DriveParams::new(0.0, Scheme::Green), e_c).unwrap();
        assert_eq!(green.s_dfex_l.unwrap(), -green.s_dfex_h.unwrap());

        let mut cold = d.clone();
        cold.t_external = 0.0;
        let g0 = sideband_asymmetry(&cold, &DriveParams::new(0.0, Scheme::Green), e_c).unwrap();
        assert_eq!((g0.s_dfex_l, g0.s_dfex_h), (Some(0.0), Some(-0.0)));

        let custom = sideband_asymmetry(&d, &DriveParams::new(0.0, Scheme::Custom(1.0)), e_c);
        assert!(matches!(custom, Err(ModelError::UnsupportedScheme { .. })));
    }

    #[test]
    fn general_form_matches_closed_forms() {
        let d = derived();
        let e_c = 1e-16;
        for (scheme, side) in [(Scheme::Blue, Sideband::Lower), (Scheme::Red, Sideband::Upper)] {
            let drive = DriveParams::new(0.0, scheme);
            let ba = back_action(&d, &drive, e_c);
            let general = apparent_force(&d, drive.detuning(&d), ba.gamma_eff, side);
            let closed = sideband_asymmetry(&d, &drive, e_c).unwrap();
            let closed = closed.s_dfex_l.or(closed.s_dfex_h).unwrap();
            assert!(((general - closed) / closed).abs() < 1e-12, "{scheme:?}");
        }
        // Green agrees up to O((κ_t/Ω_m)²) corrections.
        let drive = DriveParams::new(0.0, Scheme::Green);
        let closed = sideband_asymmetry(&d, &drive, e_c).unwrap();
        let r2 = (d.kappa_t / d.omega_m).powi(2);
        for (side, c) in [(Sideband::Lower, closed.s_dfex_l), (Sideband::Upper, closed.s_dfex_h)] {
            let general = apparent_force(&d, 0.0, d.gamma_m, side);
            let c = c.unwrap();
            assert!(((general - c) / c).abs() < 2.0 * r2 * (1.0 + d.t_cavity / d.t_external));
        }
    }

    /// Integrates the sideband windows of the analytic PSD, removing the
    /// cavity and background terms, and returns (σ⁻², σ⁺²) in m².
    fn sideband_variances(d: &DerivedParams, drive: &DriveParams, e_c: f64) -> (f64, f64) {
        let wp = d.omega_c + drive.detuning(d);
        let om = d.omega_m;
        let ba = back_action(d, drive, e_c);
        let half = 2000.0 * ba.gamma_eff.abs().max(d.gamma_m);
        let chi = susceptibilities(drive.detuning(d), om, d.kappa_t);
        let scale = |chi2: f64| 1.0 / (topology_map(d).kappa_detect * d.coupling_g.powi(2) * e_c * chi2);
        let area = |centre: f64, labels: [&str; 2]| {
            let grid = linear_grid(centre - half, centre + half, 400_001);
            let out = output_psd(d, drive, e_c, &grid);
            let s = &out.spectrum;
            let sum: Vec<f64> = (0..grid.len())
                .map(|i| labels.iter().map(|l| s.component(l).unwrap()[i]).sum())
                .collect();
            integrate(&grid, &sum) / (2.0 * PI)
        };
        (
            area(wp - om, ["sideband_l", "asymmetry_l"]) * scale(chi.chi_l.norm_sqr()),
            area(wp + om, ["sideband_h", "asymmetry_h"]) * scale(chi.chi_h.norm_sqr()),
        )
    }

    #[test]
    fn bare_sidebands_reproduce_displacement_variance() {
        let mut d = derived();
        d.t_external = 0.0;
        d.t_internal = 0.0;
        d.t_cavity = 0.0;
        let e_c = 1e-18;
        let drive = DriveParams::new(0.0, Scheme::Green);
        let (lo, hi) = sideband_variances(&d, &drive, e_c);
        let x2 = K_B * d.t_mech / (2.0 * d.mass * d.omega_m.powi(2));
        // Cavity response varies by (Γ/κ)² over the peak; tails clipped at 2000Γ.
        assert!(((lo - x2) / x2).abs() < 1e-3, "{lo} vs {x2}");
        assert!(((hi - x2) / x2).abs() < 1e-3);
        let lab = displacement_psd(&d, &drive, e_c, &linear_grid(-1.0, 1.0, 3), Frame::Lab);
        assert!(lab.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn green_asymmetry_from_spectrum() {
        // Weak pump: σ⁻² − σ⁺² = 2·S_δFex/(4m²Ω_m²Γ_m) = 2 ⟨δx²⟩ (T_ex/T_m)(Ω_m/ω_c).
        let mut d = derived();
        d.t_external = 3.0;
        d.t_internal = 3.0;
        d.t_cavity = 3.0;
        let e_c = 1e-20;
        let drive = DriveParams::new(0.0, Scheme::Green);
        let (lo, hi) = sideband_variances(&d, &drive, e_c);
        let x2 = K_B * d.t_mech / (2.0 * d.mass * d.omega_m.powi(2));
        let predicted = 2.0 * (d.t_external / d.t_mech) * (d.omega_m / d.omega_c);
        let measured = (lo - hi) / x2;
        assert!(
            ((measured - predicted) / predicted).abs() < 2e-3,
            "{measured} vs {predicted}"
        );
    }

    #[test]
    fn blue_red_difference_equals_green_difference() {
        // T_c = T_ex, Γ_opt → 0: the blue-l minus red-h difference matches
        // the green l − h difference.
        let mut d = derived();
        d.t_external = 2.0;
        d.t_internal = 2.0;
        d.t_cavity = 2.0;
        let e_c = 1e-24;
        let forces = |scheme| sideband_asymmetry(&d, &DriveParams::new(0.0, scheme), e_c).unwrap();
        let (blue, red, green) = (forces(Scheme::Blue), forces(Scheme::Red), forces(Scheme::Green));
        let br = blue.s_dfex_l.unwrap() - red.s_dfex_h.unwrap();
        let gg = green.s_dfex_l.unwrap() - green.s_dfex_h.unwrap();
        assert!(((br - gg) / gg).abs() < 1e-6);
    }

    #[test]
    fn bidirectional_uses_half_coupling() {
        let mut c = five_ghz();
        c.topology = Topology::Bidirectional;
        let d = derive(&c).unwrap();
        let out = output_psd(&d, &DriveParams::new(0.0, Scheme::Green), 1e-15, &[d.omega_c]);
        assert!((out.p_pump - 1e-15 * 0.5 * d.kappa_ex).abs() < 1e-27);
    }

    proptest! {
        #[test]
        fn total_is_non_negative(
            t_m in 0.0f64..1.0,
            t_in in 0.0f64..5.0,
            t_ex in 0.0f64..5.0,
            delta_frac in -1.2f64..1.2,
            e_exp in -20.0f64..-15.0,
            offset in -2.0f64..2.0,
        ) {
            let mut c = five_ghz();
            c.t_mech = t_m;
            c.t_internal = t_in;
            c.t_external = t_ex;
            let d = derive(&c).unwrap();
            let drive = DriveParams::new(0.0, Scheme::Custom(delta_frac * d.omega_m));
            let e_c = 10f64.powf(e_exp);
            let ba = back_action(&d, &drive, e_c);
            prop_assume!(ba.gamma_eff > 0.0);
            let wp = d.omega_c + drive.detuning(&d);
            // Sample on the carrier scale and around each sideband.
            let mut grid: Vec<f64> = (0..200).map(|i| wp + (offset + 0.001 * i as f64) * d.omega_m).collect();
            for centre in [wp - d.omega_m, wp + d.omega_m] {
                grid.extend((0..200).map(|i| centre + (offset + 0.01 * i as f64) * ba.gamma_eff));
            }
            grid.sort_by(f64::total_cmp);
            let out = output_psd(&d, &drive, e_c, &grid);
            let s = &out.spectrum;
            for (i, w) in grid.iter().enumerate() {
                prop_assert!(s.values[i] >= 0.0, "total negative at {}", w);
                prop_assert!(s.component("background").unwrap()[i] >= 0.0);
                prop_assert!(s.component("sideband_l").unwrap()[i] >= 0.0);
                prop_assert!(s.component("sideband_h").unwrap()[i] >= 0.0);
            }
        }
    }
}
