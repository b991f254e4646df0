//! Displacement readout: imprecision, signal and noise of the integrated
//! sidebands, and the standard classical limit (SCL) of the green scheme.

use serde::{Deserialize, Serialize};

use super::backaction::back_action;
use super::output::{apparent_force, Sideband};
use super::susceptibilities;
use crate::constants::{HBAR, K_B};
use crate::error::ModelError;
use crate::params::{energy_for_population, populations, DerivedParams, DriveParams, Scheme};

/// Relative mismatch of n_ex_th and n_c_th tolerated by the closed form.
const THERMAL_MATCH_TOL: f64 = 1e-9;

/// Imprecision noise `S_imp = κ_t²·n_det/(16G²·n_c·κ_ex)·(1 + 4ω²/κ_t²)` [m²·s],
/// with ω the sideband offset from the cavity centre.
pub fn imprecision_psd(derived: &DerivedParams, n_c: f64, n_det: f64, omega: f64) -> Result<f64, ModelError> {
    if n_c == 0.0 {
        return Err(ModelError::ZeroDrive);
    }
    if !(n_c > 0.0) || !(n_det >= 1.0) {
        return Err(ModelError::InvalidArgument(format!(
            "imprecision needs n_c > 0 and n_det >= 1, got n_c = {n_c}, n_det = {n_det}"
        )));
    }
    let k = derived.kappa_t;
    let g2 = derived.coupling_g.powi(2);
    Ok(k * k * n_det / (16.0 * g2 * n_c * derived.kappa_ex) * (1.0 + 4.0 * omega * omega / (k * k)))
}

/// Integrated signal and noise of one sideband, in J·s⁻¹·m² (common
/// prefactor `ħω_c|χ_i|²κ_ex` included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalNoiseTerm {
    pub signal: f64,
    pub noise: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalNoise {
    pub lower: SignalNoiseTerm,
    pub upper: SignalNoiseTerm,
    /// Mean of the two sidebands, insensitive to the asymmetry terms in
    /// the green scheme.
    pub combined: SignalNoiseTerm,
    pub unstable: bool,
}

fn term(signal: f64, noise: f64) -> SignalNoiseTerm {
    SignalNoiseTerm {
        signal,
        noise,
        ratio: signal / noise,
    }
}

/// Signal and noise of each sideband integrated over `delta_omega` [rad/s].
/// For the green scheme Γ_eff = Γ_m and `|χ_l|² + |χ_h|² = 2/Ω_m²` are
/// substituted.
pub fn signal_noise(
    derived: &DerivedParams,
    drive: &DriveParams,
    e_c: f64,
    n_det: f64,
    delta_omega: f64,
) -> SignalNoise {
    let delta = drive.detuning(derived);
    let om = derived.omega_m;
    let k = derived.kappa_t;
    let pops = populations(derived, e_c);
    let ba = back_action(derived, drive, e_c);
    let chi = susceptibilities(delta, om, k);
    let green = matches!(drive.scheme, Scheme::Green);

    let (gamma_eff, chi_sum) = if green {
        (derived.gamma_m, 2.0 / (om * om))
    } else {
        (ba.gamma_eff, chi.chi_l.norm_sqr() + chi.chi_h.norm_sqr())
    };
    let x_zpf2 = derived.x_zpf * derived.x_zpf;
    let g2 = derived.coupling_g.powi(2);
    let dx2 = K_B * derived.t_mech / (2.0 * derived.mass * om * om);
    let motion = dx2 * derived.gamma_m / gamma_eff;
    let back_action_noise =
        g2 * g2 * pops.n_c.powi(2) * x_zpf2 * x_zpf2 * k / derived.gamma_m * pops.n_c_th * chi_sum * derived.gamma_m
            / gamma_eff;
    let quantum = HBAR * derived.omega_c;
    let force_scale = (2.0 * derived.mass * om).powi(2) * gamma_eff;

    let side = |sideband: Sideband, chi2: f64, offset: f64| {
        let s_fex = apparent_force(derived, delta, gamma_eff, sideband);
        let prefactor = quantum * chi2 * derived.kappa_ex;
        let signal = prefactor * g2 * pops.n_c * (motion + s_fex / force_scale);
        let imprecision = n_det * k / (16.0 * derived.kappa_ex) * (1.0 + 4.0 * offset * offset / (k * k)) + pops.n_c_th
            - pops.n_ex_th;
        let noise = prefactor * (k * delta_omega / (2.0 * std::f64::consts::PI) * imprecision + back_action_noise);
        term(signal, noise)
    };
    let lower = side(Sideband::Lower, chi.chi_l.norm_sqr(), delta - om);
    let upper = side(Sideband::Upper, chi.chi_h.norm_sqr(), delta + om);
    let combined = term(0.5 * (lower.signal + upper.signal), 0.5 * (lower.noise + upper.noise));
    SignalNoise {
        lower,
        upper,
        combined,
        unstable: ba.unstable,
    }
}

/// Inverse green-scheme ratio `N_oise/S_ig` of the combined sidebands at
/// each intracavity population in `n_c_grid`.
pub fn scan_inverse_ratio(derived: &DerivedParams, n_det: f64, delta_omega: f64, n_c_grid: &[f64]) -> Vec<f64> {
    let drive = DriveParams::new(0.0, Scheme::Green);
    n_c_grid
        .iter()
        .map(|&n_c| {
            let sn = signal_noise(derived, &drive, energy_for_population(derived, n_c), n_det, delta_omega);
            1.0 / sn.combined.ratio
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SclOptimum {
    pub n_c_star: f64,
    pub ratio_star: f64,
    /// Set when n_ex_th ≠ n_c_th and the optimum comes from a numerical scan.
    pub from_scan: bool,
}

/// Closed-form green-scheme optimum, valid for n_ex_th = n_c_th in the
/// resolved-sideband limit.
pub fn closed_form_optimum(derived: &DerivedParams, n_det: f64, delta_omega: f64) -> (f64, f64) {
    let pops = populations(derived, 0.0);
    let gm = derived.gamma_m;
    let k = derived.kappa_t;
    let coupling_ratio = gm * derived.omega_m.powi(2) / (k * derived.g0 * derived.g0);
    let n_c_star = 1.0 / (4.0 * std::f64::consts::PI.sqrt())
        * (delta_omega / gm).sqrt()
        * (k / derived.kappa_ex).sqrt()
        * (n_det / pops.n_c_th).sqrt()
        * coupling_ratio;
    let ratio_star = reference_ratio(pops.n_m_th, pops.n_c_th, n_det, derived.kappa_ex / k, delta_omega / gm);
    (n_c_star, ratio_star)
}

fn reference_ratio(n_m_th: f64, n_c_th: f64, n_det: f64, kappa_ex_over_t: f64, bandwidth_over_gamma: f64) -> f64 {
    n_m_th / (n_det * 2.0 * n_c_th).sqrt()
        * (2.0 * std::f64::consts::PI).sqrt()
        * kappa_ex_over_t.sqrt()
        * bandwidth_over_gamma.recip().sqrt()
}

/// Closed-form ratio at the T → 0 reference point: n_det = 1 and
/// n_c_th = n_m_th = 1/2.
pub fn quantum_reference_ratio(kappa_t_over_ex: f64, bandwidth_over_gamma: f64) -> f64 {
    reference_ratio(0.5, 0.5, 1.0, kappa_t_over_ex.recip(), bandwidth_over_gamma)
}

/// SCL optimum of the green scheme: closed form when n_ex_th = n_c_th,
/// numerical minimisation of [`scan_inverse_ratio`] otherwise.
pub fn scl_optimum(derived: &DerivedParams, n_det: f64, delta_omega: f64) -> SclOptimum {
    let pops = populations(derived, 0.0);
    let matched = (pops.n_ex_th - pops.n_c_th).abs() <= THERMAL_MATCH_TOL * pops.n_c_th.abs().max(f64::MIN_POSITIVE);
    if matched {
        let (n_c_star, ratio_star) = closed_form_optimum(derived, n_det, delta_omega);
        return SclOptimum {
            n_c_star,
            ratio_star,
            from_scan: false,
        };
    }
    let (n_c_star, inverse) = minimise_inverse_ratio(derived, n_det, delta_omega);
    SclOptimum {
        n_c_star,
        ratio_star: 1.0 / inverse,
        from_scan: true,
    }
}

/// Coarse log scan followed by golden-section refinement in log n_c.
fn minimise_inverse_ratio(derived: &DerivedParams, n_det: f64, delta_omega: f64) -> (f64, f64) {
    let f = |log_n: f64| scan_inverse_ratio(derived, n_det, delta_omega, &[10f64.powf(log_n)])[0];
    let (lo, hi, steps) = (-3.0, 16.0, 381);
    let step = (hi - lo) / (steps - 1) as f64;
    let best = (0..steps)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(lo);
    let (mut a, mut b) = (best - step, best + step);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while b - a > 1e-10 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let x = 0.5 * (a + b);
    (10f64.powf(x), f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::lab_force_psd;
    use crate::params::{derive, fixtures::five_ghz, RateDesign};
    use proptest::prelude::*;

    fn derived() -> DerivedParams {
        derive(&five_ghz()).unwrap()
    }

    #[test]
    fn imprecision_trivial_cases() {
        let mut d = derived();
        d.kappa_ex = d.kappa_t;
        let s = imprecision_psd(&d, 1e4, 1.0, 0.0).unwrap();
        let expected = d.kappa_t / (16.0 * d.coupling_g.powi(2) * 1e4);
        assert!(((s - expected) / expected).abs() < 1e-14);
        let doubled = imprecision_psd(&d, 2e4, 1.0, 0.0).unwrap();
        assert!((doubled / s - 0.5).abs() < 1e-14);
        assert!(matches!(imprecision_psd(&d, 0.0, 1.0, 0.0), Err(ModelError::ZeroDrive)));
        assert!(imprecision_psd(&d, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn heisenberg_product_green() {
        let d = derived();
        let n_c = 3.7e5;
        let e_c = energy_for_population(&d, n_c);
        let ba = back_action(&d, &DriveParams::new(0.0, Scheme::Green), e_c);
        let n_det = 42.0;
        let s_imp = imprecision_psd(&d, n_c, n_det, d.omega_m).unwrap();
        let pops = populations(&d, e_c);
        let expected = HBAR * HBAR / 4.0 * d.kappa_t / d.kappa_ex * 2.0 * pops.n_c_th * n_det;
        let product = s_imp * lab_force_psd(&ba);
        assert!(
            ((product - expected) / expected).abs() < 1e-12,
            "{product} vs {expected}"
        );
    }

    /// Resolved-sideband readout reference device, κ_t/Ω_m = 0.01.
    fn reference_set() -> DerivedParams {
        let omega_c = 2.0 * std::f64::consts::PI * 6e9;
        let omega_m = 2.0 * std::f64::consts::PI * 5e6;
        let gamma_m = 2.0 * std::f64::consts::PI * 10.0;
        let kappa = 0.01 * omega_m;
        let n_c_th = 6e3;
        let n_m_th = 6e5;
        let t_c = n_c_th * HBAR * omega_c / K_B;
        let t_m = n_m_th * HBAR * omega_m / K_B;
        let mass = 1e-15;
        let g0_sq = gamma_m * omega_m * omega_m / (kappa * 1.6e8);
        let x_zpf2 = HBAR / (2.0 * mass * omega_m);
        let design = RateDesign {
            omega_c,
            kappa_ex: kappa * (1.0 - 1e-9),
            kappa_in: kappa * 1e-9,
            z0: 50.0,
            c_total: 1e-12,
            gate_fraction: 0.1,
            coupling_g: (g0_sq / x_zpf2).sqrt(),
            mass,
            omega_m,
            gamma_m,
            t_mech: t_m,
            t_internal: t_c,
            t_external: t_c,
            n_det: 100.0,
        };
        derive(&design.to_circuit()).unwrap()
    }

    #[test]
    fn reference_optimum_closed_form_and_scan() {
        let d = reference_set();
        let dw = 6.0 * d.gamma_m;
        let opt = scl_optimum(&d, 100.0, dw);
        assert!(!opt.from_scan);
        assert!(((opt.n_c_star - 7.14e6) / 7.14e6).abs() < 0.01, "{}", opt.n_c_star);
        assert!(((opt.ratio_star - 560.5) / 560.5).abs() < 0.01, "{}", opt.ratio_star);
        let (n_scan, inv) = minimise_inverse_ratio(&d, 100.0, dw);
        assert!(((n_scan - opt.n_c_star) / opt.n_c_star).abs() < 0.1);
        assert!(((1.0 / inv - opt.ratio_star) / opt.ratio_star).abs() < 0.1);
    }

    #[test]
    fn optimum_scaling_with_detector() {
        let d = reference_set();
        let dw = 6.0 * d.gamma_m;
        let (n1, r1) = closed_form_optimum(&d, 100.0, dw);
        let (n4, r4) = closed_form_optimum(&d, 400.0, dw);
        assert!((n4 / n1 - 2.0).abs() < 1e-12);
        assert!((r4 / r1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantum_reference_near_half() {
        let r = quantum_reference_ratio(1.0, 6.0);
        assert!((r - 0.5117).abs() < 1e-3, "{r}");
    }

    #[test]
    fn mismatched_thermal_populations_use_scan() {
        let mut d = reference_set();
        d.t_external *= 0.5;
        let opt = scl_optimum(&d, 100.0, 6.0 * d.gamma_m);
        assert!(opt.from_scan);
        let grid: Vec<f64> = [0.5, 0.9, 1.1, 2.0].iter().map(|f| f * opt.n_c_star).collect();
        let inv = scan_inverse_ratio(&d, 100.0, 6.0 * d.gamma_m, &grid);
        assert!(inv.iter().all(|v| *v > 1.0 / opt.ratio_star));
    }

    #[test]
    fn ratio_branches() {
        let d = reference_set();
        let dw = 6.0 * d.gamma_m;
        let inv = scan_inverse_ratio(&d, 100.0, dw, &[1.0, 10.0, 1e13, 1e14]);
        // Imprecision-dominated: inverse ratio ∝ 1/n_c; back-action: ∝ n_c.
        assert!((inv[0] / inv[1] - 10.0).abs() < 1e-3);
        assert!((inv[3] / inv[2] - 10.0).abs() < 1e-3);
    }

    #[test]
    fn green_asymmetry_cancels_in_mean() {
        let d = derived();
        let sn = signal_noise(&d, &DriveParams::new(0.0, Scheme::Green), 1e-16, 100.0, 6.0 * d.gamma_m);
        let chi = susceptibilities(0.0, d.omega_m, d.kappa_t);
        let bare = HBAR
            * d.omega_c
            * chi.chi_l.norm_sqr()
            * d.kappa_ex
            * d.coupling_g.powi(2)
            * populations(&d, 1e-16).n_c
            * K_B
            * d.t_mech
            / (2.0 * d.mass * d.omega_m.powi(2));
        assert!(sn.lower.signal > sn.upper.signal);
        assert!(((sn.combined.signal - bare) / bare).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn heisenberg_product_independent_of_drive_and_coupling(
            n_c in 1.0f64..1e9,
            g_scale in 0.1f64..10.0,
            ex_frac in 0.05f64..1.0,
        ) {
            let mut d = derived();
            d.coupling_g *= g_scale;
            d.kappa_ex = ex_frac * d.kappa_t;
            let e_c = energy_for_population(&d, n_c);
            let ba = back_action(&d, &DriveParams::new(0.0, Scheme::Green), e_c);
            let s_imp = imprecision_psd(&d, n_c, 7.0, d.omega_m).unwrap();
            let n_c_th = populations(&d, e_c).n_c_th;
            let expected = HBAR * HBAR / 4.0 / ex_frac * 2.0 * n_c_th * 7.0;
            prop_assert!(((s_imp * lab_force_psd(&ba) - expected) / expected).abs() < 1e-9);
        }
    }
}
