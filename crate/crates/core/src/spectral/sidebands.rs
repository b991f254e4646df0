use serde::{Deserialize, Serialize};

use super::welch::{welch_psd, Window};
use super::SpectralError;
use crate::analytic::{back_action, cavity_response, OVERLAP_THRESHOLD};
use crate::params::{energy_flow, topology_map, DerivedParams, DriveParams};
use crate::sim::{output_envelope, output_psd_scale, TimeTrace};
use crate::spectrum::{SpectrumKind, SpectrumResult};

/// Half-width of the region around each peak left out of the baseline
/// fit, in units of the peak's FWHM.
pub const EXCLUSION_WIDTHS: f64 = 10.0;

/// Detected PSD [W/(rad/s)] of a rotating-frame trace on an absolute
/// frequency grid centred on the pump.
pub fn output_spectrum(
    trace: &TimeTrace,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<SpectrumResult, SpectralError> {
    let envelope = output_envelope(trace)?;
    let mut s = welch_psd(&envelope, trace.dt, segment_length, overlap, window)?;
    let scale = output_psd_scale(trace);
    s.omega.iter_mut().for_each(|w| *w += trace.meta.omega_p);
    s.values.iter_mut().for_each(|v| *v *= scale);
    s.kind = SpectrumKind::OutputPsd;
    Ok(s)
}

/// Motional sideband powers expressed as displacement variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandAreas {
    /// Lower sideband (at ω_p − Ω_m) [m²].
    pub sigma2_minus: f64,
    /// Upper sideband (at ω_p + Ω_m) [m²].
    pub sigma2_plus: f64,
    /// Flat floor of the fitted baseline [W/(rad/s)].
    pub background: f64,
    /// Weight of the cavity-filtered term `κ_t·|χ(ω)|²` in the baseline.
    pub cavity_weight: f64,
}

/// Integrates the detected PSD over the windows `|ω − (ω_p ∓ Ω_m)| < Ω_m/2`
/// after removing a baseline `b + a·κ_t|χ(ω)|²`, and divides each area by
/// its transduction `κ_det·G²·E_c·|χ_∓|²`.
///
/// The baseline is fitted by least squares on bins away from the motional
/// peaks and the pump, then its floor is replaced by the median of the
/// remaining residual. The result is linear in the spectrum.
pub fn sideband_areas(
    spectrum: &SpectrumResult,
    derived: &DerivedParams,
    drive: &DriveParams,
) -> Result<SidebandAreas, SpectralError> {
    let om = derived.omega_m;
    let kappa = derived.kappa_t;
    if kappa / om > OVERLAP_THRESHOLD {
        return Err(SpectralError::OverlapError(format!(
            "kappa_t/Omega_m = {:.3} exceeds {OVERLAP_THRESHOLD}",
            kappa / om
        )));
    }
    let e_c = energy_flow(derived, drive).e_c;
    let ba = back_action(derived, drive, e_c);
    if ba.unstable {
        return Err(SpectralError::InvalidArgument(
            "no stationary sidebands: the drive is unstable".into(),
        ));
    }
    let exclusion = EXCLUSION_WIDTHS * ba.gamma_eff;
    if exclusion > 0.5 * om {
        return Err(SpectralError::OverlapError(format!(
            "motional peaks of width {:.3e} rad/s spill out of their {:.3e} rad/s windows",
            ba.gamma_eff, om
        )));
    }
    if spectrum.len() < 2 {
        return Err(SpectralError::InvalidArgument("empty spectrum".into()));
    }

    let delta = drive.detuning(derived);
    let omega_p = derived.omega_c + delta;
    let centres = [omega_p - om, omega_p + om];
    let peaks = [omega_p - om - ba.delta_omega_m, omega_p + om + ba.delta_omega_m];
    let bin = (spectrum.omega[1] - spectrum.omega[0]).abs();
    let pump_guard = exclusion.max(4.0 * bin);
    let shape: Vec<f64> = spectrum
        .omega
        .iter()
        .map(|w| kappa * cavity_response(w - derived.omega_c, kappa).norm_sqr())
        .collect();

    let in_window = |w: f64, n: usize| (w - centres[n]).abs() < 0.5 * om;
    let fit_bins: Vec<usize> = (0..spectrum.len())
        .filter(|&i| {
            let w = spectrum.omega[i];
            (in_window(w, 0) || in_window(w, 1))
                && peaks.iter().all(|p| (w - p).abs() >= exclusion)
                && (w - omega_p).abs() >= pump_guard
        })
        .collect();
    if fit_bins.len() < 4 {
        return Err(SpectralError::InvalidArgument(
            "spectrum does not resolve the sideband windows".into(),
        ));
    }

    // Least squares for (b, a).
    let n = fit_bins.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &i in &fit_bins {
        let (x, y) = (shape[i], spectrum.values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let cavity_weight = if det > 1e-9 * n * sxx {
        (n * sxy - sx * sy) / det
    } else {
        0.0
    };
    let mut residual: Vec<f64> = fit_bins
        .iter()
        .map(|&i| spectrum.values[i] - cavity_weight * shape[i])
        .collect();
    residual.sort_by(f64::total_cmp);
    let m = residual.len();
    let background = if m % 2 == 1 {
        residual[m / 2]
    } else {
        0.5 * (residual[m / 2 - 1] + residual[m / 2])
    };

    let kappa_det = topology_map(derived).kappa_detect;
    let transduction = kappa_det * derived.coupling_g.powi(2) * e_c;
    if !(transduction > 0.0) {
        return Err(SpectralError::InvalidArgument(
            "no pump: sidebands carry no displacement signal".into(),
        ));
    }
    let area = |n: usize| {
        let sum: f64 = (0..spectrum.len())
            .filter(|&i| in_window(spectrum.omega[i], n))
            .map(|i| spectrum.values[i] - background - cavity_weight * shape[i])
            .sum();
        sum * bin / (2.0 * std::f64::consts::PI)
    };
    let chi2 = |offset: f64| cavity_response(offset, kappa).norm_sqr();
    Ok(SidebandAreas {
        sigma2_minus: area(0) / (transduction * chi2(delta - om)),
        sigma2_plus: area(1) / (transduction * chi2(delta + om)),
        background,
        cavity_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::output_psd;
    use crate::constants::K_B;
    use crate::params::{derive, fixtures::five_ghz, Scheme};
    use crate::spectrum::linear_grid;
    use proptest::prelude::*;

    fn analytic(d: &DerivedParams, drive: &DriveParams, points: usize) -> SpectrumResult {
        let e_c = energy_flow(d, drive).e_c;
        let wp = d.omega_c + drive.detuning(d);
        let grid = linear_grid(wp - 1.5 * d.omega_m, wp + 1.5 * d.omega_m, points);
        output_psd(d, drive, e_c, &grid).spectrum
    }

    fn bare() -> DerivedParams {
        let mut c = five_ghz();
        c.gamma_m = 2.0 * std::f64::consts::PI * 2000.0;
        let mut d = derive(&c).unwrap();
        d.t_internal = 0.3;
        d.t_cavity = 0.3;
        d
    }

    #[test]
    fn weak_pump_recovers_thermal_variance() {
        let d = bare();
        let drive = DriveParams::new(1e-6, Scheme::Green);
        let s = analytic(&d, &drive, 2_000_001);
        let a = sideband_areas(&s, &d, &drive).unwrap();
        let x2 = K_B * d.t_mech / (2.0 * d.mass * d.omega_m.powi(2));
        let asym = (d.t_external / d.t_mech) * (d.omega_m / d.omega_c);
        // Lorentzian tails outside the windows and inside the baseline bins.
        assert!(
            (a.sigma2_minus / x2 - (1.0 + asym)).abs() < 0.03,
            "{}",
            a.sigma2_minus / x2
        );
        assert!(
            (a.sigma2_plus / x2 - (1.0 - asym)).abs() < 0.03,
            "{}",
            a.sigma2_plus / x2
        );
        assert!((a.background / (2.0 * K_B * d.t_external) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn wide_cavity_is_rejected() {
        let mut d = bare();
        d.kappa_t = 0.8 * d.omega_m;
        let drive = DriveParams::new(1e-6, Scheme::Green);
        let s = analytic(&bare(), &drive, 1001);
        assert!(matches!(
            sideband_areas(&s, &d, &drive),
            Err(SpectralError::OverlapError(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn areas_scale_linearly(exponent in -20i32..20, mantissa in 1.0f64..2.0) {
            let factor = mantissa * 2f64.powi(exponent);
            let d = bare();
            // A strong pump keeps the sidebands well above the rounding of the floor.
            let drive = DriveParams::new(1e-3, Scheme::Green);
            let s = analytic(&d, &drive, 200_001);
            let a = sideband_areas(&s, &d, &drive).unwrap();
            let b = sideband_areas(&s.scaled(factor), &d, &drive).unwrap();
            prop_assert!((b.sigma2_minus / (factor * a.sigma2_minus) - 1.0).abs() < 1e-9);
            prop_assert!((b.sigma2_plus / (factor * a.sigma2_plus) - 1.0).abs() < 1e-9);
        }
    }
}
