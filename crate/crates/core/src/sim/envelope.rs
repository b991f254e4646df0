//! Reconstruction of the detected output from the component envelopes.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::trace::TimeTrace;
use super::SimError;

/// Removes every Fourier component with `|ω| ≥ cutoff` [rad/s].
pub fn band_limit(samples: &[Complex64], dt: f64, cutoff: f64) -> Vec<Complex64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let step = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    for (k, c) in buf.iter_mut().enumerate() {
        let index = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        if (index * step).abs() >= cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    buf
}

/// Detected output as a complex envelope around ω_p, in the usual signal
/// processing sign convention: a positive frequency ν of the returned
/// series is the absolute frequency ω_p + ν.
///
/// Each `v_n` is band-limited to its window `|ν| < Ω_m/2` before the three
/// are combined, so the windows tile the band without overlap.
pub fn output_envelope(trace: &TimeTrace) -> Result<Vec<Complex64>, SimError> {
    let get = |name: &str| {
        trace
            .complex(name)
            .ok_or_else(|| SimError::InvalidConfig(format!("trace has no complex channel {name}")))
    };
    let om = trace.meta.omega_m;
    let sampling = 2.0 * std::f64::consts::PI / trace.dt;
    if sampling < 3.0 * om {
        return Err(SimError::InvalidConfig(
            "recorded sampling rate is too low to hold the three output windows".into(),
        ));
    }
    let cutoff = 0.5 * om;
    let v_l = band_limit(get("v_l")?, trace.dt, cutoff);
    let v_p = band_limit(get("v_p")?, trace.dt, cutoff);
    let v_h = band_limit(get("v_h")?, trace.dt, cutoff);
    Ok((0..trace.len())
        .map(|k| {
            let rot = Complex64::from_polar(1.0, om * k as f64 * trace.dt);
            // Physical envelopes rotate as e^{-iνt}; conjugate to the DSP convention.
            (v_p[k] + v_l[k] * rot + v_h[k] * rot.conj()).conj()
        })
        .collect())
}

/// Factor turning the envelope spectrum [V²·s] into detected power
/// density [W/(rad/s)].
pub fn output_psd_scale(trace: &TimeTrace) -> f64 {
    1.0 / (2.0 * trace.meta.z0)
}

/// Complex amplitude `a` of `Re(a·e^{−iωt})` in a real record, estimated by
/// projection over the whole record (which should span whole periods of
/// every other tone present).
pub fn demodulate(signal: &[f64], dt: f64, omega: f64) -> Complex64 {
    let n = signal.len() as f64;
    let sum: Complex64 = signal
        .iter()
        .enumerate()
        .map(|(k, s)| Complex64::from_polar(*s, omega * k as f64 * dt))
        .sum();
    sum * (2.0 / n)
}
