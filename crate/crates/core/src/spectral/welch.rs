use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::spectrum::{SpectrumKind, SpectrumResult};

/// Fewest averaged segments accepted by [`welch_psd`].
pub const MIN_SEGMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // Periodic Hann, exact for overlapped averaging.
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Averaged periodogram of a complex record sampled every `dt` seconds.
///
/// Segments of `segment_length` samples advance by
/// `segment_length·(1 − overlap)`. The grid runs from `−π/dt` upwards in
/// steps of `2π/(segment_length·dt)`.
pub fn welch_psd(
    samples: &[Complex64],
    dt: f64,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<SpectrumResult, SpectralError> {
    if segment_length < 2 {
        return Err(SpectralError::InvalidArgument(
            "segment_length must be at least 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(SpectralError::InvalidArgument(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    if !(dt > 0.0) {
        return Err(SpectralError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = segment_length;
    let hop = ((n as f64 * (1.0 - overlap)).round() as usize).max(1);
    let segments = if samples.len() >= n {
        (samples.len() - n) / hop + 1
    } else {
        0
    };
    if segments < MIN_SEGMENTS {
        return Err(SpectralError::TooShort { segments });
    }

    let w = window.weights(n);
    let power: f64 = w.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..segments {
        let seg = &samples[s * hop..s * hop + n];
        for ((b, x), wk) in buf.iter_mut().zip(seg).zip(&w) {
            *b = x * wk;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = dt / (n as f64 * power * segments as f64);
    let step = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let half = n / 2;
    // Reorder so that frequencies increase from the most negative bin.
    let (omega, values) = (0..n)
        .map(|i| {
            let k = (i + n - half) % n;
            let index = i as f64 - half as f64;
            (index * step, acc[k] * norm)
        })
        .unzip();
    Ok(SpectrumResult::new(omega, values, SpectrumKind::Estimate))
}

/// [`welch_psd`] of a real record; the result is even in ω.
pub fn welch_psd_real(
    samples: &[f64],
    dt: f64,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<SpectrumResult, SpectralError> {
    let z: Vec<Complex64> = samples.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    welch_psd(&z, dt, segment_length, overlap, window)
}
