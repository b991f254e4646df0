use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::spectrum::SpectrumResult;

const MAX_ITERATIONS: usize = 200;
/// Reweighting passes after the unweighted start.
const REWEIGHT_PASSES: usize = 3;

/// Lorentzian peak on a flat floor,
/// `offset + (area/π)·(fwhm/2)/((ω − center)² + (fwhm/2)²)`, so that
/// `area/(2π)` is the variance under the peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub center: f64,
    pub fwhm: f64,
    pub area: f64,
    pub offset: f64,
    /// Parameter covariance in the order (center, fwhm, area, offset).
    pub covariance: [[f64; 4]; 4],
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    fn failed() -> Self {
        Self {
            center: f64::NAN,
            fwhm: f64::NAN,
            area: f64::NAN,
            offset: f64::NAN,
            covariance: [[f64::NAN; 4]; 4],
            converged: false,
            iterations: 0,
        }
    }

    pub fn std_errors(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.covariance[i][i].sqrt())
    }

    pub fn eval(&self, omega: f64) -> f64 {
        lorentzian(omega, self.center, self.fwhm, self.area, self.offset)
    }
}

pub fn lorentzian(omega: f64, center: f64, fwhm: f64, area: f64, offset: f64) -> f64 {
    let h = 0.5 * fwhm;
    let u = omega - center;
    offset + area / std::f64::consts::PI * h / (u * u + h * h)
}

/// Model value and gradient in normalised coordinates.
fn model(x: f64, p: &Vector4<f64>) -> (f64, Vector4<f64>) {
    let (c, gamma, a, _) = (p[0], p[1], p[2], p[3]);
    let h = 0.5 * gamma;
    let u = x - c;
    let d = u * u + h * h;
    let pi = std::f64::consts::PI;
    let value = p[3] + a * h / (pi * d);
    let grad = Vector4::new(
        a * h / pi * 2.0 * u / (d * d),
        a / (2.0 * pi) * (u * u - h * h) / (d * d),
        h / (pi * d),
        1.0,
    );
    (value, grad)
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn chi2(&self, p: &Vector4<f64>) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((x, y), w)| w * (y - model(*x, p).0).powi(2))
            .sum()
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((x, y), w) in self.x.iter().zip(self.y).zip(&self.w) {
            let (f, g) = model(*x, p);
            jtj += g * g.transpose() * *w;
            jtr += g * (*w * (y - f));
        }
        (jtj, jtr)
    }

    /// Levenberg–Marquardt from `p`; returns the optimum and iteration count.
    fn solve(&self, mut p: Vector4<f64>) -> Option<(Vector4<f64>, usize)> {
        let mut lambda = 1e-3;
        let mut chi2 = self.chi2(&p);
        for it in 1..=MAX_ITERATIONS {
            let (jtj, jtr) = self.normal_equations(&p);
            let mut accepted = None;
            while lambda < 1e12 {
                let mut a = jtj;
                for i in 0..4 {
                    a[(i, i)] *= 1.0 + lambda;
                    if a[(i, i)] == 0.0 {
                        a[(i, i)] = lambda;
                    }
                }
                let mut step = a.lu().solve(&jtr)?;
                if p[3] <= 0.0 && step[3] < 0.0 {
                    // Floor held at zero: solve for the peak parameters alone.
                    let mut b = jtr;
                    for i in 0..4 {
                        a[(3, i)] = 0.0;
                        a[(i, 3)] = 0.0;
                    }
                    a[(3, 3)] = 1.0;
                    b[3] = 0.0;
                    step = a.lu().solve(&b)?;
                }
                let mut trial = p + step;
                trial[1] = trial[1].abs();
                // A density has no negative floor.
                trial[3] = trial[3].max(0.0);
                let c2 = self.chi2(&trial);
                if c2.is_finite() && c2 <= chi2 {
                    accepted = Some((trial, c2, trial - p));
                    lambda = (lambda * 0.3).max(1e-12);
                    break;
                }
                lambda *= 10.0;
            }
            // No damped step lowers χ²: p is already stationary.
            let Some((trial, c2, moved)) = accepted else {
                return Some((p, it));
            };
            let small_step = moved
                .iter()
                .zip(trial.iter())
                .all(|(s, v)| s.abs() <= 1e-10 * (v.abs() + 1e-6));
            let small_gain = chi2 - c2 <= 1e-13 * chi2.max(f64::MIN_POSITIVE);
            p = trial;
            chi2 = c2;
            if small_step || small_gain {
                return Some((p, it));
            }
        }
        None
    }
}

/// Fits a single Lorentzian to the bins of `spectrum` within `window`
/// (inclusive bounds in rad/s).
///
/// Starts from the tallest smoothed bin, the half-maximum width and a low
/// percentile floor, then alternates Levenberg–Marquardt with reweighting
/// by the current model so that every bin carries the same relative error,
/// as averaged periodograms do. A window without a peak above its floor
/// returns `converged = false`.
pub fn lorentzian_fit(spectrum: &SpectrumResult, window: (f64, f64)) -> Result<FitResult, SpectralError> {
    let (omega, values): (Vec<f64>, Vec<f64>) = spectrum
        .omega
        .iter()
        .zip(&spectrum.values)
        .filter(|(w, _)| **w >= window.0 && **w <= window.1)
        .map(|(w, v)| (*w, *v))
        .unzip();
    if omega.len() < 8 {
        return Err(SpectralError::InvalidArgument(format!(
            "fit window holds {} bins, at least 8 are needed",
            omega.len()
        )));
    }
    let smooth = moving_average(&values, 2);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 10];
    let (peak, top) = smooth.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
    );
    let height = top - floor;
    if !(height > 0.0) || !height.is_finite() {
        return Ok(FitResult::failed());
    }
    if separated_peaks(&smooth, floor, height) > 1 {
        return Err(SpectralError::AmbiguousPeak);
    }

    let bin = omega[1] - omega[0];
    let half = floor + 0.5 * height;
    let right = (peak..omega.len())
        .find(|&i| smooth[i] < half)
        .unwrap_or(omega.len() - 1);
    let left = (0..=peak).rev().find(|&i| smooth[i] < half).unwrap_or(0);
    let width0 = (omega[right] - omega[left]).max(bin);

    // Normalised coordinates keep the normal equations well scaled.
    let c0 = omega[peak];
    let scale_y = height;
    let x: Vec<f64> = omega.iter().map(|w| (w - c0) / width0).collect();
    let y: Vec<f64> = values.iter().map(|v| v / scale_y).collect();
    let mut p = Vector4::new(0.0, 1.0, 0.5 * std::f64::consts::PI, floor / scale_y);
    let mut problem = Problem {
        x: &x,
        y: &y,
        w: vec![1.0; x.len()],
    };
    let mut iterations = 0;
    for pass in 0..=REWEIGHT_PASSES {
        if pass > 0 {
            problem.w = x.iter().map(|xi| model(*xi, &p).0.abs().max(1e-12).powi(-2)).collect();
        }
        let (next, its) = problem.solve(p).ok_or(SpectralError::NoConvergence {
            iterations: MAX_ITERATIONS,
        })?;
        p = next;
        iterations += its;
    }

    let (jtj, _) = problem.normal_equations(&p);
    let dof = (x.len() - 4) as f64;
    let s2 = problem.chi2(&p) / dof;
    let cov = jtj
        .try_inverse()
        .map(|m| m * s2)
        .unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let jac = Vector4::new(width0, width0, scale_y * width0, scale_y);
    let covariance = std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)] * jac[i] * jac[j]));
    Ok(FitResult {
        center: c0 + width0 * p[0],
        fwhm: width0 * p[1],
        area: scale_y * width0 * p[2],
        offset: scale_y * p[3],
        covariance,
        converged: true,
        iterations,
    })
}

fn moving_average(v: &[f64], radius: usize) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Runs above half height that reach 70% of it, counted only when the gap
/// to the previous such run spans more than two bins.
fn separated_peaks(smooth: &[f64], floor: f64, height: f64) -> usize {
    let half = floor + 0.5 * height;
    let tall = floor + 0.7 * height;
    let mut count = 0;
    let mut run_max = f64::NEG_INFINITY;
    let mut in_run = false;
    let mut gap = usize::MAX;
    for &v in smooth.iter().chain(std::iter::once(&f64::NEG_INFINITY)) {
        if v >= half {
            in_run = true;
            run_max = run_max.max(v);
        } else {
            if in_run {
                if run_max >= tall && gap > 2 {
                    count += 1;
                }
                if run_max >= tall {
                    gap = 0;
                }
                in_run = false;
                run_max = f64::NEG_INFINITY;
            }
            gap = gap.saturating_add(1);
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ComplexNormal;
    use crate::spectrum::{linear_grid, SpectrumKind};
    use proptest::prelude::*;

    fn synthetic(center: f64, fwhm: f64, area: f64, offset: f64) -> SpectrumResult {
        let w = linear_grid(center - 40.0 * fwhm, center + 40.0 * fwhm, 801);
        let v = w.iter().map(|x| lorentzian(*x, center, fwhm, area, offset)).collect();
        SpectrumResult::new(w, v, SpectrumKind::Estimate)
    }

    #[test]
    fn exact_recovery_without_noise() {
        let s = synthetic(3.1e7, 628.0, 2.0e-9, 1.0e-13);
        let f = lorentzian_fit(&s, (3.0e7, 3.2e7)).unwrap();
        assert!(f.converged);
        assert!((f.center / 3.1e7 - 1.0).abs() < 1e-9);
        assert!((f.fwhm / 628.0 - 1.0).abs() < 1e-9);
        assert!((f.area / 2.0e-9 - 1.0).abs() < 1e-9);
        assert!((f.offset / 1.0e-13 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_input_does_not_converge() {
        let w = linear_grid(-1.0, 1.0, 101);
        let s = SpectrumResult::new(w, vec![0.0; 101], SpectrumKind::Estimate);
        assert!(!lorentzian_fit(&s, (-1.0, 1.0)).unwrap().converged);
    }

    #[test]
    fn two_peaks_are_ambiguous() {
        let w = linear_grid(-100.0, 100.0, 801);
        let v = w
            .iter()
            .map(|x| lorentzian(*x, -30.0, 4.0, 1.0, 0.0) + lorentzian(*x, 30.0, 4.0, 1.0, 0.0))
            .collect();
        let s = SpectrumResult::new(w, v, SpectrumKind::Estimate);
        assert!(matches!(
            lorentzian_fit(&s, (-100.0, 100.0)),
            Err(SpectralError::AmbiguousPeak)
        ));
    }

    #[test]
    fn narrow_window_is_rejected() {
        let s = synthetic(0.0, 1.0, 1.0, 0.0);
        assert!(lorentzian_fit(&s, (0.0, 0.2)).is_err());
    }

    /// Averaged-periodogram scatter: each bin is the mean of `k` exponentials.
    fn noisy(s: &SpectrumResult, k: usize, seed: u64) -> SpectrumResult {
        let mut rng = ComplexNormal::new(seed, 0);
        let mut out = s.clone();
        for v in &mut out.values {
            let m: f64 = (0..k).map(|_| rng.sample().norm_sqr()).sum::<f64>() / k as f64;
            *v *= m;
        }
        out
    }

    #[test]
    fn unbiased_across_snr() {
        for (offset, label) in [(1e-3, "high"), (0.05, "mid"), (0.3, "low")] {
            let truth = synthetic(0.0, 2.0, 1.0, offset);
            let runs = 40;
            let n = runs as f64;
            let (mut mean, mut err) = ([0.0; 3], [0.0; 3]);
            for seed in 0..runs {
                let f = lorentzian_fit(&noisy(&truth, 64, seed), (-80.0, 80.0)).unwrap();
                let se = f.std_errors();
                for (k, v) in [f.center, f.fwhm, f.area].into_iter().enumerate() {
                    mean[k] += v / n;
                    err[k] += se[k] / n;
                }
            }
            // Bias within three standard errors of the mean, plus 1% slack.
            for (k, truth) in [0.0, 2.0, 1.0].into_iter().enumerate() {
                let bound = 3.0 * err[k] / n.sqrt() + 0.01 * truth;
                assert!(
                    (mean[k] - truth).abs() < bound,
                    "{label}: parameter {k} mean {} bound {bound}",
                    mean[k]
                );
            }
        }
    }

    #[test]
    fn covariance_matches_scatter() {
        let truth = synthetic(0.0, 2.0, 1.0, 0.05);
        let fits: Vec<FitResult> = (0..60)
            .map(|seed| lorentzian_fit(&noisy(&truth, 32, 100 + seed), (-80.0, 80.0)).unwrap())
            .collect();
        let mean = fits.iter().map(|f| f.center).sum::<f64>() / fits.len() as f64;
        let spread = (fits.iter().map(|f| (f.center - mean).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt();
        let reported = fits.iter().map(|f| f.std_errors()[0]).sum::<f64>() / fits.len() as f64;
        assert!(
            (reported / spread - 1.0).abs() < 0.35,
            "reported {reported} spread {spread}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn recovers_any_clean_peak(
            center in -5.0f64..5.0,
            fwhm in 0.5f64..5.0,
            area in 0.1f64..10.0,
            offset in 0.0f64..0.1,
        ) {
            let w = linear_grid(-100.0, 100.0, 2001);
            let v = w.iter().map(|x| lorentzian(*x, center, fwhm, area, offset)).collect();
            let s = SpectrumResult::new(w, v, SpectrumKind::Estimate);
            let f = lorentzian_fit(&s, (-100.0, 100.0)).unwrap();
            prop_assert!(f.converged);
            prop_assert!((f.center - center).abs() < 1e-6 * fwhm);
            prop_assert!((f.fwhm / fwhm - 1.0).abs() < 1e-6);
            prop_assert!((f.area / area - 1.0).abs() < 1e-6);
        }
    }
}
