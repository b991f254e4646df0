//! Seeded complex white-noise sources.
//!
//! Every source draws from its own ChaCha stream, keyed by `(seed, stream)`,
//! so a trajectory does not depend on the order in which sources are
//! consumed or on which thread runs it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Circular complex Gaussian with `E|z|² = 1`.
#[derive(Debug, Clone)]
pub struct ComplexNormal {
    rng: ChaCha8Rng,
}

impl ComplexNormal {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn sample(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Samples of a complex white process of two-sided level `psd_level`,
/// averaged over steps of `dt`: `E|z|² = psd_level/dt`, split equally
/// between real and imaginary parts.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    scale: f64,
    source: ComplexNormal,
}

impl NoiseSampler {
    pub fn new(psd_level: f64, dt: f64, seed: u64) -> Self {
        Self::with_stream(psd_level, dt, seed, 0)
    }

    pub fn with_stream(psd_level: f64, dt: f64, seed: u64, stream: u64) -> Self {
        assert!(psd_level >= 0.0 && dt > 0.0);
        Self {
            scale: (psd_level / dt).sqrt(),
            source: ComplexNormal::new(seed, stream),
        }
    }
}

impl Iterator for NoiseSampler {
    type Item = Complex64;

    fn next(&mut self) -> Option<Complex64> {
        if self.scale == 0.0 {
            return Some(Complex64::new(0.0, 0.0));
        }
        Some(self.source.sample() * self.scale)
    }
}

/// `e^{z} − 1` without cancellation for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let half_sin = (0.5 * z.im).sin();
    let er = z.re.exp_m1();
    // e^{re}(cos + i sin) − 1 = expm1(re)·(cos + i sin) + (cos − 1) + i sin
    Complex64::new(er * z.im.cos() - 2.0 * half_sin * half_sin, (er + 1.0) * z.im.sin())
}

/// `(e^{λ·dt} − 1)/λ`, the exact step weight of a constant forcing.
pub(crate) fn phi1(lambda: Complex64, dt: f64) -> Complex64 {
    if lambda.norm() * dt < 1e-12 {
        return Complex64::new(dt, 0.0);
    }
    expm1(lambda * dt) / lambda
}

/// White noise of level `psd` integrated over one step of the linear
/// relaxation `dz/dt = λz + ξ`: draws the filtered increment
/// `η = ∫ e^{λ(dt−s)} ξ(s) ds` jointly with the plain integral
/// `ζ = ∫ ξ(s) ds`, both exact Gaussians with their cross-correlation.
#[derive(Debug, Clone)]
pub(crate) struct FilteredWhite {
    eta_scale: f64,
    zeta_from_eta: Complex64,
    zeta_resid: f64,
    source: ComplexNormal,
}

impl FilteredWhite {
    pub fn new(lambda: Complex64, dt: f64, psd: f64, source: ComplexNormal) -> Self {
        assert!(lambda.re < 0.0, "relaxation must be damped");
        let var_eta = psd * (2.0 * lambda.re * dt).exp_m1() / (2.0 * lambda.re);
        let var_zeta = psd * dt;
        let cross = psd * phi1(lambda, dt);
        let (eta_scale, zeta_from_eta, zeta_resid) = if var_eta > 0.0 {
            let s = var_eta.sqrt();
            let coef = cross.conj() / s;
            (s, coef, (var_zeta - coef.norm_sqr()).max(0.0).sqrt())
        } else {
            (0.0, Complex64::new(0.0, 0.0), 0.0)
        };
        Self {
            eta_scale,
            zeta_from_eta,
            zeta_resid,
            source,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.eta_scale == 0.0
    }

    /// Filtered increment only.
    pub fn eta(&mut self) -> Complex64 {
        if self.is_silent() {
            return Complex64::new(0.0, 0.0);
        }
        self.source.sample() * self.eta_scale
    }

    /// `(η, ζ)`.
    pub fn pair(&mut self) -> (Complex64, Complex64) {
        if self.is_silent() {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let z1 = self.source.sample();
        let z2 = self.source.sample();
        (z1 * self.eta_scale, z1 * self.zeta_from_eta + z2 * self.zeta_resid)
    }
}
