use num_complex::Complex64;

use super::envelope::demodulate;
use super::noise::ComplexNormal;
use super::trace::{ChannelData, TimeTrace, TraceMeta};
use super::{params_hash, Motion, SimConfig, SimError, INSTABILITY_FACTOR};
use crate::analytic::{back_action, Frame};
use crate::constants::K_B;
use crate::params::{energy_flow, pump_amplitude, DerivedParams, DriveParams};

/// Node flux, its rate, displacement and velocity.
#[derive(Debug, Clone, Copy)]
struct State {
    phi: f64,
    dphi: f64,
    x: f64,
    dx: f64,
}

impl State {
    fn axpy(self, h: f64, k: State) -> State {
        State {
            phi: self.phi + h * k.phi,
            dphi: self.dphi + h * k.dphi,
            x: self.x + h * k.x,
            dx: self.dx + h * k.dx,
        }
    }
}

struct Model {
    omega_c2: f64,
    kappa: f64,
    two_g_over_wc: f64,
    inv_ct: f64,
    /// C_t·G/ω_c, so that the back-action force is this times φ̇².
    force_coef: f64,
    inv_mass: f64,
    gamma_m: f64,
    omega_m2: f64,
    omega_m: f64,
    omega_p: f64,
    i_p: Complex64,
    motion: Motion,
}

impl Model {
    fn motion(&self, t: f64, s: &State) -> (f64, f64) {
        match self.motion {
            Motion::Free => (s.x, s.dx),
            Motion::Frozen => (0.0, 0.0),
            Motion::Imposed {
                amplitude_re,
                amplitude_im,
            } => {
                let z = Complex64::new(amplitude_re, amplitude_im) * Complex64::from_polar(1.0, -self.omega_m * t);
                (z.re, (Complex64::new(0.0, -self.omega_m) * z).re)
            }
        }
    }

    fn drive(&self, t: f64) -> f64 {
        (self.i_p * Complex64::from_polar(1.0, -self.omega_p * t)).re
    }

    /// `φ̈` for the given motion and source current.
    fn flux_accel(&self, s: &State, x: f64, dx: f64, current: f64) -> f64 {
        let num = current * self.inv_ct - (self.kappa + self.two_g_over_wc * dx) * s.dphi - self.omega_c2 * s.phi;
        num / (1.0 + self.two_g_over_wc * x)
    }

    fn rate(&self, t: f64, s: &State, noise_current: f64, langevin: f64) -> State {
        let (x, dx) = self.motion(t, s);
        let ddphi = self.flux_accel(s, x, dx, self.drive(t) + noise_current);
        let (vx, ax) = match self.motion {
            Motion::Free => {
                let force = langevin + self.force_coef * s.dphi * s.dphi;
                (s.dx, force * self.inv_mass - self.gamma_m * s.dx - self.omega_m2 * s.x)
            }
            _ => (0.0, 0.0),
        };
        State {
            phi: s.dphi,
            dphi: ddphi,
            x: vx,
            dx: ax,
        }
    }
}

/// Integrates the full circuit equation
/// `(1 + 2Gx/ω_c)φ̈ + (κ_t + 2Gẋ/ω_c)φ̇ + ω_c²φ = (I_d + I_noise)/C_t`
/// together with `mẍ + mΓ_mẋ + mΩ_m²x = L + (C_t·G/ω_c)·φ̇²` by fixed-step
/// RK4. Noise currents are held constant over a step, at two-sided levels
/// `2k_B·T/R` per resistor and `2k_B·T_m·m·Γ_m` for the Langevin force.
///
/// The trace holds `phi` [V·s], `x` [m] and `v_out = C_det·Z_load·φ̈` [V],
/// the noiseless voltage delivered to the detection line.
pub fn simulate_lab(derived: &DerivedParams, drive: &DriveParams, config: &SimConfig) -> Result<TimeTrace, SimError> {
    if config.frame != Frame::Lab {
        return Err(SimError::InvalidConfig("simulate_lab needs frame = lab".into()));
    }
    config.validate(derived)?;

    let dt = config.dt;
    let delta = drive.detuning(derived);
    let omega_p = derived.omega_c + delta;
    let i_p = Complex64::new(
        0.0,
        derived.omega_c * derived.drive_capacitance() * derived.drive_voltage(drive.v_p),
    );
    let model = Model {
        omega_c2: derived.omega_c * derived.omega_c,
        kappa: derived.kappa_t,
        two_g_over_wc: 2.0 * derived.coupling_g / derived.omega_c,
        inv_ct: 1.0 / derived.c_total,
        force_coef: derived.c_total * derived.coupling_g / derived.omega_c,
        inv_mass: 1.0 / derived.mass,
        gamma_m: derived.gamma_m,
        omega_m2: derived.omega_m * derived.omega_m,
        omega_m: derived.omega_m,
        omega_p,
        i_p,
        motion: config.motion,
    };

    let e_c = energy_flow(derived, drive).e_c;
    let ba = back_action(derived, drive, e_c);
    let mut rng = ComplexNormal::new(config.seed, 20);
    let mut mech_rng = ComplexNormal::new(config.seed, 21);

    let mass = derived.mass;
    let om = derived.omega_m;
    let t_start = if ba.unstable { derived.t_mech } else { ba.t_eff };
    let x0_var = 2.0 * K_B * t_start / (mass * om * om);
    let x0 = match config.motion {
        Motion::Free => ComplexNormal::new(config.seed, 22).sample() * x0_var.sqrt(),
        _ => Complex64::new(0.0, 0.0),
    };
    let mu_p = pump_amplitude(derived, drive);
    let mut state = State {
        phi: mu_p.re,
        dphi: (Complex64::new(0.0, -omega_p) * mu_p).re,
        x: x0.re,
        dx: (Complex64::new(0.0, -om) * x0).re,
    };

    let current_level =
        2.0 * K_B * (derived.t_internal / derived.r_internal() + derived.t_external / derived.r_external);
    let current_scale = (current_level / dt).sqrt();
    let langevin_scale = (2.0 * K_B * derived.t_mech * mass * derived.gamma_m / dt).sqrt();
    let limit = INSTABILITY_FACTOR * (0.5 * x0_var).sqrt().max(derived.x_zpf);

    let burn_in = config.burn_in.unwrap_or(match config.motion {
        Motion::Free => 10.0 / if ba.unstable { derived.gamma_m } else { ba.gamma_eff },
        _ => 20.0 / derived.kappa_t,
    });
    let decim = config.record_decimation;
    let burn_steps = (burn_in / dt).ceil() as usize;
    let n_rec = ((config.duration / dt).round() as usize / decim).max(1);
    let out_coef = derived.output_gain() / (derived.omega_c * derived.omega_c);

    let mut rec_phi = Vec::with_capacity(n_rec);
    let mut rec_x = Vec::with_capacity(n_rec);
    let mut rec_v = Vec::with_capacity(n_rec);
    let meta = TraceMeta {
        seed: config.seed,
        frame: Frame::Lab,
        omega_p,
        omega_m: om,
        z0: derived.z0,
        t0: (burn_steps + decim) as f64 * dt,
        params_hash: params_hash(derived),
        instability_terminated: false,
    };
    let assemble = |phi: Vec<f64>, x: Vec<f64>, v: Vec<f64>, meta: TraceMeta| {
        let mut trace = TimeTrace::new(dt * decim as f64, meta);
        trace.push("phi", ChannelData::Real(phi));
        trace.push("x", ChannelData::Real(x));
        trace.push("v_out", ChannelData::Real(v));
        trace
    };

    let total = burn_steps + n_rec * decim;
    for step in 0..total {
        let t = step as f64 * dt;
        let noise_current = if current_scale > 0.0 {
            rng.sample().re * std::f64::consts::SQRT_2 * current_scale
        } else {
            0.0
        };
        let langevin = if langevin_scale > 0.0 && config.motion == Motion::Free {
            mech_rng.sample().re * std::f64::consts::SQRT_2 * langevin_scale
        } else {
            0.0
        };
        let k1 = model.rate(t, &state, noise_current, langevin);
        let k2 = model.rate(t + 0.5 * dt, &state.axpy(0.5 * dt, k1), noise_current, langevin);
        let k3 = model.rate(t + 0.5 * dt, &state.axpy(0.5 * dt, k2), noise_current, langevin);
        let k4 = model.rate(t + dt, &state.axpy(dt, k3), noise_current, langevin);
        state = State {
            phi: state.phi + dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
            dphi: state.dphi + dt / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi),
            x: state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            dx: state.dx + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
        };

        let t_next = t + dt;
        if !(state.phi.is_finite() && state.dphi.is_finite() && state.x.is_finite() && state.dx.is_finite()) {
            return Err(SimError::NonFiniteSample {
                time: t_next,
                channel: "phi/x".into(),
            });
        }
        if config.motion == Motion::Free && state.x.abs() > limit {
            let mut meta = meta.clone();
            meta.instability_terminated = true;
            return Err(SimError::InstabilityTerminated {
                time: t_next,
                trace: Box::new(assemble(rec_phi, rec_x, rec_v, meta)),
            });
        }

        let done = step + 1;
        if done > burn_steps && (done - burn_steps).is_multiple_of(decim) {
            let (x, dx) = model.motion(t_next, &state);
            let ddphi = model.flux_accel(&state, x, dx, model.drive(t_next) + noise_current);
            rec_phi.push(state.phi);
            rec_x.push(x);
            rec_v.push(out_coef * ddphi);
        }
    }
    Ok(assemble(rec_phi, rec_x, rec_v, meta))
}

/// Comb amplitudes `μ_n` of orders `−orders..=orders` demodulated from a
/// laboratory trace's flux over its longest whole number of mechanical
/// periods, with phases referred to the run clock.
pub fn comb_amplitudes(trace: &TimeTrace, orders: usize) -> Result<Vec<(i32, Complex64)>, SimError> {
    let phi = trace
        .real("phi")
        .ok_or_else(|| SimError::InvalidConfig("trace has no real channel phi".into()))?;
    let period = 2.0 * std::f64::consts::PI / trace.meta.omega_m;
    let per_period = (period / trace.dt).round() as usize;
    let used = (phi.len() / per_period.max(1)) * per_period;
    if used == 0 {
        return Err(SimError::InvalidConfig(
            "trace shorter than one mechanical period".into(),
        ));
    }
    let k = orders as i32;
    Ok((-k..=k)
        .map(|n| {
            let omega = trace.meta.omega_p + n as f64 * trace.meta.omega_m;
            let phase = Complex64::from_polar(1.0, omega * trace.meta.t0);
            (n, demodulate(&phi[..used], trace.dt, omega) * phase)
        })
        .collect())
}
