use num_complex::Complex64;

use super::noise::{phi1, ComplexNormal, FilteredWhite};
use super::trace::{ChannelData, TimeTrace, TraceMeta};
use super::{params_hash, Motion, SimConfig, SimError, INSTABILITY_FACTOR};
use crate::analytic::{back_action, Frame};
use crate::constants::K_B;
use crate::params::{energy_flow, pump_amplitude, DerivedParams, DriveParams, Topology};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Noise streams and propagators of one comb component.
struct Line {
    decay: Complex64,
    weight: Complex64,
    /// Resistors other than the detection port.
    bath: FilteredWhite,
    /// Detection-port resistor; its plain integral also feeds the output.
    detect: FilteredWhite,
    /// Johnson noise of the detector load, one draw per recorded sample.
    load: ComplexNormal,
}

impl Line {
    fn new(lambda: Complex64, dt: f64, sources: &NoiseLevels, seed: u64, stream: u64) -> Self {
        Self {
            decay: (lambda * dt).exp(),
            weight: phi1(lambda, dt),
            bath: FilteredWhite::new(lambda, dt, sources.bath, ComplexNormal::new(seed, stream)),
            detect: FilteredWhite::new(lambda, dt, sources.detect, ComplexNormal::new(seed, stream + 1)),
            load: ComplexNormal::new(seed, stream + 2),
        }
    }
}

/// Two-sided current-noise levels [A²·s] seen by each cavity line.
struct NoiseLevels {
    bath: f64,
    detect: f64,
}

fn noise_levels(derived: &DerivedParams) -> NoiseLevels {
    let johnson = |t: f64, r: f64| 8.0 * K_B * t / r;
    let internal = johnson(derived.t_internal, derived.r_internal());
    let (r_drive, r_detect) = derived.port_resistances();
    let detect = johnson(derived.t_external, r_detect);
    let bath = match derived.topology {
        Topology::SinglePort => internal,
        _ => internal + johnson(derived.t_external, r_drive),
    };
    NoiseLevels { bath, detect }
}

/// Integrates the rotating-frame amplitude equations.
///
/// The output envelopes are `v_n = −g_out·μ_n + (i/2)·√(Z0·R_det)·δI_det,n
/// + δV_load,n`, with `g_out` the node-to-line voltage gain, `R_det` the
/// detection-port resistance and `δV_load` the Johnson noise of the
/// detector load (level `2Z0·k_B·T_ex`), each averaged over the recording
/// interval. Their spectra divided by `2Z0` give the detected PSD in
/// W/(rad/s). The `mu_*` channels are instantaneous samples.
pub fn simulate_rotating(
    derived: &DerivedParams,
    drive: &DriveParams,
    config: &SimConfig,
) -> Result<TimeTrace, SimError> {
    if config.frame != Frame::Rotating {
        return Err(SimError::InvalidConfig(
            "simulate_rotating needs frame = rotating".into(),
        ));
    }
    config.validate(derived)?;

    let dt = config.dt;
    let delta = drive.detuning(derived);
    let om = derived.omega_m;
    let half_k = 0.5 * derived.kappa_t;
    let g = derived.coupling_g;
    let mass = derived.mass;
    let wc_ct = derived.omega_c * derived.c_total;
    let current_gain = I * 0.5 / wc_ct;

    let mu_bar = pump_amplitude(derived, drive);
    let e_c = energy_flow(derived, drive).e_c;
    let ba = back_action(derived, drive, e_c);
    let gamma_eff = if ba.unstable { derived.gamma_m } else { ba.gamma_eff };

    let levels = noise_levels(derived);
    let seed = config.seed;
    let mut lines = [
        Line::new(Complex64::new(-half_k, delta - om), dt, &levels, seed, 0),
        Line::new(Complex64::new(-half_k, delta), dt, &levels, seed, 3),
        Line::new(Complex64::new(-half_k, delta + om), dt, &levels, seed, 6),
    ];

    let lambda_m = Complex64::new(-0.5 * derived.gamma_m, 0.0);
    let mech_decay = (-0.5 * derived.gamma_m * dt).exp();
    let mech_weight = phi1(lambda_m, dt);
    let s_l0 = 8.0 * K_B * derived.t_mech * mass * derived.gamma_m;
    let mut langevin = FilteredWhite::new(lambda_m, dt, s_l0, ComplexNormal::new(seed, 9));
    let force_gain = I / (2.0 * mass * om);
    let f0_gain = derived.c_total * derived.omega_c * g;

    // Equilibrium initial conditions.
    let mut init = ComplexNormal::new(seed, 10);
    let t_start = if ba.unstable { derived.t_mech } else { ba.t_eff };
    let x_var = 2.0 * K_B * t_start / (mass * om * om);
    let free = config.motion == Motion::Free;
    let mut x = match config.motion {
        Motion::Free => init.sample() * x_var.sqrt(),
        Motion::Frozen => ZERO,
        Motion::Imposed {
            amplitude_re,
            amplitude_im,
        } => Complex64::new(amplitude_re, amplitude_im),
    };
    let cavity_rms = current_gain.norm() * ((levels.bath + levels.detect) / derived.kappa_t).sqrt();
    let mut mu = [
        init.sample() * cavity_rms,
        init.sample() * cavity_rms,
        init.sample() * cavity_rms,
    ];

    let thermal_rms = x_var.sqrt().max(derived.x_zpf);
    let limit = INSTABILITY_FACTOR * thermal_rms;

    let (_, r_detect) = derived.port_resistances();
    let noise_out = I * 0.5 * (derived.z0 * r_detect).sqrt();
    let load_level = 2.0 * derived.z0 * K_B * derived.t_external;
    let gain_out = derived.output_gain();

    let decim = config.record_decimation;
    let burn_in = config
        .burn_in
        .unwrap_or(if free { 10.0 / gamma_eff } else { 20.0 / derived.kappa_t });
    let burn_steps = (burn_in / dt).ceil() as usize;
    let n_rec = ((config.duration / dt) as usize / decim).max(1);
    let block = dt * decim as f64;
    let load_scale = (load_level / block).sqrt();

    let mut rec_x = Vec::with_capacity(n_rec);
    let mut rec_mu: [Vec<Complex64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_rec));
    let mut rec_v: [Vec<Complex64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_rec));
    let mut zeta_sum = [ZERO; 3];
    // Block averages of the amplitudes, so that both output terms pass
    // through the same boxcar before sampling.
    let mut mu_sum = [ZERO; 3];

    let meta = TraceMeta {
        seed,
        frame: Frame::Rotating,
        omega_p: derived.omega_c + delta,
        omega_m: om,
        z0: derived.z0,
        t0: (burn_steps + decim) as f64 * dt,
        params_hash: params_hash(derived),
        instability_terminated: false,
    };

    let total = burn_steps + n_rec * decim;
    for step in 0..total {
        // mu[1] holds only the pump-line fluctuation around mu_bar.
        let pump = if config.noisy_pump { mu_bar + mu[1] } else { mu_bar };
        let drive_terms = [I * 0.5 * g * x.conj() * pump, ZERO, I * 0.5 * g * x * pump];

        // Step averages of the amplitudes. The sideband lines turn by
        // Ω_m·dt per step, so the force uses the average, not the start value.
        let mut avg = [ZERO; 3];
        for (n, line) in lines.iter_mut().enumerate() {
            let eta_bath = line.bath.eta();
            let (eta_det, zeta) = line.detect.pair();
            let before = mu[n];
            mu[n] = line.decay * mu[n] + line.weight * drive_terms[n] + current_gain * (eta_bath + eta_det);
            zeta_sum[n] += zeta;
            avg[n] = 0.5 * (before + mu[n]);
            mu_sum[n] += avg[n];
        }
        let pump_avg = if config.noisy_pump { mu_bar + avg[1] } else { mu_bar };
        let force = f0_gain * (pump_avg * avg[0].conj() + pump_avg.conj() * avg[2]);
        if free {
            x = mech_decay * x + mech_weight * force_gain * force + force_gain * langevin.eta();
        }

        if (free && x.norm() > limit) || !x.re.is_finite() || !x.im.is_finite() {
            let time = (step as f64 - burn_steps as f64) * dt;
            if !x.re.is_finite() || !x.im.is_finite() {
                return Err(SimError::NonFiniteSample {
                    time,
                    channel: "x0".into(),
                });
            }
            let mut trace = assemble(block, meta.clone(), rec_x, rec_mu, rec_v);
            trace.meta.instability_terminated = true;
            return Err(SimError::InstabilityTerminated {
                time,
                trace: Box::new(trace),
            });
        }

        let done = step + 1;
        if done == burn_steps {
            zeta_sum = [ZERO; 3];
            mu_sum = [ZERO; 3];
        } else if done > burn_steps && (done - burn_steps).is_multiple_of(decim) {
            rec_x.push(x);
            for n in 0..3 {
                let mean_current = zeta_sum[n] / block;
                let pump = if n == 1 { mu_bar } else { ZERO };
                let mean_amplitude = pump + mu_sum[n] / decim as f64;
                let load = if load_level > 0.0 {
                    lines[n].load.sample() * load_scale
                } else {
                    ZERO
                };
                rec_mu[n].push(pump + mu[n]);
                rec_v[n].push(-gain_out * mean_amplitude + noise_out * mean_current + load);
            }
            zeta_sum = [ZERO; 3];
            mu_sum = [ZERO; 3];
        }
    }

    let trace = assemble(block, meta, rec_x, rec_mu, rec_v);
    if let Some(channel) = trace.first_non_finite() {
        return Err(SimError::NonFiniteSample {
            time: f64::NAN,
            channel: channel.to_string(),
        });
    }
    Ok(trace)
}

fn assemble(dt: f64, meta: TraceMeta, x: Vec<Complex64>, mu: [Vec<Complex64>; 3], v: [Vec<Complex64>; 3]) -> TimeTrace {
    let mut trace = TimeTrace::new(dt, meta);
    let [mu_l, mu_p, mu_h] = mu;
    let [v_l, v_p, v_h] = v;
    trace.push("x0", ChannelData::Complex(x));
    trace.push("mu_l", ChannelData::Complex(mu_l));
    trace.push("mu_p", ChannelData::Complex(mu_p));
    trace.push("mu_h", ChannelData::Complex(mu_h));
    trace.push("v_l", ChannelData::Complex(v_l));
    trace.push("v_p", ChannelData::Complex(v_p));
    trace.push("v_h", ChannelData::Complex(v_h));
    trace
}
