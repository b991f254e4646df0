//! Tasks that integrate the stochastic equations.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use optomech_core::analytic::{back_action, sideband_asymmetry, Frame};
use optomech_core::constants::K_B;
use optomech_core::params::energy_flow;
use optomech_core::sim::{simulate_lab, simulate_rotating, Motion, SimConfig, SimError, TimeTrace};
use optomech_core::spectral::{
    lorentzian_fit, output_spectrum, sideband_areas, welch_psd, welch_psd_real, FitResult, Window, MIN_SEGMENTS,
};
use optomech_core::{DerivedParams, DriveParams, Scheme, SpectrumResult};
use rayon::prelude::*;
use serde_json::json;

use super::analytic::manifest_for_csv;
use super::Context;
use crate::config::{Format, FrameName, MotionName, Task};
use crate::error::CliError;
use crate::output::{col, plot, Column};

/// Welch segment resolving a feature of width `width` with ~10 bins,
/// shortened until the record holds at least twice the minimum number
/// of segments.
fn segment_for(width: f64, dt: f64, len: usize) -> usize {
    let mut n = ((20.0 * PI / width) / dt).max(2.0) as usize;
    n = n.next_power_of_two();
    while n > 2 && len < n * MIN_SEGMENTS {
        n /= 2;
    }
    n
}

fn thermal_variance(d: &DerivedParams, temperature: f64) -> f64 {
    K_B * temperature / (2.0 * d.mass * d.omega_m * d.omega_m)
}

/// Runs one trace; an unstable run is returned with its time of failure
/// when instability is allowed.
fn run_trace(
    d: &DerivedParams,
    drive: &DriveParams,
    config: &SimConfig,
    allow_instability: bool,
) -> Result<(TimeTrace, Option<f64>), CliError> {
    let result = match config.frame {
        Frame::Rotating => simulate_rotating(d, drive, config),
        Frame::Lab => simulate_lab(d, drive, config),
    };
    match result {
        Ok(trace) => Ok((trace, None)),
        Err(SimError::InstabilityTerminated { time, trace }) if allow_instability => {
            eprintln!("optomech: warning: seed {} unstable at t = {time:.6e} s", config.seed);
            Ok((*trace, Some(time)))
        }
        Err(e) => Err(e.into()),
    }
}

fn spectrum_rows(s: &SpectrumResult, origin: f64) -> Vec<Vec<f64>> {
    s.omega
        .iter()
        .zip(&s.values)
        .map(|(w, v)| vec![*w, w - origin, *v])
        .collect()
}

pub fn simulate(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let spec = ctx.config.require_drive(Task::Simulate)?;
    let drive = spec.resolve(&d, spec.scheme);
    let block = &ctx.config.simulate;
    let mut config = match block.frame {
        FrameName::Rotating => {
            let duration = block.duration.map_or(200.0 / d.gamma_m, |q| q.value);
            SimConfig::rotating(&d, duration, ctx.seed)
        }
        FrameName::Lab => {
            let period = 2.0 * PI / d.omega_m;
            let duration = block.duration.map_or(20.0 * period, |q| q.value);
            let mut c = SimConfig::lab(&d, duration, ctx.seed);
            // Whole recorded samples per period for the demodulated channels.
            let per_period = (period / c.dt).round() as usize;
            let steps = per_period.div_ceil(block.decimation) * block.decimation;
            c.dt = period / steps as f64;
            c
        }
    };
    if let Some(dt) = block.dt {
        config.dt = dt.value;
    }
    config.burn_in = block.burn_in.map(|q| q.value);
    config.record_decimation = block.decimation;
    config.noisy_pump = block.noisy_pump;
    config.motion = match block.motion {
        MotionName::Free => Motion::Free,
        MotionName::Frozen => Motion::Frozen,
    };
    let (trace, failed_at) = run_trace(&d, &drive, &config, ctx.allow_instability)?;

    let mut out = ctx.artifacts.file("trace.omtrace")?;
    trace.write_binary(&mut out)?;
    out.flush()?;
    if block.trace_csv {
        let mut out = ctx.artifacts.file("trace.csv")?;
        trace.write_csv(&mut out)?;
        out.flush()?;
    }

    let e_c = energy_flow(&d, &drive).e_c;
    let ba = back_action(&d, &drive, e_c);
    let width = if ba.unstable {
        d.gamma_m
    } else {
        ba.gamma_eff.min(d.gamma_m)
    };
    let segment = match block.segment {
        0 => segment_for(width, trace.dt, trace.len()),
        n => n,
    };
    let mut plots = Vec::new();
    let mut spectra_note = None;
    let spectra = match config.frame {
        Frame::Rotating => {
            let x: Vec<Complex64> = trace
                .complex("x0")
                .unwrap_or_default()
                .iter()
                .map(|z| z.conj())
                .collect();
            welch_psd(&x, trace.dt, segment, 0.5, Window::Hann).and_then(|sx| {
                output_spectrum(&trace, segment, 0.5, Window::Hann).map(|so| {
                    vec![
                        ("displacement_psd.csv", spectrum_rows(&sx, 0.0), "m^2*s"),
                        ("output_psd.csv", spectrum_rows(&so, trace.meta.omega_p), so.kind.unit()),
                    ]
                })
            })
        }
        Frame::Lab => {
            let x = trace.real("x").unwrap_or_default();
            let v = trace.real("v_out").unwrap_or_default();
            welch_psd_real(x, trace.dt, segment, 0.5, Window::Hann).and_then(|sx| {
                welch_psd_real(v, trace.dt, segment, 0.5, Window::Hann).map(|sv| {
                    vec![
                        ("displacement_psd.csv", spectrum_rows(&sx, 0.0), "m^2*s"),
                        ("output_psd.csv", spectrum_rows(&sv, trace.meta.omega_p), "V^2*s"),
                    ]
                })
            })
        }
    };
    match spectra {
        Ok(files) if ctx.config.wants(Format::Csv) => {
            for (name, rows, unit) in files {
                let columns = [col("omega", "rad/s"), col("offset", "rad/s"), col("psd", unit)];
                ctx.artifacts.csv(name, &columns, &rows)?;
                let mut entry = plot(name, "offset", &["psd"]);
                entry.log_y = true;
                plots.push(entry);
            }
        }
        Ok(_) => {}
        // A truncated record may be too short for a spectrum.
        Err(e) if failed_at.is_some() => spectra_note = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    ctx.artifacts.json(
        "simulate.json",
        &json!({
            "meta": trace.meta,
            "config": config,
            "drive": drive,
            "samples": trace.len(),
            "record_dt": trace.dt,
            "segment": segment,
            "back_action": ba,
            "instability_time": failed_at,
            "spectra_skipped": spectra_note,
        }),
    )?;
    manifest_for_csv(ctx, Task::Simulate, plots)
}

/// Fitted motional peak of `conj(x0)`, whose peak sits at +δΩ_m.
fn motion_fit(trace: &TimeTrace, width: f64, window: f64) -> Result<FitResult, CliError> {
    let x: Vec<Complex64> = trace
        .complex("x0")
        .ok_or_else(|| CliError::Failed("trace has no x0 channel".into()))?
        .iter()
        .map(|z| z.conj())
        .collect();
    let segment = segment_for(width, trace.dt, x.len());
    let s = welch_psd(&x, trace.dt, segment, 0.5, Window::Hann)?;
    let half = window.min(0.8 * PI / trace.dt);
    Ok(lorentzian_fit(&s, (-half, half))?)
}

/// Mean and standard error of the finite entries.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn compare(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let spec = ctx.config.require_drive(Task::Compare)?;
    let drive = spec.resolve(&d, spec.scheme);
    let ba = back_action(&d, &drive, energy_flow(&d, &drive).e_c);
    if ba.unstable {
        return Err(CliError::Instability(format!(
            "Gamma_eff = {:.4e} rad/s: the drive leaves no stationary state to compare",
            ba.gamma_eff
        )));
    }
    let block = &ctx.config.compare;
    let reference_drive = DriveParams::new(0.0, drive.scheme);
    let window = 15.0 * ba.gamma_eff.max(d.gamma_m);
    let allow = ctx.allow_instability;
    let seeds: Vec<u64> = (0..block.runs as u64).map(|k| ctx.seed + k).collect();
    // Pumped and unpumped runs share their noise, so the frequency shift is
    // read against the same realisation of the bare resonance.
    let runs: Vec<Result<Option<[f64; 4]>, CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut config = SimConfig::rotating(&d, block.duration_gamma / d.gamma_m, seed);
            config.burn_in = Some(20.0 / ba.gamma_eff.min(d.gamma_m));
            config.record_decimation = block.decimation;
            let (pumped, failed) = run_trace(&d, &drive, &config, allow)?;
            if failed.is_some() {
                return Ok(None);
            }
            let (bare, _) = run_trace(&d, &reference_drive, &config, false)?;
            let fits = motion_fit(&pumped, ba.gamma_eff.min(d.gamma_m), window)
                .and_then(|p| motion_fit(&bare, d.gamma_m, window).map(|r| (p, r)));
            let (p, r) = match fits {
                Ok(fits) => fits,
                Err(e) => {
                    eprintln!("optomech: warning: seed {seed}: {e}");
                    return Ok(Some([seed as f64, f64::NAN, f64::NAN, f64::NAN]));
                }
            };
            let t_eff = p.area / (2.0 * PI) / 4.0 / thermal_variance(&d, 1.0);
            Ok(Some([seed as f64, p.fwhm, p.center - r.center, t_eff]))
        })
        .collect();
    let mut rows = Vec::new();
    for run in runs {
        if let Some(row) = run? {
            rows.push(row.to_vec());
        }
    }
    if rows.is_empty() {
        return Err(CliError::Instability("every run diverged".into()));
    }

    let analytic = [ba.gamma_eff, ba.delta_omega_m, ba.t_eff];
    let names = ["gamma_eff_rad_s", "delta_omega_m_rad_s", "t_eff_k"];
    let mut summary = Vec::new();
    for (k, (name, expected)) in names.iter().zip(analytic).enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r[k + 1]).collect();
        let (mean, se) = mean_and_se(&values);
        // The shift can vanish, so its error is taken against Γ_eff.
        let scale = if k == 1 { ba.gamma_eff } else { expected };
        summary.push((name.to_string(), vec![expected, mean, se, (mean - expected) / scale]));
    }

    if ctx.config.wants(Format::Csv) {
        let columns = [
            col("seed", "1"),
            col("gamma_eff", "rad/s"),
            col("delta_omega_m", "rad/s"),
            col("t_eff", "K"),
        ];
        ctx.artifacts.csv("compare_runs.csv", &columns, &rows)?;
        let columns: [Column; 4] = [
            col("analytic", "quantity"),
            col("simulated_mean", "quantity"),
            col("simulated_se", "quantity"),
            col("relative_error", "1"),
        ];
        ctx.artifacts
            .labelled_csv("compare.csv", col("quantity", "-"), &columns, &summary)?;
    }
    if ctx.config.wants(Format::Json) {
        let table: Vec<_> = summary
            .iter()
            .map(|(name, v)| {
                json!({ "quantity": name, "analytic": v[0], "simulated_mean": v[1], "simulated_se": v[2], "relative_error": v[3] })
            })
            .collect();
        ctx.artifacts.json(
            "compare.json",
            &json!({ "runs": rows.len(), "diverged": seeds.len() - rows.len(), "back_action": ba, "summary": table }),
        )?;
    }
    manifest_for_csv(
        ctx,
        Task::Compare,
        vec![plot(
            "compare_runs.csv",
            "seed",
            &["gamma_eff", "delta_omega_m", "t_eff"],
        )],
    )
}

pub fn asymmetry(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let spec = ctx.config.require_drive(Task::Asymmetry)?;
    let two_m_om2 = (2.0 * d.mass * d.omega_m).powi(2);
    let mut table = Vec::new();
    for (name, scheme) in [("red", Scheme::Red), ("green", Scheme::Green), ("blue", Scheme::Blue)] {
        let drive = spec.resolve(&d, scheme);
        let e_c = energy_flow(&d, &drive).e_c;
        let ba = back_action(&d, &drive, e_c);
        let forces = sideband_asymmetry(&d, &drive, e_c)?;
        let (l, h) = (forces.s_dfex_l.unwrap_or(f64::NAN), forces.s_dfex_h.unwrap_or(f64::NAN));
        let true_var = thermal_variance(&d, ba.t_eff);
        let apparent = |s: f64| true_var + s / (two_m_om2 * ba.gamma_eff);
        table.push((
            name.to_string(),
            vec![
                drive.detuning(&d),
                e_c,
                ba.gamma_eff,
                ba.t_eff,
                true_var,
                l,
                h,
                apparent(l),
                apparent(h),
                if ba.unstable { 1.0 } else { 0.0 },
            ],
        ));
    }
    let columns = [
        col("detuning", "rad/s"),
        col("e_c", "J"),
        col("gamma_eff", "rad/s"),
        col("t_eff", "K"),
        col("sigma2_true", "m^2"),
        col("s_dfex_l", "N^2*s"),
        col("s_dfex_h", "N^2*s"),
        col("sigma2_minus", "m^2"),
        col("sigma2_plus", "m^2"),
        col("unstable", "1"),
    ];
    if ctx.config.wants(Format::Csv) {
        ctx.artifacts
            .labelled_csv("asymmetry.csv", col("scheme", "-"), &columns, &table)?;
    }
    let mut report = json!({
        "schemes": table.iter().map(|(name, v)| {
            let fields: serde_json::Map<String, serde_json::Value> =
                columns.iter().zip(v).map(|(c, x)| (c.name.clone(), json!(x))).collect();
            json!({ "scheme": name, "values": fields })
        }).collect::<Vec<_>>(),
    });

    let block = &ctx.config.asymmetry;
    let mut plots = Vec::new();
    if block.simulate {
        let drive = spec.resolve(&d, spec.scheme);
        if let Scheme::Custom(delta) = spec.scheme {
            return Err(CliError::Model(optomech_core::ModelError::UnsupportedScheme { delta }));
        }
        let seeds: Vec<u64> = (0..block.runs as u64).map(|k| ctx.seed + k).collect();
        let runs: Vec<Result<[f64; 3], CliError>> = seeds
            .par_iter()
            .map(|&seed| {
                let mut config = SimConfig::rotating(&d, block.duration_gamma / d.gamma_m, seed);
                // The step-averaged force still leaves an O(dt) bias in the
                // sideband powers; a quarter of the largest step keeps it small.
                config.dt /= 4.0;
                config.record_decimation = block.decimation;
                let (trace, _) = run_trace(&d, &drive, &config, false)?;
                let segment = segment_for(0.8 * d.gamma_m, trace.dt, trace.len());
                let s = output_spectrum(&trace, segment, 0.5, Window::Hann)?;
                let a = sideband_areas(&s, &d, &drive)?;
                Ok([seed as f64, a.sigma2_minus, a.sigma2_plus])
            })
            .collect();
        let rows: Vec<Vec<f64>> = runs
            .into_iter()
            .map(|r| r.map(|a| a.to_vec()))
            .collect::<Result<_, _>>()?;
        let (minus, minus_se) = mean_and_se(&rows.iter().map(|r| r[1]).collect::<Vec<_>>());
        let (plus, plus_se) = mean_and_se(&rows.iter().map(|r| r[2]).collect::<Vec<_>>());
        if ctx.config.wants(Format::Csv) {
            let columns = [col("seed", "1"), col("sigma2_minus", "m^2"), col("sigma2_plus", "m^2")];
            ctx.artifacts.csv("asymmetry_runs.csv", &columns, &rows)?;
            plots.push(plot("asymmetry_runs.csv", "seed", &["sigma2_minus", "sigma2_plus"]));
        }
        report["simulated"] = json!({
            "scheme": spec.scheme,
            "runs": rows.len(),
            "sigma2_minus": { "mean": minus, "se": minus_se },
            "sigma2_plus": { "mean": plus, "se": plus_se },
        });
    }
    if ctx.config.wants(Format::Json) {
        ctx.artifacts.json("asymmetry.json", &report)?;
    }
    manifest_for_csv(ctx, Task::Asymmetry, plots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_resolves_width_within_record() {
        let dt = 1e-6;
        let n = segment_for(100.0, dt, 1 << 24);
        assert!(n.is_power_of_two());
        let bin = 2.0 * PI / (n as f64 * dt);
        assert!(bin <= 10.0 && bin > 5.0, "{bin}");
        // A short record gives up resolution to keep enough segments.
        let short = segment_for(100.0, dt, 1 << 16);
        assert_eq!(short * MIN_SEGMENTS, 1 << 16);
    }

    #[test]
    fn mean_ignores_failed_runs() {
        let (m, se) = mean_and_se(&[1.0, f64::NAN, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
        assert!(mean_and_se(&[4.0]).1.is_nan());
    }
}
