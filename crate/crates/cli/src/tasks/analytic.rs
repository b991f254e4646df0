//! Tasks evaluated in closed form.

use optomech_core::analytic::{back_action, closed_form_optimum, output_psd, scan_inverse_ratio, scl_optimum};
use optomech_core::params::{energy_flow, populations, topology_map};
use optomech_core::spectrum::linear_grid;
use optomech_core::{DerivedParams, Scheme};
use rayon::prelude::*;
use serde_json::json;

use super::Context;
use crate::config::{Format, Task};
use crate::error::CliError;
use crate::output::{col, plot, PlotEntry};

pub fn derive(ctx: &mut Context) -> Result<(), CliError> {
    let circuit = ctx.config.circuit_params();
    let d = ctx.config.derived()?;
    let mut report = json!({
        "circuit": circuit,
        "derived": d,
        "r_internal": d.r_internal(),
        "r_total": d.r_total(),
        "sideband_resolution": d.sideband_resolution(),
        "couplings": topology_map(&d),
        "thermal_populations": populations(&d, 0.0),
    });
    if let Some(spec) = ctx.config.drive_spec() {
        let drive = spec.resolve(&d, spec.scheme);
        let flow = energy_flow(&d, &drive);
        report["drive"] = json!({
            "drive": drive,
            "detuning": drive.detuning(&d),
            "energy_flow": flow,
            "populations": populations(&d, flow.e_c),
            "back_action": back_action(&d, &drive, flow.e_c),
        });
    }
    ctx.artifacts.json("derived.json", &report)?;
    ctx.artifacts.manifest(Task::Derive.name(), Vec::new())
}

pub fn spectrum(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let spec = ctx.config.require_drive(Task::Spectrum)?;
    let drive = spec.resolve(&d, spec.scheme);
    let flow = energy_flow(&d, &drive);
    let omega_p = d.omega_c + drive.detuning(&d);
    let half = ctx.config.spectrum.span * d.omega_m;
    let grid = linear_grid(omega_p - half, omega_p + half, ctx.config.spectrum.points);
    let out = output_psd(&d, &drive, flow.e_c, &grid);
    let s = &out.spectrum;
    let unit = s.kind.unit();

    if ctx.config.wants(Format::Csv) {
        let mut columns = vec![col("omega", "rad/s"), col("offset", "rad/s"), col("total", unit)];
        columns.extend(s.components.iter().map(|c| col(c.label.clone(), unit)));
        let rows: Vec<Vec<f64>> = (0..s.len())
            .map(|i| {
                let mut row = vec![s.omega[i], s.omega[i] - omega_p, s.values[i]];
                row.extend(s.components.iter().map(|c| c.values[i]));
                row
            })
            .collect();
        ctx.artifacts.csv("spectrum.csv", &columns, &rows)?;
    }
    if ctx.config.wants(Format::Json) {
        ctx.artifacts.json(
            "spectrum.json",
            &json!({
                "omega_p": out.omega_p,
                "p_pump": out.p_pump,
                "resolution": out.resolution,
                "energy_flow": flow,
                "back_action": back_action(&d, &drive, flow.e_c),
                "warnings": s.warnings,
                "spectrum": s,
            }),
        )?;
    }
    let mut labels = vec!["total"];
    labels.extend(s.components.iter().map(|c| c.label.as_str()));
    let mut entry = plot("spectrum.csv", "offset", &labels);
    entry.log_y = true;
    manifest_for_csv(ctx, Task::Spectrum, vec![entry])
}

/// Same device with all loss rates scaled so that κ_t/(2Ω_m) = `ratio`.
fn with_resolution(d: &DerivedParams, ratio: f64) -> DerivedParams {
    let f = 2.0 * ratio * d.omega_m / d.kappa_t;
    let mut s = d.clone();
    s.kappa_ex *= f;
    s.kappa_in *= f;
    s.kappa_t *= f;
    s.kappa_1 = d.kappa_1.map(|k| k * f);
    s.kappa_2 = d.kappa_2.map(|k| k * f);
    s.q_in /= f;
    s.q_ex /= f;
    s.q_t /= f;
    s.r_external /= f;
    s
}

pub fn sweep(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let spec = ctx.config.require_drive(Task::Sweep)?;
    let block = &ctx.config.sweep;
    let ratios = if block.kappa_over_2omega_m.is_empty() {
        vec![d.kappa_t / (2.0 * d.omega_m)]
    } else {
        block.kappa_over_2omega_m.clone()
    };
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(CliError::Config(format!(
            "sweep.kappa_over_2omega_m must be positive, got {r}"
        )));
    }
    let offsets = linear_grid(block.detuning_min, block.detuning_max, block.points);
    let points: Vec<(f64, f64)> = ratios
        .iter()
        .flat_map(|&r| offsets.iter().map(move |&x| (r, x)))
        .collect();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(ratio, x)| {
            let dev = with_resolution(&d, ratio);
            let delta = x * dev.omega_m;
            let drive = spec.resolve(&dev, Scheme::Custom(delta));
            let e_c = energy_flow(&dev, &drive).e_c;
            let ba = back_action(&dev, &drive, e_c);
            vec![
                ratio,
                x,
                delta,
                e_c,
                ba.delta_omega_m,
                ba.gamma_opt,
                ba.gamma_opt_prime,
                ba.gamma_eff,
                ba.t_eff,
                if ba.unstable { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    let columns = [
        col("kappa_over_2omega_m", "1"),
        col("detuning_over_omega_m", "1"),
        col("detuning", "rad/s"),
        col("e_c", "J"),
        col("delta_omega_m", "rad/s"),
        col("gamma_opt", "rad/s"),
        col("gamma_opt_prime", "rad/s"),
        col("gamma_eff", "rad/s"),
        col("t_eff", "K"),
        col("unstable", "1"),
    ];
    if ctx.config.wants(Format::Csv) {
        ctx.artifacts.csv("sweep.csv", &columns, &rows)?;
    }
    if ctx.config.wants(Format::Json) {
        let names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        ctx.artifacts
            .json("sweep.json", &json!({ "columns": names, "rows": rows }))?;
    }
    let grouped = |y: &[&str]| PlotEntry {
        group_by: Some("kappa_over_2omega_m".into()),
        ..plot("sweep.csv", "detuning_over_omega_m", y)
    };
    manifest_for_csv(
        ctx,
        Task::Sweep,
        vec![
            grouped(&["delta_omega_m"]),
            grouped(&["gamma_opt", "gamma_opt_prime"]),
            grouped(&["t_eff"]),
        ],
    )
}

pub fn optimize(ctx: &mut Context) -> Result<(), CliError> {
    let d = ctx.config.derived()?;
    let block = &ctx.config.optimize;
    let bandwidth = block.bandwidth_gamma * d.gamma_m;
    let (lo, hi) = (block.n_c_min.log10(), block.n_c_max.log10());
    let grid: Vec<f64> = linear_grid(lo, hi, block.points)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect();
    let inverse: Vec<f64> = grid
        .par_chunks(64)
        .flat_map_iter(|chunk| scan_inverse_ratio(&d, d.n_det, bandwidth, chunk))
        .collect();
    let best = inverse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| CliError::Failed("empty scan".into()))?;
    let optimum = scl_optimum(&d, d.n_det, bandwidth);
    let (n_closed, ratio_closed) = closed_form_optimum(&d, d.n_det, bandwidth);

    let rows: Vec<Vec<f64>> = grid.iter().zip(&inverse).map(|(n, r)| vec![*n, *r]).collect();
    if ctx.config.wants(Format::Csv) {
        ctx.artifacts
            .csv("optimize.csv", &[col("n_c", "1"), col("inverse_ratio", "1")], &rows)?;
    }
    ctx.artifacts.json(
        "optimum.json",
        &json!({
            "bandwidth": bandwidth,
            "n_det": d.n_det,
            "scan": { "n_c_star": grid[best], "ratio_star": 1.0 / inverse[best] },
            "optimum": optimum,
            "closed_form": { "n_c_star": n_closed, "ratio_star": ratio_closed },
            "populations": populations(&d, 0.0),
        }),
    )?;
    let entry = PlotEntry {
        log_x: true,
        log_y: true,
        ..plot("optimize.csv", "n_c", &["inverse_ratio"])
    };
    manifest_for_csv(ctx, Task::Optimize, vec![entry])
}

/// Plot entries point at CSV files, so they are dropped without CSV output.
pub(super) fn manifest_for_csv(ctx: &mut Context, task: Task, plots: Vec<PlotEntry>) -> Result<(), CliError> {
    let plots = if ctx.config.wants(Format::Csv) {
        plots
    } else {
        Vec::new()
    };
    ctx.artifacts.manifest(task.name(), plots)
}
