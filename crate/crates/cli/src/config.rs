//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use optomech_core::params::{derive, energy_for_population, RateDesign};
use optomech_core::{CircuitParams, DerivedParams, DriveParams, Scheme, Topology};
use serde::Deserialize;

use crate::error::CliError;
use crate::units::{
    Capacitance, Frequency, Gradient, Inductance, Mass, Power, Quantity, Resistance, Temperature, Time, Voltage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Derive,
    Spectrum,
    Sweep,
    Simulate,
    Compare,
    Optimize,
    Asymmetry,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Derive => "derive",
            Task::Spectrum => "spectrum",
            Task::Sweep => "sweep",
            Task::Simulate => "simulate",
            Task::Compare => "compare",
            Task::Optimize => "optimize",
            Task::Asymmetry => "asymmetry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must match the task given on the command line.
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    pub circuit: Option<CircuitBlock>,
    pub rates: Option<RatesBlock>,
    pub mechanics: MechanicsBlock,
    #[serde(default)]
    pub thermal: ThermalBlock,
    pub drive: Option<DriveBlock>,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub compare: CompareBlock,
    #[serde(default)]
    pub optimize: OptimizeBlock,
    #[serde(default)]
    pub asymmetry: AsymmetryBlock,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyName {
    SinglePort,
    Bidirectional,
    TwoPort,
}

/// Lumped elements of the resonator.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitBlock {
    pub inductance: Quantity<Inductance>,
    /// Total coupling capacitance; optional for two ports.
    pub c_coupling: Option<Quantity<Capacitance>>,
    pub c_fixed: Quantity<Capacitance>,
    pub c_gate0: Quantity<Capacitance>,
    pub dcg_dx: Quantity<Gradient>,
    pub r_internal: Quantity<Resistance>,
    pub z0: Quantity<Resistance>,
    #[serde(default = "single_port")]
    pub topology: TopologyName,
    pub c_c1: Option<Quantity<Capacitance>>,
    pub c_c2: Option<Quantity<Capacitance>>,
}

fn single_port() -> TopologyName {
    TopologyName::SinglePort
}

/// Single-port resonator specified by its rates.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesBlock {
    pub omega_c: Quantity<Frequency>,
    pub kappa_ex: Quantity<Frequency>,
    pub kappa_in: Quantity<Frequency>,
    pub z0: Quantity<Resistance>,
    pub c_total: Quantity<Capacitance>,
    pub gate_fraction: f64,
    /// Coupling strength G [rad/(s·m)].
    pub coupling_g: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsBlock {
    pub mass: Quantity<Mass>,
    pub omega_m: Quantity<Frequency>,
    pub gamma_m: Quantity<Frequency>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBlock {
    #[serde(default = "zero_kelvin")]
    pub t_mech: Quantity<Temperature>,
    #[serde(default = "zero_kelvin")]
    pub t_internal: Quantity<Temperature>,
    #[serde(default = "zero_kelvin")]
    pub t_external: Quantity<Temperature>,
    #[serde(default = "one")]
    pub n_det: f64,
}

impl Default for ThermalBlock {
    fn default() -> Self {
        Self {
            t_mech: zero_kelvin(),
            t_internal: zero_kelvin(),
            t_external: zero_kelvin(),
            n_det: 1.0,
        }
    }
}

fn zero_kelvin() -> Quantity<Temperature> {
    Quantity::new(0.0)
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Red,
    Green,
    Blue,
}

/// Pump: a scheme or an explicit detuning, and exactly one of `v_p`,
/// `power` or `n_c`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    pub scheme: Option<SchemeName>,
    pub detuning: Option<Quantity<Frequency>>,
    pub v_p: Option<Quantity<Voltage>>,
    pub power: Option<Quantity<Power>>,
    pub n_c: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    /// Half-width of the grid around the pump, in units of Ω_m.
    #[serde(default = "default_span")]
    pub span: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self {
            span: default_span(),
            points: default_points(),
        }
    }
}

fn default_span() -> f64 {
    1.5
}

fn default_points() -> usize {
    4001
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Detuning range in units of Ω_m.
    #[serde(default = "default_sweep_lo")]
    pub detuning_min: f64,
    #[serde(default = "default_sweep_hi")]
    pub detuning_max: f64,
    #[serde(default = "default_sweep_points")]
    pub points: usize,
    /// Values of κ_t/(2Ω_m), one curve each; empty keeps the device value.
    #[serde(default)]
    pub kappa_over_2omega_m: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            detuning_min: default_sweep_lo(),
            detuning_max: default_sweep_hi(),
            points: default_sweep_points(),
            kappa_over_2omega_m: Vec::new(),
        }
    }
}

fn default_sweep_lo() -> f64 {
    -2.0
}

fn default_sweep_hi() -> f64 {
    2.0
}

fn default_sweep_points() -> usize {
    401
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Rotating,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionName {
    Free,
    Frozen,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default = "rotating")]
    pub frame: FrameName,
    /// Recorded duration; defaults to 200/Γ_m (rotating) or 20 mechanical
    /// periods (lab).
    pub duration: Option<Quantity<Time>>,
    pub dt: Option<Quantity<Time>>,
    pub burn_in: Option<Quantity<Time>>,
    /// Steps per recorded sample. At the default step the detected output
    /// needs at most 6 to keep the three sideband windows.
    #[serde(default = "default_simulate_decimation")]
    pub decimation: usize,
    /// Welch segment length in samples; 0 picks one from Γ_m.
    #[serde(default)]
    pub segment: usize,
    #[serde(default)]
    pub noisy_pump: bool,
    #[serde(default = "free")]
    pub motion: MotionName,
    /// Also write the trace as CSV.
    #[serde(default)]
    pub trace_csv: bool,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            frame: rotating(),
            duration: None,
            dt: None,
            burn_in: None,
            decimation: default_simulate_decimation(),
            segment: 0,
            noisy_pump: false,
            motion: free(),
            trace_csv: false,
        }
    }
}

fn rotating() -> FrameName {
    FrameName::Rotating
}

fn free() -> MotionName {
    MotionName::Free
}

fn default_decimation() -> usize {
    8
}

fn default_simulate_decimation() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    /// Seeds `seed, seed + 1, …` run in parallel.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Record length of each run in units of 1/Γ_m.
    #[serde(default = "default_compare_duration")]
    pub duration_gamma: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

impl Default for CompareBlock {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            duration_gamma: default_compare_duration(),
            decimation: default_decimation(),
        }
    }
}

fn default_runs() -> usize {
    4
}

fn default_compare_duration() -> f64 {
    2000.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeBlock {
    /// Integration bandwidth in units of Γ_m.
    #[serde(default = "default_bandwidth")]
    pub bandwidth_gamma: f64,
    #[serde(default = "default_nc_min")]
    pub n_c_min: f64,
    #[serde(default = "default_nc_max")]
    pub n_c_max: f64,
    #[serde(default = "default_optimize_points")]
    pub points: usize,
}

impl Default for OptimizeBlock {
    fn default() -> Self {
        Self {
            bandwidth_gamma: default_bandwidth(),
            n_c_min: default_nc_min(),
            n_c_max: default_nc_max(),
            points: default_optimize_points(),
        }
    }
}

fn default_bandwidth() -> f64 {
    6.0
}

fn default_nc_min() -> f64 {
    1e2
}

fn default_nc_max() -> f64 {
    1e12
}

fn default_optimize_points() -> usize {
    1001
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetryBlock {
    /// Also measure σ∓² from simulated spectra.
    #[serde(default)]
    pub simulate: bool,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_compare_duration")]
    pub duration_gamma: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

impl Default for AsymmetryBlock {
    fn default() -> Self {
        Self {
            simulate: false,
            runs: default_runs(),
            duration_gamma: default_compare_duration(),
            decimation: default_decimation(),
        }
    }
}

/// How the pump strength was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    SourceAmplitude(f64),
    Power(f64),
    Population(f64),
}

/// Scheme and strength of the pump, before a device is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub scheme: Scheme,
    pub strength: Strength,
}

impl DriveSpec {
    /// Drive for a device, possibly at another scheme.
    pub fn resolve(&self, derived: &DerivedParams, scheme: Scheme) -> DriveParams {
        match self.strength {
            Strength::SourceAmplitude(v_p) => DriveParams::new(v_p, scheme),
            Strength::Power(p) => DriveParams::new((2.0 * derived.z0 * p).sqrt(), scheme),
            Strength::Population(n_c) => {
                DriveParams::for_stored_energy(derived, scheme, energy_for_population(derived, n_c))
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (&self.circuit, &self.rates) {
            (Some(_), Some(_)) => return bad("give either [circuit] or [rates], not both".into()),
            (None, None) => return bad("missing [circuit] (or [rates]) block".into()),
            _ => {}
        }
        if let Some(c) = &self.circuit {
            match c.topology {
                TopologyName::TwoPort if c.c_c1.is_none() || c.c_c2.is_none() => {
                    return bad("circuit: topology = \"two_port\" needs c_c1 and c_c2".into())
                }
                TopologyName::TwoPort => {}
                _ if c.c_coupling.is_none() => return bad("circuit: missing field `c_coupling`".into()),
                _ if c.c_c1.is_some() || c.c_c2.is_some() => {
                    return bad("circuit: c_c1 and c_c2 apply only to topology = \"two_port\"".into())
                }
                _ => {}
            }
        }
        if let Some(d) = &self.drive {
            if d.scheme.is_some() == d.detuning.is_some() {
                return bad("drive: give exactly one of `scheme` or `detuning`".into());
            }
            let given = [d.v_p.is_some(), d.power.is_some(), d.n_c.is_some()]
                .iter()
                .filter(|g| **g)
                .count();
            if given != 1 {
                return bad("drive: give exactly one of `v_p`, `power` or `n_c`".into());
            }
            if let Some(n) = d.n_c {
                if !(n >= 0.0) {
                    return bad(format!("drive.n_c must be >= 0 (got {n})"));
                }
            }
            if let Some(p) = d.power {
                if !(p.value >= 0.0) {
                    return bad(format!("drive.power must be >= 0 W (got {})", p.value));
                }
            }
        }
        if self.formats.is_empty() {
            return bad("formats: list at least one of \"csv\", \"json\"".into());
        }
        let s = &self.simulate;
        if s.decimation == 0 || self.compare.decimation == 0 || self.asymmetry.decimation == 0 {
            return bad("decimation must be >= 1".into());
        }
        if self.spectrum.points < 2 || self.sweep.points < 2 || self.optimize.points < 2 {
            return bad("grids need at least 2 points".into());
        }
        if !(self.optimize.n_c_min > 0.0 && self.optimize.n_c_max > self.optimize.n_c_min) {
            return bad("optimize: need 0 < n_c_min < n_c_max".into());
        }
        if !(self.sweep.detuning_max > self.sweep.detuning_min) {
            return bad("sweep: need detuning_min < detuning_max".into());
        }
        if self.compare.runs == 0 || self.asymmetry.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        Ok(())
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    pub fn circuit_params(&self) -> CircuitParams {
        let m = &self.mechanics;
        let t = &self.thermal;
        if let Some(r) = &self.rates {
            return RateDesign {
                omega_c: r.omega_c.value,
                kappa_ex: r.kappa_ex.value,
                kappa_in: r.kappa_in.value,
                z0: r.z0.value,
                c_total: r.c_total.value,
                gate_fraction: r.gate_fraction,
                coupling_g: r.coupling_g,
                mass: m.mass.value,
                omega_m: m.omega_m.value,
                gamma_m: m.gamma_m.value,
                t_mech: t.t_mech.value,
                t_internal: t.t_internal.value,
                t_external: t.t_external.value,
                n_det: t.n_det,
            }
            .to_circuit();
        }
        let c = self.circuit.as_ref().expect("checked on load");
        let (topology, c_coupling) = match c.topology {
            TopologyName::SinglePort => (Topology::SinglePort, c.c_coupling.map(|q| q.value).unwrap_or(0.0)),
            TopologyName::Bidirectional => (Topology::Bidirectional, c.c_coupling.map(|q| q.value).unwrap_or(0.0)),
            TopologyName::TwoPort => {
                let (c1, c2) = (
                    c.c_c1.map(|q| q.value).unwrap_or(0.0),
                    c.c_c2.map(|q| q.value).unwrap_or(0.0),
                );
                (
                    Topology::TwoPort { c_c1: c1, c_c2: c2 },
                    c.c_coupling.map(|q| q.value).unwrap_or(c1 + c2),
                )
            }
        };
        CircuitParams {
            inductance: c.inductance.value,
            c_coupling,
            c_fixed: c.c_fixed.value,
            c_gate0: c.c_gate0.value,
            dcg_dx: c.dcg_dx.value,
            r_internal: c.r_internal.value,
            z0: c.z0.value,
            topology,
            mass: m.mass.value,
            omega_m: m.omega_m.value,
            gamma_m: m.gamma_m.value,
            t_mech: t.t_mech.value,
            t_internal: t.t_internal.value,
            t_external: t.t_external.value,
            n_det: t.n_det,
        }
    }

    pub fn derived(&self) -> Result<DerivedParams, CliError> {
        Ok(derive(&self.circuit_params())?)
    }

    pub fn drive_spec(&self) -> Option<DriveSpec> {
        let d = self.drive.as_ref()?;
        let scheme = match (d.scheme, d.detuning) {
            (Some(SchemeName::Red), _) => Scheme::Red,
            (Some(SchemeName::Green), _) => Scheme::Green,
            (Some(SchemeName::Blue), _) => Scheme::Blue,
            (None, Some(delta)) => Scheme::Custom(delta.value),
            (None, None) => unreachable!("checked on load"),
        };
        let strength = match (d.v_p, d.power, d.n_c) {
            (Some(v), _, _) => Strength::SourceAmplitude(v.value),
            (_, Some(p), _) => Strength::Power(p.value),
            (_, _, Some(n)) => Strength::Population(n),
            _ => unreachable!("checked on load"),
        };
        Some(DriveSpec { scheme, strength })
    }

    /// The drive block, required by every task except `derive` and `optimize`.
    pub fn require_drive(&self, task: Task) -> Result<DriveSpec, CliError> {
        self.drive_spec()
            .ok_or_else(|| CliError::Config(format!("task `{}` needs a [drive] block", task.name())))
    }
}
