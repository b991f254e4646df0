//! Circuit description and the quantities derived from it.
//!
//! The resonator is a parallel RLC node loaded by the coupling network.
//! Each port capacitor `C_c` in series with the line impedance `Z0` is
//! replaced by its Norton equivalent (a parallel resistor `R_ex` and a
//! current source), valid when `C_c·ω_c·Z0 ≪ 1`. All three port
//! topologies reduce to the same effective description, differing only
//! in how the external rate is split between drive and detection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::ModelError;

/// Upper bound on `C_c·ω_c·Z0` accepted by [`derive`].
pub const WEAK_COUPLING_LIMIT: f64 = 0.05;
/// Upper bound on `Ω_m/ω_c` accepted by [`derive`].
pub const FREQUENCY_RATIO_LIMIT: f64 = 0.1;

/// Port arrangement of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Distinct input and output ports through `c_c1` and `c_c2` [F].
    TwoPort { c_c1: f64, c_c2: f64 },
    /// Evanescent coupling to a through line (output loaded by `Z0/2`).
    Bidirectional,
    /// Reflection measurement through a single port.
    SinglePort,
}

/// Full experimental description: lumped elements, mechanics and baths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Inductance [H].
    pub inductance: f64,
    /// Total coupling capacitance [F] (`c_c1 + c_c2` for two ports).
    pub c_coupling: f64,
    /// Fixed capacitance [F].
    pub c_fixed: f64,
    /// Rest capacitance of the mobile element [F].
    pub c_gate0: f64,
    /// Capacitance gradient dC_g/dx [F/m].
    pub dcg_dx: f64,
    /// Internal loss resistance [Ω].
    pub r_internal: f64,
    /// Line impedance [Ω].
    pub z0: f64,
    pub topology: Topology,
    /// Effective mass [kg].
    pub mass: f64,
    /// Mechanical angular frequency [rad/s].
    pub omega_m: f64,
    /// Mechanical damping rate [rad/s].
    pub gamma_m: f64,
    /// Mechanical bath temperature [K].
    pub t_mech: f64,
    /// Temperature of the internal loss resistor [K].
    pub t_internal: f64,
    /// Temperature of the external port [K].
    pub t_external: f64,
    /// Detection noise in quanta.
    pub n_det: f64,
}

/// Quantities derived from [`CircuitParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub c_total: f64,
    pub omega_c: f64,
    pub r_external: f64,
    pub kappa_ex: f64,
    pub kappa_in: f64,
    pub kappa_t: f64,
    /// Per-port rates, two-port topology only.
    pub kappa_1: Option<f64>,
    pub kappa_2: Option<f64>,
    pub q_in: f64,
    pub q_ex: f64,
    pub q_t: f64,
    /// Coupling strength G = -dω_c/dx [rad/(s·m)].
    pub coupling_g: f64,
    pub x_zpf: f64,
    pub g0: f64,
    /// Conductance-weighted cavity temperature [K].
    pub t_cavity: f64,
    /// 1/(ω_c·2mΩ_m) [m²/J].
    pub xbar2: f64,
    // Copied through so downstream code needs only this struct.
    pub omega_m: f64,
    pub gamma_m: f64,
    pub mass: f64,
    pub t_mech: f64,
    pub t_external: f64,
    pub t_internal: f64,
    pub z0: f64,
    pub c_coupling: f64,
    pub n_det: f64,
    pub topology: Topology,
}

impl DerivedParams {
    /// Total loaded resistance R_t with 1/R_t = 1/R_ex + 1/R_in.
    pub fn r_total(&self) -> f64 {
        1.0 / (self.kappa_t * self.c_total)
    }

    pub fn r_internal(&self) -> f64 {
        1.0 / (self.kappa_in * self.c_total)
    }

    /// Resolved-sideband figure κ_t/Ω_m.
    pub fn sideband_resolution(&self) -> f64 {
        self.kappa_t / self.omega_m
    }

    /// Multiplicative coupling of the output voltage to the node flux,
    /// `V_out = -ω_c²·C_c·Z_load·φ`.
    pub fn output_gain(&self) -> f64 {
        let c_detect = match self.topology {
            Topology::TwoPort { c_c2, .. } => c_c2,
            _ => self.c_coupling,
        };
        self.omega_c * self.omega_c * c_detect * self.load_impedance()
    }

    /// Norton resistances of the drive-side and detection-side ports. They
    /// coincide for a single port; the bidirectional line splits `R_ex`
    /// into two equal halves in conductance.
    pub fn port_resistances(&self) -> (f64, f64) {
        match self.topology {
            Topology::SinglePort => (self.r_external, self.r_external),
            Topology::Bidirectional => (2.0 * self.r_external, 2.0 * self.r_external),
            Topology::TwoPort { .. } => {
                let r1 = 1.0 / (self.kappa_1.unwrap_or(self.kappa_ex) * self.c_total);
                let r2 = 1.0 / (self.kappa_2.unwrap_or(self.kappa_ex) * self.c_total);
                (r1, r2)
            }
        }
    }

    /// Impedance loading the detected node: `Z0/2` for the bidirectional
    /// arrangement, `Z0` otherwise.
    pub fn load_impedance(&self) -> f64 {
        match self.topology {
            Topology::Bidirectional => 0.5 * self.z0,
            _ => self.z0,
        }
    }

    /// Drive-side coupling capacitance.
    pub fn drive_capacitance(&self) -> f64 {
        match self.topology {
            Topology::TwoPort { c_c1, .. } => c_c1,
            _ => self.c_coupling,
        }
    }

    /// Standing-wave voltage on the drive capacitor for a source amplitude.
    pub fn drive_voltage(&self, v_p: f64) -> f64 {
        match self.topology {
            Topology::Bidirectional => v_p,
            _ => 2.0 * v_p,
        }
    }
}

/// Pumping scheme; fixes the detuning Δ = ω_p − ω_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Red,
    Green,
    Blue,
    /// Explicit detuning [rad/s].
    Custom(f64),
}

impl Scheme {
    pub fn detuning(&self, omega_m: f64) -> f64 {
        match *self {
            Scheme::Red => -omega_m,
            Scheme::Green => 0.0,
            Scheme::Blue => omega_m,
            Scheme::Custom(delta) => delta,
        }
    }
}

/// Microwave drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Source amplitude [V].
    pub v_p: f64,
    pub scheme: Scheme,
}

impl DriveParams {
    pub fn new(v_p: f64, scheme: Scheme) -> Self {
        Self { v_p, scheme }
    }

    pub fn detuning(&self, derived: &DerivedParams) -> f64 {
        self.scheme.detuning(derived.omega_m)
    }

    /// Source amplitude that stores `e_c` joules in the cavity.
    pub fn for_stored_energy(derived: &DerivedParams, scheme: Scheme, e_c: f64) -> Self {
        let delta = scheme.detuning(derived.omega_m);
        let couplings = topology_map(derived);
        let chi_p2 = pump_susceptibility(delta, derived.kappa_t).norm_sqr();
        let p_in = e_c / (couplings.kappa_drive * chi_p2);
        Self {
            v_p: (2.0 * derived.z0 * p_in).sqrt(),
            scheme,
        }
    }
}

fn pump_susceptibility(delta: f64, kappa_t: f64) -> Complex64 {
    1.0 / Complex64::new(0.5 * kappa_t, -delta)
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveElement { name, value })
    }
}

fn non_negative_temperature(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NegativeTemperature { name, value })
    }
}

impl CircuitParams {
    fn validate_elements(&self) -> Result<(), ModelError> {
        positive("L", self.inductance)?;
        positive("C_c", self.c_coupling)?;
        positive("C_k", self.c_fixed)?;
        positive("C_g0", self.c_gate0)?;
        positive("R_in", self.r_internal)?;
        positive("Z0", self.z0)?;
        positive("m", self.mass)?;
        positive("Omega_m", self.omega_m)?;
        positive("Gamma_m", self.gamma_m)?;
        if !self.dcg_dx.is_finite() {
            return Err(ModelError::InvalidArgument("dCg/dx must be finite".into()));
        }
        if self.n_det < 0.0 || !self.n_det.is_finite() {
            return Err(ModelError::InvalidArgument("n_det must be >= 0".into()));
        }
        non_negative_temperature("T_m", self.t_mech)?;
        non_negative_temperature("T_in", self.t_internal)?;
        non_negative_temperature("T_ex", self.t_external)?;
        if let Topology::TwoPort { c_c1, c_c2 } = self.topology {
            positive("C_c1", c_c1)?;
            positive("C_c2", c_c2)?;
            let sum = c_c1 + c_c2;
            if ((sum - self.c_coupling) / self.c_coupling).abs() > 1e-9 {
                return Err(ModelError::InconsistentTopology {
                    sum,
                    c_c: self.c_coupling,
                });
            }
        }
        Ok(())
    }
}

/// Norton resistance of one coupling capacitor into a load `z`.
fn norton_resistance(omega_c: f64, c: f64, z: f64) -> f64 {
    1.0 / ((omega_c * c).powi(2) * z)
}

/// Derives cavity and optomechanical parameters from circuit elements.
pub fn derive(circuit: &CircuitParams) -> Result<DerivedParams, ModelError> {
    circuit.validate_elements()?;

    let c_total = circuit.c_coupling + circuit.c_fixed + circuit.c_gate0;
    let omega_c = 1.0 / (circuit.inductance * c_total).sqrt();

    let coupling_figure = circuit.c_coupling * omega_c * circuit.z0;
    if coupling_figure >= WEAK_COUPLING_LIMIT {
        return Err(ModelError::WeakCouplingViolated { value: coupling_figure });
    }
    let ratio = circuit.omega_m / omega_c;
    if ratio >= FREQUENCY_RATIO_LIMIT {
        return Err(ModelError::FrequencyRatioViolated { ratio });
    }

    let (r_external, kappa_1, kappa_2) = match circuit.topology {
        Topology::SinglePort => (norton_resistance(omega_c, circuit.c_coupling, circuit.z0), None, None),
        // Two line impedances in parallel load the coupling capacitor.
        Topology::Bidirectional => (
            norton_resistance(omega_c, circuit.c_coupling, 0.5 * circuit.z0),
            None,
            None,
        ),
        Topology::TwoPort { c_c1, c_c2 } => {
            let r1 = norton_resistance(omega_c, c_c1, circuit.z0);
            let r2 = norton_resistance(omega_c, c_c2, circuit.z0);
            let r_ex = 1.0 / (1.0 / r1 + 1.0 / r2);
            (r_ex, Some(1.0 / (r1 * c_total)), Some(1.0 / (r2 * c_total)))
        }
    };

    let kappa_ex = 1.0 / (r_external * c_total);
    let kappa_in = 1.0 / (circuit.r_internal * c_total);
    let kappa_t = kappa_ex + kappa_in;

    let coupling_g = omega_c / (2.0 * c_total) * circuit.dcg_dx;
    let xbar2 = 1.0 / (omega_c * 2.0 * circuit.mass * circuit.omega_m);
    let x_zpf = (HBAR * omega_c * xbar2).sqrt();
    let t_cavity = (kappa_in * circuit.t_internal + kappa_ex * circuit.t_external) / kappa_t;

    Ok(DerivedParams {
        c_total,
        omega_c,
        r_external,
        kappa_ex,
        kappa_in,
        kappa_t,
        kappa_1,
        kappa_2,
        q_in: omega_c / kappa_in,
        q_ex: omega_c / kappa_ex,
        q_t: omega_c / kappa_t,
        coupling_g,
        x_zpf,
        g0: coupling_g * x_zpf,
        t_cavity,
        xbar2,
        omega_m: circuit.omega_m,
        gamma_m: circuit.gamma_m,
        mass: circuit.mass,
        t_mech: circuit.t_mech,
        t_external: circuit.t_external,
        t_internal: circuit.t_internal,
        z0: circuit.z0,
        c_coupling: circuit.c_coupling,
        n_det: circuit.n_det,
        topology: circuit.topology,
    })
}

/// How the external rate splits between the drive and detection sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub kappa_drive: f64,
    pub kappa_detect: f64,
    /// Prefactor on the output voltage relative to the single-port case.
    pub output_prefactor: f64,
}

pub fn topology_map(derived: &DerivedParams) -> EffectiveCouplings {
    match derived.topology {
        Topology::SinglePort => EffectiveCouplings {
            kappa_drive: derived.kappa_ex,
            kappa_detect: derived.kappa_ex,
            output_prefactor: 1.0,
        },
        Topology::TwoPort { .. } => EffectiveCouplings {
            kappa_drive: derived.kappa_1.unwrap_or(derived.kappa_ex),
            kappa_detect: derived.kappa_2.unwrap_or(derived.kappa_ex),
            output_prefactor: 1.0,
        },
        Topology::Bidirectional => EffectiveCouplings {
            kappa_drive: 0.5 * derived.kappa_ex,
            kappa_detect: 0.5 * derived.kappa_ex,
            output_prefactor: 0.5,
        },
    }
}

/// Mode populations in units of the relevant quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub n_c: f64,
    pub n_c_th: f64,
    pub n_ex_th: f64,
    pub n_m_th: f64,
}

/// Populations for a cavity storing `e_c` joules. No zero-point offset is
/// added: the engine is classical.
pub fn populations(derived: &DerivedParams, e_c: f64) -> Populations {
    let quantum_c = HBAR * derived.omega_c;
    Populations {
        n_c: e_c / quantum_c,
        n_c_th: K_B * derived.t_cavity / quantum_c,
        n_ex_th: K_B * derived.t_external / quantum_c,
        n_m_th: K_B * derived.t_mech / (HBAR * derived.omega_m),
    }
}

/// Stored energy for a target coherent population.
pub fn energy_for_population(derived: &DerivedParams, n_c: f64) -> f64 {
    n_c * HBAR * derived.omega_c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFlow {
    /// Power carried by the incoming wave [W].
    pub p_in: f64,
    /// Energy stored in the resonator [J].
    pub e_c: f64,
    /// Pump line power in the detected spectrum [W].
    pub p_pump: f64,
}

pub fn energy_flow(derived: &DerivedParams, drive: &DriveParams) -> EnergyFlow {
    let couplings = topology_map(derived);
    let delta = drive.detuning(derived);
    let chi_p2 = pump_susceptibility(delta, derived.kappa_t).norm_sqr();
    let p_in = drive.v_p * drive.v_p / (2.0 * derived.z0);
    let e_c = p_in * couplings.kappa_drive * chi_p2;
    EnergyFlow {
        p_in,
        e_c,
        p_pump: e_c * couplings.kappa_detect,
    }
}

/// Complex steady-state pump flux amplitude μ_p [V·s] from the Norton drive
/// current `I_p = iω_c·C_c·V_d`.
pub fn pump_amplitude(derived: &DerivedParams, drive: &DriveParams) -> Complex64 {
    let delta = drive.detuning(derived);
    let v_d = derived.drive_voltage(drive.v_p);
    let i_p = Complex64::new(0.0, derived.omega_c * derived.drive_capacitance() * v_d);
    Complex64::new(0.0, 0.5) * i_p / (derived.omega_c * derived.c_total) * pump_susceptibility(delta, derived.kappa_t)
}

/// Target rates for building a single-port circuit; convenient when a
/// parameter set is specified in rate units rather than as elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDesign {
    pub omega_c: f64,
    pub kappa_ex: f64,
    pub kappa_in: f64,
    pub z0: f64,
    pub c_total: f64,
    /// Fraction of `c_total` carried by the mobile element at rest.
    pub gate_fraction: f64,
    /// Coupling strength G [rad/(s·m)].
    pub coupling_g: f64,
    pub mass: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub t_mech: f64,
    pub t_internal: f64,
    pub t_external: f64,
    pub n_det: f64,
}

impl RateDesign {
    /// Element values reproducing these rates for a single-port resonator.
    pub fn to_circuit(&self) -> CircuitParams {
        let c_coupling = (self.kappa_ex * self.c_total / (self.omega_c * self.omega_c * self.z0)).sqrt();
        let c_gate0 = self.gate_fraction * self.c_total;
        CircuitParams {
            inductance: 1.0 / (self.omega_c * self.omega_c * self.c_total),
            c_coupling,
            c_fixed: self.c_total - c_coupling - c_gate0,
            c_gate0,
            dcg_dx: 2.0 * self.c_total * self.coupling_g / self.omega_c,
            r_internal: 1.0 / (self.kappa_in * self.c_total),
            z0: self.z0,
            topology: Topology::SinglePort,
            mass: self.mass,
            omega_m: self.omega_m,
            gamma_m: self.gamma_m,
            t_mech: self.t_mech,
            t_internal: self.t_internal,
            t_external: self.t_external,
            n_det: self.n_det,
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::five_ghz;
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn resonance_identity() {
        let c = five_ghz();
        let d = derive(&c).unwrap();
        assert!((d.omega_c * d.omega_c * c.inductance * d.c_total - 1.0).abs() < 1e-14);
        assert!((d.omega_c / (2.0 * PI) - 5.0329e9).abs() / 5e9 < 1e-3);
    }

    #[test]
    fn rates_add_and_quality_factors() {
        let d = derive(&five_ghz()).unwrap();
        assert_eq!(d.kappa_t, d.kappa_ex + d.kappa_in);
        assert!((d.q_ex - d.omega_c / d.kappa_ex).abs() < 1e-9 * d.q_ex);
        assert!((d.q_t - d.omega_c / d.kappa_t).abs() < 1e-9 * d.q_t);
    }

    #[test]
    fn zero_gradient_kills_coupling() {
        let mut c = five_ghz();
        c.dcg_dx = 0.0;
        let d = derive(&c).unwrap();
        assert_eq!(d.coupling_g, 0.0);
        assert_eq!(d.g0, 0.0);
    }

    #[test]
    fn external_rate_matches_exact_admittance() {
        // Z0 = 50 Ω, C_c = 2 fF at 5 GHz: compare with the full admittance.
        let omega = 2.0 * PI * 5.0e9;
        let c_c = 2.0e-15;
        let c_total = 1.0e-12;
        let l = 1.0 / (omega * omega * c_total);
        let circuit = CircuitParams {
            inductance: l,
            c_coupling: c_c,
            c_fixed: 0.9e-12 - c_c,
            c_gate0: 0.1e-12,
            ..five_ghz()
        };
        let d = derive(&circuit).unwrap();
        assert!((d.omega_c - omega).abs() / omega < 1e-12);
        assert!((c_c * omega * 50.0 - 0.00314).abs() < 1e-4);
        let y = 1.0 / Complex64::new(50.0, -1.0 / (omega * c_c));
        let kappa_exact = y.re / c_total;
        assert!(((d.kappa_ex - kappa_exact) / kappa_exact).abs() < 5e-3);
        assert!((d.kappa_ex - 1.0 / (d.r_external * d.c_total)).abs() < 1e-9 * d.kappa_ex);
    }

    #[test]
    fn weak_coupling_enforced() {
        let mut c = five_ghz();
        c.c_coupling = 1.0e-13;
        c.c_gate0 = 0.1e-12 - 1.0e-13 + 1e-16;
        assert!(matches!(derive(&c), Err(ModelError::WeakCouplingViolated { .. })));
    }

    #[test]
    fn non_positive_elements_rejected() {
        let mut c = five_ghz();
        c.inductance = 0.0;
        assert!(matches!(
            derive(&c),
            Err(ModelError::NonPositiveElement { name: "L", .. })
        ));
        let mut c = five_ghz();
        c.t_mech = -1.0;
        assert!(matches!(derive(&c), Err(ModelError::NegativeTemperature { .. })));
    }

    #[test]
    fn frequency_ratio_enforced() {
        let mut c = five_ghz();
        c.omega_m = 0.2 * 2.0 * PI * 5.0e9;
        assert!(matches!(derive(&c), Err(ModelError::FrequencyRatioViolated { .. })));
    }

    #[test]
    fn topology_mapping() {
        let mut c = five_ghz();
        let single = derive(&c).unwrap();
        let m = topology_map(&single);
        assert_eq!((m.kappa_drive, m.kappa_detect), (single.kappa_ex, single.kappa_ex));

        c.topology = Topology::Bidirectional;
        let bidir = derive(&c).unwrap();
        let m = topology_map(&bidir);
        assert!((m.kappa_drive - 0.5 * bidir.kappa_ex).abs() < 1e-9 * bidir.kappa_ex);
        assert_eq!(m.kappa_drive, m.kappa_detect);
        // Same elements: the half-impedance load halves the external rate,
        // and each side sees half of that.
        assert!((bidir.kappa_ex - 0.5 * single.kappa_ex).abs() < 1e-9 * single.kappa_ex);

        c.topology = Topology::TwoPort {
            c_c1: 0.5 * c.c_coupling,
            c_c2: 0.5 * c.c_coupling,
        };
        let two = derive(&c).unwrap();
        let m = topology_map(&two);
        assert!((m.kappa_drive - 0.5 * two.kappa_ex).abs() < 1e-9 * two.kappa_ex);
        assert!((m.kappa_detect - 0.5 * two.kappa_ex).abs() < 1e-9 * two.kappa_ex);
    }

    #[test]
    fn bidirectional_halving_is_literal() {
        let mut d = derive(&five_ghz()).unwrap();
        d.kappa_ex = 1e6;
        d.topology = Topology::Bidirectional;
        let m = topology_map(&d);
        assert_eq!((m.kappa_drive, m.kappa_detect), (5e5, 5e5));
    }

    #[test]
    fn two_port_inconsistent_sum_rejected() {
        let mut c = five_ghz();
        c.topology = Topology::TwoPort {
            c_c1: 1e-15,
            c_c2: 2e-15,
        };
        assert!(matches!(derive(&c), Err(ModelError::InconsistentTopology { .. })));
    }

    #[test]
    fn populations_basic() {
        let mut c = five_ghz();
        c.t_mech = 0.0;
        let d = derive(&c).unwrap();
        let p = populations(&d, HBAR * d.omega_c);
        assert_eq!(p.n_m_th, 0.0);
        assert!((p.n_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_flow_on_resonance() {
        let d = derive(&five_ghz()).unwrap();
        let drive = DriveParams::new(1e-6, Scheme::Green);
        let flow = energy_flow(&d, &drive);
        let expected = 4.0 * d.kappa_ex * d.kappa_ex / (d.kappa_t * d.kappa_t);
        assert!(((flow.p_pump / flow.p_in) - expected).abs() < 1e-12 * expected);

        let zero = energy_flow(&d, &DriveParams::new(0.0, Scheme::Red));
        assert_eq!((zero.p_in, zero.e_c, zero.p_pump), (0.0, 0.0, 0.0));
    }

    #[test]
    fn stored_energy_matches_current_route() {
        for topology in [
            Topology::SinglePort,
            Topology::Bidirectional,
            Topology::TwoPort {
                c_c1: 1.5e-15,
                c_c2: 0.5e-15,
            },
        ] {
            let c = CircuitParams { topology, ..five_ghz() };
            let d = derive(&c).unwrap();
            let drive = DriveParams::new(3e-5, Scheme::Custom(0.37 * d.kappa_t));
            let flow = energy_flow(&d, &drive);
            let mu_p = pump_amplitude(&d, &drive);
            let e_c = d.c_total * d.omega_c * d.omega_c * mu_p.norm_sqr() / 2.0;
            assert!(((e_c - flow.e_c) / e_c).abs() < 1e-12, "{topology:?}");
        }
    }

    #[test]
    fn drive_for_stored_energy_roundtrip() {
        let d = derive(&five_ghz()).unwrap();
        let drive = DriveParams::for_stored_energy(&d, Scheme::Red, 1e-15);
        assert!((energy_flow(&d, &drive).e_c - 1e-15).abs() < 1e-27);
    }

    #[test]
    fn rate_design_roundtrip() {
        let design = RateDesign {
            omega_c: 2.0 * PI * 6e9,
            kappa_ex: 2.0 * PI * 1e6,
            kappa_in: 2.0 * PI * 0.3e6,
            z0: 50.0,
            c_total: 0.5e-12,
            gate_fraction: 0.2,
            coupling_g: 1e14,
            mass: 1e-15,
            omega_m: 2.0 * PI * 5e6,
            gamma_m: 2.0 * PI * 50.0,
            t_mech: 0.1,
            t_internal: 0.1,
            t_external: 0.1,
            n_det: 10.0,
        };
        let d = derive(&design.to_circuit()).unwrap();
        assert!((d.omega_c / design.omega_c - 1.0).abs() < 1e-12);
        assert!((d.kappa_ex / design.kappa_ex - 1.0).abs() < 1e-12);
        assert!((d.kappa_in / design.kappa_in - 1.0).abs() < 1e-12);
        assert!((d.coupling_g / design.coupling_g - 1.0).abs() < 1e-12);
    }
}
