use thiserror::Error;

/// Domain errors raised by the parameter and closed-form layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("element `{name}` must be strictly positive (got {value})")]
    NonPositiveElement { name: &'static str, value: f64 },
    #[error("temperature `{name}` must be non-negative (got {value} K)")]
    NegativeTemperature { name: &'static str, value: f64 },
    #[error("weak coupling violated: C_c*omega_c*Z0 = {value:.4} (must be < 0.05)")]
    WeakCouplingViolated { value: f64 },
    #[error("mechanical frequency too close to the cavity: Omega_m/omega_c = {ratio:.4} (must be < 0.1)")]
    FrequencyRatioViolated { ratio: f64 },
    #[error("two-port coupling capacitors sum to {sum:e} F but C_c = {c_c:e} F")]
    InconsistentTopology { sum: f64, c_c: f64 },
    #[error("closed forms exist only for the red, green and blue schemes (got custom detuning {delta} rad/s)")]
    UnsupportedScheme { delta: f64 },
    #[error("cavity population must be > 0")]
    ZeroDrive,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
