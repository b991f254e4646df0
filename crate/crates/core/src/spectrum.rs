//! Sampled spectral densities shared by the analytic and estimation layers.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// m²·s
    Displacement,
    /// N²·s
    Force,
    /// W/(rad/s), folded onto positive frequencies.
    OutputPsd,
    /// m²·s
    Imprecision,
    /// Generic estimate of a recorded channel (unit of channel² · s).
    Estimate,
}

impl SpectrumKind {
    pub fn unit(&self) -> &'static str {
        match self {
            SpectrumKind::Displacement | SpectrumKind::Imprecision => "m^2*s",
            SpectrumKind::Force => "N^2*s",
            SpectrumKind::OutputPsd => "W/(rad/s)",
            SpectrumKind::Estimate => "channel^2*s",
        }
    }
}

/// Non-fatal conditions attached to a computed spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumWarning {
    /// Γ_m + Γ_opt ≤ 0: the mechanical peak is not integrable.
    Unstable,
    /// κ_t/Ω_m > 0.5: the component windows overlap, result approximate.
    SidebandOverlap,
}

/// Named additive contribution to a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub values: Vec<f64>,
}

/// PSD sampled on an angular-frequency grid. Densities are two-sided in
/// angular frequency, normalised so that `∫ S dω/(2π)` is the variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub components: Vec<Component>,
    pub warnings: Vec<SpectrumWarning>,
}

impl SpectrumResult {
    pub fn new(omega: Vec<f64>, values: Vec<f64>, kind: SpectrumKind) -> Self {
        debug_assert_eq!(omega.len(), values.len());
        Self {
            omega,
            values,
            kind,
            components: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push_component(&mut self, label: &str, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.omega.len());
        self.components.push(Component {
            label: label.to_string(),
            values,
        });
    }

    pub fn has_warning(&self, warning: SpectrumWarning) -> bool {
        self.warnings.contains(&warning)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn component(&self, label: &str) -> Option<&[f64]> {
        self.components
            .iter()
            .find(|c| c.label == label)
            .map(|c| c.values.as_slice())
    }

    /// Trapezoid estimate of `∫ S dω/(2π)` over the grid.
    pub fn integrated_variance(&self) -> f64 {
        integrate(&self.omega, &self.values) / (2.0 * std::f64::consts::PI)
    }

    /// Trapezoid `∫ S dω/(2π)` restricted to `[lo, hi]`.
    pub fn band_variance(&self, lo: f64, hi: f64) -> f64 {
        let (w, v): (Vec<f64>, Vec<f64>) = self
            .omega
            .iter()
            .zip(&self.values)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(w, v)| (*w, *v))
            .unzip();
        integrate(&w, &v) / (2.0 * std::f64::consts::PI)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        for c in &mut out.components {
            c.values.iter_mut().for_each(|v| *v *= factor);
        }
        out
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.omega.windows(2).all(|w| w[1] > w[0])
    }

    /// Writes the `omega_rad_s,psd_value,component_label` CSV layout: one
    /// `total` row per grid point followed by each labelled component.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# units: omega_rad_s[rad/s], psd_value[{}], component_label[-]",
            self.kind.unit()
        )?;
        writeln!(out, "omega_rad_s,psd_value,component_label")?;
        for (w, v) in self.omega.iter().zip(&self.values) {
            writeln!(out, "{:.12e},{:.12e},total", w, v)?;
        }
        for c in &self.components {
            for (w, v) in self.omega.iter().zip(&c.values) {
                writeln!(out, "{:.12e},{:.12e},{}", w, v, c.label)?;
            }
        }
        Ok(())
    }
}

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn integrate(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Uniform grid of `n` points spanning `[lo, hi]` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}
