//! Physical values written with SI units, e.g. `"5 GHz"`, `"50 ohm"`,
//! `"-80 dBm"`, normalised to SI base units at parse time. Frequencies
//! given in Hz become angular frequencies; a bare number is already in
//! SI base units (rad/s for frequencies).

use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

const PREFIXES: [(&str, f64); 12] = [
    ("f", 1e-15),
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("μ", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
    ("T", 1e12),
];

/// A physical dimension and the unit symbols it accepts.
pub trait Dimension {
    const NAME: &'static str;
    /// Symbols with their factor to the SI base unit; each takes an
    /// optional metric prefix.
    const UNITS: &'static [(&'static str, f64)];

    /// Units that are not a plain scale factor.
    fn special(_value: f64, _unit: &str) -> Option<f64> {
        None
    }
}

macro_rules! dimension {
    ($ty:ident, $name:literal, [$(($sym:literal, $factor:expr)),* $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $ty;
        impl Dimension for $ty {
            const NAME: &'static str = $name;
            const UNITS: &'static [(&'static str, f64)] = &[$(($sym, $factor)),*];
        }
    };
}

dimension!(
    Frequency,
    "frequency",
    [("Hz", 2.0 * std::f64::consts::PI), ("rad/s", 1.0)]
);
dimension!(Capacitance, "capacitance", [("F", 1.0)]);
dimension!(Inductance, "inductance", [("H", 1.0)]);
dimension!(Resistance, "resistance", [("ohm", 1.0), ("Ohm", 1.0), ("Ω", 1.0)]);
dimension!(Mass, "mass", [("g", 1e-3)]);
dimension!(Temperature, "temperature", [("K", 1.0)]);
dimension!(Voltage, "voltage", [("V", 1.0)]);
dimension!(Time, "time", [("s", 1.0)]);
dimension!(Gradient, "capacitance gradient", [("F/m", 1.0)]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power;

impl Dimension for Power {
    const NAME: &'static str = "power";
    const UNITS: &'static [(&'static str, f64)] = &[("W", 1.0)];

    fn special(value: f64, unit: &str) -> Option<f64> {
        match unit {
            "dBm" => Some(1e-3 * 10f64.powf(value / 10.0)),
            "dBW" => Some(10f64.powf(value / 10.0)),
            _ => None,
        }
    }
}

/// Parses `"<number> <unit>"` (the space is optional) into SI base units.
pub fn parse<D: Dimension>(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let split = (0..=text.len())
        .rev()
        .filter(|&i| text.is_char_boundary(i))
        .find(|&i| text[..i].trim_end().parse::<f64>().is_ok())
        .ok_or_else(|| format!("`{text}` does not start with a number"))?;
    let value: f64 = text[..split].trim_end().parse().unwrap_or(f64::NAN);
    let unit = text[split..].trim();
    if unit.is_empty() {
        return Ok(value);
    }
    if let Some(v) = D::special(value, unit) {
        return Ok(v);
    }
    for (symbol, factor) in D::UNITS {
        if let Some(prefix) = unit.strip_suffix(symbol) {
            if let Some((_, scale)) = PREFIXES.iter().find(|(p, _)| *p == prefix) {
                return Ok(value * scale * factor);
            }
        }
    }
    let known: Vec<&str> = D::UNITS.iter().map(|u| u.0).collect();
    Err(format!(
        "unknown {} unit `{unit}` (expected {})",
        D::NAME,
        known.join(", ")
    ))
}

/// A value of dimension `D` in SI base units, read from a number or a
/// unit-suffixed string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity<D> {
    pub value: f64,
    dim: PhantomData<D>,
}

impl<D> Quantity<D> {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            dim: PhantomData,
        }
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> Result<Self, De::Error> {
        struct QuantityVisitor<D>(PhantomData<D>);

        impl<D: Dimension> Visitor<'_> for QuantityVisitor<D> {
            type Value = Quantity<D>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a {} as a number or a string such as \"5 GHz\"", D::NAME)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Quantity::new(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse::<D>(v).map(Quantity::new).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(QuantityVisitor(PhantomData))
    }
}
