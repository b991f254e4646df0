//! Recorded trajectories and their on-disk formats.
//!
//! Binary layout, all little-endian: magic `OMTRACE1`, `dt` (f64),
//! `n_samples` (u64), `n_channels` (u64), then per channel its name length
//! (u64), UTF-8 name and kind byte (0 real, 1 complex), followed by the
//! channel data in order, complex samples interleaved as (re, im) f64 pairs.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::Frame;

pub const MAGIC: &[u8; 8] = b"OMTRACE1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ChannelData {
    pub fn len(&self) -> usize {
        match self {
            ChannelData::Real(v) => v.len(),
            ChannelData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_finite(&self) -> bool {
        match self {
            ChannelData::Real(v) => v.iter().all(|x| x.is_finite()),
            ChannelData::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub data: ChannelData,
}

/// Unit of a channel from its name: displacements in m, node flux in
/// Wb, amplitudes and voltages in V.
pub fn channel_unit(name: &str) -> &'static str {
    match name {
        "x" | "x0" => "m",
        "phi" => "Wb",
        _ => "V",
    }
}

/// Run identification carried with a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub frame: Frame,
    /// Pump frequency ω_p [rad/s]; envelopes rotate around ω_p + nΩ_m.
    pub omega_p: f64,
    pub omega_m: f64,
    pub z0: f64,
    /// Run-clock time of the first recorded sample [s].
    pub t0: f64,
    /// Hash of the derived parameter set the run was made with.
    pub params_hash: u64,
    pub instability_terminated: bool,
}

/// Uniformly sampled multi-channel record. Rotating-frame traces hold
/// the complex envelopes `x0`, `mu_l`, `mu_p`, `mu_h` and the detected
/// output envelopes `v_l`, `v_p`, `v_h` [V]; laboratory traces hold the
/// real `phi`, `x` and `v_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub dt: f64,
    pub channels: Vec<Channel>,
    pub meta: TraceMeta,
}

impl TimeTrace {
    pub fn new(dt: f64, meta: TraceMeta) -> Self {
        Self {
            dt,
            channels: Vec::new(),
            meta,
        }
    }

    pub fn push(&mut self, name: &str, data: ChannelData) {
        debug_assert!(self.channels.is_empty() || data.len() == self.len());
        self.channels.push(Channel {
            name: name.to_string(),
            data,
        });
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.data.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelData> {
        self.channels.iter().find(|c| c.name == name).map(|c| &c.data)
    }

    pub fn complex(&self, name: &str) -> Option<&[Complex64]> {
        match self.channel(name)? {
            ChannelData::Complex(v) => Some(v),
            ChannelData::Real(_) => None,
        }
    }

    pub fn real(&self, name: &str) -> Option<&[f64]> {
        match self.channel(name)? {
            ChannelData::Real(v) => Some(v),
            ChannelData::Complex(_) => None,
        }
    }

    /// Name of the first channel holding a non-finite sample.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.channels
            .iter()
            .find(|c| !c.data.is_finite())
            .map(|c| c.name.as_str())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&self.dt.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.channels.len() as u64).to_le_bytes())?;
        for c in &self.channels {
            out.write_all(&(c.name.len() as u64).to_le_bytes())?;
            out.write_all(c.name.as_bytes())?;
            out.write_all(&[matches!(c.data, ChannelData::Complex(_)) as u8])?;
        }
        for c in &self.channels {
            match &c.data {
                ChannelData::Real(v) => {
                    for x in v {
                        out.write_all(&x.to_le_bytes())?;
                    }
                }
                ChannelData::Complex(v) => {
                    for z in v {
                        out.write_all(&z.re.to_le_bytes())?;
                        out.write_all(&z.im.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads the channels of a binary dump. Metadata other than `dt` is not
    /// stored in the file and is taken from `meta`.
    pub fn read_binary<R: Read>(mut input: R, meta: TraceMeta) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a trace dump"));
        }
        let dt = read_f64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        let n_channels = read_u64(&mut input)? as usize;
        let mut header = Vec::with_capacity(n_channels);
        for _ in 0..n_channels {
            let len = read_u64(&mut input)? as usize;
            let mut name = vec![0u8; len];
            input.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let mut kind = [0u8; 1];
            input.read_exact(&mut kind)?;
            header.push((name, kind[0]));
        }
        let mut trace = TimeTrace::new(dt, meta);
        for (name, kind) in header {
            let data = match kind {
                0 => ChannelData::Real((0..n).map(|_| read_f64(&mut input)).collect::<io::Result<_>>()?),
                1 => ChannelData::Complex(
                    (0..n)
                        .map(|_| Ok(Complex64::new(read_f64(&mut input)?, read_f64(&mut input)?)))
                        .collect::<io::Result<_>>()?,
                ),
                other => {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("channel kind {other}"),
                    ));
                }
            };
            trace.push(&name, data);
        }
        Ok(trace)
    }

    /// CSV with a `t_s` column and one column per real channel, or
    /// `<name>_re`, `<name>_im` per complex channel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["t_s".to_string()];
        let mut units = vec!["t_s[s]".to_string()];
        for c in &self.channels {
            let unit = channel_unit(&c.name);
            match c.data {
                ChannelData::Real(_) => {
                    header.push(c.name.clone());
                    units.push(format!("{}[{unit}]", c.name));
                }
                ChannelData::Complex(_) => {
                    for part in ["re", "im"] {
                        header.push(format!("{}_{part}", c.name));
                        units.push(format!("{}_{part}[{unit}]", c.name));
                    }
                }
            }
        }
        writeln!(out, "# units: {}", units.join(", "))?;
        writeln!(
            out,
            "# frame={:?} seed={} dt_s={:e}",
            self.meta.frame, self.meta.seed, self.dt
        )?;
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            write!(out, "{:.12e}", k as f64 * self.dt)?;
            for c in &self.channels {
                match &c.data {
                    ChannelData::Real(v) => write!(out, ",{:.12e}", v[k])?,
                    ChannelData::Complex(v) => write!(out, ",{:.12e},{:.12e}", v[k].re, v[k].im)?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn read_u64<R: Read>(input: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
