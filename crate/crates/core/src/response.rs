//! Frequency grids, two-port scattering responses and the distances used to
//! compare them.
//!
//! A [`Response`] holds the four complex S-parameters of a two-port sampled on
//! a uniform [`FrequencyGrid`]. Engines never compare whole responses; they
//! compare the real vectors produced by a [`ChannelSelector`], either the
//! magnitude in dB (one entry per frequency) or the interleaved real and
//! imaginary parts (two entries per frequency).

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing grid descriptors.
const GRID_EQ_TOL: f64 = 1e-12;

/// Uniform, explicitly stored frequency grid in GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct FrequencyGrid {
    f_min: f64,
    f_max: f64,
    step: f64,
    points: Vec<f64>,
}

/// Wire form of a grid: only the three descriptors, points are re-derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub step: f64,
}

impl TryFrom<GridSpec> for FrequencyGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        FrequencyGrid::new(spec.f_min, spec.f_max, spec.step)
    }
}

impl From<FrequencyGrid> for GridSpec {
    fn from(grid: FrequencyGrid) -> Self {
        GridSpec {
            f_min: grid.f_min,
            f_max: grid.f_max,
            step: grid.step,
        }
    }
}

impl FrequencyGrid {
    /// Builds the grid `f_min, f_min + step, ..., f_max`.
    ///
    /// The span must be an integral number of steps. The integrality test
    /// allows 1e-9 plus the cancellation error of `f_max - f_min` itself, so
    /// that grids with sub-ppm spans around a large offset are still accepted.
    pub fn new(f_min: f64, f_max: f64, step: f64) -> Result<Self> {
        if !(f_min.is_finite() && f_max.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("grid descriptors must be finite".into()));
        }
        if f_min >= f_max {
            return Err(Error::InvalidGrid(format!(
                "f_min ({f_min}) must be below f_max ({f_max})"
            )));
        }
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!("step ({step}) must be positive")));
        }
        let ratio = (f_max - f_min) / step;
        let intervals = ratio.round();
        let cancellation = 4.0 * f64::EPSILON * f_min.abs().max(f_max.abs()) / step;
        if (ratio - intervals).abs() > 1e-9 + cancellation {
            return Err(Error::InvalidGrid(format!(
                "span {} GHz is not an integral number of {step} GHz steps (ratio {ratio})",
                f_max - f_min
            )));
        }
        let intervals = intervals as usize;
        let mut points: Vec<f64> = (0..intervals).map(|i| f_min + i as f64 * step).collect();
        points.push(f_max);
        Ok(FrequencyGrid {
            f_min,
            f_max,
            step,
            points,
        })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of points `m`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when both grids describe the same points.
    pub fn same_as(&self, other: &FrequencyGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= GRID_EQ_TOL * a.abs().max(b.abs()).max(1.0);
        self.len() == other.len()
            && close(self.f_min, other.f_min)
            && close(self.f_max, other.f_max)
            && close(self.step, other.step)
    }

    pub(crate) fn ensure_same(&self, other: &FrequencyGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for FrequencyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}..{} GHz step {} ({} points)]",
            self.f_min,
            self.f_max,
            self.step,
            self.len()
        )
    }
}

/// One of the four two-port scattering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    S11,
    S12,
    S21,
    S22,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::S11, Channel::S12, Channel::S21, Channel::S22];
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Channel::S11 => "S11",
            Channel::S12 => "S12",
            Channel::S21 => "S21",
            Channel::S22 => "S22",
        };
        f.write_str(name)
    }
}

/// How a channel is turned into real residual entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// `20 log10 |S|`, one entry per frequency.
    MagnitudeDb,
    /// Real and imaginary parts, two entries per frequency.
    ComplexRi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSelector {
    pub channel: Channel,
    pub representation: Representation,
}

impl ChannelSelector {
    pub const fn db(channel: Channel) -> Self {
        ChannelSelector {
            channel,
            representation: Representation::MagnitudeDb,
        }
    }

    pub const fn ri(channel: Channel) -> Self {
        ChannelSelector {
            channel,
            representation: Representation::ComplexRi,
        }
    }

    pub fn entries_per_point(&self) -> usize {
        match self.representation {
            Representation::MagnitudeDb => 1,
            Representation::ComplexRi => 2,
        }
    }

    /// Real residual vector of this selection, in grid order. Complex values
    /// are interleaved as `re, im` per frequency.
    pub fn values(&self, response: &Response) -> Vec<f64> {
        let data = response.channel(self.channel);
        match self.representation {
            Representation::MagnitudeDb => data.iter().map(|&v| to_db(v)).collect(),
            Representation::ComplexRi => data.iter().flat_map(|v| [v.re, v.im]).collect(),
        }
    }
}

impl fmt::Display for ChannelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.representation {
            Representation::MagnitudeDb => write!(f, "|{}| dB", self.channel),
            Representation::ComplexRi => write!(f, "{} re/im", self.channel),
        }
    }
}

/// Concatenated values of several selections (e.g. S11 and S12 in re/im).
pub fn stacked_values(response: &Response, selection: &[ChannelSelector]) -> Vec<f64> {
    selection.iter().flat_map(|s| s.values(response)).collect()
}

/// `20 log10 |v|`. A zero value maps to negative infinity.
pub fn to_db(v: Complex64) -> f64 {
    let mag = v.norm();
    if mag == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * mag.log10()
    }
}

/// Linear magnitude of a dB level.
pub fn from_db(level: f64) -> f64 {
    10f64.powf(level / 20.0)
}

/// Complex two-port response sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    grid: FrequencyGrid,
    s11: Vec<Complex64>,
    s12: Vec<Complex64>,
    s21: Vec<Complex64>,
    s22: Vec<Complex64>,
}

impl Response {
    pub fn new(
        grid: FrequencyGrid,
        s11: Vec<Complex64>,
        s12: Vec<Complex64>,
        s21: Vec<Complex64>,
        s22: Vec<Complex64>,
    ) -> Result<Self> {
        let m = grid.len();
        for (name, len) in [
            ("s11", s11.len()),
            ("s12", s12.len()),
            ("s21", s21.len()),
            ("s22", s22.len()),
        ] {
            if len != m {
                return Err(Error::InvalidInput(format!(
                    "{name} has {len} entries but the grid has {m} points"
                )));
            }
        }
        Ok(Response {
            grid,
            s11,
            s12,
            s21,
            s22,
        })
    }

    /// Builds a response from per-point `[s11, s12, s21, s22]` tuples.
    pub fn from_points(grid: FrequencyGrid, points: &[[Complex64; 4]]) -> Result<Self> {
        let pick = |k: usize| points.iter().map(|p| p[k]).collect::<Vec<_>>();
        Response::new(grid, pick(0), pick(1), pick(2), pick(3))
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn channel(&self, channel: Channel) -> &[Complex64] {
        match channel {
            Channel::S11 => &self.s11,
            Channel::S12 => &self.s12,
            Channel::S21 => &self.s21,
            Channel::S22 => &self.s22,
        }
    }

    pub fn channel_mut(&mut self, channel: Channel) -> &mut [Complex64] {
        match channel {
            Channel::S11 => &mut self.s11,
            Channel::S12 => &mut self.s12,
            Channel::S21 => &mut self.s21,
            Channel::S22 => &mut self.s22,
        }
    }

    pub fn s11(&self) -> &[Complex64] {
        &self.s11
    }

    pub fn s12(&self) -> &[Complex64] {
        &self.s12
    }

    pub fn s21(&self) -> &[Complex64] {
        &self.s21
    }

    pub fn s22(&self) -> &[Complex64] {
        &self.s22
    }

    /// Applies `f(channel, index, value)` to every entry of every channel.
    pub fn map(&self, mut f: impl FnMut(Channel, usize, Complex64) -> Complex64) -> Response {
        let mut out = self.clone();
        for ch in [Channel::S11, Channel::S12, Channel::S21, Channel::S22] {
            for (j, v) in out.channel_mut(ch).iter_mut().enumerate() {
                *v = f(ch, j, *v);
            }
        }
        out
    }

    /// Writes the CSV form: `freq_ghz,s11_re,s11_im,...,s22_im`, one row per
    /// grid point, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_ghz,s11_re,s11_im,s12_re,s12_im,s21_re,s21_im,s22_re,s22_im")?;
        for (j, f) in self.grid.points().iter().enumerate() {
            let (a, b, c, d) = (self.s11[j], self.s12[j], self.s21[j], self.s22[j]);
            writeln!(
                w,
                "{f},{},{},{},{},{},{},{},{}",
                a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Euclidean norm of the difference of two real vectors.
pub fn vector_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean distance between two responses on the selected channel.
pub fn response_distance(a: &Response, b: &Response, sel: ChannelSelector) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(vector_distance(&sel.values(a), &sel.values(b)))
}

/// Euclidean distance over a stack of selections.
pub fn stacked_distance(a: &Response, b: &Response, selection: &[ChannelSelector]) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(vector_distance(
        &stacked_values(a, selection),
        &stacked_values(b, selection),
    ))
}
