//! Two-port Touchstone (v1, `.s2p`) reading and writing.
//!
//! Grammar accepted:
//!
//! ```text
//! ! comment
//! # <HZ|KHZ|MHZ|GHZ> S <RI|MA|DB> R <z_ref>
//! f s11a s11b s21a s21b s12a s12b s22a s22b
//! ```
//!
//! Keywords are case-insensitive and everything after `!` is ignored. The
//! frequency column must be uniform; it becomes the response grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DesignModel, EvalCounter};
use crate::response::{from_db, FrequencyGrid, Response};

/// Relative tolerance, in steps, for the uniform-grid check.
const UNIFORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    RealImag,
    MagAngle,
    DbAngle,
}

/// Parsed file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub response: Response,
    pub z_ref: f64,
}

struct OptionLine {
    scale_to_ghz: f64,
    format: DataFormat,
    z_ref: f64,
}

fn parse_option_line(body: &str, fail: &dyn Fn(String) -> Error) -> Result<OptionLine> {
    let tokens: Vec<String> = body.split_whitespace().map(str::to_ascii_uppercase).collect();
    let [unit, param, format, r, z] = tokens.as_slice() else {
        return Err(fail(format!(
            "option line must read `# <unit> S <RI|MA|DB> R <z_ref>`, got `#{body}`"
        )));
    };
    let scale_to_ghz = match unit.as_str() {
        "HZ" => 1e-9,
        "KHZ" => 1e-6,
        "MHZ" => 1e-3,
        "GHZ" => 1.0,
        other => return Err(fail(format!("unknown frequency unit `{other}`"))),
    };
    if param != "S" {
        return Err(fail(format!("only S parameters are supported, got `{param}`")));
    }
    let format = match format.as_str() {
        "RI" => DataFormat::RealImag,
        "MA" => DataFormat::MagAngle,
        "DB" => DataFormat::DbAngle,
        other => return Err(fail(format!("unknown data format `{other}`"))),
    };
    if r != "R" {
        return Err(fail(format!("expected `R` before the reference impedance, got `{r}`")));
    }
    let z_ref: f64 = z
        .parse()
        .map_err(|_| fail(format!("reference impedance `{z}` is not a number")))?;
    if !(z_ref > 0.0) {
        return Err(fail(format!("reference impedance must be positive, got {z_ref}")));
    }
    Ok(OptionLine {
        scale_to_ghz,
        format,
        z_ref,
    })
}

fn pair_to_complex(a: f64, b: f64, format: DataFormat) -> Complex64 {
    match format {
        DataFormat::RealImag => Complex64::new(a, b),
        DataFormat::MagAngle => Complex64::from_polar(a, b.to_radians()),
        DataFormat::DbAngle => Complex64::from_polar(from_db(a), b.to_radians()),
    }
}

/// Parses Touchstone text; `path` is only used in error messages.
pub fn parse_touchstone(text: &str, path: &Path) -> Result<Touchstone> {
    let err_at = |line: usize, reason: String| Error::Touchstone {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut option: Option<OptionLine> = None;
    let mut freqs = Vec::new();
    let mut rows: Vec<[Complex64; 4]> = Vec::new();
    let mut last_data_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(body) = content.strip_prefix('#') {
            if option.is_some() {
                return Err(err_at(line_no, "duplicate option line".into()));
            }
            option = Some(parse_option_line(body, &|r| err_at(line_no, r))?);
            continue;
        }
        let opt = option
            .as_ref()
            .ok_or_else(|| err_at(line_no, "data row before the option line".into()))?;
        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err_at(line_no, format!("`{t}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 9 {
            return Err(err_at(
                line_no,
                format!("expected 9 columns for a two-port row, found {}", values.len()),
            ));
        }
        let c = |k: usize| pair_to_complex(values[1 + 2 * k], values[2 + 2 * k], opt.format);
        // file order is s11 s21 s12 s22
        rows.push([c(0), c(2), c(1), c(3)]);
        freqs.push(values[0] * opt.scale_to_ghz);
        last_data_line = line_no;
    }

    let opt = option.ok_or_else(|| err_at(0, "missing option line".into()))?;
    if freqs.len() < 2 {
        return Err(err_at(
            last_data_line,
            "at least two frequency points are required".into(),
        ));
    }
    let n = freqs.len();
    let step = (freqs[n - 1] - freqs[0]) / (n - 1) as f64;
    let grid = FrequencyGrid::new(freqs[0], freqs[n - 1], step).map_err(|e| err_at(last_data_line, e.to_string()))?;
    for (k, (&f, &g)) in freqs.iter().zip(grid.points()).enumerate() {
        if (f - g).abs() > UNIFORM_TOL * step {
            // locate the offending row for the message
            let line = text
                .lines()
                .enumerate()
                .filter(|(_, l)| {
                    let c = l.split('!').next().unwrap_or("").trim();
                    !c.is_empty() && !c.starts_with('#')
                })
                .nth(k)
                .map_or(0, |(i, _)| i + 1);
            return Err(err_at(
                line,
                format!("non-uniform frequency grid: {f} GHz where {g} GHz was expected"),
            ));
        }
    }
    Ok(Touchstone {
        response: Response::from_points(grid, &rows)?,
        z_ref: opt.z_ref,
    })
}

pub fn read_touchstone(path: &Path) -> Result<Touchstone> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_touchstone(&text, path)
}

/// Loads a two-port response from an `.s2p` file.
pub fn load_touchstone(path: &Path) -> Result<Response> {
    read_touchstone(path).map(|t| t.response)
}

/// Touchstone text in GHz / RI form.
pub fn format_touchstone(response: &Response, z_ref: f64) -> String {
    let mut out = format!("! two-port response\n# GHZ S RI R {z_ref}\n");
    for (j, f) in response.grid().points().iter().enumerate() {
        let (a, b, c, d) = (
            response.s11()[j],
            response.s21()[j],
            response.s12()[j],
            response.s22()[j],
        );
        writeln!(
            out,
            "{f} {} {} {} {} {} {} {} {}",
            a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_touchstone(response: &Response, z_ref: f64, path: &Path) -> Result<()> {
    std::fs::write(path, format_touchstone(response, z_ref)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Fine model backed by externally simulated files.
///
/// The `n`-th fine request (0-based) is served from `fine_{n:03}.s2p` in the
/// directory. Engines issue fine requests serially and deterministically, so
/// a missing file tells the user exactly which design to simulate next.
#[derive(Debug)]
pub struct TouchstoneSequence {
    dir: PathBuf,
    next: AtomicUsize,
    counter: Arc<EvalCounter>,
}

impl TouchstoneSequence {
    pub fn new(dir: impl Into<PathBuf>, counter: Arc<EvalCounter>) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(Error::InvalidInput(format!(
                "touchstone directory {} does not exist",
                dir.display()
            )));
        }
        Ok(TouchstoneSequence {
            dir,
            next: AtomicUsize::new(0),
            counter,
        })
    }

    pub fn file_name(index: usize) -> String {
        format!("fine_{index:03}.s2p")
    }
}

impl DesignModel for TouchstoneSequence {
    fn dimension(&self) -> usize {
        crate::circuit::DESIGN_DIM
    }

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        let index = self.next.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join(Self::file_name(index));
        if !path.is_file() {
            return Err(Error::FineDataMissing {
                path,
                design: x.to_vec(),
            });
        }
        let response = load_touchstone(&path)?;
        response.grid().ensure_same(grid)?;
        self.counter.record_fine();
        Ok(response)
    }
}
