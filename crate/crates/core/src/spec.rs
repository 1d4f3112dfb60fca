//! Band-wise dB specifications and the minimax objective.
//!
//! Every band is an upper limit on a channel magnitude. The margin at a grid
//! point is `level_dB - limit` (positive means violated) and the objective is
//! the worst margin over all in-band points, so a design meets its
//! specification exactly when the objective is `<= 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::{to_db, Channel, FrequencyGrid, Response};

/// Slack on band edges when deciding grid membership, GHz.
const BAND_EDGE_TOL: f64 = 1e-12;

/// Upper limit `|channel| <= limit_db` over `[f_lo, f_hi]` GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBand {
    pub channel: Channel,
    #[serde(rename = "f_lo_ghz")]
    pub f_lo: f64,
    #[serde(rename = "f_hi_ghz")]
    pub f_hi: f64,
    pub limit_db: f64,
}

impl SpecBand {
    pub fn new(channel: Channel, f_lo: f64, f_hi: f64, limit_db: f64) -> Result<Self> {
        if !(f_lo <= f_hi) || !limit_db.is_finite() {
            return Err(Error::InvalidInput(format!(
                "spec band needs f_lo <= f_hi and a finite limit (got {f_lo}..{f_hi}, {limit_db} dB)"
            )));
        }
        Ok(SpecBand {
            channel,
            f_lo,
            f_hi,
            limit_db,
        })
    }

    pub fn contains(&self, f: f64) -> bool {
        self.f_lo - BAND_EDGE_TOL <= f && f <= self.f_hi + BAND_EDGE_TOL
    }
}

impl fmt::Display for SpecBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|{}| <= {} dB on {}..{} GHz",
            self.channel, self.limit_db, self.f_lo, self.f_hi
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SpecBand>", into = "Vec<SpecBand>")]
pub struct DesignSpec {
    bands: Vec<SpecBand>,
}

impl TryFrom<Vec<SpecBand>> for DesignSpec {
    type Error = Error;

    fn try_from(bands: Vec<SpecBand>) -> Result<Self> {
        DesignSpec::new(bands)
    }
}

impl From<DesignSpec> for Vec<SpecBand> {
    fn from(spec: DesignSpec) -> Self {
        spec.bands
    }
}

impl DesignSpec {
    pub fn new(bands: Vec<SpecBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidInput("a design spec needs at least one band".into()));
        }
        Ok(DesignSpec { bands })
    }

    /// The band-pass template of the filter case: return loss of 12 dB over
    /// 8.9–10.1 GHz and 30 dB rejection below 8.2 GHz and above 11.4 GHz,
    /// with the open-ended rejection bands clipped to `grid`.
    pub fn bandpass_template(grid: &FrequencyGrid) -> Self {
        DesignSpec {
            bands: vec![
                SpecBand {
                    channel: Channel::S11,
                    f_lo: 8.9,
                    f_hi: 10.1,
                    limit_db: -12.0,
                },
                SpecBand {
                    channel: Channel::S12,
                    f_lo: grid.f_min(),
                    f_hi: 8.2,
                    limit_db: -30.0,
                },
                SpecBand {
                    channel: Channel::S12,
                    f_lo: 11.4,
                    f_hi: grid.f_max(),
                    limit_db: -30.0,
                },
            ],
        }
    }

    pub fn bands(&self) -> &[SpecBand] {
        &self.bands
    }
}

/// Margins of one band, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandMargins {
    pub band: SpecBand,
    pub freqs: Vec<f64>,
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub bands: Vec<BandMargins>,
    pub worst: f64,
}

impl Violation {
    pub fn satisfied(&self) -> bool {
        self.worst <= 0.0
    }
}

/// Per-point margins and the worst margin of `response` against `spec`.
pub fn violation(response: &Response, spec: &DesignSpec) -> Result<Violation> {
    let grid = response.grid().points();
    let mut worst = f64::NEG_INFINITY;
    let mut bands = Vec::with_capacity(spec.bands.len());
    for band in &spec.bands {
        let data = response.channel(band.channel);
        let (freqs, margins): (Vec<f64>, Vec<f64>) = grid
            .iter()
            .zip(data)
            .filter(|(f, _)| band.contains(**f))
            .map(|(f, v)| (*f, to_db(*v) - band.limit_db))
            .unzip();
        if freqs.is_empty() {
            return Err(Error::EmptyBand { band: band.to_string() });
        }
        for &m in &margins {
            if m > worst {
                worst = m;
            }
        }
        bands.push(BandMargins {
            band: *band,
            freqs,
            margins,
        });
    }
    Ok(Violation { bands, worst })
}

/// Minimax objective: the worst margin.
pub fn objective(response: &Response, spec: &DesignSpec) -> Result<f64> {
    violation(response, spec).map(|v| v.worst)
}
