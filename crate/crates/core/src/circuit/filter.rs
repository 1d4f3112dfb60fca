//! Parallel-coupled-line band-pass filter: the coarse model and a perturbed
//! fine-model emulator with known ground truth.
//!
//! The structure is a mirror-symmetric cascade
//! `feed · sec1 · sec2 · sec3 · sec2 · sec1 · feed` where section `i` uses
//! width `w_i`, gap `s_i`, length `L_i` and the auxiliary substrate pair
//! `(h_i, εr_i)`; the feed lines use `(w0, L0)` on `(h0, εr0)`. Each coupled
//! section is lengthened by the open-end fringing extension of its strips.
//! The pairing of widths with sections is read from the filter's symmetry
//! (outer pair, inner pair, centre) and is an assumption of this model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::microstrip::{
    coupled_section_two_port, microstrip_coupled_params, microstrip_line, open_end_extension, CoupledModes, LineParams,
};
use super::twoport::{cascade, line_two_port, TwoPort};
use crate::error::{Error, Result};
use crate::model::{AuxModel, DesignModel, EvalCounter};
use crate::response::{FrequencyGrid, Response};

/// Number of geometric design parameters `[S1 L1 S2 L2 S3 L3]`.
pub const DESIGN_DIM: usize = 6;
/// Number of auxiliary parameters `[h0..h3, εr0..εr3]`.
pub const AUX_DIM: usize = 8;

/// Reference frequency of the emulator's dispersion term, GHz.
const DISPERSION_REF_GHZ: f64 = 10.0;

/// Fixed geometry and substrate of the filter (lengths in mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterGeometry {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub l0: f64,
    pub h: f64,
    pub er: f64,
    pub z_ref: f64,
}

impl Default for FilterGeometry {
    fn default() -> Self {
        FilterGeometry {
            w0: 0.59,
            w1: 0.383,
            w2: 0.575,
            w3: 0.595,
            l0: 3.0,
            h: 0.635,
            er: 10.2,
            z_ref: 50.0,
        }
    }
}

impl FilterGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.w0, self.w1, self.w2, self.w3, self.l0, self.h, self.z_ref];
        if lengths.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "geometry widths, lengths, height and reference impedance must be positive: {self:?}"
            )));
        }
        if !(self.er >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "relative permittivity must be at least 1, got {}",
                self.er
            )));
        }
        Ok(())
    }

    /// Auxiliary vector with every line on the nominal substrate.
    pub fn nominal_aux(&self) -> AuxVector {
        AuxVector {
            h: [self.h; 4],
            er: [self.er; 4],
        }
    }

    fn section_width(&self, section: usize) -> f64 {
        [self.w1, self.w2, self.w3][section]
    }
}

/// Design parameters `[S1 L1 S2 L2 S3 L3]` in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DesignVector([f64; DESIGN_DIM]);

impl DesignVector {
    pub fn new(values: [f64; DESIGN_DIM]) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "design entries must be positive and finite: {values:?}"
            )));
        }
        Ok(DesignVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; DESIGN_DIM] = values.try_into().map_err(|_| Error::Dimension {
            expected: DESIGN_DIM,
            got: values.len(),
        })?;
        DesignVector::new(arr)
    }

    /// Reference design of the filter case, the coarse optimum under the standard spec.
    pub fn reference() -> Self {
        DesignVector([0.161, 2.8517, 0.54, 2.7737, 0.73, 2.7579])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Gap `S_i` of coupled section `i` (1-based as in the layout).
    pub fn gap(&self, section: usize) -> f64 {
        self.0[2 * (section - 1)]
    }

    /// Length `L_i` of coupled section `i` (1-based).
    pub fn length(&self, section: usize) -> f64 {
        self.0[2 * (section - 1) + 1]
    }
}

impl TryFrom<Vec<f64>> for DesignVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        DesignVector::from_slice(&v)
    }
}

impl From<DesignVector> for Vec<f64> {
    fn from(v: DesignVector) -> Self {
        v.0.to_vec()
    }
}

/// Preassigned parameters: per-line substrate heights (mm) and permittivities.
/// Index 0 is the feed lines, index `i` the coupled-section pair `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxVector {
    pub h: [f64; 4],
    pub er: [f64; 4],
}

impl AuxVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != AUX_DIM {
            return Err(Error::Dimension {
                expected: AUX_DIM,
                got: values.len(),
            });
        }
        let mut aux = AuxVector {
            h: [0.0; 4],
            er: [0.0; 4],
        };
        aux.h.copy_from_slice(&values[..4]);
        aux.er.copy_from_slice(&values[4..]);
        aux.validate()?;
        Ok(aux)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.h.iter().chain(&self.er).copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "aux heights must be positive: {:?}",
                self.h
            )));
        }
        if self.er.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "aux permittivities must be at least 1: {:?}",
                self.er
            )));
        }
        Ok(())
    }
}

/// Hidden perturbation that turns the coarse model into the fine emulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorTruth {
    pub delta_er: [f64; 4],
    pub delta_h: [f64; 4],
    /// Extension of every coupled-section length, mm.
    pub delta_len: f64,
    /// Dispersion: εeff is scaled by `1 + kappa (f / 10 GHz)^2`.
    pub kappa: f64,
}

impl Default for EmulatorTruth {
    fn default() -> Self {
        EmulatorTruth {
            delta_er: [0.3; 4],
            delta_h: [-0.02; 4],
            delta_len: 0.05,
            kappa: 0.01,
        }
    }
}

impl EmulatorTruth {
    pub fn zero() -> Self {
        EmulatorTruth {
            delta_er: [0.0; 4],
            delta_h: [0.0; 4],
            delta_len: 0.0,
            kappa: 0.0,
        }
    }

    /// Every field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        EmulatorTruth {
            delta_er: self.delta_er.map(|v| v * factor),
            delta_h: self.delta_h.map(|v| v * factor),
            delta_len: self.delta_len * factor,
            kappa: self.kappa * factor,
        }
    }

    /// Auxiliary vector seen by the emulator for a nominal `aux`.
    pub fn perturb(&self, aux: &AuxVector) -> AuxVector {
        AuxVector {
            h: std::array::from_fn(|i| aux.h[i] + self.delta_h[i]),
            er: std::array::from_fn(|i| aux.er[i] + self.delta_er[i]),
        }
    }
}

/// Frequency-independent line data of one filter instance.
struct FilterLines {
    feed: LineParams,
    sections: [CoupledModes; 3],
    lengths: [f64; 3],
    feed_length: f64,
}

fn build_lines(x: &DesignVector, aux: &AuxVector, geom: &FilterGeometry, delta_len: f64) -> Result<FilterLines> {
    aux.validate()?;
    let feed = microstrip_line(geom.w0, aux.h[0], aux.er[0]).map_err(|e| e.in_section(0))?;
    let mut sections = [CoupledModes {
        z0e: 0.0,
        z0o: 0.0,
        eps_e: 1.0,
        eps_o: 1.0,
    }; 3];
    let mut lengths = [0.0; 3];
    for i in 0..3 {
        sections[i] = microstrip_coupled_params(geom.section_width(i), x.gap(i + 1), aux.h[i + 1], aux.er[i + 1])
            .map_err(|e| e.in_section(i + 1))?;
        let open_end =
            open_end_extension(geom.section_width(i), aux.h[i + 1], aux.er[i + 1]).map_err(|e| e.in_section(i + 1))?;
        lengths[i] = x.length(i + 1) + open_end + delta_len;
    }
    Ok(FilterLines {
        feed,
        sections,
        lengths,
        feed_length: geom.l0,
    })
}

/// Cascade position to section index (0 = feed, 1..3 = coupled pair).
const LAYOUT: [usize; 7] = [0, 1, 2, 3, 2, 1, 0];

fn evaluate_filter(
    x: &DesignVector,
    aux: &AuxVector,
    geom: &FilterGeometry,
    grid: &FrequencyGrid,
    delta_len: f64,
    kappa: f64,
) -> Result<Response> {
    let lines = build_lines(x, aux, geom, delta_len)?;
    let mut points = Vec::with_capacity(grid.len());
    for &f in grid.points() {
        let factor = 1.0 + kappa * (f / DISPERSION_REF_GHZ).powi(2);
        let feed = line_two_port(lines.feed.z0, lines.feed.eps_eff * factor, lines.feed_length, f)
            .map_err(|e| e.in_section(0))?;
        let mut coupled = [TwoPort::identity(); 3];
        for i in 0..3 {
            coupled[i] =
                coupled_section_two_port(lines.sections[i].with_permittivity_factor(factor), lines.lengths[i], f)
                    .map_err(|e| e.in_section(i + 1))?;
        }
        let chain = LAYOUT.map(|k| if k == 0 { feed } else { coupled[k - 1] });
        points.push(cascade(&chain)?.to_scattering(geom.z_ref)?);
    }
    Response::from_points(grid.clone(), &points)
}

/// Quasi-static coarse model of the filter.
#[derive(Debug, Clone)]
pub struct CoarseModel {
    geometry: FilterGeometry,
    counter: Arc<EvalCounter>,
}

impl CoarseModel {
    pub fn new(geometry: FilterGeometry, counter: Arc<EvalCounter>) -> Result<Self> {
        geometry.validate()?;
        Ok(CoarseModel { geometry, counter })
    }

    pub fn geometry(&self) -> &FilterGeometry {
        &self.geometry
    }

    pub fn counter(&self) -> &Arc<EvalCounter> {
        &self.counter
    }

    /// Coarse response at design `x` with auxiliary parameters `aux`.
    pub fn eval(&self, x: &DesignVector, aux: &AuxVector, grid: &FrequencyGrid) -> Result<Response> {
        self.counter.record_coarse();
        self.eval_uncounted(x, aux, grid)
    }

    /// Evaluation that does not touch the counter, for models built on top
    /// of the coarse cascade that keep their own accounting.
    pub(crate) fn eval_uncounted(&self, x: &DesignVector, aux: &AuxVector, grid: &FrequencyGrid) -> Result<Response> {
        evaluate_filter(x, aux, &self.geometry, grid, 0.0, 0.0)
    }
}

impl AuxModel for CoarseModel {
    fn dimension(&self) -> usize {
        DESIGN_DIM
    }

    fn aux_dimension(&self) -> usize {
        AUX_DIM
    }

    fn evaluate_with_aux(&self, x: &[f64], aux: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        self.eval(&DesignVector::from_slice(x)?, &AuxVector::from_slice(aux)?, grid)
    }
}

/// Stand-in for the expensive model: the coarse cascade with perturbed
/// substrate, extended sections and a simple dispersion law.
#[derive(Debug, Clone)]
pub struct FineEmulator {
    geometry: FilterGeometry,
    nominal: AuxVector,
    truth: EmulatorTruth,
    counter: Arc<EvalCounter>,
}

impl FineEmulator {
    pub fn new(
        geometry: FilterGeometry,
        nominal: AuxVector,
        truth: EmulatorTruth,
        counter: Arc<EvalCounter>,
    ) -> Result<Self> {
        geometry.validate()?;
        nominal.validate()?;
        truth.perturb(&nominal).validate()?;
        Ok(FineEmulator {
            geometry,
            nominal,
            truth,
            counter,
        })
    }

    pub fn truth(&self) -> &EmulatorTruth {
        &self.truth
    }

    /// Auxiliary vector under which the coarse model reproduces the emulator
    /// when `delta_len` and `kappa` are zero.
    pub fn effective_aux(&self) -> AuxVector {
        self.truth.perturb(&self.nominal)
    }

    pub fn eval(&self, x: &DesignVector, grid: &FrequencyGrid) -> Result<Response> {
        self.counter.record_fine();
        evaluate_filter(
            x,
            &self.effective_aux(),
            &self.geometry,
            grid,
            self.truth.delta_len,
            self.truth.kappa,
        )
    }
}

impl DesignModel for FineEmulator {
    fn dimension(&self) -> usize {
        DESIGN_DIM
    }

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        self.eval(&DesignVector::from_slice(x)?, grid)
    }
}
