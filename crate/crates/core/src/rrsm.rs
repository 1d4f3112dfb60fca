//! Implicit space mapping on preassigned parameters with response-residual
//! correction.
//!
//! Each iteration calibrates the auxiliary parameters `p` so the coarse
//! model matches the latest fine response, then re-optimizes the design on
//! the calibrated coarse model. Once calibration alone stops tracking the
//! fine model (residual above the switch threshold) the surrogate becomes
//! `Rc(x, p) + λ·ΔR` with `ΔR = Rf(x_k) − Rc(x_k, p_k)` frozen at the last
//! fine point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::optimize_design;
use crate::error::{Error, Result};
use crate::model::{record_fine, AuxModel, DesignModel, FineRecord};
use crate::optimizer::{least_squares, Bounds, OptReport, OptimizerSettings};
use crate::response::{stacked_distance, stacked_values, Channel, ChannelSelector, FrequencyGrid, Response};
use crate::spec::{objective, DesignSpec};

/// Per-frequency residual weights: one value for every point or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Uniform(f64),
    PerPoint(Vec<f64>),
}

impl Weights {
    pub fn resolve(&self, m: usize) -> Result<Vec<f64>> {
        let w = match self {
            Weights::Uniform(v) => vec![*v; m],
            Weights::PerPoint(v) if v.len() == m => v.clone(),
            Weights::PerPoint(v) => {
                return Err(Error::Dimension {
                    expected: m,
                    got: v.len(),
                })
            }
        };
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "residual weights must lie in [0, 1]: {w:?}"
            )));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrsmSettings {
    pub lambda: Weights,
    pub max_fine_evals: usize,
    /// Aux bounds as a fraction of the nominal values, used when
    /// `aux_bounds` is absent.
    pub aux_bound_fraction: f64,
    pub aux_bounds: Option<Bounds>,
    /// Switch to residual correction when the calibration residual exceeds
    /// this fraction of the initial uncalibrated residual.
    pub switch_threshold: f64,
    pub calibration_channels: Vec<ChannelSelector>,
}

impl Default for RrsmSettings {
    fn default() -> Self {
        RrsmSettings {
            lambda: Weights::Uniform(0.5),
            max_fine_evals: 6,
            aux_bound_fraction: 0.1,
            aux_bounds: None,
            switch_threshold: 0.1,
            calibration_channels: vec![ChannelSelector::ri(Channel::S11), ChannelSelector::ri(Channel::S12)],
        }
    }
}

impl RrsmSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_fine_evals == 0 {
            return Err(Error::InvalidInput("max_fine_evals must be positive".into()));
        }
        if !(self.aux_bound_fraction >= 0.0 && self.switch_threshold >= 0.0) {
            return Err(Error::InvalidInput(
                "aux_bound_fraction and switch_threshold must be >= 0".into(),
            ));
        }
        if self.calibration_channels.is_empty() {
            return Err(Error::InvalidInput(
                "at least one calibration channel is required".into(),
            ));
        }
        if let Weights::Uniform(v) = self.lambda {
            Weights::Uniform(v).resolve(1)?;
        }
        Ok(())
    }

    /// Explicit aux bounds, or `p0 ± fraction·|p0|`.
    pub fn resolved_aux_bounds(&self, p0: &[f64]) -> Result<Bounds> {
        let b = match &self.aux_bounds {
            Some(b) => b.clone(),
            None => Bounds::relative(p0, self.aux_bound_fraction),
        };
        Bounds::new(b.lower, b.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Ism,
    Rrsm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrsmState {
    pub iteration: usize,
    pub design: Vec<f64>,
    pub aux: Vec<f64>,
    /// `Rf(x_k) − Rc(x_k, p_k)`; `None` before the first fine evaluation.
    pub residual: Option<Response>,
    pub mode: Mode,
}

impl RrsmState {
    pub fn new(design: Vec<f64>, aux: Vec<f64>) -> Self {
        RrsmState {
            iteration: 0,
            design,
            aux,
            residual: None,
            mode: Mode::Ism,
        }
    }

    /// Residual entering the surrogate: none in ISM mode.
    fn active_residual(&self) -> Option<&Response> {
        match self.mode {
            Mode::Ism => None,
            Mode::Rrsm => self.residual.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub aux: Vec<f64>,
    /// Euclidean norm of the remaining stacked residual.
    pub residual: f64,
    pub report: OptReport,
}

/// Fits `p` so that `Rc(x_k, p)` matches `fine` on the stacked channels.
/// Unregularized; `p` stays inside `bounds`.
pub fn calibrate_aux<C: AuxModel + ?Sized>(
    x_k: &[f64],
    fine: &Response,
    coarse: &C,
    p_init: &[f64],
    bounds: &Bounds,
    channels: &[ChannelSelector],
    settings: &OptimizerSettings,
) -> Result<Calibration> {
    if !bounds.contains(p_init) {
        return Err(Error::InvalidInput(format!(
            "initial aux {p_init:?} is outside the aux bounds"
        )));
    }
    let grid = fine.grid();
    let target = stacked_values(fine, channels);
    let residuals = |p: &[f64]| -> Vec<f64> {
        match coarse.evaluate_with_aux(x_k, p, grid) {
            Ok(r) => stacked_values(&r, channels)
                .iter()
                .zip(&target)
                .map(|(c, f)| c - f)
                .collect(),
            Err(_) => vec![f64::NAN; target.len()],
        }
    };
    let start = coarse.evaluate_with_aux(x_k, p_init, grid)?;
    start.grid().ensure_same(grid)?;
    let lm = OptimizerSettings {
        regularization_weight: 0.0,
        ..*settings
    };
    let report = least_squares(&residuals, p_init, p_init, Some(bounds), &lm)?;
    Ok(Calibration {
        aux: report.minimizer.clone(),
        residual: report.objective_value.sqrt(),
        report,
    })
}

/// `Rc(x, p) + diag(λ)·ΔR`, with `ΔR` frozen in `state`.
#[derive(Debug, Clone, Copy)]
pub struct RrsmSurrogate<'a, C: ?Sized> {
    coarse: &'a C,
    aux: &'a [f64],
    residual: Option<&'a Response>,
    lambda: &'a [f64],
}

impl<'a, C: AuxModel + ?Sized> RrsmSurrogate<'a, C> {
    pub fn new(coarse: &'a C, state: &'a RrsmState, lambda: &'a [f64]) -> Self {
        RrsmSurrogate {
            coarse,
            aux: &state.aux,
            residual: state.active_residual(),
            lambda,
        }
    }
}

impl<C: AuxModel + ?Sized> DesignModel for RrsmSurrogate<'_, C> {
    fn dimension(&self) -> usize {
        self.coarse.dimension()
    }

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        let rc = self.coarse.evaluate_with_aux(x, self.aux, grid)?;
        let Some(dr) = self.residual else {
            return Ok(rc);
        };
        dr.grid().ensure_same(grid)?;
        if self.lambda.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: self.lambda.len(),
            });
        }
        Ok(rc.map(|ch, j, v| v + self.lambda[j] * dr.channel(ch)[j]))
    }
}

/// Surrogate response at `x` for calibrated aux `p`.
pub fn rrsm_response<C: AuxModel + ?Sized>(
    x: &[f64],
    p: &[f64],
    state: &RrsmState,
    lambda: &[f64],
    coarse: &C,
    grid: &FrequencyGrid,
) -> Result<Response> {
    let surrogate = RrsmSurrogate {
        coarse,
        aux: p,
        residual: state.active_residual(),
        lambda,
    };
    surrogate.evaluate(x, grid)
}

/// Re-optimizes the design on the calibrated coarse model (ISM mode) or the
/// residual-corrected surrogate (RRSM mode), aux held fixed.
#[allow(clippy::too_many_arguments)]
pub fn optimize_calibrated<C: AuxModel + ?Sized>(
    coarse: &C,
    state: &RrsmState,
    lambda: &[f64],
    spec: &DesignSpec,
    grid: &FrequencyGrid,
    x_start: &[f64],
    bounds: &Bounds,
    settings: &OptimizerSettings,
) -> Result<OptReport> {
    let surrogate = RrsmSurrogate::new(coarse, state, lambda);
    optimize_design(&surrogate, spec, grid, x_start, bounds, settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    SpecSatisfied,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Surrogate used to produce `design` (ISM for the start point).
    pub mode: Mode,
    pub design: Vec<f64>,
    /// Aux vector of the surrogate that produced `design`.
    pub aux: Vec<f64>,
    pub calibration_residual: Option<f64>,
    pub surrogate_objective: Option<f64>,
    pub fine_objective: f64,
}

/// Anchor checks of the residual surrogate after calibration at `x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub iteration: usize,
    /// `max |Rc(x_k, p_k) + ΔR − Rf(x_k)|` over channels and points.
    pub full_weight_error: f64,
    /// `max |Rs(x_k) − (Rc(x_k, p_k) + Rf(x_k)) / 2|` with all weights 0.5.
    pub midpoint_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: Vec<IterationRecord>,
    pub anchors: Vec<AnchorCheck>,
    pub initial_residual: f64,
    pub fine_evals: usize,
    pub rrsm_iterations: usize,
    pub outcome: Outcome,
    #[serde(skip)]
    pub fine_records: Vec<FineRecord>,
}

impl RunReport {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |r| r.fine_objective)
    }

    pub fn final_design(&self) -> &[f64] {
        self.iterations.last().map_or(&[], |r| &r.design)
    }
}

fn max_abs_diff(a: &Response, b: &Response) -> f64 {
    Channel::ALL
        .iter()
        .flat_map(|&ch| a.channel(ch).iter().zip(b.channel(ch)).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

fn anchor_check<C: AuxModel + ?Sized>(coarse: &C, state: &RrsmState, fine: &Response) -> Result<AnchorCheck> {
    let grid = fine.grid();
    let probe = RrsmState {
        mode: Mode::Rrsm,
        ..state.clone()
    };
    let ones = vec![1.0; grid.len()];
    let halves = vec![0.5; grid.len()];
    let full = rrsm_response(&state.design, &state.aux, &probe, &ones, coarse, grid)?;
    let half = rrsm_response(&state.design, &state.aux, &probe, &halves, coarse, grid)?;
    let rc = coarse.evaluate_with_aux(&state.design, &state.aux, grid)?;
    let mid = rc.map(|ch, j, v| (v + fine.channel(ch)[j]) * Complex64::new(0.5, 0.0));
    Ok(AnchorCheck {
        iteration: state.iteration,
        full_weight_error: max_abs_diff(&full, fine),
        midpoint_error: max_abs_diff(&half, &mid),
    })
}

/// The ISM/RRSM loop: evaluate fine, stop on spec, calibrate, (switch,)
/// re-optimize, repeat until the spec is met or `max_fine_evals` is spent.
#[allow(clippy::too_many_arguments)]
pub fn run_ism_rrsm<C, F>(
    coarse: &C,
    fine: &F,
    spec: &DesignSpec,
    grid: &FrequencyGrid,
    x_start: &[f64],
    p0: &[f64],
    design_bounds: &Bounds,
    settings: &RrsmSettings,
    optimizer: &OptimizerSettings,
) -> Result<RunReport>
where
    C: AuxModel + ?Sized,
    F: DesignModel + ?Sized,
{
    settings.validate()?;
    let lambda = settings.lambda.resolve(grid.len())?;
    let aux_bounds = settings.resolved_aux_bounds(p0)?;
    let channels = &settings.calibration_channels;

    let mut records = Vec::new();

    let mut state = RrsmState::new(x_start.to_vec(), p0.to_vec());
    let mut rf = record_fine(fine, grid, &mut records, "iter_00".into(), x_start)?;
    let mut fine_objective = objective(&rf, spec)?;
    let initial_residual = stacked_distance(&coarse.evaluate_with_aux(x_start, p0, grid)?, &rf, channels)?;
    let mut iterations = vec![IterationRecord {
        iteration: 0,
        mode: Mode::Ism,
        design: x_start.to_vec(),
        aux: p0.to_vec(),
        calibration_residual: None,
        surrogate_objective: None,
        fine_objective,
    }];
    let mut anchors = Vec::new();
    let mut rrsm_iterations = 0;

    let outcome = loop {
        if fine_objective <= 0.0 {
            break Outcome::SpecSatisfied;
        }
        if records.len() >= settings.max_fine_evals {
            break Outcome::BudgetExhausted;
        }
        let cal = calibrate_aux(&state.design, &rf, coarse, &state.aux, &aux_bounds, channels, optimizer)?;
        state.aux = cal.aux;
        if state.mode == Mode::Ism && cal.residual > settings.switch_threshold * initial_residual {
            state.mode = Mode::Rrsm;
        }
        let rc = coarse.evaluate_with_aux(&state.design, &state.aux, grid)?;
        state.residual = Some(rf.map(|ch, j, v| v - rc.channel(ch)[j]));
        anchors.push(anchor_check(coarse, &state, &rf)?);

        let opt = optimize_calibrated(
            coarse,
            &state,
            &lambda,
            spec,
            grid,
            &state.design,
            design_bounds,
            optimizer,
        )?;
        if state.mode == Mode::Rrsm {
            rrsm_iterations += 1;
        }
        state.iteration += 1;
        state.design = opt.minimizer;
        rf = record_fine(
            fine,
            grid,
            &mut records,
            format!("iter_{:02}", state.iteration),
            &state.design,
        )?;
        fine_objective = objective(&rf, spec)?;
        iterations.push(IterationRecord {
            iteration: state.iteration,
            mode: state.mode,
            design: state.design.clone(),
            aux: state.aux.clone(),
            calibration_residual: Some(cal.residual),
            surrogate_objective: Some(opt.objective_value),
            fine_objective,
        });
    };

    Ok(RunReport {
        iterations,
        anchors,
        initial_residual,
        fine_evals: records.len(),
        rrsm_iterations,
        outcome,
        fine_records: records,
    })
}

/// Coarse optimum from `x_start` with aux fixed at `p`.
pub fn coarse_optimum<C: AuxModel + ?Sized>(
    coarse: &C,
    p: &[f64],
    spec: &DesignSpec,
    grid: &FrequencyGrid,
    x_start: &[f64],
    bounds: &Bounds,
    settings: &OptimizerSettings,
) -> Result<OptReport> {
    let state = RrsmState::new(x_start.to_vec(), p.to_vec());
    let lambda = vec![0.0; grid.len()];
    optimize_calibrated(coarse, &state, &lambda, spec, grid, x_start, bounds, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CoarseModel, DesignVector, FilterGeometry};
    use crate::model::{EvalCounter, WithAux};
    use std::sync::Arc;

    fn setup() -> (CoarseModel, Vec<f64>, FrequencyGrid) {
        let geom = FilterGeometry::default();
        let coarse = CoarseModel::new(geom, Arc::new(EvalCounter::new())).unwrap();
        (
            coarse,
            geom.nominal_aux().to_vec(),
            FrequencyGrid::new(8.0, 12.0, 0.25).unwrap(),
        )
    }

    fn x0() -> Vec<f64> {
        DesignVector::reference().as_slice().to_vec()
    }

    #[test]
    fn weights_resolve_and_validate() {
        assert_eq!(Weights::Uniform(0.5).resolve(3).unwrap(), vec![0.5; 3]);
        assert!(Weights::PerPoint(vec![0.1, 0.2]).resolve(3).is_err());
        assert!(Weights::Uniform(1.5).resolve(2).is_err());
        let w: Weights = serde_json::from_str("[0.0, 1.0]").unwrap();
        assert_eq!(w, Weights::PerPoint(vec![0.0, 1.0]));
    }

    #[test]
    fn zero_weights_give_calibrated_coarse() {
        let (coarse, p, grid) = setup();
        let rf = coarse
            .evaluate_with_aux(&x0(), &p, &grid)
            .unwrap()
            .map(|_, _, v| v * 0.9);
        let rc = coarse.evaluate_with_aux(&x0(), &p, &grid).unwrap();
        let state = RrsmState {
            residual: Some(rf.map(|ch, j, v| v - rc.channel(ch)[j])),
            mode: Mode::Rrsm,
            ..RrsmState::new(x0(), p.clone())
        };
        let zero = vec![0.0; grid.len()];
        assert_eq!(rrsm_response(&x0(), &p, &state, &zero, &coarse, &grid).unwrap(), rc);
        let one = vec![1.0; grid.len()];
        let back = rrsm_response(&x0(), &p, &state, &one, &coarse, &grid).unwrap();
        for ch in Channel::ALL {
            for (a, b) in back.channel(ch).iter().zip(rf.channel(ch)) {
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn ism_mode_ignores_stored_residual() {
        let (coarse, p, grid) = setup();
        let rc = coarse.evaluate_with_aux(&x0(), &p, &grid).unwrap();
        let state = RrsmState {
            residual: Some(rc.clone()),
            ..RrsmState::new(x0(), p.clone())
        };
        let one = vec![1.0; grid.len()];
        assert_eq!(rrsm_response(&x0(), &p, &state, &one, &coarse, &grid).unwrap(), rc);
    }

    #[test]
    fn residual_grid_must_match() {
        let (coarse, p, grid) = setup();
        let other = FrequencyGrid::new(8.0, 12.0, 0.5).unwrap();
        let state = RrsmState {
            residual: Some(coarse.evaluate_with_aux(&x0(), &p, &other).unwrap()),
            mode: Mode::Rrsm,
            ..RrsmState::new(x0(), p.clone())
        };
        let w = vec![0.5; grid.len()];
        assert!(matches!(
            rrsm_response(&x0(), &p, &state, &w, &coarse, &grid),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn already_calibrated_stays_put() {
        let (coarse, p, grid) = setup();
        let rf = coarse.evaluate_with_aux(&x0(), &p, &grid).unwrap();
        let bounds = Bounds::relative(&p, 0.1);
        let channels = RrsmSettings::default().calibration_channels;
        let cal = calibrate_aux(
            &x0(),
            &rf,
            &coarse,
            &p,
            &bounds,
            &channels,
            &OptimizerSettings::default(),
        )
        .unwrap();
        assert!(cal.residual <= 1e-10);
        for (a, b) in cal.aux.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn calibration_start_must_be_inside_bounds() {
        let (coarse, p, grid) = setup();
        let rf = coarse.evaluate_with_aux(&x0(), &p, &grid).unwrap();
        let bounds = Bounds::relative(&p, 0.1);
        let outside: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        let channels = RrsmSettings::default().calibration_channels;
        assert!(calibrate_aux(
            &x0(),
            &rf,
            &coarse,
            &outside,
            &bounds,
            &channels,
            &OptimizerSettings::default()
        )
        .is_err());
    }

    #[test]
    fn exact_fine_model_needs_one_evaluation() {
        let (coarse, p, grid) = setup();
        let spec = DesignSpec::bandpass_template(&grid);
        let bounds = Bounds::new(
            vec![0.05, 2.0, 0.05, 2.0, 0.05, 2.0],
            vec![1.5, 3.8, 1.5, 3.8, 1.5, 3.8],
        )
        .unwrap();
        let opt = OptimizerSettings::default();
        let xc = coarse_optimum(&coarse, &p, &spec, &grid, &x0(), &bounds, &opt).unwrap();
        assert!(xc.objective_value < 0.0);
        let fine = WithAux::new(&coarse, &p);
        let rep = run_ism_rrsm(
            &coarse,
            &fine,
            &spec,
            &grid,
            &xc.minimizer,
            &p,
            &bounds,
            &RrsmSettings::default(),
            &opt,
        )
        .unwrap();
        assert_eq!(rep.outcome, Outcome::SpecSatisfied);
        assert_eq!(rep.fine_evals, 1);
        assert_eq!(rep.iterations.len(), 1);
        assert!(rep.anchors.is_empty());
    }

    #[test]
    fn budget_of_one_stops_after_the_first_check() {
        let (coarse, p, grid) = setup();
        let spec = DesignSpec::bandpass_template(&grid);
        let bounds = Bounds::new(
            vec![0.05, 2.0, 0.05, 2.0, 0.05, 2.0],
            vec![1.5, 3.8, 1.5, 3.8, 1.5, 3.8],
        )
        .unwrap();
        let fine = WithAux::new(&coarse, &p);
        let settings = RrsmSettings {
            max_fine_evals: 1,
            ..RrsmSettings::default()
        };
        // x0 violates the template on the coarse model
        let rep = run_ism_rrsm(
            &coarse,
            &fine,
            &spec,
            &grid,
            &x0(),
            &p,
            &bounds,
            &settings,
            &OptimizerSettings::default(),
        )
        .unwrap();
        assert_eq!(rep.outcome, Outcome::BudgetExhausted);
        assert_eq!(rep.fine_evals, 1);
        assert!(rep.final_objective() > 0.0);
    }
}
