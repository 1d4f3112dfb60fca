//! Spec-driven design optimization of any [`DesignModel`].

use crate::error::Result;
use crate::model::DesignModel;
use crate::optimizer::{minimize, Bounds, OptReport, OptimizerSettings};
use crate::response::FrequencyGrid;
use crate::spec::{objective, DesignSpec};

/// Minimax objective of `model` at `x`.
pub fn design_objective<M: DesignModel + ?Sized>(
    model: &M,
    spec: &DesignSpec,
    grid: &FrequencyGrid,
    x: &[f64],
) -> Result<f64> {
    objective(&model.evaluate(x, grid)?, spec)
}

/// Minimizes the spec objective of `model` over `bounds` from `x_start`.
///
/// Errors at the start point propagate. Inside the search, points the model
/// rejects (validity window, invalid mapped points) count as infeasible.
pub fn optimize_design<M: DesignModel + ?Sized>(
    model: &M,
    spec: &DesignSpec,
    grid: &FrequencyGrid,
    x_start: &[f64],
    bounds: &Bounds,
    settings: &OptimizerSettings,
) -> Result<OptReport> {
    design_objective(model, spec, grid, x_start)?;
    let f = |x: &[f64]| design_objective(model, spec, grid, x).unwrap_or(f64::INFINITY);
    minimize(&f, x_start, bounds, settings)
}
