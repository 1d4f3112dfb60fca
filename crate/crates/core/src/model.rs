//! Model-evaluation contracts shared by the engines.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::response::{FrequencyGrid, Response};

/// A model whose only free inputs are the design parameters.
pub trait DesignModel: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response>;
}

/// A coarse model that additionally exposes preassigned (auxiliary)
/// parameters for implicit space mapping.
pub trait AuxModel: Sync {
    fn dimension(&self) -> usize;

    fn aux_dimension(&self) -> usize;

    fn evaluate_with_aux(&self, x: &[f64], aux: &[f64], grid: &FrequencyGrid) -> Result<Response>;
}

/// An [`AuxModel`] with its auxiliary parameters frozen.
#[derive(Debug, Clone)]
pub struct WithAux<'a, M: ?Sized> {
    model: &'a M,
    aux: Vec<f64>,
}

impl<'a, M: AuxModel + ?Sized> WithAux<'a, M> {
    pub fn new(model: &'a M, aux: &[f64]) -> Self {
        WithAux {
            model,
            aux: aux.to_vec(),
        }
    }

    pub fn aux(&self) -> &[f64] {
        &self.aux
    }
}

impl<M: AuxModel + ?Sized> DesignModel for WithAux<'_, M> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        self.model.evaluate_with_aux(x, &self.aux, grid)
    }
}

/// Evaluation counts. Safe to bump from concurrent evaluations.
#[derive(Debug, Default)]
pub struct EvalCounter {
    coarse: AtomicU64,
    fine: AtomicU64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_coarse(&self) {
        self.coarse.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_fine(&self) {
        self.fine.fetch_add(1, Ordering::Relaxed);
    }

    pub fn coarse_evals(&self) -> u64 {
        self.coarse.load(Ordering::Relaxed)
    }

    pub fn fine_evals(&self) -> u64 {
        self.fine.load(Ordering::Relaxed)
    }
}

/// One fine-model evaluation made by an engine, in call order.
#[derive(Debug, Clone, PartialEq)]
pub struct FineRecord {
    pub label: String,
    pub design: Vec<f64>,
    pub response: Response,
}

/// Evaluates `fine` at `x` and appends the result to `records`.
pub(crate) fn record_fine<F: DesignModel + ?Sized>(
    fine: &F,
    grid: &FrequencyGrid,
    records: &mut Vec<FineRecord>,
    label: String,
    x: &[f64],
) -> Result<Response> {
    let response = fine.evaluate(x, grid)?;
    response.grid().ensure_same(grid)?;
    records.push(FineRecord {
        label,
        design: x.to_vec(),
        response: response.clone(),
    });
    Ok(response)
}
