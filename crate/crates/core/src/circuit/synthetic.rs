//! Fine models built from the coarse model with a known distortion, used as
//! constructive ground truth for mapping extraction.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{DesignModel, EvalCounter};
use crate::response::{from_db, to_db, FrequencyGrid, Response};

use super::filter::{AuxVector, CoarseModel, DesignVector, DESIGN_DIM};

/// `fine(x) = scale · coarse(x + shift) + offset_db`, applied to the dB
/// magnitude of every channel with phases preserved.
#[derive(Debug, Clone)]
pub struct AffineFine {
    coarse: CoarseModel,
    aux: AuxVector,
    shift: [f64; DESIGN_DIM],
    scale: f64,
    offset_db: f64,
    counter: Arc<EvalCounter>,
}

impl AffineFine {
    pub fn new(
        coarse: CoarseModel,
        aux: AuxVector,
        shift: [f64; DESIGN_DIM],
        scale: f64,
        offset_db: f64,
        counter: Arc<EvalCounter>,
    ) -> Self {
        AffineFine {
            coarse,
            aux,
            shift,
            scale,
            offset_db,
            counter,
        }
    }

    pub fn shift(&self) -> &[f64; DESIGN_DIM] {
        &self.shift
    }
}

impl DesignModel for AffineFine {
    fn dimension(&self) -> usize {
        DESIGN_DIM
    }

    fn evaluate(&self, x: &[f64], grid: &FrequencyGrid) -> Result<Response> {
        let moved: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a + b).collect();
        let base = self
            .coarse
            .eval_uncounted(&DesignVector::from_slice(&moved)?, &self.aux, grid)?;
        self.counter.record_fine();
        Ok(base.map(|_, _, v| {
            if v.norm() == 0.0 {
                return v;
            }
            let level = self.scale * to_db(v) + self.offset_db;
            v * (from_db(level) / v.norm())
        }))
    }
}
