//! Shared fixtures for the benchmarks: the filter case on its standard grid.

use std::sync::Arc;

use smforge_core::circuit::{CoarseModel, DesignVector, EmulatorTruth, FilterGeometry, FineEmulator};
use smforge_core::{Bounds, EvalCounter, FrequencyGrid, RegionOfInterest};

pub fn grid() -> FrequencyGrid {
    FrequencyGrid::new(8.0, 12.0, 0.25).expect("valid grid")
}

pub fn coarse() -> CoarseModel {
    CoarseModel::new(FilterGeometry::default(), Arc::new(EvalCounter::new())).expect("valid geometry")
}

pub fn emulator(truth: EmulatorTruth) -> FineEmulator {
    let g = FilterGeometry::default();
    FineEmulator::new(g, g.nominal_aux(), truth, Arc::new(EvalCounter::new())).expect("valid truth")
}

pub fn nominal_aux() -> Vec<f64> {
    FilterGeometry::default().nominal_aux().to_vec()
}

pub fn region() -> RegionOfInterest {
    RegionOfInterest::from_bounds(
        DesignVector::reference().as_slice().to_vec(),
        vec![0.1288, 2.7661, 0.4320, 2.6904, 0.5840, 2.6751],
        vec![0.1932, 2.9372, 0.6480, 2.8569, 0.8759, 2.8406],
    )
    .expect("ordered bounds")
}

pub fn design_bounds() -> Bounds {
    Bounds::new(
        vec![0.05, 2.0, 0.05, 2.0, 0.05, 2.0],
        vec![1.5, 3.8, 1.5, 3.8, 1.5, 3.8],
    )
    .expect("ordered bounds")
}
