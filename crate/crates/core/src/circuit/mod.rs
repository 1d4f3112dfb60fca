//! Circuit models: microstrip line physics, two-port algebra, the band-pass
//! filter (coarse model and fine emulator) and Touchstone ingestion.

pub mod filter;
pub mod microstrip;
pub mod synthetic;
pub mod touchstone;
pub mod twoport;

pub use filter::{
    AuxVector, CoarseModel, DesignVector, EmulatorTruth, FilterGeometry, FineEmulator, AUX_DIM, DESIGN_DIM,
};
pub use microstrip::{microstrip_coupled_params, microstrip_line, CoupledModes, LineParams};
pub use synthetic::AffineFine;
pub use touchstone::{load_touchstone, read_touchstone, write_touchstone, TouchstoneSequence};
pub use twoport::{cascade, line_two_port, TwoPort};
