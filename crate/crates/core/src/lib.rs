//! Space-mapping surrogate optimization.
//!
//! Two engines share one set of model contracts ([`DesignModel`],
//! [`AuxModel`]):
//!
//! * [`explicit`] builds an input/output mapped surrogate `A·Rc(B·x + c) + d`
//!   from a star base set and optimizes it.
//! * [`rrsm`] runs implicit space mapping on preassigned parameters and
//!   falls back to a response-residual corrected surrogate when calibration
//!   stops tracking the fine model.
//!
//! The [`circuit`] module provides a coupled-line microstrip band-pass filter
//! as coarse model and a perturbed copy of it as fine emulator.

pub mod circuit;
pub mod design;
pub mod error;
pub mod explicit;
pub mod model;
pub mod optimizer;
pub mod response;
pub mod rrsm;
pub mod spec;

pub use design::{design_objective, optimize_design};
pub use error::{Error, Result};
pub use explicit::{MappingSet, RegionOfInterest};
pub use model::{AuxModel, DesignModel, EvalCounter, FineRecord, WithAux};
pub use optimizer::{least_squares, minimize, Bounds, OptReport, OptimizerSettings};
pub use response::{Channel, ChannelSelector, FrequencyGrid, Representation, Response};
pub use rrsm::{run_ism_rrsm, RrsmSettings, RunReport};
pub use spec::{objective, violation, DesignSpec, SpecBand, Violation};
