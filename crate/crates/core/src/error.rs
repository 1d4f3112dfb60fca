use std::path::PathBuf;

/// Errors raised by the engines and the built-in models.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("frequency grids differ: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("{quantity} = {value} is outside the validity window [{min}, {max}]")]
    OutOfValidity {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{mode}-mode electrical length is a multiple of pi at {freq_ghz} GHz")]
    SingularLength { freq_ghz: f64, mode: &'static str },

    #[error("cannot cascade an empty list of two-ports")]
    EmptyCascade,

    #[error("ABCD to S conversion has a zero denominator")]
    ZeroDenominator,

    #[error("section {index}: {source}")]
    Section {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("touchstone {path}:{line}: {reason}")]
    Touchstone { path: PathBuf, line: usize, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("spec band {band} contains no grid points")]
    EmptyBand { band: String },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("finite-difference perturbation of coordinate {coordinate} gave a non-finite value")]
    NonFiniteDifference { coordinate: usize },

    #[error("optimizer found no finite step from the current iterate")]
    NoFiniteStep { best: Vec<f64> },

    #[error("mapped design {mapped:?} (from {x:?}) is not physically valid")]
    InvalidMappedPoint { x: Vec<f64>, mapped: Vec<f64> },

    #[error(
        "requested grid [{f_min}, {f_max}] GHz extends beyond the anchored range [{anchor_min}, {anchor_max}] GHz"
    )]
    Extrapolation {
        f_min: f64,
        f_max: f64,
        anchor_min: f64,
        anchor_max: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("fine response {path} is not available (requested for design {design:?})")]
    FineDataMissing { path: PathBuf, design: Vec<f64> },

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_section(self, index: usize) -> Error {
        Error::Section {
            index,
            source: Box::new(self),
        }
    }
}
