use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mask has no pixel above the threshold")]
    EmptyMask,
    #[error("image {height}x{width} is smaller than the {window}x{window} window")]
    WindowTooLarge {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("every sampled coordinate was excluded")]
    AllPointsExcluded,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("scaled garment leaves the raster: {0}")]
    OutOfRaster(String),
    #[error("crop fraction {0} outside (0, 0.5)")]
    InvalidFraction(f64),
    #[error("occluder band does not intersect the garment")]
    DisjointBand,
    #[error("consistency weight is positive but no global stage result was supplied")]
    MissingGlobal,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed {kind} data: {msg}")]
    Format { kind: &'static str, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(what: &str, a: impl std::fmt::Debug, b: impl std::fmt::Debug) -> Self {
        Error::DimensionMismatch(format!("{what}: {a:?} vs {b:?}"))
    }
}
