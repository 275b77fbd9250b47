use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),

    #[error("points or data live on different tori")]
    TorusMismatch,

    #[error("grid resolution {0} is too coarse (need at least 4 nodes per direction)")]
    ResolutionTooCoarse(usize),

    #[error("index {index} out of range 0..{bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("E = Im H is not integral on the lattice: E({j},{k}) = {value}")]
    NonIntegralE { j: usize, k: usize, value: f64 },

    #[error("semicharacter inconsistent: {0}")]
    SemicharacterInconsistent(String),

    #[error("matrix is not hermitian (max defect {0:e})")]
    NotHermitian(f64),

    #[error("vector is not in the lattice (max coordinate defect {0:e})")]
    NotLatticeVector(f64),

    #[error("linear map does not carry the source lattice into the target lattice (defect {0:e})")]
    LatticeNotPreserved(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("torsor presentations live over different bases")]
    BaseMismatch,

    #[error("invalid form: {0}")]
    InvalidForm(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("check `{name}` crashed: {reason}")]
    CheckCrashed { name: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
