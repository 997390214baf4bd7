use thiserror::Error;

/// Errors raised by grid, geometry and operator construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    Dimension(usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("point is not on the {0} lattice")]
    OffLattice(&'static str),
    #[error("dilation by 2^{0} leaves the representable band")]
    DilationOverflow(i32),
    #[error("tile not representable on this grid: {0}")]
    Unrepresentable(String),
    #[error("invalid tile: {0}")]
    InvalidTile(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("field is not mean-zero but the symbol is singular at the origin")]
    NotMeanZero,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
