use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("cell {cell} is not star-shaped with respect to its center")]
    NotStarShaped { cell: usize },

    #[error("perturbation failed at vertex {vertex}: no valid offset after {attempts} draws")]
    Perturbation { vertex: usize, attempts: usize },

    #[error("degenerate subcell (cell {cell}, vertex {vertex}): condition estimate {condition:.3e}")]
    DegenerateSubcell { cell: usize, vertex: usize, condition: f64 },

    #[error("local problem at vertex {vertex} is singular or ill-conditioned (estimate {condition:.3e})")]
    LocalSolve { vertex: usize, condition: f64 },

    #[error("invalid boundary specification: {0}")]
    Boundary(String),

    #[error("invalid material data: {0}")]
    Material(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
