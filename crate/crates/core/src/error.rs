use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Non-positive pivot in a triangular solve or an incomplete factorization.
    #[error("breakdown at row {row}: pivot {pivot} is not positive")]
    Breakdown { row: usize, pivot: f64 },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("operator is not positive definite: eigenvalue {value}")]
    Indefinite { value: f64 },

    #[error("degenerate random field: {0}")]
    DegenerateField(String),

    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("the weighted objective needs reference solutions A^-1 b attached to the probes")]
    MissingSolutions,

    #[error("dimension {n} exceeds the dense diagnostic limit {limit}; compare CG iteration counts instead")]
    TooLarge { n: usize, limit: usize },

    #[error("Matrix Market line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
