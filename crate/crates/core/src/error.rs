use thiserror::Error;

/// Errors shared by the matrix, circuit and synthesis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary: ||U^dag U - I||_F = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not an isometry: ||V^dag V - I||_F = {deviation:.3e}")]
    NotIsometry { deviation: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate vector: both amplitudes are zero")]
    DegenerateVector,

    #[error("matrix is numerically singular")]
    Singular,

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("unsupported element for phase propagation: {0}")]
    UnsupportedElement(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
