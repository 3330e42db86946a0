use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Position of a token in expression source text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for SourcePos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

/// What went wrong while parsing an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownIdentifier,
    OrderOverflow,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("holonomy violation: {0}")]
    Holonomy(String),

    #[error("pairing domain error: {0}")]
    PairingDomain(String),

    #[error("order overflow: requested {requested}, available {available}")]
    OrderOverflow { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate Lagrangian: |det H| = {det:e}")]
    DegenerateLagrangian { det: f64 },

    #[error("{what} did not converge after {iterations} iterations (best residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("trajectory blow-up at t = {t}: |z| = {norm:e}")]
    BlowUp { t: f64, norm: f64 },

    #[error("parse error at {pos}: {message}")]
    Parse {
        kind: ParseErrorKind,
        pos: SourcePos,
        message: String,
    },

    #[error("evaluation error at {pos}: {source}")]
    Eval {
        pos: SourcePos,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
