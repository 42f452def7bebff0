use thiserror::Error;

/// Errors raised by series arithmetic, array operations, tape recording and
/// interpretation, and the Lie coefficient drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("order mismatch: {left} vs {right} (orders must agree or one must be 0)")]
    OrderMismatch { left: usize, right: usize },

    #[error("division by a series whose constant term is zero")]
    DivisionByZeroConstantTerm,

    #[error("{function} is not analytic at constant term {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("non-finite coefficient")]
    NonFiniteCoefficient,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index:?} out of bounds for shape {shape:?}")]
    IndexOutOfBounds { index: Vec<usize>, shape: Vec<usize> },

    #[error("constant term of the coefficient matrix is singular (pivot {pivot:e} at column {column})")]
    SingularConstantTerm { column: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation on traced value: {0}")]
    UnsupportedOperation(String),

    #[error("instruction {index}: {source}")]
    Instruction {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any instruction-index wrapping and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Instruction { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn at_instruction(self, index: usize) -> Error {
        Error::Instruction {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
