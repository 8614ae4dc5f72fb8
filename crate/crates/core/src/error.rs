use thiserror::Error;

pub type Result<T> = std::result::Result<T, MkrError>;

#[derive(Debug, Error)]
pub enum MkrError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("symbolic term budget exceeded: {0}")]
    TermBudget(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MkrError {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        MkrError::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        MkrError::Contract(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        MkrError::Data(msg.into())
    }
}
