use thiserror::Error;

pub type Result<T> = std::result::Result<T, IrError>;

#[derive(Debug, Error)]
pub enum IrError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("unknown op `{op}` on node `{node}`")]
    UnknownOp { node: String, op: String },
    #[error("invalid attributes on node `{node}`: {message}")]
    InvalidAttrs { node: String, message: String },
    #[error("node `{node}` references undefined input `{input}`")]
    DanglingInput { node: String, input: String },
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("node `{node}` expects {expected} input(s), found {found}")]
    Arity {
        node: String,
        expected: &'static str,
        found: usize,
    },
    #[error("shape mismatch at `{node}`: {message}")]
    ShapeMismatch { node: String, message: String },
    #[error("non-positive output dimension at `{0}`")]
    NonPositiveDim(String),
    #[error("shape of `{0}` has not been inferred")]
    MissingShape(String),
    #[error("batchnorm `{0}` has no base-layer predecessor")]
    BatchNormWithoutBase(String),
    #[error("weights for `{node}`: {message}")]
    Weights { node: String, message: String },
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IrError {
    pub(crate) fn attrs(node: &str, message: impl Into<String>) -> Self {
        IrError::InvalidAttrs {
            node: node.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(node: &str, message: impl Into<String>) -> Self {
        IrError::ShapeMismatch {
            node: node.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn weights(node: &str, message: impl Into<String>) -> Self {
        IrError::Weights {
            node: node.to_string(),
            message: message.into(),
        }
    }
}
