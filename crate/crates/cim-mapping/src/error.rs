use thiserror::Error;

pub type Result<T> = std::result::Result<T, MappingError>;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("{required} PEs are needed to store all weights once but only {available} exist")]
    Infeasible { required: usize, available: usize },
    #[error("layer `{layer}` cannot be split into {duplicates} parts ({outputs} output vectors)")]
    TooManyDuplicates {
        layer: String,
        duplicates: usize,
        outputs: usize,
    },
    #[error("duplication vector has {found} entries for {expected} base layers")]
    LengthMismatch { expected: usize, found: usize },
    #[error("`{0}` is not a base layer of the mapped graph")]
    UnknownLayer(String),
    #[error("layer `{0}` must be canonical (valid padding, shapes inferred) to be duplicated")]
    NotCanonical(String),
    #[error(transparent)]
    Ir(#[from] nn_ir::IrError),
}
