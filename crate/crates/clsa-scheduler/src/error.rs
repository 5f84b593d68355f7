use thiserror::Error;

pub type Result<T> = std::result::Result<T, ScheduleError>;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("target sets per layer must be at least 1")]
    InvalidTarget,
    #[error("set dependency graph has a cycle ({unscheduled} sets cannot be ordered)")]
    Cycle { unscheduled: usize },
    #[error("`{0}` is not a node of the scheduled graph")]
    UnknownNode(String),
    #[error(transparent)]
    Ir(#[from] nn_ir::IrError),
}
