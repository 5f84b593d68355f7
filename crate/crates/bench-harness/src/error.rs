use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("unknown mode `{0}` (expected lbl, wdup, xinf or wdup+xinf)")]
    UnknownMode(String),
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ir(#[from] nn_ir::IrError),
    #[error(transparent)]
    Mapping(#[from] cim_mapping::MappingError),
    #[error(transparent)]
    Schedule(#[from] clsa_scheduler::ScheduleError),
    #[error(transparent)]
    Sim(#[from] cim_simulator::SimError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
