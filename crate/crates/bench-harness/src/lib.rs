//! Shipped benchmark networks, the end-to-end pipeline (canonicalize, map,
//! duplicate, schedule, simulate), configuration sweeps and Gantt charts.

mod benchmarks;
mod error;
mod gantt;
mod pipeline;
mod sweep;
mod validate;

pub use benchmarks::{
    benchmark, load_benchmark, load_canonical, model_path, models_dir, Benchmark, LayerRow,
    BENCHMARKS, TINYYOLOV4_LAYERS,
};
pub use error::{HarnessError, Result};
pub use gantt::emit_gantt;
pub use pipeline::{run_config, Mode, Run, RunConfig};
pub use sweep::{artifact_dir, run_sweep, SweepConfig, SweepReport, SweepRow};
pub use validate::{validate_models, CheckRow, ValidationReport};
