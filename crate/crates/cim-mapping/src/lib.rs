//! Maps the base layers of a canonical graph onto crossbar processing
//! elements.
//!
//! Each base layer is lowered with im2col to a `(K_W·K_H·K_I) × K_O` kernel
//! matrix and cut into PE-sized tiles ([`pe_count`]). With intra-layer
//! scheduling a layer needs one MVM cycle per output vector
//! ([`intra_layer_latency`]). Spare PEs can hold duplicated weights; which
//! layers to duplicate is a small nonlinear knapsack ([`solve_duplication`])
//! and the chosen duplication is realised as a graph rewrite
//! ([`apply_duplication`]).

mod arch;
mod duplication;
mod error;
pub mod im2col;
mod plan;
mod rewrite;
mod tiling;

pub use arch::ArchConfig;
pub use duplication::{
    objective, solve_duplication, solve_duplication_capped, DuplicationProblem, SolverMode,
};
pub use error::{MappingError, Result};
pub use plan::{
    min_pe_requirement, plan_duplication, LayerMapping, LayerReport, MappingPlan, MappingReport,
    MappingTotals,
};
pub use rewrite::{
    apply_duplication, apply_duplication_with, balanced_split, duplicate_grid, duplicate_split,
    DuplicateGrid, DuplicateSplit,
};
pub use tiling::{intra_layer_latency, pe_count, TileGrid};
