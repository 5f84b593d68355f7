//! Cross-layer scheduling of base layers on a weight-stationary crossbar
//! accelerator.
//!
//! Every base node's OFM is cut into rectangular sets ([`determine_sets`]).
//! Set regions are propagated backwards through the non-base operations
//! between base nodes to find which producer sets each consumer set needs
//! ([`determine_dependencies`]). Sets of one node run in row-major order on
//! its PE group, and every set starts as soon as its producers and its
//! predecessor on the same PEs are done ([`schedule_asap`]).

mod deps;
mod error;
mod footprint;
mod region;
mod schedule;
mod sets;

pub use deps::{determine_dependencies, SetDependencyGraph, SetId};
pub use error::{Result, ScheduleError};
pub use region::{region_backward, Region};
pub use schedule::{schedule_asap, schedule_layer_by_layer, Schedule, ScheduledSet};
pub use sets::{
    alignment_unit, determine_sets, determine_sets_with, order_sets, set_grid, set_grid_with,
    SetPartition, SetShape, DEFAULT_SETS_PER_LAYER,
};

use nn_ir::NNGraph;

/// Stages I to IV in one call.
pub fn cross_layer_schedule(
    graph: &NNGraph,
    target_sets_per_layer: usize,
) -> Result<(Vec<SetPartition>, Schedule)> {
    let partitions = determine_sets(graph, target_sets_per_layer)?;
    let deps = determine_dependencies(graph, &partitions)?;
    let schedule = schedule_asap(&deps, &partitions)?;
    Ok((partitions, schedule))
}
