use std::collections::BTreeMap;
use std::ops::Range;

use nn_ir::{KernelSpec, NNGraph};
use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::duplication::{DuplicationProblem, SolverMode};
use crate::error::{MappingError, Result};
use crate::tiling::{intra_layer_latency, pe_count};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMapping {
    pub layer: String,
    pub kernel: KernelSpec,
    pub pe_count: usize,
    pub tiles_v: usize,
    pub tiles_h: usize,
    pub duplicates: usize,
    /// `O_H·O_W` of the undivided layer.
    pub t_init_cycles: u64,
    /// First PE id of the layer; duplicate `k` owns
    /// `pe_start + k·pe_count .. pe_start + (k+1)·pe_count`.
    pub pe_start: usize,
}

impl LayerMapping {
    pub fn pe_used(&self) -> usize {
        self.pe_count * self.duplicates
    }

    pub fn pe_range(&self) -> Range<usize> {
        self.pe_start..self.pe_start + self.pe_used()
    }

    pub fn duplicate_range(&self, index: usize) -> Option<Range<usize>> {
        (index < self.duplicates).then(|| {
            let start = self.pe_start + index * self.pe_count;
            start..start + self.pe_count
        })
    }
}

/// PE allocation for every base layer of a (non-duplicated) canonical graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingPlan {
    pub arch: ArchConfig,
    layers: Vec<LayerMapping>,
    index: BTreeMap<String, usize>,
}

impl MappingPlan {
    /// Maps every base layer once. Fails when the weights do not fit.
    pub fn new(graph: &NNGraph, arch: ArchConfig) -> Result<Self> {
        let mut layers = Vec::new();
        for node in graph.base_layers() {
            let kernel = graph
                .kernel_of(&node.name)?
                .expect("base layers have kernels");
            let grid = pe_count(&kernel, &arch);
            let ofm = graph.require_shape(&node.name)?;
            layers.push(LayerMapping {
                layer: node.name.clone(),
                kernel,
                pe_count: grid.pe_count,
                tiles_v: grid.tiles_v,
                tiles_h: grid.tiles_h,
                duplicates: 1,
                t_init_cycles: intra_layer_latency(&ofm),
                pe_start: 0,
            });
        }
        let index = layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.layer.clone(), i))
            .collect();
        let mut plan = MappingPlan {
            arch,
            layers,
            index,
        };
        plan.assign_pes()?;
        Ok(plan)
    }

    fn assign_pes(&mut self) -> Result<()> {
        let mut next = 0;
        for l in &mut self.layers {
            l.pe_start = next;
            next += l.pe_used();
        }
        if next > self.arch.num_pe {
            return Err(MappingError::Infeasible {
                required: next,
                available: self.arch.num_pe,
            });
        }
        Ok(())
    }

    /// Same plan with the given duplicate counts (in base-layer order).
    pub fn with_duplicates(&self, d: &[usize]) -> Result<Self> {
        if d.len() != self.layers.len() {
            return Err(MappingError::LengthMismatch {
                expected: self.layers.len(),
                found: d.len(),
            });
        }
        let mut plan = self.clone();
        for (l, &di) in plan.layers.iter_mut().zip(d) {
            let outputs = l.t_init_cycles as usize;
            if di == 0 || di > outputs {
                return Err(MappingError::TooManyDuplicates {
                    layer: l.layer.clone(),
                    duplicates: di,
                    outputs,
                });
            }
            l.duplicates = di;
        }
        plan.assign_pes()?;
        Ok(plan)
    }

    pub fn layers(&self) -> &[LayerMapping] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&LayerMapping> {
        self.index.get(name).map(|i| &self.layers[*i])
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn duplicates(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.duplicates).collect()
    }

    pub fn latencies(&self) -> Vec<u64> {
        self.layers.iter().map(|l| l.t_init_cycles).collect()
    }

    pub fn pe_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.pe_count).collect()
    }

    /// PEs needed to store every weight once (`C_num`, `PE_min`).
    pub fn c_num(&self) -> usize {
        self.layers.iter().map(|l| l.pe_count).sum()
    }

    pub fn total_pe_used(&self) -> usize {
        self.layers.iter().map(LayerMapping::pe_used).sum()
    }

    pub fn is_duplicated(&self) -> bool {
        self.layers.iter().any(|l| l.duplicates > 1)
    }

    /// PE ids of one layer duplicate.
    pub fn pe_range(&self, layer: &str, duplicate: usize) -> Option<Range<usize>> {
        self.layer(layer)?.duplicate_range(duplicate)
    }

    /// Duplication problem over this plan's layers with budget `arch.num_pe`.
    pub fn duplication_problem(&self) -> DuplicationProblem {
        DuplicationProblem::new(self.latencies(), self.pe_counts(), self.arch.num_pe).with_caps(
            self.layers
                .iter()
                .map(|l| l.t_init_cycles as usize)
                .collect(),
        )
    }

    pub fn report(&self) -> MappingReport {
        MappingReport {
            layers: self
                .layers
                .iter()
                .map(|l| LayerReport {
                    name: l.layer.clone(),
                    pe_count: l.pe_count,
                    tiles_v: l.tiles_v,
                    tiles_h: l.tiles_h,
                    duplicates: l.duplicates,
                    t_init_cycles: l.t_init_cycles,
                    pe_range: [l.pe_range().start, l.pe_range().end],
                })
                .collect(),
            totals: MappingTotals {
                pe_min: self.c_num(),
                total_pe_used: self.total_pe_used(),
                f: self.arch.num_pe,
            },
        }
    }
}

/// JSON form of a plan. `pe_range` is half-open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    pub layers: Vec<LayerReport>,
    pub totals: MappingTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    pub pe_count: usize,
    pub tiles_v: usize,
    pub tiles_h: usize,
    pub duplicates: usize,
    pub t_init_cycles: u64,
    pub pe_range: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingTotals {
    pub pe_min: usize,
    pub total_pe_used: usize,
    #[serde(rename = "F")]
    pub f: usize,
}

/// `PE_min`: Σ c_i over the base layers of a canonical graph.
pub fn min_pe_requirement(graph: &NNGraph, arch: &ArchConfig) -> Result<usize> {
    let mut total = 0;
    for node in graph.base_layers() {
        let kernel = graph
            .kernel_of(&node.name)?
            .expect("base layers have kernels");
        total += pe_count(&kernel, arch).pe_count;
    }
    Ok(total)
}

/// Maps the graph and spends the spare PEs on duplicates.
pub fn plan_duplication(
    graph: &NNGraph,
    arch: ArchConfig,
    mode: SolverMode,
) -> Result<MappingPlan> {
    let plan = MappingPlan::new(graph, arch)?;
    let d = plan.duplication_problem().solve(mode)?;
    plan.with_duplicates(&d)
}
