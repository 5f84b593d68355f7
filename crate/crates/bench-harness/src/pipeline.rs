use std::fmt;
use std::str::FromStr;

use cim_mapping::{
    apply_duplication_with, plan_duplication, ArchConfig, DuplicateSplit, MappingPlan, SolverMode,
};
use cim_simulator::{layer_by_layer_baseline, simulate, Baseline, SimReport};
use clsa_scheduler::{
    determine_dependencies, determine_sets, determine_sets_with, schedule_asap,
    schedule_layer_by_layer, Schedule, SetPartition, SetShape,
};
use nn_ir::NNGraph;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Mapping and scheduling combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Every layer once, layers one after another.
    #[serde(rename = "lbl")]
    Lbl,
    /// Weight duplication, layers one after another.
    #[serde(rename = "wdup")]
    Wdup,
    /// Every layer once, cross-layer scheduling.
    #[serde(rename = "xinf")]
    Xinf,
    #[serde(rename = "wdup+xinf")]
    WdupXinf,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Lbl, Mode::Wdup, Mode::Xinf, Mode::WdupXinf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Lbl => "lbl",
            Mode::Wdup => "wdup",
            Mode::Xinf => "xinf",
            Mode::WdupXinf => "wdup+xinf",
        }
    }

    pub fn duplicates(&self) -> bool {
        matches!(self, Mode::Wdup | Mode::WdupXinf)
    }

    pub fn cross_layer(&self) -> bool {
        matches!(self, Mode::Xinf | Mode::WdupXinf)
    }

    pub fn mapping_label(&self) -> &'static str {
        if self.duplicates() {
            "wdup"
        } else {
            "plain"
        }
    }

    pub fn scheduling_label(&self) -> &'static str {
        if self.cross_layer() {
            "xinf"
        } else {
            "lbl"
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownMode(s.to_string()))
    }
}

/// Everything needed to run one configuration on a canonical graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// PEs on top of `PE_min`.
    pub extra_pes: usize,
    /// Upper bound on sets per base node; `usize::MAX` for the finest
    /// aligned granularity.
    pub sets_per_layer: usize,
    pub set_shape: SetShape,
    pub solver: SolverMode,
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub t_mvm_ns: f64,
    pub split: DuplicateSplit,
}

impl RunConfig {
    pub fn new(mode: Mode, extra_pes: usize) -> Self {
        RunConfig {
            mode,
            extra_pes,
            sets_per_layer: usize::MAX,
            set_shape: SetShape::Rows,
            solver: SolverMode::Greedy,
            pe_rows: ArchConfig::DEFAULT_PE_DIM,
            pe_cols: ArchConfig::DEFAULT_PE_DIM,
            t_mvm_ns: ArchConfig::DEFAULT_T_MVM_NS,
            split: DuplicateSplit::Columns,
        }
    }

    pub fn with_sets(mut self, sets: usize) -> Self {
        self.sets_per_layer = sets;
        self
    }

    pub fn with_split(mut self, split: DuplicateSplit) -> Self {
        self.split = split;
        self
    }

    pub fn with_set_shape(mut self, shape: SetShape) -> Self {
        self.set_shape = shape;
        self
    }

    pub fn with_solver(mut self, solver: SolverMode) -> Self {
        self.solver = solver;
        self
    }

    /// e.g. `wdup+16 xinf`.
    pub fn label(&self) -> String {
        let mapping = if self.mode.duplicates() {
            format!("wdup+{}", self.extra_pes)
        } else {
            format!("plain+{}", self.extra_pes)
        };
        format!("{mapping} {}", self.mode.scheduling_label())
    }
}

/// Artifacts of one configuration.
#[derive(Debug, Clone)]
pub struct Run {
    pub pe_min: usize,
    pub plan: MappingPlan,
    /// Graph that was scheduled (rewritten when duplicating).
    pub graph: NNGraph,
    pub partitions: Vec<SetPartition>,
    pub schedule: Schedule,
    pub baseline: Baseline,
    pub report: SimReport,
}

/// Map, optionally duplicate, schedule and simulate a canonical graph.
pub fn run_config(graph: &NNGraph, cfg: &RunConfig) -> Result<Run> {
    let base_arch = ArchConfig {
        num_pe: usize::MAX,
        pe_rows: cfg.pe_rows,
        pe_cols: cfg.pe_cols,
        t_mvm_ns: cfg.t_mvm_ns,
    };
    let pe_min = MappingPlan::new(graph, base_arch)?.c_num();
    let arch = base_arch.with_num_pe(pe_min + cfg.extra_pes);
    let plan = if cfg.mode.duplicates() {
        plan_duplication(graph, arch, cfg.solver)?
    } else {
        MappingPlan::new(graph, arch)?
    };
    let scheduled = if plan.is_duplicated() {
        apply_duplication_with(graph, &plan, cfg.split)?
    } else {
        graph.clone()
    };
    let (partitions, schedule) = if cfg.mode.cross_layer() {
        let partitions = determine_sets_with(&scheduled, cfg.sets_per_layer, cfg.set_shape)?;
        let deps = determine_dependencies(&scheduled, &partitions)?;
        let schedule = schedule_asap(&deps, &partitions)?;
        (partitions, schedule)
    } else {
        let partitions = determine_sets(&scheduled, 1)?;
        let schedule = schedule_layer_by_layer(&partitions);
        (partitions, schedule)
    };
    let report = simulate(&schedule, &plan)?.with_label(cfg.label());
    Ok(Run {
        pe_min,
        baseline: layer_by_layer_baseline(&plan),
        plan,
        graph: scheduled,
        partitions,
        schedule,
        report,
    })
}
