use std::fs;
use std::path::{Path, PathBuf};

use cim_mapping::{ArchConfig, DuplicateSplit, SolverMode};
use cim_simulator::{check_speedup_relation, write_csv, ReportRow};
use clsa_scheduler::SetShape;
use nn_ir::NNGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{load_benchmark, models_dir, BENCHMARKS};
use crate::error::{HarnessError, Result};
use crate::gantt::emit_gantt;
use crate::pipeline::{run_config, Mode, Run, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub benchmarks: Vec<String>,
    /// PEs on top of `PE_min`.
    pub extra_pes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub t_mvm_ns: f64,
    pub sets_per_layer: usize,
    pub set_shape: SetShape,
    pub split: DuplicateSplit,
    pub solver: SolverMode,
    pub models_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let run = RunConfig::new(Mode::Lbl, 0);
        SweepConfig {
            benchmarks: BENCHMARKS.iter().map(|b| b.name.to_string()).collect(),
            extra_pes: vec![4, 8, 16, 32],
            modes: Mode::ALL.to_vec(),
            pe_rows: run.pe_rows,
            pe_cols: run.pe_cols,
            t_mvm_ns: run.t_mvm_ns,
            sets_per_layer: run.sets_per_layer,
            set_shape: run.set_shape,
            split: run.split,
            solver: run.solver,
            models_dir: models_dir(),
        }
    }
}

impl SweepConfig {
    pub fn with_benchmarks<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.benchmarks = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn with_extra_pes(mut self, xs: &[usize]) -> Self {
        self.extra_pes = xs.to_vec();
        self
    }

    pub fn with_modes(mut self, modes: &[Mode]) -> Self {
        self.modes = modes.to_vec();
        self
    }

    pub fn run_config(&self, mode: Mode, x: usize) -> RunConfig {
        RunConfig {
            mode,
            extra_pes: x,
            sets_per_layer: self.sets_per_layer,
            set_shape: self.set_shape,
            solver: self.solver,
            pe_rows: self.pe_rows,
            pe_cols: self.pe_cols,
            t_mvm_ns: self.t_mvm_ns,
            split: self.split,
        }
    }

    fn arch_probe(&self) -> ArchConfig {
        ArchConfig::new(usize::MAX).with_pe_dims(self.pe_rows, self.pe_cols)
    }
}

/// One (benchmark, x, mode) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub benchmark: String,
    pub x: usize,
    pub mode: Mode,
    pub pe_min: usize,
    pub num_pe: usize,
    pub cycles: u64,
    pub latency_ns: f64,
    pub utilization: f64,
    pub baseline_cycles: u64,
    pub baseline_utilization: f64,
    pub speedup: f64,
    /// Relative gap of the utilization-speedup identity.
    pub eq3_deviation: f64,
}

impl SweepRow {
    pub fn from_run(benchmark: &str, cfg: &RunConfig, run: &Run) -> Self {
        SweepRow {
            benchmark: benchmark.to_string(),
            x: cfg.extra_pes,
            mode: cfg.mode,
            pe_min: run.pe_min,
            num_pe: run.plan.arch.num_pe,
            cycles: run.report.total_cycles,
            latency_ns: run.report.total_latency_ns,
            utilization: run.report.utilization,
            baseline_cycles: run.baseline.cycles,
            baseline_utilization: run.baseline.utilization,
            speedup: run.report.speedup,
            eq3_deviation: check_speedup_relation(
                &run.report,
                &run.baseline,
                run.pe_min,
                cfg.extra_pes,
            ),
        }
    }

    pub fn report_row(&self) -> ReportRow {
        ReportRow {
            benchmark: self.benchmark.clone(),
            x: self.x,
            mapping: self.mode.mapping_label().to_string(),
            scheduling: self.mode.scheduling_label().to_string(),
            cycles: self.cycles,
            latency_ns: self.latency_ns,
            utilization: self.utilization,
            speedup: self.speedup,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn get(&self, benchmark: &str, x: usize, mode: Mode) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.benchmark == benchmark && r.x == x && r.mode == mode)
    }

    pub fn csv(&self) -> Result<String> {
        let rows: Vec<ReportRow> = self.rows.iter().map(SweepRow::report_row).collect();
        let mut out = Vec::new();
        write_csv(&rows, &mut out)?;
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows always serialize")
    }

    /// Fixed-width table: utilization to 3 decimals, speedup to 1.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<11} {:>3} {:<10} {:>6} {:>9} {:>7} {:>7}\n",
            "benchmark", "x", "mode", "#PE", "cycles", "Ut", "S"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<11} {:>3} {:<10} {:>6} {:>9} {:>7.3} {:>7.1}\n",
                r.benchmark,
                r.x,
                r.mode.as_str(),
                r.num_pe,
                r.cycles,
                r.utilization,
                r.speedup
            ));
        }
        s
    }

    /// Writes `results.csv` and `results.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_file(&dir.join("results.csv"), &self.csv()?)?;
        write_file(&dir.join("results.json"), &self.to_json())
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Directory name of one cell's artifacts, e.g. `tinyyolov4_x16_wdup-xinf`.
pub fn artifact_dir(benchmark: &str, x: usize, mode: Mode) -> String {
    format!("{benchmark}_x{x}_{}", mode.as_str().replace('+', "-"))
}

/// Runs every (benchmark, x, mode) cell in parallel. Rows come back sorted by
/// benchmark (in configuration order), x and mode, so the output does not
/// depend on thread timing. With `artifacts`, each cell's `schedule.json`
/// and `gantt.svg` go to a subdirectory of it.
pub fn run_sweep(cfg: &SweepConfig, artifacts: Option<&Path>) -> Result<SweepReport> {
    let graphs: Vec<(usize, &str, NNGraph)> = cfg
        .benchmarks
        .iter()
        .enumerate()
        .map(|(i, name)| Ok((i, name.as_str(), load_benchmark(&cfg.models_dir, name)?)))
        .collect::<Result<_>>()?;
    // Fail early on an impossible crossbar size instead of once per cell.
    for (_, _, g) in &graphs {
        cim_mapping::MappingPlan::new(g, cfg.arch_probe())?;
    }
    let mut cells = Vec::new();
    for (i, name, g) in &graphs {
        for &x in &cfg.extra_pes {
            for &mode in &cfg.modes {
                cells.push((*i, *name, g, x, mode));
            }
        }
    }
    let mut rows: Vec<(usize, SweepRow)> = cells
        .into_par_iter()
        .map(|(i, name, g, x, mode)| {
            let rc = cfg.run_config(mode, x);
            let run = run_config(g, &rc)?;
            if let Some(dir) = artifacts {
                let dir = dir.join(artifact_dir(name, x, mode));
                create_dir(&dir)?;
                write_file(&dir.join("schedule.json"), &run.schedule.to_json())?;
                write_file(
                    &dir.join("gantt.svg"),
                    &emit_gantt(&run.schedule, &run.plan),
                )?;
            }
            Ok((i, SweepRow::from_run(name, &rc, &run)))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|(ia, a), (ib, b)| (ia, a.x, a.mode).cmp(&(ib, b.x, b.mode)));
    Ok(SweepReport {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}
