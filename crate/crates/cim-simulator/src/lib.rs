//! Turns a schedule into per-PE activity and the usual metrics: inference
//! cycles, utilization and speedup over layer-by-layer execution.
//!
//! Utilization is the mean over all PEs of the chip (including surplus PEs
//! that hold nothing) of the fraction of cycles each PE computes. The
//! layer-by-layer reference keeps one layer active at a time, so with
//! `A = Σ_p active_p` the speedup obeys
//! `S = Ut · (PE_min + x) / (Ut_lbl · PE_min) · A_lbl / A`,
//! which [`check_speedup_relation`] measures.

use std::io;

use cim_mapping::MappingPlan;
use clsa_scheduler::Schedule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("schedule runs `{layer}` duplicate {duplicate}, which the mapping does not place")]
    UnmappedUnit { layer: String, duplicate: usize },
    #[error("sets of `{layer}` duplicate {duplicate} overlap in time")]
    ResourceConflict { layer: String, duplicate: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Layer-by-layer reference: cycles and utilization over `PE_min` PEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub cycles: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config_label: String,
    pub total_cycles: u64,
    pub total_latency_ns: f64,
    pub per_pe_active_cycles: Vec<u64>,
    pub utilization: f64,
    pub baseline_cycles: u64,
    pub speedup: f64,
}

impl SimReport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.config_label = label.into();
        self
    }

    /// `Σ_p active_p`.
    pub fn active_pe_cycles(&self) -> u64 {
        self.per_pe_active_cycles.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Sequential execution of the undivided layers: `Σ t_i` cycles and
/// `Ut_lbl = Σ c_i·t_i / (PE_min · Σ t_i)`.
pub fn layer_by_layer_baseline(plan: &MappingPlan) -> Baseline {
    let cycles: u64 = plan.latencies().iter().sum();
    let work: u64 = plan
        .layers()
        .iter()
        .map(|l| l.pe_count as u64 * l.t_init_cycles)
        .sum();
    let pe_min = plan.c_num() as u64;
    Baseline {
        cycles,
        utilization: if cycles == 0 {
            0.0
        } else {
            work as f64 / (pe_min * cycles) as f64
        },
    }
}

/// Every PE of a layer duplicate is active whenever one of that duplicate's
/// sets executes. The speedup is taken against [`layer_by_layer_baseline`].
pub fn simulate(schedule: &Schedule, plan: &MappingPlan) -> Result<SimReport> {
    let arch = plan.arch;
    let mut active = vec![0u64; arch.num_pe];
    for ((layer, duplicate), intervals) in schedule.intervals() {
        let range = plan
            .pe_range(layer, duplicate)
            .ok_or_else(|| SimError::UnmappedUnit {
                layer: layer.to_string(),
                duplicate,
            })?;
        let mut busy = 0;
        let mut last_end = 0;
        for &(s, e) in &intervals {
            if s < last_end {
                return Err(SimError::ResourceConflict {
                    layer: layer.to_string(),
                    duplicate,
                });
            }
            busy += e - s;
            last_end = e;
        }
        for pe in range {
            active[pe] += busy;
        }
    }
    let total = schedule.makespan();
    let baseline = layer_by_layer_baseline(plan);
    let sum: u64 = active.iter().sum();
    Ok(SimReport {
        config_label: String::new(),
        total_cycles: total,
        total_latency_ns: arch.cycles_to_ns(total),
        per_pe_active_cycles: active,
        utilization: if total == 0 {
            0.0
        } else {
            sum as f64 / (arch.num_pe as f64 * total as f64)
        },
        baseline_cycles: baseline.cycles,
        speedup: if total == 0 {
            0.0
        } else {
            baseline.cycles as f64 / total as f64
        },
    })
}

/// Relative gap `|S − Ut·(PE_min+x)/(Ut_lbl·PE_min)| / S`. Zero whenever the
/// schedule performs as many active PE-cycles as the baseline.
pub fn check_speedup_relation(
    report: &SimReport,
    baseline: &Baseline,
    pe_min: usize,
    x: usize,
) -> f64 {
    let predicted =
        report.utilization * (pe_min + x) as f64 / (baseline.utilization * pe_min as f64);
    (report.speedup - predicted).abs() / report.speedup
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub benchmark: String,
    pub x: usize,
    pub mapping: String,
    pub scheduling: String,
    pub cycles: u64,
    pub latency_ns: f64,
    pub utilization: f64,
    pub speedup: f64,
}

impl ReportRow {
    pub fn new(
        benchmark: &str,
        x: usize,
        mapping: &str,
        scheduling: &str,
        report: &SimReport,
    ) -> Self {
        ReportRow {
            benchmark: benchmark.to_string(),
            x,
            mapping: mapping.to_string(),
            scheduling: scheduling.to_string(),
            cycles: report.total_cycles,
            latency_ns: report.total_latency_ns,
            utilization: report.utilization,
            speedup: report.speedup,
        }
    }
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: io::Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
