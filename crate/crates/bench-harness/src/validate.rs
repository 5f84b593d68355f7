use std::fmt;
use std::path::Path;

use cim_mapping::{ArchConfig, MappingPlan};
use nn_ir::{NNGraph, TensorShape};
use serde::Serialize;

use crate::benchmarks::{load_benchmark, BENCHMARKS, TINYYOLOV4_LAYERS};

/// One expected-versus-actual comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckRow {
    pub benchmark: String,
    pub item: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl CheckRow {
    fn new(
        benchmark: &str,
        item: impl Into<String>,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        let (expected, actual) = (expected.to_string(), actual.to_string());
        CheckRow {
            benchmark: benchmark.to_string(),
            item: item.into(),
            pass: expected == actual,
            expected,
            actual,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<CheckRow>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let status = if r.pass { "ok  " } else { "FAIL" };
            writeln!(
                f,
                "{status} {:<11} {:<22} expected {:<16} got {}",
                r.benchmark, r.item, r.expected, r.actual
            )?;
        }
        Ok(())
    }
}

fn shape_str(s: Option<TensorShape>) -> String {
    s.map_or_else(|| "missing".to_string(), |s| s.to_string())
}

fn layer_rows(name: &str, graph: &NNGraph, plan: &MappingPlan, rows: &mut Vec<CheckRow>) {
    for row in TINYYOLOV4_LAYERS {
        let [h, w, c] = row.ifm;
        let ifm = graph
            .node(row.layer)
            .and_then(|n| n.inputs.first())
            .and_then(|i| graph.shape(i));
        rows.push(CheckRow::new(
            name,
            format!("{} ifm", row.layer),
            TensorShape::new(h, w, c),
            shape_str(ifm),
        ));
        let [h, w, c] = row.ofm;
        rows.push(CheckRow::new(
            name,
            format!("{} ofm", row.layer),
            TensorShape::new(h, w, c),
            shape_str(graph.shape(row.layer)),
        ));
        let mapped = plan.layer(row.layer);
        rows.push(CheckRow::new(
            name,
            format!("{} pe", row.layer),
            row.pe_count,
            mapped.map_or_else(|| "missing".into(), |m| m.pe_count.to_string()),
        ));
        rows.push(CheckRow::new(
            name,
            format!("{} t_init", row.layer),
            row.t_init,
            mapped.map_or_else(|| "missing".into(), |m| m.t_init_cycles.to_string()),
        ));
    }
}

/// Checks every shipped model against its published input shape, base-layer
/// count and `PE_min`, and the TinyYOLOv4 layer table. Load errors become
/// failing rows.
pub fn validate_models(dir: &Path) -> ValidationReport {
    let mut rows = Vec::new();
    for b in BENCHMARKS {
        let graph = match load_benchmark(dir, b.name) {
            Ok(g) => g,
            Err(e) => {
                rows.push(CheckRow::new(b.name, "load", "ok", e));
                continue;
            }
        };
        let [h, w, c] = b.input;
        let input = graph
            .iter()
            .find(|n| n.inputs.is_empty())
            .and_then(|n| graph.shape(&n.name));
        rows.push(CheckRow::new(
            b.name,
            "input",
            TensorShape::new(h, w, c),
            shape_str(input),
        ));
        rows.push(CheckRow::new(
            b.name,
            "base layers",
            b.base_layers,
            graph.base_count(),
        ));
        match MappingPlan::new(&graph, ArchConfig::new(usize::MAX)) {
            Ok(plan) => {
                rows.push(CheckRow::new(b.name, "pe_min", b.pe_min, plan.c_num()));
                if b.name == "tinyyolov4" {
                    layer_rows(b.name, &graph, &plan, &mut rows);
                }
            }
            Err(e) => rows.push(CheckRow::new(b.name, "pe_min", b.pe_min, e)),
        }
    }
    ValidationReport { rows }
}
