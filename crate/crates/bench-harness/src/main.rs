use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bench_harness::{
    emit_gantt, load_benchmark, load_canonical, models_dir, run_config, run_sweep, validate_models,
    Mode, Run, RunConfig, SweepConfig, SweepRow,
};
use cim_mapping::{ArchConfig, DuplicateSplit, SolverMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use clsa_scheduler::SetShape;
use nn_ir::NNGraph;

#[derive(Parser)]
#[command(
    name = "clsa",
    version,
    about = "Cross-layer scheduling and weight duplication on tiled CIM accelerators"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// Output columns per crossbar.
    #[arg(long, global = true, default_value_t = ArchConfig::DEFAULT_PE_DIM)]
    pe_rows: usize,
    /// Input rows per crossbar.
    #[arg(long, global = true, default_value_t = ArchConfig::DEFAULT_PE_DIM)]
    pe_cols: usize,
    /// Duration of one matrix-vector multiply (one cycle).
    #[arg(long, global = true, default_value_t = ArchConfig::DEFAULT_T_MVM_NS)]
    t_mvm_ns: f64,
    /// PEs on top of PE_min. Single-run commands use the first value.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [4, 8, 16, 32])]
    extra_pes: Vec<usize>,
    /// Upper bound on sets per layer (default: finest aligned granularity).
    #[arg(long, global = true)]
    sets_per_layer: Option<usize>,
    /// lbl, wdup, xinf or wdup+xinf. Single-run commands use the first value.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_mode)]
    mode: Vec<Mode>,
    #[arg(long, global = true, value_enum, default_value_t = ShapeArg::Rows)]
    set_shape: ShapeArg,
    #[arg(long, global = true, value_enum, default_value_t = SplitArg::Columns)]
    split: SplitArg,
    #[arg(long, global = true, value_enum, default_value_t = SolverArg::Greedy)]
    solver: SolverArg,
    /// Directory holding the shipped model files.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    /// Output file (single-run commands) or directory (sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the model files against the published layer and PE tables.
    Validate,
    /// Print the PE mapping of a model.
    Map { model: String },
    /// Compute the schedule of a model as JSON.
    Schedule { model: String },
    /// Simulate a model and print cycles, utilization and speedup.
    Simulate { model: String },
    /// Run every (benchmark, x, mode) combination.
    Sweep {
        /// Benchmarks to run (default: all).
        benchmarks: Vec<String>,
        /// Also write schedule.json and gantt.svg per configuration.
        #[arg(long)]
        artifacts: bool,
    },
    /// Draw the schedule of a model as SVG.
    Gantt { model: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Grid,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Grid,
    Columns,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Exact,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
        .map_err(|e: bench_harness::HarnessError| e.to_string())
}

impl Opts {
    fn models_dir(&self) -> PathBuf {
        self.models.clone().unwrap_or_else(models_dir)
    }

    fn sweep_config(&self) -> SweepConfig {
        let mut cfg = SweepConfig {
            extra_pes: self.extra_pes.clone(),
            pe_rows: self.pe_rows,
            pe_cols: self.pe_cols,
            t_mvm_ns: self.t_mvm_ns,
            set_shape: match self.set_shape {
                ShapeArg::Grid => SetShape::Grid,
                ShapeArg::Rows => SetShape::Rows,
            },
            split: match self.split {
                SplitArg::Grid => DuplicateSplit::Grid,
                SplitArg::Columns => DuplicateSplit::Columns,
                SplitArg::Rows => DuplicateSplit::Rows,
            },
            solver: match self.solver {
                SolverArg::Greedy => SolverMode::Greedy,
                SolverArg::Exact => SolverMode::Exact,
            },
            models_dir: self.models_dir(),
            ..SweepConfig::default()
        };
        if let Some(n) = self.sets_per_layer {
            cfg.sets_per_layer = n;
        }
        if !self.mode.is_empty() {
            cfg.modes = self.mode.clone();
        }
        cfg
    }

    fn single(&self) -> RunConfig {
        let mode = self.mode.first().copied().unwrap_or(Mode::WdupXinf);
        self.sweep_config()
            .run_config(mode, self.extra_pes.first().copied().unwrap_or(0))
    }

    /// A benchmark name or a path to a model file.
    fn load(&self, model: &str) -> anyhow::Result<(String, NNGraph)> {
        let path = Path::new(model);
        if path.exists() || model.ends_with(".json") {
            let name = path
                .file_stem()
                .map_or(model.into(), |s| s.to_string_lossy().into_owned());
            return Ok((name, load_canonical(path)?));
        }
        Ok((
            model.to_string(),
            load_benchmark(&self.models_dir(), model)?,
        ))
    }

    fn run(&self, model: &str) -> anyhow::Result<(String, RunConfig, Run)> {
        let (name, graph) = self.load(model)?;
        let cfg = self.single();
        let run = run_config(&graph, &cfg).with_context(|| format!("{name} {}", cfg.label()))?;
        Ok((name, cfg, run))
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let opts = &cli.opts;
    match &cli.cmd {
        Cmd::Validate => {
            let report = validate_models(&opts.models_dir());
            print!("{report}");
            if !report.all_passed() {
                eprintln!("{} check(s) failed", report.failures().count());
                return Ok(ExitCode::FAILURE);
            }
            println!("all {} checks passed", report.rows.len());
        }
        Cmd::Map { model } => {
            let (_, _, run) = opts.run(model)?;
            let report = run.plan.report();
            if opts.out.is_some() {
                opts.emit(&serde_json::to_string_pretty(&report)?)?;
            } else {
                println!(
                    "{:<22} {:>4} {:>3} {:>8} {:>11}",
                    "layer", "PE", "d", "t_init", "PE range"
                );
                for l in &report.layers {
                    println!(
                        "{:<22} {:>4} {:>3} {:>8} {:>5}..{:<5}",
                        l.name,
                        l.pe_count,
                        l.duplicates,
                        l.t_init_cycles,
                        l.pe_range[0],
                        l.pe_range[1]
                    );
                }
                let t = &report.totals;
                println!("PE_min {}  used {}  F {}", t.pe_min, t.total_pe_used, t.f);
            }
        }
        Cmd::Schedule { model } => {
            let (_, _, run) = opts.run(model)?;
            opts.emit(&run.schedule.to_json())?;
        }
        Cmd::Simulate { model } => {
            let (name, cfg, run) = opts.run(model)?;
            if opts.out.is_some() {
                opts.emit(&run.report.to_json())?;
            } else {
                let row = SweepRow::from_run(&name, &cfg, &run);
                println!(
                    "{name} {}: {} cycles ({:.3} ms), Ut {:.3}, S {:.1} (baseline {} cycles)",
                    cfg.label(),
                    row.cycles,
                    row.latency_ns * 1e-6,
                    row.utilization,
                    row.speedup,
                    row.baseline_cycles
                );
            }
        }
        Cmd::Sweep {
            benchmarks,
            artifacts,
        } => {
            let mut cfg = opts.sweep_config();
            if !benchmarks.is_empty() {
                cfg = cfg.with_benchmarks(benchmarks);
            }
            if cfg.modes.is_empty() {
                bail!("no modes selected");
            }
            let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let report = run_sweep(&cfg, artifacts.then_some(out.as_path()))?;
            report.write(&out)?;
            print!("{}", report.table());
            println!("wrote {}", out.join("results.csv").display());
        }
        Cmd::Gantt { model } => {
            let (_, _, run) = opts.run(model)?;
            opts.emit(&emit_gantt(&run.schedule, &run.plan))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
