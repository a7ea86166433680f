mod config;
mod figures;
mod ops;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use blockade_core::dynamics::ScheduleSpec;
use blockade_core::hamiltonians::{GraphSource, ModelKind, ModelSpec};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ExperimentConfig, GraphRecipe, Grid, ModelRef, Operation, RefState};
use figures::FigureId;

const DEFAULT_OUT: &str = "blockade-out";
const DEFAULT_CACHE: &str = ".blockade-cache";

#[derive(Parser)]
#[command(
    name = "blockade-sim",
    version,
    about = "Spectra, sweeps and quenches of blockade-constrained chains and grids"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Result cache directory.
    #[arg(long, global = true, env = "BLOCKADE_SIM_CACHE")]
    cache_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a unit-disk graph and count its independent sets.
    Graph {
        #[command(subcommand)]
        action: GraphCmd,
    },
    /// Gap scans, phase diagrams and eigenstate overlaps.
    Spectrum {
        #[command(subcommand)]
        action: SpectrumCmd,
    },
    /// Adiabatic sweeps and quenches.
    Dynamics {
        #[command(subcommand)]
        action: DynamicsCmd,
    },
    /// Perturbative and mean-field predictions for a chain.
    Theory {
        #[command(subcommand)]
        action: TheoryCmd,
    },
    /// Regenerate the dataset behind one figure.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureId,
    },
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    Build {
        #[arg(long, value_parser = ["path", "doublet-chain", "gadget-chain", "doublet-grid", "square-grid"])]
        family: String,
        /// Chain length (odd).
        #[arg(long = "L")]
        length: Option<usize>,
        /// Vertex count for paths.
        #[arg(long)]
        n: Option<usize>,
        /// Clique size for gadget chains.
        #[arg(long, default_value_t = 2)]
        q: u32,
        /// Grid side for doublet grids.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// ModelSpec JSON file; replaces the other model flags.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Model kind: rydberg, k_chain, k_pxp, spin_exchange, laplacian, quench, grid_k_pxp.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ModelKind>,
    #[arg(long = "L")]
    length: Option<usize>,
    /// Grid side for the grid model.
    #[arg(long)]
    m: Option<usize>,
    /// Rabi enhancement on even sites.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long = "V", default_value_t = 100.0)]
    v: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Interaction tail cutoff (0 disables tails).
    #[arg(long, default_value_t = 0.0)]
    tails: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Detuning for single-operator commands.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta: f64,
    /// Graph JSON for the rydberg model.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Use the full 2^N space instead of the blockaded one (rydberg model).
    #[arg(long)]
    unconstrained: bool,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    serde_json::from_value(json!(s.replace('-', "_"))).map_err(|_| format!("unknown model kind {s}"))
}

impl ModelArgs {
    fn model(&self, default: ModelKind) -> ModelRef {
        if let Some(p) = &self.model_file {
            return ModelRef::File(p.clone());
        }
        let kind = self.kind.unwrap_or(if self.m.is_some() && default == ModelKind::Quench {
            ModelKind::GridKPxp
        } else {
            default
        });
        let mut spec = ModelSpec::new(kind);
        spec.length = self.length;
        spec.m = self.m;
        spec.k = self.k;
        spec.v = self.v;
        spec.phi = self.phi;
        spec.tail_cutoff = self.tails;
        spec.omega = self.omega;
        spec.delta = self.delta;
        spec.graph = self.graph.clone().map(GraphSource::File);
        spec.constrained = !self.unconstrained;
        ModelRef::Inline(spec)
    }
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long = "T")]
    total_time: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta_start: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta_end: f64,
    /// Fraction of the sweep after which it stops.
    #[arg(long, default_value_t = 1.0)]
    abort: f64,
}

impl ScheduleArgs {
    fn schedule(&self) -> ScheduleSpec {
        ScheduleSpec::new(self.total_time, self.delta_start, self.delta_end, self.abort)
    }
}

#[derive(Subcommand)]
enum SpectrumCmd {
    /// Gap E1 - E0 on a uniform detuning grid.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        delta_min: f64,
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        delta_max: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Minimum gap and its location.
    MinGap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        delta_min: f64,
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        delta_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
    },
    /// Mean ground-state occupation of the constrained k-chain over (k, delta).
    PhaseDiagram {
        #[arg(long = "L", default_value_t = 11)]
        length: usize,
        #[arg(long, default_value_t = 0.5)]
        k_min: f64,
        #[arg(long, default_value_t = 2.5)]
        k_max: f64,
        #[arg(long, default_value_t = 64)]
        k_points: usize,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        delta_min: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        delta_max: f64,
        #[arg(long, default_value_t = 64)]
        delta_points: usize,
    },
    /// Squared overlaps of every eigenstate with reference configurations.
    Overlaps {
        #[command(flatten)]
        model: ModelArgs,
        /// Reference states: z2, z2bar, all_ground.
        #[arg(long = "ref", value_parser = parse_ref, default_values = ["z2", "z2bar"])]
        refs: Vec<RefState>,
    },
}

fn parse_ref(s: &str) -> std::result::Result<RefState, String> {
    serde_json::from_value(json!(s.replace('-', "_"))).map_err(|_| format!("unknown reference state {s}"))
}

#[derive(Subcommand)]
enum DynamicsCmd {
    /// Evolve a configuration under a constant Hamiltonian.
    Quench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 4.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, value_parser = parse_ref, default_value = "z2bar")]
        initial: RefState,
    },
    /// Linear detuning sweep from the all-ground state.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Sweep, stop early, then quench.
    SweepQuench {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        quench_delta: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
}

#[derive(Subcommand)]
enum TheoryCmd {
    Report {
        #[arg(long = "L")]
        length: usize,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
    },
}

fn graph_recipe(
    family: &str,
    length: Option<usize>,
    n: Option<usize>,
    q: u32,
    m: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
) -> Result<GraphRecipe> {
    let need =
        |v: Option<usize>, flag: &str| v.ok_or_else(|| ConfigError(format!("--{flag} is required for {family}")));
    Ok(match family {
        "path" => GraphRecipe::Path { n: need(n, "n")? },
        "doublet-chain" => GraphRecipe::DoubletChain { length: need(length, "L")?, geometry: None },
        "gadget-chain" => GraphRecipe::GadgetChain { length: need(length, "L")?, q, geometry: None },
        "doublet-grid" => GraphRecipe::DoubletGrid { m: need(m, "m")?, geometry: None },
        _ => GraphRecipe::SquareGrid { rows: need(rows, "rows")?, cols: need(cols, "cols")? },
    })
}

/// Turns a subcommand into a config, plus the output subdirectory it writes into.
fn to_config(command: Command) -> Result<(ExperimentConfig, Option<String>)> {
    let with_model = |m: ModelRef, op: Operation| {
        let mut cfg = ExperimentConfig::new(None, op);
        cfg.model = Some(m);
        cfg
    };
    Ok(match command {
        Command::Graph { action: GraphCmd::Build { family, length, n, q, m, rows, cols } } => {
            let graph = graph_recipe(&family, length, n, q, m, rows, cols)?;
            (ExperimentConfig::new(None, Operation::GraphBuild { graph }), None)
        }
        Command::Spectrum { action } => match action {
            SpectrumCmd::Scan { model, delta_min, delta_max, points } => (
                with_model(
                    model.model(ModelKind::KChain),
                    Operation::GapScan { grid: Grid::linspace(delta_min, delta_max, points) },
                ),
                None,
            ),
            SpectrumCmd::MinGap { model, delta_min, delta_max, rel_tol } => (
                with_model(
                    model.model(ModelKind::KChain),
                    Operation::MinGap { range: (delta_min, delta_max), rel_tol },
                ),
                None,
            ),
            SpectrumCmd::PhaseDiagram { length, k_min, k_max, k_points, delta_min, delta_max, delta_points } => (
                ExperimentConfig::new(
                    None,
                    Operation::PhaseDiagram {
                        length,
                        ks: Grid::linspace(k_min, k_max, k_points),
                        deltas: Grid::linspace(delta_min, delta_max, delta_points),
                    },
                ),
                None,
            ),
            SpectrumCmd::Overlaps { model, refs } => {
                (with_model(model.model(ModelKind::KPxp), Operation::Overlaps { refs }), None)
            }
        },
        Command::Dynamics { action } => match action {
            DynamicsCmd::Quench { model, t_max, dt, initial } => {
                (with_model(model.model(ModelKind::Quench), Operation::Quench { t_max, dt, initial }), None)
            }
            DynamicsCmd::Sweep { model, schedule } => {
                (with_model(model.model(ModelKind::KPxp), Operation::Sweep { schedule: schedule.schedule() }), None)
            }
            DynamicsCmd::SweepQuench { model, schedule, quench_delta, t_max, dt } => (
                with_model(
                    model.model(ModelKind::KChain),
                    Operation::SweepQuench { schedule: schedule.schedule(), quench_delta, t_max, dt },
                ),
                None,
            ),
        },
        Command::Theory { action: TheoryCmd::Report { length, k, omega } } => {
            (ExperimentConfig::new(None, Operation::TheoryReport { length, k, omega }), None)
        }
        Command::Reproduce { figure } => {
            (ExperimentConfig::new(None, Operation::Reproduce { figure }), Some(figure.as_str().to_string()))
        }
        Command::Run { config } => (ExperimentConfig::from_file(&config)?, None),
    })
}

fn execute(cli: Cli) -> Result<()> {
    let (cfg, subdir) = to_config(cli.command)?;
    let cfg = cfg.resolve()?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mut out = cli.out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Some(s) = subdir {
        out = out.join(s);
    }
    let cache = cli.cache_dir.or_else(|| cfg.cache_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE));
    let manifest = runner::run(&cfg, &out, &cache)?;
    if matches!(cfg.operation, Operation::TheoryReport { .. }) {
        print!("{}", std::fs::read_to_string(out.join("theory_report.json"))?);
    } else {
        println!("{}", serde_json::to_string_pretty(&manifest)?);
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<blockade_core::Error>() {
            return e.kind();
        }
        if cause.is::<ConfigError>() || cause.is::<serde_json::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn report(kind: &str, message: String) {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.render().to_string().trim_end().to_string());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(error_kind(&e), format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
