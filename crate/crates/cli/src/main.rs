//! `stealthpath`: solve the rate programs, run jamming experiments and query
//! the exact oracles from JSON configs.
//!
//! Exit status is 0 on success, 1 when the input is invalid and 2 when a run
//! fails.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stealthpath::adversary::{list_detectors, list_strategies};
use stealthpath::exec::with_threads;
use stealthpath::harness::{
    oracle_scan, run_experiment, stealth_scan, write_csv, write_json, write_records, ExperimentConfig, Format, HarnessError,
    CONFIG_SCHEMA,
};
use stealthpath::ratesolver::{solve_a, solve_b, NetworkModel, SolverConfig};
use stealthpath::Exec;

#[derive(Parser)]
#[command(name = "stealthpath", version, about = "Stealthy multipath communication under jamming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve program (A) or (B) for a network model.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, ignore_case = true)]
        problem: Problem,
    },
    /// Run a Monte Carlo experiment.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// List the jamming strategies, or run an overwrite experiment.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        list: bool,
    },
    /// Exact error probabilities of every sweep point, strategy and jam set.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Exact stealth gaps and optimal detectors of every sweep point.
    StealthScan {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// Overrides the master seed (or the solver seed for `solve`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Problem {
    A,
    B,
}

/// Input of `solve`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    #[serde(rename = "schema")]
    _schema: u32,
    model: NetworkModel,
    #[serde(default)]
    solver: SolverConfig,
    /// Size of the auxiliary alphabet for (A); the cardinality bound by default.
    #[serde(default)]
    u_size: Option<usize>,
}

#[derive(Serialize)]
struct SolveOutput<T> {
    schema: u32,
    problem: Problem,
    result: T,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Validation(m) => Failure::Invalid(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    let common = match &cmd {
        Command::Solve { common, .. }
        | Command::Simulate { common }
        | Command::Attack { common, .. }
        | Command::Oracle { common }
        | Command::StealthScan { common } => common,
    };
    let (exec, threads) = match common.threads {
        Some(0) => return Err(Failure::Invalid("--threads must be positive".into())),
        Some(1) => (Exec::Sequential, 1),
        Some(k) => (Exec::Parallel, k),
        None => (Exec::Parallel, 0),
    };
    let work = move || dispatch(cmd, exec);
    if threads > 1 {
        with_threads(threads, work).map_err(Failure::Runtime)?
    } else {
        work()
    }
}

fn dispatch(cmd: Command, exec: Exec) -> Result<(), Failure> {
    match cmd {
        Command::Solve { common, problem } => solve(&common, problem, exec),
        Command::Attack { common, list: true } => {
            if common.config.is_some() {
                return Err(Failure::Invalid("--list takes no --config".into()));
            }
            let text = match common.format.unwrap_or(OutFormat::Csv) {
                OutFormat::Json => {
                    let v = serde_json::json!({ "strategies": list_strategies(), "detectors": list_detectors() });
                    serde_json::to_string_pretty(&v).expect("plain data") + "\n"
                }
                OutFormat::Csv => strategy_table(),
            };
            emit(common.out.as_deref(), text.as_bytes())
        }
        Command::Attack { common, list: false } => {
            let cfg = experiment_config(&common)?;
            if !cfg.scheme.is_overwrite() {
                return Err(Failure::Invalid(format!("attack needs an overwrite scheme, not {}", cfg.scheme.name())));
            }
            simulate(&common, &cfg, exec)
        }
        Command::Simulate { common } => {
            let cfg = experiment_config(&common)?;
            simulate(&common, &cfg, exec)
        }
        Command::Oracle { common } => {
            let cfg = experiment_config(&common)?;
            let rows = oracle_scan(&cfg, exec)?;
            records(&common, &rows)
        }
        Command::StealthScan { common } => {
            let cfg = experiment_config(&common)?;
            let rows = stealth_scan(&cfg, exec)?;
            records(&common, &rows)
        }
    }
}

fn strategy_table() -> String {
    let mut s = String::new();
    for info in list_strategies() {
        s += &format!("{:<20} {}\n", info.id, info.description);
        for p in info.params {
            s += &format!("{:<20}   {} ({}, default {})\n", "", p.name, p.kind, p.default);
        }
    }
    s += &format!("\ndetectors: optimal-oracle, none, {}\n", list_detectors().join(", "));
    s
}

fn read_config(common: &Common) -> Result<String, Failure> {
    let path = common.config.as_ref().ok_or_else(|| Failure::Invalid("--config is required".into()))?;
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_json(&read_config(common)?)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn check_schema(value: &serde_json::Value) -> Result<(), Failure> {
    match value.get("schema").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(CONFIG_SCHEMA) => Ok(()),
        Some(v) => Err(Failure::Invalid(format!("schema {v} is not supported (expected {CONFIG_SCHEMA})"))),
        None => Err(Failure::Invalid("config needs a top-level \"schema\": 1".into())),
    }
}

fn solve(common: &Common, problem: Problem, exec: Exec) -> Result<(), Failure> {
    if matches!(common.format, Some(OutFormat::Csv)) {
        return Err(Failure::Invalid("solve writes JSON only".into()));
    }
    let value: serde_json::Value = serde_json::from_str(&read_config(common)?).map_err(|e| Failure::Invalid(e.to_string()))?;
    check_schema(&value)?;
    let cfg: SolveConfig = serde_json::from_value(value).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut solver = SolverConfig { exec, ..cfg.solver };
    if let Some(seed) = common.seed {
        solver.seed = seed;
    }
    solver.validate().map_err(|e| Failure::Invalid(e.to_string()))?;
    let invalid = |e: stealthpath::ratesolver::RateError| Failure::Invalid(e.to_string());
    let text = match problem {
        Problem::A => {
            let result = solve_a(&cfg.model, cfg.u_size, &solver).map_err(invalid)?;
            serde_json::to_string_pretty(&SolveOutput { schema: CONFIG_SCHEMA, problem, result })
        }
        Problem::B => {
            if cfg.u_size.is_some() {
                return Err(Failure::Invalid("u_size applies to problem A only".into()));
            }
            let result = solve_b(&cfg.model, &solver).map_err(invalid)?;
            serde_json::to_string_pretty(&SolveOutput { schema: CONFIG_SCHEMA, problem, result })
        }
    };
    let text = text.map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    emit(common.out.as_deref(), text.as_bytes())
}

fn simulate(common: &Common, cfg: &ExperimentConfig, exec: Exec) -> Result<(), Failure> {
    let out = run_experiment(cfg, exec)?;
    let mut buf = Vec::new();
    match format(common) {
        Format::Csv => write_csv(&out.rows, &mut buf).map_err(|e| Failure::Runtime(e.to_string()))?,
        Format::Json => write_json(&out.rows, &mut buf).map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    emit(common.out.as_deref(), &buf)
}

fn records<T: Serialize>(common: &Common, rows: &[T]) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_records(rows, format(common), &mut buf).map_err(Failure::Runtime)?;
    emit(common.out.as_deref(), &buf)
}

fn format(common: &Common) -> Format {
    match common.format {
        Some(OutFormat::Json) => Format::Json,
        Some(OutFormat::Csv) => Format::Csv,
        None => match common.out.as_ref().and_then(|p| p.extension()) {
            Some(ext) if ext == "json" => Format::Json,
            _ => Format::Csv,
        },
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => io::stdout().write_all(bytes).map_err(|e| Failure::Runtime(e.to_string())),
    }
}
