mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use communityfish::{Error, ErrorKind, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::commands::Outcome;
use crate::config::{parse_uncertainty, split_override, RunConfig, SimulationSpec, RUN_KEYS, SIM_KEYS};

/// Community-based Poisson scaling of political texts.
#[derive(Debug, Parser)]
#[command(name = "communityfish", version)]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect word communities and write communities.csv, graph_stats.json.
    Communities(RunArgs),
    /// Scale documents and write positions.csv, features.csv, fit_report.json.
    Scale(ScaleArgs),
    /// Run the community and unigram models side by side.
    Compare(RunArgs),
    /// Run a simulation study and write report.json.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// jsonl, csv or text-dir.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    min_bigram_count: Option<u64>,
    /// louvain or leiden.
    #[arg(long)]
    clustering: Option<String>,
    /// Override any config key, e.g. `--set tol=1e-9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Skip standard errors and intervals.
    #[arg(long, conflicts_with_all = ["se", "bootstrap"])]
    no_bootstrap: bool,
    /// Unigram Wordfish instead of community features.
    #[arg(long)]
    baseline: bool,
    /// bootstrap, analytic or none.
    #[arg(long)]
    se: Option<String>,
    /// Bootstrap replicates.
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation spec file (`key = value`).
    spec: Option<PathBuf>,
    /// Override a spec key, e.g. `--set replications=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Communities(_) => "communities",
            Command::Scale(_) => "scale",
            Command::Compare(_) => "compare",
            Command::Simulate(_) => "simulate",
        }
    }

    fn run_args(&self) -> Option<&RunArgs> {
        match self {
            Command::Communities(a) | Command::Compare(a) => Some(a),
            Command::Scale(s) => Some(&s.run),
            Command::Simulate(_) => None,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Input => 1,
        ErrorKind::EmptyStage => 2,
        ErrorKind::Estimation => 3,
    }
}

/// Defaults, then the config file, then flags.
fn resolve(cli: &Cli) -> Result<(RunConfig, Option<SimulationSpec>)> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(args) = cli.command.run_args() {
        for raw in &args.overrides {
            let (k, v) = split_override(raw)?;
            cfg.set(&k, &v, None)?;
        }
        if let Some(p) = &args.input {
            cfg.input = Some(p.clone());
        }
        if let Some(f) = &args.format {
            cfg.format = Some(f.parse()?);
        }
        if let Some(pi) = args.min_bigram_count {
            cfg.pipeline.min_bigram_count = pi;
        }
        if let Some(c) = &args.clustering {
            cfg.pipeline.clustering = c.parse()?;
        }
    }
    if let Command::Scale(s) = &cli.command {
        if let Some(se) = &s.se {
            cfg.pipeline.uncertainty = parse_uncertainty(se)?;
        }
        if let Some(b) = s.bootstrap {
            cfg.pipeline.bootstrap_replicates = b;
        }
        if s.no_bootstrap {
            cfg.pipeline.uncertainty = None;
        }
    }
    if let Some(seed) = cli.seed {
        cfg.pipeline.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.pipeline.validate()?;

    let spec = match &cli.command {
        Command::Simulate(args) => {
            let mut spec = SimulationSpec::default();
            if let Some(path) = &args.spec {
                spec.apply_file(path)?;
            }
            for raw in &args.overrides {
                let (k, v) = split_override(raw)?;
                spec.set(&k, &v)?;
            }
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            Some(spec)
        }
        _ => None,
    };
    Ok((cfg, spec))
}

fn execute(cli: &Cli, cfg: &RunConfig, spec: Option<&SimulationSpec>, outcome: &mut Outcome) -> Result<()> {
    commands::prepare_out(&cfg.out)?;
    match &cli.command {
        Command::Communities(_) => commands::communities(cfg, outcome),
        Command::Scale(s) => commands::scale(cfg, s.baseline, outcome),
        Command::Compare(_) => commands::compare(cfg, outcome),
        Command::Simulate(_) => commands::simulate(spec.expect("simulate spec"), cfg, outcome),
    }
}

fn manifest(cli: &Cli, cfg: &RunConfig, spec: Option<&SimulationSpec>, outcome: &Outcome, error: Option<&Error>, status: u8) -> Value {
    let mut resolved = json!({ "run": cfg });
    let baseline = matches!(&cli.command, Command::Scale(s) if s.baseline);
    resolved["baseline"] = json!(baseline);
    if let Some(spec) = spec {
        resolved["simulation"] = json!(spec);
    }
    let canonical = serde_json::to_vec(&resolved).expect("config serializes");
    let hash = Sha256::digest(&canonical);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    json!({
        "tool": "communityfish",
        "version": communityfish::VERSION,
        "command": cli.command.name(),
        "config": resolved,
        "config_hash": hex,
        "seed": spec.map(|s| s.seed).unwrap_or(cfg.pipeline.seed),
        "communities": outcome.communities,
        "matrix": outcome.matrix.map(|(d, f)| json!({"documents": d, "features": f})),
        "other_matrices": outcome.extra_matrices.iter().map(|(k, (d, f))| (k.clone(), json!({"documents": d, "features": f}))).collect::<serde_json::Map<_, _>>(),
        "exit_status": status,
        "error": error.map(|e| e.to_string()),
        "outputs": outcome.outputs,
    })
}

fn key_help() -> String {
    let table = |keys: &[(&str, &str, &str)]| {
        keys.iter()
            .map(|(k, d, what)| format!("  {k:<24} {what} [default: {d}]"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!(
        "Config file keys (`key = value`, `#` comments):\n{}\n\nSimulation spec keys:\n{}",
        table(RUN_KEYS),
        table(SIM_KEYS)
    )
}

fn main() -> ExitCode {
    let parsed = Cli::command()
        .after_long_help(key_help())
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let (cfg, spec) = match resolve(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let mut outcome = Outcome::default();
    let result = execute(&cli, &cfg, spec.as_ref(), &mut outcome);
    let status = result.as_ref().err().map(exit_code).unwrap_or(0);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    if cfg.out.is_dir() {
        let m = manifest(&cli, &cfg, spec.as_ref(), &outcome, result.as_ref().err(), status);
        if let Err(e) = commands::write_manifest(&cfg.out, &m) {
            eprintln!("error: {e}");
            return ExitCode::from(if status == 0 { 1 } else { status });
        }
    }
    ExitCode::from(status)
}
