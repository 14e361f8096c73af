use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmalab::{execute, ExperimentConfig, Kind, EXIT_FAIL, EXIT_SCHEMA};

#[derive(Parser)]
#[command(name = "cmalab", version, about = "Complex Monge-Ampère regularity experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run any config; the kind is taken from the file.
    Run(Opts),
    /// Exponent tables and plan.
    Exponents(Opts),
    /// Dirichlet solve on a catalog member.
    Solve(Opts),
    /// Dyadic cascade report.
    Cascade(Opts),
    /// Third-order ledger.
    Calabi(Opts),
    /// Seminorm table.
    Norms(Opts),
    /// Acceptance criteria 1-7 (all of them when no config is given).
    Suite(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `out`, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel solves.
    #[arg(long)]
    threads: Option<usize>,
    /// Treat slope-tolerance misses as failures.
    #[arg(long)]
    strict: bool,
}

fn load(kind: Option<Kind>, o: &Opts) -> Result<ExperimentConfig, String> {
    let text = match (&o.config, kind) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()))?,
        (None, Some(Kind::Suite)) => r#"{"kind": "suite"}"#.to_string(),
        (None, _) => return Err("--config is required".into()),
    };
    let cfg = ExperimentConfig::parse(&text, o.seed).map_err(|e| e.to_string())?;
    if let Some(k) = kind {
        if cfg.job.kind() != k {
            return Err(format!("config kind {:?} does not match subcommand {k:?}", cfg.job.kind()));
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, o) = match &cli.cmd {
        Cmd::Run(o) => (None, o),
        Cmd::Exponents(o) => (Some(Kind::Exponents), o),
        Cmd::Solve(o) => (Some(Kind::Solve), o),
        Cmd::Cascade(o) => (Some(Kind::Cascade), o),
        Cmd::Calabi(o) => (Some(Kind::Calabi), o),
        Cmd::Norms(o) => (Some(Kind::Norms), o),
        Cmd::Suite(o) => (Some(Kind::Suite), o),
    };
    let cfg = match load(kind, o) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_SCHEMA as u8);
        }
    };
    if let Some(t) = o.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(EXIT_FAIL as u8);
        }
    }
    let out = o
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    ExitCode::from(execute(&cfg, &out, o.strict) as u8)
}
