//! Experiment runner for the `cmalab-core` numerics: config ingestion, job
//! execution, artifact emission and the acceptance suite.

pub mod config;
pub mod fieldio;
pub mod jobs;
pub mod suite;

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

pub use config::{ExperimentConfig, Job, Kind, SchemaError};

/// Process exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Runs a validated config and writes its artifacts plus `summary.json`
/// (or `error.json` on failure) into `out`. Returns the exit status.
pub fn execute(cfg: &ExperimentConfig, out: &Path, strict: bool) -> i32 {
    let kind = cfg.job.kind();
    match jobs::run(cfg) {
        Ok(o) => {
            let pass = o.pass(strict);
            let failed: Vec<_> = o.checks.iter().filter(|c| !c.pass && c.counts(strict)).collect();
            let warnings: Vec<_> = o.checks.iter().filter(|c| !c.pass && !c.counts(strict)).collect();
            let summary = json!({
                "timestamp": timestamp(),
                "kind": kind,
                "seed": cfg.seed,
                "strict": strict,
                "pass": pass,
                "config": cfg.job,
                "checks": o.checks,
                "failed": failed.iter().map(|c| &c.name).collect::<Vec<_>>(),
                "warnings": warnings.iter().map(|c| &c.name).collect::<Vec<_>>(),
                "result": o.summary,
            });
            let mut files = o.artifacts;
            let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
            bytes.push(b'\n');
            files.push(("summary.json".into(), bytes));
            if let Err(e) = write_all(out, &files) {
                eprintln!("error: {e:#}");
                return EXIT_FAIL;
            }
            for c in &failed {
                eprintln!("FAIL {}: {} {} {}", c.name, c.value, c.relation, c.bound);
            }
            for c in &warnings {
                eprintln!("warn {}: {} {} {}", c.name, c.value, c.relation, c.bound);
            }
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let report = json!({
                "timestamp": timestamp(),
                "kind": kind,
                "seed": cfg.seed,
                "error": chain.first(),
                "causes": chain.get(1..).unwrap_or(&[]),
            });
            let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
            bytes.push(b'\n');
            if let Err(w) = write_all(out, &[("error.json".into(), bytes)]) {
                eprintln!("error: {w:#}");
            }
            eprintln!("error: {e:#}");
            EXIT_FAIL
        }
    }
}
