//! One runner per config kind. Runners return artifacts in memory; the caller
//! writes them only after the whole job succeeded.

use std::collections::BTreeMap;

use anyhow::Result;
use cmalab_core::calabi::{compute_s, measure_prop24, theorem61_ledger};
use cmalab_core::exponents::{beta0, delta_sequence, mu_window, phi, plan_exponents};
use cmalab_core::field::{test_solution, GridField};
use cmalab_core::norms::{holder_seminorm, PairSet, SeminormSpec};
use cmalab_core::solver::{solve, DirichletProblem, C_CMP};
use serde::Serialize;
use serde_json::json;

use crate::config::{CalabiJob, CascadeJob, ExperimentConfig, ExponentsJob, Job, NormsJob, SolveJob, SuiteJob};
use crate::fieldio;
use crate::suite::{run_cascade_parallel, run_criterion, Check, CriterionResult, Severity};

/// Files produced by a run, in emission order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
    /// Kind-specific summary content.
    pub summary: serde_json::Value,
}

impl Outcome {
    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.artifacts.push((name.into(), bytes));
        Ok(())
    }

    pub fn pass(&self, strict: bool) -> bool {
        self.checks.iter().all(|c| c.pass || !c.counts(strict))
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match &cfg.job {
        Job::Exponents(j) => exponents(j),
        Job::Solve(j) => solve_job(j),
        Job::Cascade(j) => cascade(j),
        Job::Calabi(j) => calabi(j),
        Job::Norms(j) => norms(j, cfg.seed),
        Job::Suite(j) => suite(j, cfg.seed),
    }
}

fn exponents(j: &ExponentsJob) -> Result<Outcome> {
    let mut out = Outcome::default();
    let b0 = beta0(j.n, j.alpha)?;
    let table: Vec<[f64; 2]> = (1..=j.phi_points)
        .map(|i| {
            let d = b0 + (1.0 - b0) * i as f64 / j.phi_points as f64;
            Ok([d, phi(j.n, j.alpha, d)?])
        })
        .collect::<Result<_>>()?;
    let seq = delta_sequence(j.n, j.alpha, 1e-13, j.max_iter)?;
    let (window, params) = match (j.beta, j.delta) {
        (Some(beta), Some(delta)) => {
            let p = plan_exponents(j.n, j.alpha, beta, delta)?;
            (Some(mu_window(j.n, j.alpha, beta, delta, p.gamma)?), Some(p))
        }
        _ => (None, None),
    };
    out.checks.push(Check::le("|phi(beta0) - beta0|", (phi(j.n, j.alpha, b0)? - b0).abs(), 1e-12, Severity::Hard));
    out.checks.push(Check::ge("delta sequence converged", seq.converged as u8 as f64, 1.0, Severity::Hard));
    let record = json!({
        "beta0": b0,
        "phi_table": table,
        "delta_sequence": seq,
        "window": window,
        "chosen_params": params,
    });
    out.json("exponents.json", &record)?;
    out.summary = json!({ "beta0": b0 });
    Ok(out)
}

fn solve_job(j: &SolveJob) -> Result<Outcome> {
    let mut out = Outcome::default();
    let s = j.domain.catalog()?;
    let ball = j.domain.ball()?;
    let g = |x: &[f64]| j.rhs_scale * s.f(x);
    let bd = |x: &[f64]| s.u(x);
    let rep = solve(&DirichletProblem::new(ball, j.domain.points_per_radius, &g, &bd), &j.newton)?;
    let u = &rep.solution;
    let dim = u.dim();
    let h = u.h();
    let err = u
        .interior()
        .map(|i| (u.values[i] - s.u(&u.point(i)[..dim])).abs())
        .fold(0.0, f64::max);
    out.checks.push(Check::ge("converged", rep.converged as u8 as f64, 1.0, Severity::Hard));
    out.checks.push(Check::gt("min eigenvalue", rep.min_eig, 0.0, Severity::Hard));
    if j.rhs_scale == 1.0 {
        // Only the unscaled problem has the catalog member as its solution.
        out.checks.push(Check::le("max error / h^2", err / (h * h), C_CMP, Severity::Slope));
    }
    let report = json!({
        "summary": rep.summary(),
        "max_error_vs_catalog": err,
        "error_over_h2": err / (h * h),
    });
    out.json("solve.json", &report)?;
    let mut bytes = Vec::new();
    fieldio::write_field(&mut bytes, u)?;
    out.artifacts.push(("solution.field".into(), bytes));
    if j.csv {
        let mut c = Vec::new();
        fieldio::write_field_csv(&mut c, u)?;
        out.artifacts.push(("solution.csv".into(), c));
    }
    out.summary = json!({ "iterations": rep.iterations, "max_error": err });
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn cascade(j: &CascadeJob) -> Result<Outcome> {
    let mut out = Outcome::default();
    let src = test_solution(&j.solution, j.cascade.n())?;
    let rep = run_cascade_parallel(&src, &j.cascade)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "level", "t", "radius", "h", "eps", "iterations", "residual", "min_eig", "sup_diff", "sandwich_ratio",
        "hessian_sup", "grad_error", "v_sup", "v_lip", "v_holder",
    ])?;
    for l in &rep.levels {
        w.write_record([
            l.level.to_string(),
            l.t.to_string(),
            l.radius.to_string(),
            l.h.to_string(),
            l.eps.to_string(),
            l.iterations.to_string(),
            l.residual.to_string(),
            l.min_eig.to_string(),
            l.sup_diff.to_string(),
            l.sandwich_ratio.to_string(),
            l.hessian_sup.to_string(),
            l.grad_error.to_string(),
            opt(l.v_sup),
            opt(l.v_lip),
            opt(l.v_holder),
        ])?;
    }
    let p = &j.cascade.params;
    out.checks.push(Check::le("level failures", rep.failures.len() as f64, 0.0, Severity::Hard));
    if let Some(t) = rep.telescope_residual {
        out.checks.push(Check::le("telescoping residual", t, 1e-12, Severity::Hard));
    }
    if let Some(f) = &rep.fits.v_sup {
        let want = (p.mu * (1.0 + j.cascade.beta_eff)).min(2.0 + p.alpha) - 0.1;
        out.checks.push(Check::ge("|v_k|_0 slope", f.slope, want, Severity::Slope));
    }
    if let Some(f) = &rep.fits.v_lip {
        out.checks.push(Check::ge("[v_k]_1 slope", f.slope, p.delta - 0.1, Severity::Slope));
    }
    out.json("cascade.json", &rep)?;
    out.artifacts.push(("levels.csv".into(), w.into_inner()?));
    out.summary = json!({
        "levels": rep.levels.len(),
        "rejected": rep.rejected,
        "failures": rep.failures,
    });
    Ok(out)
}

fn calabi(j: &CalabiJob) -> Result<Outcome> {
    let mut out = Outcome::default();
    let s = j.domain.catalog()?;
    let ball = j.domain.ball()?;
    let g = GridField::sample_ball(ball, j.domain.h(), 2, |x| s.u(x))?;
    let f = |x: &[f64]| s.f(x);
    let ledger = theorem61_ledger(&g, &f, &ball, j.c_n)?;
    let sf = compute_s(&g)?;
    let s_min = sf.defined().map(|i| sf.values[i]).fold(f64::INFINITY, f64::min);
    let s_max = sf.defined().map(|i| sf.values[i]).fold(f64::NEG_INFINITY, f64::max);
    let prop = measure_prop24(&g, &f, &ball, j.c_n)?;
    out.checks.push(Check::ge("min S", s_min, -1e-12, Severity::Hard));
    out.checks.push(Check::le("Sum|u_ijk|^2 - Lambda^3 S (max)", ledger.lambda3_gap, 1e-9, Severity::Hard));
    let record = json!({
        "ledger": ledger,
        "s_min": s_min,
        "s_max": s_max,
        "prop24": prop,
    });
    out.json("calabi.json", &record)?;
    out.summary = json!({ "ratio": ledger.ratio, "prop24_ratio": prop.ratio });
    Ok(out)
}

fn norms(j: &NormsJob, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let pairs = PairSet {
        dyadic: true,
        random_pairs: j.random_pairs,
        seed,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["field", "spec", "value"])?;
    let mut rows = 0usize;
    for fs in &j.fields {
        let s = fs.catalog()?;
        let ball = fs.ball()?;
        let g = GridField::sample_ball(ball, fs.h(), 1, |x| s.u(x))?;
        let fname = format!("{}:n{}:r{}:m{}", s.name(), fs.n, fs.radius, fs.points_per_radius);
        for sp in &j.specs {
            let mut spec = SeminormSpec::new(sp.k, sp.alpha).with_pairs(pairs);
            if sp.weighted {
                spec = spec.weighted().on(ball);
            }
            if sp.complex {
                spec = spec.complex();
            }
            let v = holder_seminorm(&g, &spec)?;
            let sname = format!(
                "k={} alpha={}{}{}",
                sp.k,
                sp.alpha,
                if sp.weighted { " weighted" } else { "" },
                if sp.complex { " complex" } else { "" }
            );
            w.write_record([fname.clone(), sname, v.to_string()])?;
            rows += 1;
        }
    }
    out.artifacts.push(("norms.csv".into(), w.into_inner()?));
    out.summary = json!({ "rows": rows });
    Ok(out)
}

fn suite(j: &SuiteJob, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut results: Vec<CriterionResult> = Vec::new();
    let mut ids = j.criteria.clone();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let t0 = std::time::Instant::now();
        let r = run_criterion(id, seed)?;
        eprintln!("criterion {id} ({}) took {:.1}s", r.title, t0.elapsed().as_secs_f64());
        out.checks.extend(r.checks.iter().map(|c| Check {
            name: format!("[{id}] {}", c.name),
            ..c.clone()
        }));
        results.push(r);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["criterion", "check", "value", "relation", "bound", "severity", "pass"])?;
    for r in &results {
        for c in &r.checks {
            w.write_record([
                r.id.to_string(),
                c.name.clone(),
                c.value.to_string(),
                c.relation.to_string(),
                c.bound.to_string(),
                format!("{:?}", c.severity).to_lowercase(),
                c.pass.to_string(),
            ])?;
        }
    }
    out.artifacts.push(("criteria.csv".into(), w.into_inner()?));
    let metrics: BTreeMap<String, &BTreeMap<String, f64>> =
        results.iter().map(|r| (format!("criterion_{}", r.id), &r.metrics)).collect();
    out.json("metrics.json", &metrics)?;
    out.summary = json!({
        "criteria": results.iter().map(|r| json!({
            "id": r.id,
            "title": r.title,
            "pass_strict": r.pass(true),
            "pass": r.pass(false),
        })).collect::<Vec<_>>(),
    });
    Ok(out)
}
