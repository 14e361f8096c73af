//! Executable acceptance criteria 1–7. Criterion 8 (repeat-run determinism)
//! compares two CLI runs and lives in the acceptance test and `cmalab suite`.

use std::collections::BTreeMap;

use anyhow::{ensure, Result};
use cmalab_core::calabi::{compute_s, gradient_samples, identity_samples, theorem61_ledger};
use cmalab_core::cascade::{
    assemble_cascade, barrier_check, build_auxiliary, gradient_telescope, verify_sandwich, CascadeConfig,
    CascadeReport, Source,
};
use cmalab_core::exponents::{
    beta0, decay_margins, delta_sequence, feasibility_threshold, EPS_MARGIN, mu_window, phi, plan_exponents, ExponentParams,
};
use cmalab_core::field::{test_solution, BallDomain, GridField, TestSolution};
use cmalab_core::mollify::Kernel;
use cmalab_core::norms::fit_loglog;
use cmalab_core::solver::{comparison_check, solve, solve_poisson, DirichletProblem, NewtonOptions, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Always decides pass/fail.
    Hard,
    /// Rate/slope tolerance; decides pass/fail only in strict mode.
    Slope,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub bound: f64,
    pub severity: Severity,
    pub pass: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, bound: f64, severity: Severity) -> Self {
        Check {
            name: name.into(),
            value,
            relation: "<=",
            bound,
            severity,
            pass: value <= bound,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, bound: f64, severity: Severity) -> Self {
        Check {
            name: name.into(),
            value,
            relation: ">=",
            bound,
            severity,
            pass: value >= bound,
        }
    }

    pub fn lt(name: impl Into<String>, value: f64, bound: f64, severity: Severity) -> Self {
        Check {
            name: name.into(),
            value,
            relation: "<",
            bound,
            severity,
            pass: value < bound,
        }
    }

    pub fn gt(name: impl Into<String>, value: f64, bound: f64, severity: Severity) -> Self {
        Check {
            name: name.into(),
            value,
            relation: ">",
            bound,
            severity,
            pass: value > bound,
        }
    }

    pub fn counts(&self, strict: bool) -> bool {
        self.severity == Severity::Hard || strict
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    /// Wall-clock budget in seconds; measured by the caller, not recorded here.
    pub budget_s: f64,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionResult {
    fn new(id: u8, title: &str, budget_s: f64) -> Self {
        CriterionResult {
            id,
            title: title.into(),
            budget_s,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn metric(&mut self, k: impl Into<String>, v: f64) {
        self.metrics.insert(k.into(), v);
    }

    pub fn pass(&self, strict: bool) -> bool {
        self.checks.iter().all(|c| c.pass || !c.counts(strict))
    }

    pub fn failed(&self, strict: bool) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass && c.counts(strict)).collect()
    }

    pub fn warnings(&self, strict: bool) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass && !c.counts(strict)).collect()
    }
}

pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionResult> {
    match id {
        1 => exponent_suite(seed),
        2 => solver_convergence(),
        3 => comparison_battery(),
        4 => cascade_decay(),
        5 => gradient_telescope_check(),
        6 => mollifier_tradeoff(),
        7 => calabi_checks(),
        _ => anyhow::bail!("no criterion {id}"),
    }
}

/// Acceptance cascades: μ = 1.25 inside the planned window, x₀ = (0.3, 0.2), d = t = 1/2.
pub fn acceptance_params(n: u32) -> Result<ExponentParams> {
    let mut p = plan_exponents(n, 1.0, 0.95, 0.9)?;
    p.mu = 1.25;
    let (e1, e2) = decay_margins(n, p.alpha, p.beta, p.delta, p.gamma, p.mu);
    ensure!(e1 > 0.0 && e2 > 0.0, "mu = {} leaves the decay system", p.mu);
    p.eps = EPS_MARGIN * e1.min(e2);
    Ok(p)
}

pub fn exp_cascade_n1() -> Result<CascadeConfig> {
    Ok(CascadeConfig::new(&[0.3, 0.2], 0.5, 0.5, 6, acceptance_params(1)?))
}

pub fn exp_cascade_n2() -> Result<CascadeConfig> {
    let mut c = CascadeConfig::new(&[0.3, 0.2, 0.1, 0.0], 0.5, 0.5, 4, acceptance_params(2)?);
    c.points_per_radius = 16;
    Ok(c)
}

/// Solves the resolvable levels in parallel, then assembles the report.
pub fn run_cascade_parallel(source: &dyn Source, cfg: &CascadeConfig) -> Result<CascadeReport> {
    cfg.validate()?;
    let (count, _) = cfg.resolvable();
    let solves: Vec<_> = (0..count)
        .into_par_iter()
        .map(|k| build_auxiliary(source, cfg, k))
        .collect();
    // Keep only the prefix up to the first failure, as the sequential runner does.
    let mut kept = Vec::with_capacity(solves.len());
    for s in solves {
        let bad = s.is_err();
        kept.push(s);
        if bad {
            break;
        }
    }
    Ok(assemble_cascade(source, cfg, kept)?)
}

fn exponent_suite(seed: u64) -> Result<CriterionResult> {
    let mut r = CriterionResult::new(1, "exponent suite", 5.0);
    r.checks.push(Check::le("|beta0(2,1) - 0.8|", (beta0(2, 1.0)? - 0.8).abs(), 1e-12, Severity::Hard));
    r.checks.push(Check::le("|beta0(1,1) - 0.5|", (beta0(1, 1.0)? - 0.5).abs(), 1e-12, Severity::Hard));
    let mut fixed = 0.0f64;
    let mut worst_iter = 0usize;
    let mut all_reached = true;
    for n in 1..=3u32 {
        for alpha in [0.25, 0.5, 0.75, 1.0] {
            let b = beta0(n, alpha)?;
            fixed = fixed.max((phi(n, alpha, b)? - b).abs());
            let seq = delta_sequence(n, alpha, 1e-13, 200)?;
            match seq.values.iter().position(|d| (d - b).abs() < 1e-6) {
                Some(i) => worst_iter = worst_iter.max(i),
                None => all_reached = false,
            }
        }
    }
    r.checks.push(Check::le("max |phi(beta0) - beta0| on grid", fixed, 1e-12, Severity::Hard));
    r.checks.push(Check::le(
        "worst iterations to |delta - beta0| < 1e-6",
        if all_reached { worst_iter as f64 } else { f64::INFINITY },
        200.0,
        Severity::Hard,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut skipped = 0usize;
    let draws = 10_000;
    for _ in 0..draws {
        let n = rng.gen_range(1..=3u32);
        let alpha = rng.gen_range(0.05..=1.0);
        let beta = rng.gen_range(0.05..0.999);
        let delta = rng.gen_range(0.05..=1.0);
        let gamma = rng.gen_range(0.05..=1.0);
        let th = feasibility_threshold(n, alpha, delta, gamma)?;
        if (beta - th).abs() <= 1e-9 {
            skipped += 1;
            continue;
        }
        if mu_window(n, alpha, beta, delta, gamma)?.feasible != (beta > th) {
            mismatches += 1;
        }
    }
    r.metric("duality_draws", draws as f64);
    r.metric("duality_skipped_near_threshold", skipped as f64);
    r.checks.push(Check::le("window/threshold mismatches", mismatches as f64, 0.0, Severity::Hard));
    Ok(r)
}

fn max_error(rep: &SolveReport, s: &TestSolution) -> f64 {
    let u = &rep.solution;
    let dim = u.dim();
    u.interior()
        .map(|i| (u.values[i] - s.u(&u.point(i)[..dim])).abs())
        .fold(0.0, f64::max)
}

fn solver_convergence() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(2, "solver convergence", 180.0);
    for (n, ms) in [(1usize, vec![8usize, 16, 32, 64]), (2, vec![4, 8, 16])] {
        let s = test_solution("EXP", n)?;
        let ball = BallDomain::new(n, &[0.0; 4][..2 * n], 0.5)?;
        let f = |x: &[f64]| s.f(x);
        let bd = |x: &[f64]| s.u(x);
        let mut errs = Vec::new();
        for &m in &ms {
            let p = DirichletProblem::new(ball, m, &f, &bd);
            let rep = if n == 1 {
                solve_poisson(&p)?
            } else {
                solve(&p, &NewtonOptions::default())?
            };
            ensure!(rep.converged, "n = {n}, m = {m} did not converge");
            let e = max_error(&rep, &s);
            r.metric(format!("n{n}_m{m}_max_error"), e);
            errs.push(e);
        }
        for (w, m) in errs.windows(2).zip(&ms) {
            r.checks.push(Check::ge(
                format!("n={n} error ratio m={m}->{}", 2 * m),
                w[0] / w[1],
                3.5,
                Severity::Slope,
            ));
        }
    }
    Ok(r)
}

type Rhs = Box<dyn Fn(&[f64]) -> f64 + Sync>;

struct Pair {
    name: &'static str,
    ua: GridField,
    ub: GridField,
    ga: Rhs,
    gb: Rhs,
}

fn solve_field(
    ball: BallDomain,
    m: usize,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    bd: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<GridField> {
    Ok(solve(&DirichletProblem::new(ball, m, g, bd), &NewtonOptions::default())?.solution)
}

fn ordered_pair(
    name: &'static str,
    ball: BallDomain,
    m: usize,
    ga: Rhs,
    gb: Rhs,
    ba: &(dyn Fn(&[f64]) -> f64 + Sync),
    bb: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Pair> {
    let ua = solve_field(ball, m, &*ga, ba)?;
    let ub = solve_field(ball, m, &*gb, bb)?;
    Ok(Pair { name, ua, ub, ga, gb })
}

fn comparison_battery() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(3, "comparison principle", 60.0);
    let e1 = test_solution("EXP", 1)?;
    let e2 = test_solution("EXP", 2)?;
    let b1 = BallDomain::new(1, &[0.0, 0.0], 0.5)?;
    let b2 = BallDomain::new(2, &[0.0; 4], 0.5)?;
    let u1 = move |x: &[f64]| e1.u(x);
    let u2 = move |x: &[f64]| e2.u(x);
    let abs2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let p3 = test_solution("PLURI3:0.5", 2)?;
    let up3 = move |x: &[f64]| p3.u(x);
    let mut pairs = vec![
        ordered_pair("EXP n=1 identical", b1, 16, Box::new(move |x| e1.f(x)), Box::new(move |x| e1.f(x)), &u1, &u1)?,
        ordered_pair("EXP n=1 rhs x1.3", b1, 16, Box::new(move |x| 1.3 * e1.f(x)), Box::new(move |x| e1.f(x)), &u1, &u1)?,
        ordered_pair(
            "EXP n=1 boundary shifted by -0.1",
            b1,
            16,
            Box::new(move |x| e1.f(x)),
            Box::new(move |x| e1.f(x)),
            &move |x: &[f64]| e1.u(x) - 0.1,
            &u1,
        )?,
        ordered_pair("QUAD n=1 rhs 2 vs 1", b1, 16, Box::new(|_| 2.0), Box::new(|_| 1.0), &abs2, &abs2)?,
        ordered_pair("EXP n=2 rhs x1.3", b2, 6, Box::new(move |x| 1.3 * e2.f(x)), Box::new(move |x| e2.f(x)), &u2, &u2)?,
        ordered_pair("PLURI3 n=2 rhs 1.5 vs 1", b2, 6, Box::new(|_| 1.5), Box::new(|_| 1.0), &up3, &up3)?,
    ];
    let mut worst: f64 = 0.0;
    for p in &pairs {
        let c = comparison_check(&p.ua, &p.ub, &*p.ga, &*p.gb)?;
        worst = worst.max(c.violation / c.tolerance);
        r.checks.push(Check::le(format!("{}: violation / C_cmp h^2", p.name), c.violation / c.tolerance, 1.0, Severity::Hard));
        r.checks.push(Check::ge(format!("{}: hypotheses hold", p.name), c.hypotheses_hold as u8 as f64, 1.0, Severity::Hard));
    }
    // Barrier pairs of the auxiliary construction, with one constant for all levels.
    let cfg = exp_cascade_n1()?;
    let src = test_solution("EXP", 1)?;
    let phis: Vec<GridField> = (0..4)
        .into_par_iter()
        .map(|k| build_auxiliary(&src, &cfg, k).map(|s| s.solution))
        .collect::<std::result::Result<_, _>>()?;
    let mut c_all: f64 = 0.0;
    for (k, phi) in phis.iter().enumerate() {
        c_all = c_all.max(verify_sandwich(&src, &cfg, k, phi)?.c_hat);
    }
    r.metric("barrier_constant", c_all);
    for (k, phi) in phis.iter().enumerate() {
        let [lo, up] = barrier_check(&src, &cfg, k, phi, c_all)?;
        for (side, c) in [("lower", lo), ("upper", up)] {
            worst = worst.max(c.violation / c.tolerance);
            r.checks.push(Check::le(
                format!("barrier {side} level {k}: violation / C_cmp h^2"),
                c.violation / c.tolerance,
                1.0,
                Severity::Hard,
            ));
        }
    }
    r.metric("worst_violation_over_tolerance", worst);
    // Negative test: the ordering swapped.
    let p = pairs.swap_remove(1);
    let neg = comparison_check(&p.ub, &p.ua, &*p.gb, &*p.ga)?;
    r.checks.push(Check::gt("negative pair: violation / C_cmp h^2", neg.violation / neg.tolerance, 1.0, Severity::Hard));
    Ok(r)
}

fn decay_checks(r: &mut CriterionResult, tag: &str, rep: &CascadeReport) {
    let p = &rep.config.params;
    r.checks.push(Check::ge(format!("{tag}: completed levels"), rep.levels.len() as f64, 5.0, Severity::Hard));
    r.checks.push(Check::le(
        format!("{tag}: failures + rejections"),
        (rep.failures.len() + rep.rejected.len()) as f64,
        0.0,
        Severity::Hard,
    ));
    let want_sup = (2.0 * p.mu).min(2.0 + p.alpha) - 0.1;
    let sup = rep.fits.v_sup.as_ref().map_or(f64::NAN, |f| f.slope);
    let lip = rep.fits.v_lip.as_ref().map_or(f64::NAN, |f| f.slope);
    r.checks.push(Check::ge(format!("{tag}: |v_k|_0 slope"), sup, want_sup, Severity::Slope));
    r.checks.push(Check::ge(format!("{tag}: [v_k]_1 slope"), lip, p.delta - 0.1, Severity::Slope));
    r.checks.push(Check::le(
        format!("{tag}: telescoping residual"),
        rep.telescope_residual.unwrap_or(f64::INFINITY),
        1e-12,
        Severity::Hard,
    ));
}

fn cascade_decay() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(4, "cascade decay (smooth)", 25.0 * 60.0);
    let e1 = test_solution("EXP", 1)?;
    let rep = run_cascade_parallel(&e1, &exp_cascade_n1()?)?;
    decay_checks(&mut r, "EXP n=1", &rep);
    let e2 = test_solution("EXP", 2)?;
    let rep = run_cascade_parallel(&e2, &exp_cascade_n2()?)?;
    decay_checks(&mut r, "EXP n=2", &rep);
    Ok(r)
}

fn gradient_telescope_check() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(5, "gradient telescope", 120.0);
    let cfg = exp_cascade_n1()?;
    let e = test_solution("EXP", 1)?;
    let rep = run_cascade_parallel(&e, &cfg)?;
    let tel = gradient_telescope(&rep, &e)?;
    let slope = tel.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    r.checks.push(Check::ge("EXP: gradient error slope", slope, cfg.params.delta - 0.1, Severity::Slope));
    let q = test_solution("QUAD", 1)?;
    let rep = run_cascade_parallel(&q, &cfg)?;
    let worst = rep.levels.iter().map(|l| l.grad_error).fold(0.0, f64::max);
    r.metric("quad_levels", rep.levels.len() as f64);
    r.checks.push(Check::le("QUAD: max gradient error over levels", worst, 1e-12, Severity::Hard));
    Ok(r)
}

/// Frobenius norm of the real Hessian of ρ_ε∗u at x by central differences with step s.
fn mollified_hessian(k: &Kernel, u: &dyn Fn(&[f64]) -> f64, x: &[f64], s: f64) -> f64 {
    let dim = x.len();
    let at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(a, v) in d {
            y[a] += v;
        }
        k.convolve_at(u, &y)
    };
    let c = at(&[]);
    let mut sum = 0.0;
    for a in 0..dim {
        let d = (at(&[(a, s)]) - 2.0 * c + at(&[(a, -s)])) / (s * s);
        sum += d * d;
        for b in a + 1..dim {
            let m = (at(&[(a, s), (b, s)]) - at(&[(a, s), (b, -s)]) - at(&[(a, -s), (b, s)])
                + at(&[(a, -s), (b, -s)]))
                / (4.0 * s * s);
            sum += 2.0 * m * m;
        }
    }
    sum.sqrt()
}

fn mollifier_tradeoff() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(6, "mollifier trade-off on POGO", 120.0);
    let p = test_solution("POGO", 2)?;
    let beta = p.beta_eff();
    let h = 0.01;
    // Measurement ball around (0.4, 0, 0.1, 0); it reaches across {z1 = 0}, where the sup sits.
    let region = BallDomain::new(2, &[0.4, 0.0, 0.1, 0.0], 0.5)?;
    let mut probes = Vec::new();
    for i in -2..=2 {
        for j in -2..=2 {
            let x = [0.4 - 40.0 * h + i as f64 * h, j as f64 * h, 0.1, 0.0];
            ensure!(region.contains(&x), "probe outside the measurement ball");
            probes.push(x);
        }
    }
    let u = |x: &[f64]| p.u(x);
    let cells = [12.0, 10.0, 8.0, 6.0, 5.0, 4.0];
    let rows: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .map(|&c| -> Result<(f64, f64, f64)> {
            let eps = c * h;
            let k = Kernel::on_lattice(2, eps, h)?;
            let mut hs: f64 = 0.0;
            let mut diff: f64 = 0.0;
            for x in &probes {
                hs = hs.max(mollified_hessian(&k, &u, x, h));
                diff = diff.max((k.convolve_at(&u, x) - u(x)).abs());
            }
            Ok((eps, hs, diff))
        })
        .collect::<Result<_>>()?;
    for (eps, hs, d) in &rows {
        r.metric(format!("eps_{eps:.2}_hessian_sup"), *hs);
        r.metric(format!("eps_{eps:.2}_sup_diff"), *d);
    }
    let hfit = fit_loglog(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>(), false)?;
    let dfit = fit_loglog(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>(), false)?;
    r.checks.push(Check::le(
        "|hessian growth slope - (beta_eff - 1)|",
        (hfit.slope - (beta - 1.0)).abs(),
        0.15,
        Severity::Slope,
    ));
    r.checks.push(Check::le(
        "|sup diff slope - (1 + beta_eff)|",
        (dfit.slope - (1.0 + beta)).abs(),
        0.15,
        Severity::Slope,
    ));
    r.metric("hessian_slope", hfit.slope);
    r.metric("sup_diff_slope", dfit.slope);
    Ok(r)
}

fn calabi_checks() -> Result<CriterionResult> {
    let mut r = CriterionResult::new(7, "Calabi module", 120.0);
    let battery: [(&str, usize, [f64; 4]); 7] = [
        ("QUAD", 1, [0.1, 0.2, 0.0, 0.0]),
        ("QUAD", 2, [0.1, 0.2, -0.1, 0.0]),
        ("EXP", 1, [0.3, -0.2, 0.0, 0.0]),
        ("EXP", 2, [0.3, -0.2, 0.1, 0.25]),
        ("PLURI3:0.1", 2, [0.05, 0.0, 0.1, 0.0]),
        ("PLURI3:0.05", 2, [0.0, 0.05, 0.0, 0.1]),
        ("POGO", 2, [0.4, 0.0, 0.1, 0.0]),
    ];
    let mut s_min = f64::INFINITY;
    for (name, n, c) in battery {
        let s = test_solution(name, n)?;
        let g = GridField::sample_cube(n, &c[..2 * n], 4, 0.02, 2, |x| s.u(x))?;
        let sf = compute_s(&g)?;
        s_min = s_min.min(sf.defined().map(|i| sf.values[i]).fold(f64::INFINITY, f64::min));
    }
    r.checks.push(Check::ge("min S over the battery", s_min, -1e-12, Severity::Hard));
    for t in [0.1, 0.05] {
        let s = test_solution(&format!("PLURI3:{t}"), 2)?;
        let g = GridField::sample_cube(2, &[0.0; 4], 2, 0.02, 2, |x| s.u(x))?;
        let sf = compute_s(&g)?;
        let c = g.lattice.nearest(&[0.0; 4]).expect("center on lattice");
        r.checks.push(Check::le(
            format!("PLURI3 t={t}: |S(0) / 9t^2 - 1|"),
            (sf.values[c] / (9.0 * t * t) - 1.0).abs(),
            0.02,
            Severity::Hard,
        ));
    }
    let e = test_solution("EXP", 2)?;
    let c = [0.2, -0.1, 0.1, 0.3];
    let mut res = Vec::new();
    for h in [0.08, 0.04, 0.02, 0.01] {
        let g = GridField::sample_cube(2, &c, 2, h, 2, |x| e.u(x))?;
        let s = identity_samples(&g)?;
        res.push(s.iter().map(|(_, v)| v.residual).fold(0.0, f64::max));
        r.metric(format!("identity_residual_h{h}"), *res.last().expect("pushed"));
    }
    for (i, w) in res.windows(2).enumerate() {
        r.checks.push(Check::ge(format!("identity residual ratio {}", i + 1), w[0] / w[1], 3.5, Severity::Slope));
    }
    let g = GridField::sample_cube(2, &[0.3, -0.2, 0.1, 0.25], 4, 0.01, 3, |x| e.u(x))?;
    let worst = gradient_samples(&g)?
        .iter()
        .map(|(_, v)| v.lhs - v.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    r.metric("gradient_inequality_max_lhs_minus_rhs", worst);
    r.checks.push(Check::le("2 S_i S^i - 4 S T (max)", worst, 1e-6, Severity::Hard));
    let mut dev: f64 = 0.0;
    for (n, m) in [(1usize, 16usize), (2, 6)] {
        let s = test_solution("EXP", n)?;
        let f = |x: &[f64]| s.f(x);
        let zero = [0.0; 4];
        let unit = BallDomain::new(n, &zero[..2 * n], 1.0)?;
        for r_ in [1.0, 0.5, 0.25] {
            let scaled = |w: &[f64]| {
                let y: Vec<f64> = w.iter().map(|v| r_ * v).collect();
                y
            };
            let g = GridField::sample_ball(unit, 1.0 / m as f64, 2, |w| s.u(&scaled(w)) / (r_ * r_))?;
            let led_unit = theorem61_ledger(&g, &|w| f(&scaled(w)), &unit, 1.0)?;
            let big = BallDomain::new(n, &zero[..2 * n], r_)?;
            let gb = GridField::sample_ball(big, r_ / m as f64, 2, |x| s.u(x))?;
            let led = theorem61_ledger(&gb, &f, &big, 1.0)?;
            dev = dev.max((led_unit.ratio / led.ratio - 1.0).abs());
            r.metric(format!("ledger_ratio_n{n}_r{r_}"), led.ratio);
            r.checks.push(Check::le(
                format!("n={n} r={r_}: Sum|u_ijk|^2 - Lambda^3 S (max)"),
                led.lambda3_gap,
                1e-9,
                Severity::Hard,
            ));
        }
    }
    r.checks.push(Check::lt("scaling invariance: max relative ratio deviation", dev, 1e-6, Severity::Hard));
    Ok(r)
}
