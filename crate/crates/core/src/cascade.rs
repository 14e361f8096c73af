//! The dyadic cascade of auxiliary Dirichlet problems.
//!
//! Level k solves det(φ_{ij̄}) = rhs on B_{d t_k}(x₀), t_k = 2^{−k} t, with
//! boundary data ρ_{d t_k^μ} ∗ u. Every level gets its own ball grid with
//! spacing h_k = d t_k / m, anchored at the center, so consecutive levels
//! nest exactly (h_{k−1} = 2h_k). The increments v_k = u_{k−1} − u_k are
//! formed on the finer grid with u_{k−1} cubic-interpolated.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentParams;
use crate::field::{dist, BallDomain, Cell, GridField, TestSolution};
use crate::mollify::Kernel;
use crate::norms::{fit_decay_rate, holder_seminorm, DecayFit, PairSet, SeminormSpec};
use crate::solver::{comparison_check, ComparisonReport, kernel_cells, solve, DirichletProblem, NewtonOptions, RhsMode, RhsModel, SolveReport};
use crate::{Point, MAX_DIM};

/// Smallest allowed grid points per level radius.
pub const MIN_LEVEL_POINTS: usize = 16;
/// Mollifier radius must span this many level cells.
pub const MIN_EPS_CELLS: f64 = 4.0;
/// Hard cap on the cascade depth.
pub const MAX_DEPTH: usize = 6;

/// A closed-form u together with its density f = det(u_{ij̄}).
pub trait Source: Sync {
    fn n(&self) -> usize;
    fn u(&self, x: &[f64]) -> f64;
    fn f(&self, x: &[f64]) -> f64;

    /// Real gradient; defaults to fourth-order central differences.
    fn grad_u(&self, x: &[f64]) -> Point {
        let dim = 2 * self.n();
        let s = 1e-3;
        let mut g = [0.0; MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        y[..dim].copy_from_slice(&x[..dim]);
        for a in 0..dim {
            let mut at = |v: f64| {
                let keep = y[a];
                y[a] = keep + v;
                let r = self.u(&y[..dim]);
                y[a] = keep;
                r
            };
            g[a] = (-at(2.0 * s) + 8.0 * at(s) - 8.0 * at(-s) + at(-2.0 * s)) / (12.0 * s);
        }
        g
    }
}

impl Source for TestSolution {
    fn n(&self) -> usize {
        self.n
    }
    fn u(&self, x: &[f64]) -> f64 {
        TestSolution::u(self, x)
    }
    fn f(&self, x: &[f64]) -> f64 {
        TestSolution::f(self, x)
    }
    fn grad_u(&self, x: &[f64]) -> Point {
        TestSolution::grad_u(self, x)
    }
}

/// Source assembled from two closures.
pub struct FnSource<U, F> {
    pub n: usize,
    pub u: U,
    pub f: F,
}

impl<U, F> Source for FnSource<U, F>
where
    U: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn n(&self) -> usize {
        self.n
    }
    fn u(&self, x: &[f64]) -> f64 {
        (self.u)(x)
    }
    fn f(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub center: Vec<f64>,
    pub d: f64,
    pub t: f64,
    pub depth: usize,
    pub params: ExponentParams,
    pub mode: RhsMode,
    /// Declared Hölder exponent of ∇u used in the sandwich normalisation.
    pub beta_eff: f64,
    /// Grid points per level radius.
    pub points_per_radius: usize,
    #[serde(default)]
    pub newton: NewtonOptions,
    #[serde(default)]
    pub pairs: PairSet,
}

impl CascadeConfig {
    pub fn new(center: &[f64], d: f64, t: f64, depth: usize, params: ExponentParams) -> Self {
        CascadeConfig {
            center: center.to_vec(),
            d,
            t,
            depth,
            params,
            mode: RhsMode::Const,
            beta_eff: 1.0,
            points_per_radius: 32,
            newton: NewtonOptions::default(),
            pairs: PairSet::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    pub fn validate(&self) -> Result<()> {
        crate::field::check_n(self.n())?;
        if self.center.len() != 2 * self.n() {
            return Err(Error::domain(format!(
                "center has {} coordinates, expected {}",
                self.center.len(),
                2 * self.n()
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::domain(format!("d = {} must be positive", self.d)));
        }
        if !(self.t > 0.0 && self.t <= 0.5) {
            return Err(Error::domain(format!("t = {} must lie in (0, 1/2]", self.t)));
        }
        if self.depth > MAX_DEPTH {
            return Err(Error::domain(format!("depth {} exceeds {MAX_DEPTH}", self.depth)));
        }
        if !(self.params.mu > 1.0) {
            return Err(Error::domain(format!("mu = {} must exceed 1", self.params.mu)));
        }
        if !(self.beta_eff > 0.0 && self.beta_eff <= 1.0) {
            return Err(Error::domain(format!("beta_eff = {} must lie in (0, 1]", self.beta_eff)));
        }
        if self.points_per_radius < MIN_LEVEL_POINTS {
            return Err(Error::Resolution(format!(
                "{} points per radius is below {MIN_LEVEL_POINTS}",
                self.points_per_radius
            )));
        }
        if let RhsMode::FullMollified { eps } = self.mode {
            if !(eps > 0.0) {
                return Err(Error::domain(format!("rhs mollifier radius {eps} must be positive")));
            }
        }
        Ok(())
    }

    fn fixed_ball(&self) -> bool {
        matches!(self.mode, RhsMode::Full | RhsMode::FullMollified { .. })
    }

    pub fn t_k(&self, k: usize) -> f64 {
        self.t * (0.5f64).powi(k as i32)
    }

    /// Ball radius at scale t: d·t, or d in the full-rhs modes.
    pub fn radius_at(&self, t: f64) -> f64 {
        if self.fixed_ball() {
            self.d
        } else {
            self.d * t
        }
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.radius_at(self.t_k(k))
    }

    pub fn h(&self, k: usize) -> f64 {
        self.radius(k) / self.points_per_radius as f64
    }

    pub fn eps_at(&self, t: f64) -> f64 {
        self.d * t.powf(self.params.mu)
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps_at(self.t_k(k))
    }

    /// Levels 0..=K that pass the resolution rules, and the rejected ones.
    pub fn resolvable(&self) -> (usize, Vec<Rejection>) {
        let mut rejected = Vec::new();
        let mut last = None;
        for k in 0..=self.depth {
            let cells = self.eps(k) / self.h(k);
            if cells < MIN_EPS_CELLS && rejected.is_empty() {
                rejected.push(Rejection {
                    level: k,
                    reason: format!(
                        "mollifier radius {:.3e} spans {cells:.2} cells of {:.3e}, need >= {MIN_EPS_CELLS}",
                        self.eps(k),
                        self.h(k)
                    ),
                });
            } else if !rejected.is_empty() {
                rejected.push(Rejection {
                    level: k,
                    reason: "coarser level already rejected".to_string(),
                });
            } else {
                last = Some(k);
            }
        }
        (last.map_or(0, |k| k + 1), rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub level: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub level: usize,
    pub error: String,
}

/// Solves the auxiliary problem at scale t centred at `x0`.
pub fn solve_auxiliary(source: &dyn Source, cfg: &CascadeConfig, x0: &[f64], t: f64) -> Result<SolveReport> {
    let n = source.n();
    if n != cfg.n() {
        return Err(Error::Mismatch(format!("source has n = {n}, config n = {}", cfg.n())));
    }
    let r = cfg.radius_at(t);
    let ball = BallDomain::new(n, x0, r)?;
    let kernel = Kernel::with_cells(n, cfg.eps_at(t), kernel_cells(n))?;
    let u = |x: &[f64]| source.u(x);
    let f = |x: &[f64]| source.f(x);
    let boundary = |x: &[f64]| kernel.convolve_at(&u, x);
    let model = RhsModel::new(cfg.mode, n, x0, &f)?;
    let rhs = |x: &[f64]| model.eval(x);
    let mut p = DirichletProblem::new(ball, cfg.points_per_radius, &rhs, &boundary);
    p.h = r / cfg.points_per_radius as f64;
    solve(&p, &cfg.newton)
}

/// u_k = φ_{t_k, x₀}.
pub fn build_auxiliary(source: &dyn Source, cfg: &CascadeConfig, k: usize) -> Result<SolveReport> {
    cfg.validate()?;
    solve_auxiliary(source, cfg, &cfg.center, cfg.t_k(k)).map_err(|e| e.at_level(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub t: f64,
    pub radius: f64,
    pub h: f64,
    pub eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub min_eig: f64,
    /// sup |φ_{t_k} − u| over B_{k+1}.
    pub sup_diff: f64,
    /// sup_diff / (t^{μ(1+β_eff)} + t^{2+α}).
    pub sandwich_ratio: f64,
    /// sup |∇²φ_{t_k}| over B_{k+1}.
    pub hessian_sup: f64,
    /// ∇φ_{t_k}(x₀) with the common difference step.
    pub grad_center: Point,
    pub grad_error: f64,
    /// |v_k|₀, [v_k]₁, [v_k]_{1,δ} over B_{k+2} (k ≥ 1).
    pub v_sup: Option<f64>,
    pub v_lip: Option<f64>,
    pub v_holder: Option<f64>,
    /// ∇v_k(x₀).
    pub grad_increment: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CascadeFits {
    pub v_sup: Option<DecayFit>,
    pub v_lip: Option<DecayFit>,
    pub v_holder: Option<DecayFit>,
    pub sup_diff: Option<DecayFit>,
    pub grad_error: Option<DecayFit>,
    pub hessian_sup: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub config: CascadeConfig,
    pub levels: Vec<LevelRecord>,
    pub rejected: Vec<Rejection>,
    pub failures: Vec<LevelFailure>,
    pub fits: CascadeFits,
    /// max |Σ v_k − (u₀ − u_K)| on the finest measurement grid.
    pub telescope_residual: Option<f64>,
    /// Step used for ∇φ(x₀) at every level.
    pub gradient_step: f64,
    /// max/min of the sandwich ratios.
    pub sandwich_spread: f64,
}

fn central_gradient(u: &GridField, x: &[f64], s: f64) -> Result<Point> {
    let dim = u.dim();
    let mut g = [0.0; MAX_DIM];
    let mut y = [0.0; MAX_DIM];
    y[..dim].copy_from_slice(&x[..dim]);
    for a in 0..dim {
        y[a] = x[a] + s;
        let up = u.interpolate(&y[..dim])?;
        y[a] = x[a] - s;
        let dn = u.interpolate(&y[..dim])?;
        y[a] = x[a];
        g[a] = (up - dn) / (2.0 * s);
    }
    Ok(g)
}

fn norm(p: &Point) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fit_column(samples: Vec<(f64, f64)>) -> Option<DecayFit> {
    fit_decay_rate(&samples).ok()
}

/// Runs all resolvable levels sequentially.
pub fn run_cascade(source: &dyn Source, cfg: &CascadeConfig) -> Result<CascadeReport> {
    cfg.validate()?;
    let (count, _) = cfg.resolvable();
    let mut solves = Vec::with_capacity(count);
    for k in 0..count {
        let r = build_auxiliary(source, cfg, k);
        let failed = r.is_err();
        solves.push(r);
        if failed {
            break;
        }
    }
    assemble_cascade(source, cfg, solves)
}

/// Builds the report from per-level solves (in level order); stops at the first failure.
pub fn assemble_cascade(
    source: &dyn Source,
    cfg: &CascadeConfig,
    solves: Vec<Result<SolveReport>>,
) -> Result<CascadeReport> {
    cfg.validate()?;
    let (_, rejected) = cfg.resolvable();
    let n = cfg.n();
    let dim = 2 * n;
    let x0 = &cfg.center[..];
    let mut fields = Vec::new();
    let mut failures = Vec::new();
    for (k, s) in solves.into_iter().enumerate() {
        match s {
            Ok(rep) => fields.push(rep),
            Err(e) => {
                failures.push(LevelFailure {
                    level: k,
                    error: e.to_string(),
                });
                break;
            }
        }
    }
    let depth = fields.len();
    let step = if depth > 0 { cfg.h(depth - 1) } else { 0.0 };
    let grad_u = source.grad_u(x0);
    let p = &cfg.params;
    let mut levels: Vec<LevelRecord> = Vec::with_capacity(depth);
    let mut v_fields: Vec<GridField> = Vec::new();
    for (k, rep) in fields.iter().enumerate() {
        let u_k = &rep.solution;
        let t = cfg.t_k(k);
        let r = cfg.radius(k);
        let inner = BallDomain::new(n, x0, r / 2.0)?;
        let sup_diff = u_k
            .interior()
            .filter(|&i| inner.contains(&u_k.point(i)))
            .map(|i| (u_k.values[i] - source.u(&u_k.point(i)[..dim])).abs())
            .fold(0.0, f64::max);
        let hessian_sup = holder_seminorm(u_k, &SeminormSpec::new(2, 0.0).on(inner))?;
        let grad_center = central_gradient(u_k, x0, step)?;
        let mut gdiff = grad_center;
        for a in 0..dim {
            gdiff[a] -= grad_u[a];
        }
        let scale = t.powf(p.mu * (1.0 + cfg.beta_eff)) + t.powf(2.0 + p.alpha);
        let mut rec = LevelRecord {
            level: k,
            t,
            radius: r,
            h: u_k.h(),
            eps: cfg.eps(k),
            iterations: rep.iterations,
            residual: rep.residual,
            min_eig: rep.min_eig,
            sup_diff,
            sandwich_ratio: sup_diff / scale,
            hessian_sup,
            grad_center,
            grad_error: norm(&gdiff),
            v_sup: None,
            v_lip: None,
            v_holder: None,
            grad_increment: None,
        };
        if k >= 1 {
            let prev = &fields[k - 1].solution;
            let meas = BallDomain::new(n, x0, r / 4.0)?;
            let mut v = GridField::on_ball(meas, u_k.h(), 1)?;
            for i in 0..v.len() {
                if v.mask[i] != Cell::Exterior {
                    let q = v.point(i);
                    v.values[i] = prev.interpolate(&q[..dim])? - u_k.interpolate(&q[..dim])?;
                }
            }
            rec.v_sup = Some(v.sup_interior());
            rec.v_lip = Some(holder_seminorm(&v, &SeminormSpec::new(1, 0.0).with_pairs(cfg.pairs))?);
            rec.v_holder = Some(holder_seminorm(&v, &SeminormSpec::new(1, p.delta).with_pairs(cfg.pairs))?);
            let g_prev = central_gradient(prev, x0, step)?;
            let mut inc = [0.0; MAX_DIM];
            for a in 0..dim {
                let mut y = [0.0; MAX_DIM];
                y[..dim].copy_from_slice(x0);
                y[a] += step;
                let up = prev.interpolate(&y[..dim])? - u_k.interpolate(&y[..dim])?;
                y[a] -= 2.0 * step;
                let dn = prev.interpolate(&y[..dim])? - u_k.interpolate(&y[..dim])?;
                inc[a] = (up - dn) / (2.0 * step);
            }
            debug_assert!((0..dim).all(|a| (inc[a] - (g_prev[a] - grad_center[a])).abs() < 1e-6));
            rec.grad_increment = Some(inc);
            v_fields.push(v);
        }
        levels.push(rec);
    }

    let telescope_residual = if depth >= 2 {
        let common = v_fields.last().expect("depth >= 2");
        let mut worst: f64 = 0.0;
        for i in common.interior() {
            let q = common.point(i);
            let q = &q[..dim];
            let mut sum = 0.0;
            for k in 1..depth {
                sum += fields[k - 1].solution.interpolate(q)? - fields[k].solution.interpolate(q)?;
            }
            let direct = fields[0].solution.interpolate(q)? - fields[depth - 1].solution.interpolate(q)?;
            worst = worst.max((sum - direct).abs());
        }
        Some(worst)
    } else {
        None
    };

    let col = |get: &dyn Fn(&LevelRecord) -> Option<f64>| {
        fit_column(levels.iter().filter_map(|l| get(l).map(|v| (l.t, v))).collect())
    };
    let fits = CascadeFits {
        v_sup: col(&|l| l.v_sup),
        v_lip: col(&|l| l.v_lip),
        v_holder: col(&|l| l.v_holder),
        sup_diff: col(&|l| Some(l.sup_diff)),
        grad_error: col(&|l| Some(l.grad_error)),
        hessian_sup: col(&|l| Some(l.hessian_sup)),
    };
    let ratios: Vec<f64> = levels.iter().map(|l| l.sandwich_ratio).collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let sandwich_spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(CascadeReport {
        config: cfg.clone(),
        levels,
        rejected,
        failures,
        fits,
        telescope_residual,
        gradient_step: step,
        sandwich_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopeRecord {
    /// (t_k, |∇φ_{t_k}(x₀) − ∇u(x₀)|).
    pub errors: Vec<(f64, f64)>,
    pub fit: Option<DecayFit>,
    /// Σ_{i ≤ k} ∇v_i(x₀).
    pub partial_sums: Vec<Point>,
    /// max_k |Σ_{i ≤ k} ∇v_i(x₀) − (∇φ_{t₀}(x₀) − ∇φ_{t_k}(x₀))|.
    pub identity_residual: f64,
}

pub fn gradient_telescope(report: &CascadeReport, source: &dyn Source) -> Result<TelescopeRecord> {
    let dim = 2 * source.n();
    let grad_u = source.grad_u(&report.config.center);
    let mut errors = Vec::new();
    for l in &report.levels {
        let mut e = 0.0;
        for a in 0..dim {
            e += (l.grad_center[a] - grad_u[a]).powi(2);
        }
        errors.push((l.t, e.sqrt()));
    }
    let g0 = report
        .levels
        .first()
        .ok_or_else(|| Error::Degenerate("cascade report has no levels".into()))?
        .grad_center;
    let mut partial_sums = Vec::new();
    let mut acc = [0.0; MAX_DIM];
    let mut identity_residual: f64 = 0.0;
    for l in report.levels.iter().skip(1) {
        let inc = l.grad_increment.ok_or_else(|| Error::Degenerate("missing gradient increment".into()))?;
        for a in 0..dim {
            acc[a] += inc[a];
            identity_residual = identity_residual.max((acc[a] - (g0[a] - l.grad_center[a])).abs());
        }
        partial_sums.push(acc);
    }
    Ok(TelescopeRecord {
        fit: fit_decay_rate(&errors).ok(),
        errors,
        partial_sums,
        identity_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub t: f64,
    /// sup |W_t − ⟨∇φ_t(x₀), x⟩|.
    pub w_linear: f64,
    /// sup |V_t − ⟨∇u(x₀), x⟩|.
    pub v_linear: f64,
    /// sup |W_t − V_t|.
    pub w_minus_v: f64,
}

/// W_t(x) = (φ_t(x₀+tx) − φ_t(x₀))/t and V_t(x) = (u(x₀+tx) − u(x₀))/t on B_{d/4}(0),
/// sampled at the nodes of `phi_t` inside B_{dt/4}(x₀).
pub fn rescaled_profiles(source: &dyn Source, phi_t: &GridField, cfg: &CascadeConfig, t: f64) -> Result<ProfileRecord> {
    let dim = 2 * source.n();
    let x0 = &cfg.center[..dim];
    let ball = BallDomain::new(source.n(), x0, cfg.d * t / 4.0)?;
    let phi0 = phi_t.interpolate(x0)?;
    let u0 = source.u(x0);
    let gphi = central_gradient(phi_t, x0, phi_t.h())?;
    let gu = source.grad_u(x0);
    let mut rec = ProfileRecord {
        t,
        w_linear: 0.0,
        v_linear: 0.0,
        w_minus_v: 0.0,
    };
    let mut seen = false;
    for i in phi_t.interior() {
        let p = phi_t.point(i);
        if !ball.contains(&p) {
            continue;
        }
        seen = true;
        let w = (phi_t.values[i] - phi0) / t;
        let v = (source.u(&p[..dim]) - u0) / t;
        let (mut lw, mut lv) = (0.0, 0.0);
        for a in 0..dim {
            let xa = (p[a] - x0[a]) / t;
            lw += gphi[a] * xa;
            lv += gu[a] * xa;
        }
        rec.w_linear = rec.w_linear.max((w - lw).abs());
        rec.v_linear = rec.v_linear.max((v - lv).abs());
        rec.w_minus_v = rec.w_minus_v.max((w - v).abs());
    }
    if !seen {
        return Err(Error::Resolution(format!("no grid points inside B_(dt/4) at t = {t}")));
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCenterRecord {
    pub t: f64,
    pub z: Vec<f64>,
    pub radius: f64,
    /// sup over B_{dt/8}(z) of |∇φ_{t,x₀} − ∇φ_{t,y₀}|.
    pub sup_grad_diff: f64,
}

/// Compares the auxiliaries centred at x₀ and y₀ near their midpoint z.
pub fn cross_center_compare(
    source: &dyn Source,
    x0: &[f64],
    y0: &[f64],
    cfg: &CascadeConfig,
    t: f64,
) -> Result<CrossCenterRecord> {
    cfg.validate()?;
    let n = source.n();
    let dim = 2 * n;
    let dt = cfg.radius_at(t);
    if dist(&x0[..dim], &y0[..dim]) > dt / 8.0 * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "|x0 - y0| = {} exceeds dt/8 = {}",
            dist(&x0[..dim], &y0[..dim]),
            dt / 8.0
        )));
    }
    let mut z = vec![0.0; dim];
    for a in 0..dim {
        z[a] = 0.5 * (x0[a] + y0[a]);
    }
    let half_x = BallDomain::new(n, x0, dt / 2.0)?;
    let half_y = BallDomain::new(n, y0, dt / 2.0)?;
    let quarter = BallDomain::new(n, &z, dt / 4.0)?;
    if !(half_x.contains_ball(&quarter) && half_y.contains_ball(&quarter)) {
        return Err(Error::Geometry("B_(dt/4)(z) is not inside both half balls".into()));
    }
    let a = solve_auxiliary(source, cfg, x0, t)?.solution;
    let b = if x0[..dim] == y0[..dim] {
        a.clone()
    } else {
        solve_auxiliary(source, cfg, y0, t)?.solution
    };
    let meas = BallDomain::new(n, &z, dt / 8.0)?;
    let probe = GridField::on_ball(meas, a.h().min(dt / 32.0), 0)?;
    let mut sup: f64 = 0.0;
    for i in probe.interior() {
        let q = probe.point(i);
        let ga = central_gradient(&a, &q[..dim], a.h())?;
        let gb = central_gradient(&b, &q[..dim], a.h())?;
        let mut d2 = 0.0;
        for k in 0..dim {
            d2 += (ga[k] - gb[k]).powi(2);
        }
        sup = sup.max(d2.sqrt());
    }
    Ok(CrossCenterRecord {
        t,
        z,
        radius: dt / 8.0,
        sup_grad_diff: sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub level: usize,
    pub t: f64,
    /// Smallest C with ρ∗u + Ct^α(|z−x₀|² − d²t²) ≤ φ.
    pub c_lower: f64,
    /// Smallest C with φ ≤ u + Ct^{μ(1+β)} − Ct^α(|z−x₀|² − d²t²).
    pub c_upper: f64,
    pub c_hat: f64,
    pub lower_violation_at_zero: f64,
    pub upper_violation_at_zero: f64,
    /// Whether both barriers already hold at C = 0.
    pub holds_at_zero: bool,
    pub tolerance: f64,
}

const SANDWICH_BISECTIONS: usize = 60;

/// Smallest C (by bisection on the comparison check) for which `pair(C)`
/// produces an ordered pair (lower, upper).
fn smallest_constant(pair: &dyn Fn(f64) -> Result<f64>, tol: f64) -> Result<f64> {
    if pair(0.0)? <= tol {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut tries = 0;
    while pair(hi)? > tol {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Degenerate("barrier never holds".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..SANDWICH_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if pair(mid)? <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The two barrier comparisons of one level, with the sampled data cached.
struct Barriers<'a> {
    phi: &'a GridField,
    idx: Vec<usize>,
    moll: Vec<f64>,
    raw: Vec<f64>,
    bump: Vec<f64>,
    ta: f64,
    tm: f64,
}

impl<'a> Barriers<'a> {
    fn new(source: &dyn Source, cfg: &CascadeConfig, level: usize, phi: &'a GridField) -> Result<Self> {
        cfg.validate()?;
        let n = source.n();
        let dim = 2 * n;
        if phi.n != n {
            return Err(Error::Mismatch(format!("field has n = {}, source n = {n}", phi.n)));
        }
        let t = cfg.t_k(level);
        let x0 = &cfg.center[..dim];
        let r = cfg.radius(level);
        let p = &cfg.params;
        let kernel = Kernel::with_cells(n, cfg.eps(level), kernel_cells(n))?;
        let uf = |x: &[f64]| source.u(x);
        let idx: Vec<usize> = phi.defined().collect();
        let moll = idx.iter().map(|&i| kernel.convolve_at(&uf, &phi.point(i)[..dim])).collect();
        let raw = idx.iter().map(|&i| source.u(&phi.point(i)[..dim])).collect();
        let bump = idx
            .iter()
            .map(|&i| dist(&phi.point(i)[..dim], x0).powi(2) - r * r)
            .collect();
        Ok(Barriers {
            phi,
            idx,
            moll,
            raw,
            bump,
            ta: t.powf(p.alpha),
            tm: t.powf(p.mu * (1.0 + cfg.beta_eff)),
        })
    }

    fn build(&self, vals: impl Fn(usize) -> f64) -> GridField {
        let mut g = self.phi.clone();
        for (j, &i) in self.idx.iter().enumerate() {
            g.values[i] = vals(j);
        }
        g
    }

    /// ρ∗u + Ct^α(|z−x₀|² − d²t²) against φ.
    fn lower(&self, c: f64) -> Result<ComparisonReport> {
        let one = |_: &[f64]| 1.0;
        let l = self.build(|j| self.moll[j] + c * self.ta * self.bump[j]);
        comparison_check(&l, self.phi, &one, &one)
    }

    /// φ against u + Ct^{μ(1+β)} − Ct^α(|z−x₀|² − d²t²).
    fn upper(&self, c: f64) -> Result<ComparisonReport> {
        let one = |_: &[f64]| 1.0;
        let up = self.build(|j| self.raw[j] + c * self.tm - c * self.ta * self.bump[j]);
        comparison_check(self.phi, &up, &one, &one)
    }
}

/// Both barrier comparisons of level `level` at a fixed constant C: `[lower, upper]`.
pub fn barrier_check(
    source: &dyn Source,
    cfg: &CascadeConfig,
    level: usize,
    phi: &GridField,
    c: f64,
) -> Result<[ComparisonReport; 2]> {
    let b = Barriers::new(source, cfg, level, phi)?;
    Ok([b.lower(c)?, b.upper(c)?])
}

/// Barrier constants for one solved level.
pub fn verify_sandwich(
    source: &dyn Source,
    cfg: &CascadeConfig,
    level: usize,
    phi: &GridField,
) -> Result<SandwichRecord> {
    let b = Barriers::new(source, cfg, level, phi)?;
    let lower = |c: f64| Ok(b.lower(c)?.violation);
    let upper = |c: f64| Ok(b.upper(c)?.violation);
    let tol = crate::solver::C_CMP * phi.h() * phi.h();
    let lz = lower(0.0)?;
    let uz = upper(0.0)?;
    let c_lower = smallest_constant(&lower, tol)?;
    let c_upper = smallest_constant(&upper, tol)?;
    Ok(SandwichRecord {
        level,
        t: cfg.t_k(level),
        c_lower,
        c_upper,
        c_hat: c_lower.max(c_upper),
        lower_violation_at_zero: lz,
        upper_violation_at_zero: uz,
        holds_at_zero: lz <= tol && uz <= tol,
        tolerance: tol,
    })
}
