//! Discrete Hölder seminorms (plain and interior-weighted), the weighted
//! f-norm, and log-log decay fits.
//!
//! Suprema over all pairs are quadratic in grid size, so the estimators scan a
//! fixed pair set: every pair at dyadic lattice separations along the axis
//! and diagonal (e_a ± e_b) directions, plus seeded uniformly random pairs.
//! The result is a lower bound for the sup over all lattice pairs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dist, BallDomain, GridField};

pub const DEFAULT_RANDOM_PAIRS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0x5eed_c0de;

/// Which second-derivative object a k = 2 seminorm measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HessianKind {
    /// Real Hessian, Frobenius norm.
    #[default]
    Real,
    /// Complex Hessian (u_{ij̄}), Frobenius norm.
    Complex,
}

/// Pair-set controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pub dyadic: bool,
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for PairSet {
    fn default() -> Self {
        PairSet {
            dyadic: true,
            random_pairs: DEFAULT_RANDOM_PAIRS,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormSpec {
    pub k: u8,
    pub alpha: f64,
    pub weighted: bool,
    /// Measurement ball; `None` means all interior points of the field.
    pub domain: Option<BallDomain>,
    pub hessian: HessianKind,
    pub pairs: PairSet,
}

impl SeminormSpec {
    pub fn new(k: u8, alpha: f64) -> Self {
        SeminormSpec {
            k,
            alpha,
            weighted: false,
            domain: None,
            hessian: HessianKind::Real,
            pairs: PairSet::default(),
        }
    }

    pub fn weighted(mut self) -> Self {
        self.weighted = true;
        self
    }

    pub fn on(mut self, domain: BallDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn complex(mut self) -> Self {
        self.hessian = HessianKind::Complex;
        self
    }

    pub fn with_pairs(mut self, pairs: PairSet) -> Self {
        self.pairs = pairs;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k > 2 {
            return Err(Error::domain(format!("derivative order {} not supported (k <= 2)", self.k)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!("alpha = {} must lie in [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

const MAX_COMPONENTS: usize = 16;

/// Derivative data sampled at the measurement points.
struct Samples {
    points: Vec<usize>,
    slot: Vec<u32>,
    comps: usize,
    data: Vec<[f64; MAX_COMPONENTS]>,
    dist: Vec<f64>,
}

const NO_SLOT: u32 = u32::MAX;

fn derivative(u: &GridField, idx: usize, k: u8, kind: HessianKind) -> ([f64; MAX_COMPONENTS], usize) {
    let mut v = [0.0; MAX_COMPONENTS];
    let dim = u.dim();
    match k {
        0 => {
            v[0] = u.values[idx];
            (v, 1)
        }
        1 => {
            let g = u.gradient_at(idx);
            v[..dim].copy_from_slice(&g[..dim]);
            (v, dim)
        }
        _ => match kind {
            HessianKind::Real => {
                let m = u.real_hessian_at(idx);
                for a in 0..dim {
                    for b in 0..dim {
                        v[a * dim + b] = m[a][b];
                    }
                }
                (v, dim * dim)
            }
            HessianKind::Complex => {
                let m = u.complex_hessian_at(idx);
                let n = u.n;
                for i in 0..n {
                    for j in 0..n {
                        v[2 * (i * n + j)] = m.m[i][j].re;
                        v[2 * (i * n + j) + 1] = m.m[i][j].im;
                    }
                }
                (v, 2 * n * n)
            }
        },
    }
}

fn gather(u: &GridField, spec: &SeminormSpec) -> Result<Samples> {
    spec.validate()?;
    if spec.k > 0 {
        u.require_collar(1)?;
    }
    if let Some(d) = &spec.domain {
        if d.n != u.n {
            return Err(Error::Mismatch("domain and field dimensions differ".into()));
        }
        if d.radius / u.h() < 1.0 {
            return Err(Error::Resolution(format!(
                "measurement ball of radius {} is below one grid cell (h = {})",
                d.radius,
                u.h()
            )));
        }
    }
    let mut points = Vec::new();
    let mut slot = vec![NO_SLOT; u.len()];
    let mut data = Vec::new();
    let mut dists = Vec::new();
    let mut comps = 1;
    for idx in u.interior() {
        let p = u.point(idx);
        let d = match &spec.domain {
            Some(b) => {
                if !b.contains(&p) {
                    continue;
                }
                b.boundary_distance(&p)
            }
            None => u.boundary_distance(&p),
        };
        let (v, c) = derivative(u, idx, spec.k, spec.hessian);
        comps = c;
        slot[idx] = points.len() as u32;
        points.push(idx);
        data.push(v);
        dists.push(d.max(0.0));
    }
    if points.is_empty() {
        return Err(Error::Resolution("measurement domain contains no grid points".into()));
    }
    Ok(Samples {
        points,
        slot,
        comps,
        data,
        dist: dists,
    })
}

fn diff_norm(a: &[f64; MAX_COMPONENTS], b: &[f64; MAX_COMPONENTS], comps: usize) -> f64 {
    a[..comps]
        .iter()
        .zip(&b[..comps])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64; MAX_COMPONENTS], comps: usize) -> f64 {
    a[..comps].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Unit lattice directions: axes and e_a ± e_b.
fn directions(dim: usize) -> Vec<[isize; 4]> {
    let mut out = Vec::new();
    for a in 0..dim {
        let mut d = [0isize; 4];
        d[a] = 1;
        out.push(d);
    }
    for a in 0..dim {
        for b in a + 1..dim {
            for s in [1isize, -1] {
                let mut d = [0isize; 4];
                d[a] = 1;
                d[b] = s;
                out.push(d);
            }
        }
    }
    out
}

/// Visits every pair in the pair set once (as `(slot_x, slot_y)`).
fn for_each_pair(u: &GridField, s: &Samples, pairs: &PairSet, mut visit: impl FnMut(usize, usize)) {
    let l = &u.lattice;
    let dim = l.dim;
    if pairs.dyadic {
        let dirs = directions(dim);
        let span = l.shape[..dim].iter().copied().max().unwrap_or(1);
        for (ix, &idx) in s.points.iter().enumerate() {
            let c = l.coords(idx);
            for d in &dirs {
                let mut step = 1isize;
                while (step as usize) < span {
                    let mut q = [0usize; 4];
                    let mut inside = true;
                    for a in 0..dim {
                        let v = c[a] as isize + step * d[a];
                        if v < 0 || v >= l.shape[a] as isize {
                            inside = false;
                            break;
                        }
                        q[a] = v as usize;
                    }
                    if !inside {
                        break;
                    }
                    let j = s.slot[l.index(&q)];
                    if j != NO_SLOT {
                        visit(ix, j as usize);
                    }
                    step *= 2;
                }
            }
        }
    }
    if pairs.random_pairs > 0 {
        // Pairs are drawn over all interior points of the field and then
        // filtered, so a sub-domain sees a subset of the parent's pairs.
        let all: Vec<usize> = u.interior().collect();
        if all.len() < 2 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(pairs.seed);
        let m = all.len() as u64;
        for _ in 0..pairs.random_pairs {
            let a = all[(rng.next_u64() % m) as usize];
            let b = all[(rng.next_u64() % m) as usize];
            let (sa, sb) = (s.slot[a], s.slot[b]);
            if a != b && sa != NO_SLOT && sb != NO_SLOT {
                visit(sa as usize, sb as usize);
            }
        }
    }
}

/// Hölder seminorm [u]_{k,α} (or the weighted [u]*_{k,α}) estimated over the pair set.
/// With α = 0 this is sup |∇^k u| (weighted by d_x^k).
pub fn holder_seminorm(u: &GridField, spec: &SeminormSpec) -> Result<f64> {
    let s = gather(u, spec)?;
    let k = spec.k as i32;
    if spec.alpha == 0.0 {
        let mut best: f64 = 0.0;
        for (i, v) in s.data.iter().enumerate() {
            let w = if spec.weighted { s.dist[i].powi(k) } else { 1.0 };
            best = best.max(w * norm(v, s.comps));
        }
        return Ok(best);
    }
    let mut best: f64 = 0.0;
    let expo = k as f64 + spec.alpha;
    for_each_pair(u, &s, &spec.pairs, |i, j| {
        let pi = u.point(s.points[i]);
        let pj = u.point(s.points[j]);
        let r = dist(&pi[..u.dim()], &pj[..u.dim()]);
        let mut q = diff_norm(&s.data[i], &s.data[j], s.comps) / r.powf(spec.alpha);
        if spec.weighted {
            q *= s.dist[i].min(s.dist[j]).powf(expo);
        }
        if q > best {
            best = q;
        }
    });
    Ok(best)
}

/// |f|*_{k,α} style quantity: sup d_x^k|f| + sup d_{x,y}^{k+α}|f(x) − f(y)|/|x − y|^α.
pub fn weighted_f_norm(f: &GridField, k: u32, alpha: f64, domain: Option<BallDomain>, pairs: PairSet) -> Result<f64> {
    let mut spec = SeminormSpec::new(0, alpha).with_pairs(pairs);
    spec.domain = domain;
    let s = gather(f, &spec)?;
    let sup = s
        .data
        .iter()
        .zip(&s.dist)
        .map(|(v, d)| d.powi(k as i32) * v[0].abs())
        .fold(0.0, f64::max);
    let expo = k as f64 + alpha;
    let mut quot: f64 = 0.0;
    for_each_pair(f, &s, &spec.pairs, |i, j| {
        let pi = f.point(s.points[i]);
        let pj = f.point(s.points[j]);
        let r = dist(&pi[..f.dim()], &pj[..f.dim()]);
        let q = s.dist[i].min(s.dist[j]).powf(expo) * (s.data[i][0] - s.data[j][0]).abs() / r.powf(alpha);
        quot = quot.max(q);
    });
    Ok(sup + quot)
}

/// Least-squares fit of ln v against ln t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Max |ln v − fit| over the fitted samples.
    pub residual: f64,
}

/// Fits v ≈ C t^slope after discarding the first and last samples.
/// Needs ≥ 4 samples with v > 0 and strictly decreasing t.
pub fn fit_decay_rate(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 4 {
        return Err(Error::Degenerate(format!(
            "decay fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    fit_loglog(samples, true)
}

/// Log-log least squares over all samples (`trim = false`) or the inner ones.
pub fn fit_loglog(samples: &[(f64, f64)], trim: bool) -> Result<DecayFit> {
    for w in samples.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(Error::Degenerate("scales t must be strictly decreasing".into()));
        }
    }
    for &(t, v) in samples {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Degenerate(format!("scale {t} must be positive")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Degenerate(format!("value {v} must be positive")));
        }
    }
    let used = if trim && samples.len() >= 3 {
        &samples[1..samples.len() - 1]
    } else {
        samples
    };
    if used.len() < 2 {
        return Err(Error::Degenerate("need at least two samples to fit a slope".into()));
    }
    let m = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        pairs: samples.to_vec(),
        slope,
        intercept,
        residual,
    })
}
