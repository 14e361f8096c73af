//! Third-order quantities of a Monge-Ampère solution and the interior C³ ledger.
//!
//! Conventions: M[i][a] = u_{iā}, N = M^{-1}. A holomorphic slot i is paired
//! with the conjugate slot a through N[a][i], an antiholomorphic slot j with
//! b through N[j][b]; these are the pairings invariant under linear changes
//! of complex coordinates.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dist, BallDomain, Cell, GridField, Tensor3, Tensor4};
use crate::linalg::{CMat, C64};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// S = Σ N[p][i] N[j][q] N[r][k] u_{iqk} conj(u_{pjr}) for the holomorphic
/// third derivatives u_{ijk}.
pub fn s_holomorphic(h: &CMat, t: &Tensor3) -> Result<f64> {
    let n = h.n;
    let inv = positive_inverse(h)?;
    let mut acc = zero();
    for i in 0..n {
        for q in 0..n {
            for k in 0..n {
                for p in 0..n {
                    for j in 0..n {
                        for r in 0..n {
                            acc += inv.get(p, i) * inv.get(j, q) * inv.get(r, k) * t[i][q][k] * t[p][j][r].conj();
                        }
                    }
                }
            }
        }
    }
    Ok(acc.re)
}

/// |u_{ij̄k}|²_g: the metric norm of the mixed third derivatives (`w[i][j][k]` = u_{ij̄k}).
pub fn s_mixed(h: &CMat, w: &Tensor3) -> Result<f64> {
    let n = h.n;
    let inv = positive_inverse(h)?;
    let mut acc = zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            acc += inv.get(a, i) * inv.get(j, b) * inv.get(c, k) * w[i][j][k] * w[a][b][c].conj();
                        }
                    }
                }
            }
        }
    }
    Ok(acc.re)
}

/// Σ |u_{ij̄k}|² (Euclidean).
pub fn mixed_norm2(n: usize, w: &Tensor3) -> f64 {
    let mut s = 0.0;
    for row in w.iter().take(n) {
        for col in row.iter().take(n) {
            for v in col.iter().take(n) {
                s += v.norm_sqr();
            }
        }
    }
    s
}

fn positive_inverse(h: &CMat) -> Result<CMat> {
    let e = h.min_eig();
    if !(e > 0.0) {
        return Err(Error::PdLoss(format!("complex Hessian has min eigenvalue {e}")));
    }
    h.inverse()
}

/// Collects a per-point value into a field, turning NaN into a PD-loss error.
fn checked(f: GridField, what: &str) -> Result<GridField> {
    if f.defined().any(|i| f.values[i].is_nan()) {
        return Err(Error::PdLoss(format!("{what}: complex Hessian not positive definite")));
    }
    Ok(f)
}

/// S from the holomorphic third derivatives at every interior point (2-cell collar).
pub fn compute_s(u: &GridField) -> Result<GridField> {
    let n = u.n;
    let out = u.derive(2, |f, i| {
        let jet = f.jet_at(i, 3);
        s_holomorphic(&jet.complex_hessian(n), &jet.holomorphic3(n)).unwrap_or(f64::NAN)
    })?;
    checked(out, "compute_s")
}

/// |u_{ij̄k}|²_g at every interior point (2-cell collar).
pub fn compute_s_mixed(u: &GridField) -> Result<GridField> {
    let n = u.n;
    let out = u.derive(2, |f, i| {
        let jet = f.jet_at(i, 3);
        s_mixed(&jet.complex_hessian(n), &jet.mixed3(n)).unwrap_or(f64::NAN)
    })?;
    checked(out, "compute_s_mixed")
}

/// Both sides of Δ_gΔu = Σ_i tr(N H_i^* N H_i) + Δφ at one interior point,
/// with Δ the complex Laplacian, φ = log det H and H_i = ∂_i (u_{kl̄}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentitySample {
    pub lhs: f64,
    pub quadratic: f64,
    pub laplacian_phi: f64,
    pub residual: f64,
}

/// Identity samples at every interior point (needs a 2-cell collar).
pub fn identity_samples(u: &GridField) -> Result<Vec<(usize, IdentitySample)>> {
    u.require_collar(2)?;
    let n = u.n;
    let lap = u.derive(1, |f, i| 0.25 * f.laplacian_at(i))?;
    let phi = checked(
        u.derive(1, |f, i| {
            let d = f.complex_hessian_at(i).det().re;
            if d > 0.0 {
                d.ln()
            } else {
                f64::NAN
            }
        })?,
        "identity",
    )?;
    let mut out = Vec::new();
    for i in u.interior() {
        let jet = u.jet_at(i, 3);
        let h = jet.complex_hessian(n);
        let inv = positive_inverse(&h)?;
        let w = jet.mixed3(n);
        let lhs = inv.re_trace_product(&lap.complex_hessian_at(i));
        let mut quadratic = 0.0;
        for l in 0..n {
            let hl = CMat::from_fn(n, |k, m| w[k][m][l]);
            quadratic += inv.mul(&hl.adjoint()).mul(&inv).mul(&hl).trace().re;
        }
        let laplacian_phi = 0.25 * phi.laplacian_at(i);
        out.push((
            i,
            IdentitySample {
                lhs,
                quadratic,
                laplacian_phi,
                residual: (lhs - quadratic - laplacian_phi).abs(),
            },
        ));
    }
    Ok(out)
}

type Chern = (CMat, Tensor4, Tensor4);

/// (N, D W, D̄ W) with `dw[l][i][j][k]` = D_l W_{ij̄k}.
fn chern_derivatives(h: &CMat, w: &Tensor3, d_hol: &Tensor4, d_bar: &Tensor4) -> Result<Chern> {
    let n = h.n;
    let inv = positive_inverse(h)?;
    let mut gamma = [[[zero(); 2]; 2]; 2];
    for l in 0..n {
        for i in 0..n {
            for p in 0..n {
                let mut s = zero();
                for y in 0..n {
                    s += w[i][y][l] * inv.get(y, p);
                }
                gamma[l][i][p] = s;
            }
        }
    }
    let mut dw = [[[[zero(); 2]; 2]; 2]; 2];
    let mut dbw = [[[[zero(); 2]; 2]; 2]; 2];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut a = d_hol[i][j][k][l];
                    let mut b = d_bar[i][j][k][l];
                    for p in 0..n {
                        a -= gamma[l][i][p] * w[p][j][k] + gamma[l][k][p] * w[i][j][p];
                        b -= gamma[l][j][p].conj() * w[i][p][k];
                    }
                    dw[l][i][j][k] = a;
                    dbw[l][i][j][k] = b;
                }
            }
        }
    }
    Ok((inv, dw, dbw))
}

/// T = |DW|² + |D̄W|² for W = (u_{ij̄k}), with the Chern-connection corrections
/// D_l W_{ij̄k} = u_{ij̄kl} − Γ^p_{li} W_{pj̄k} − Γ^p_{lk} W_{ij̄p} and
/// D_l̄ W_{ij̄k} = u_{ij̄kl̄} − conj(Γ^b_{lj}) W_{ib̄k}, Γ^p_{li} = Σ_y u_{iȳl} N[y][p].
pub fn t_quantity(h: &CMat, w: &Tensor3, d_hol: &Tensor4, d_bar: &Tensor4) -> Result<f64> {
    let n = h.n;
    let (inv, dw, dbw) = chern_derivatives(h, w, d_hol, d_bar)?;
    let mut t = zero();
    for l in 0..n {
        for m in 0..n {
            let hol = inv.get(m, l);
            let anti = inv.get(l, m);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                for c in 0..n {
                                    let pair = inv.get(a, i) * inv.get(j, b) * inv.get(c, k);
                                    t += hol * pair * dw[l][i][j][k] * dw[m][a][b][c].conj();
                                    t += anti * pair * dbw[l][i][j][k] * dbw[m][a][b][c].conj();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(t.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    pub s: f64,
    pub t: f64,
    /// 2 S_i S^i with S_i from central differences of the S field.
    pub lhs: f64,
    /// 4 S T.
    pub rhs: f64,
}

/// 2S_iS^i versus 4ST at every interior point (needs a 3-cell collar).
pub fn gradient_samples(u: &GridField) -> Result<Vec<(usize, GradientSample)>> {
    u.require_collar(3)?;
    let n = u.n;
    let s_field = compute_s_mixed(u)?;
    let mut out = Vec::new();
    for i in u.interior() {
        let jet = u.jet_at(i, 4);
        let h = jet.complex_hessian(n);
        let inv = positive_inverse(&h)?;
        let w = jet.mixed3(n);
        let d_hol = jet.complex4(n, [false, true, false, false]);
        let d_bar = jet.complex4(n, [false, true, false, true]);
        let t = t_quantity(&h, &w, &d_hol, &d_bar)?;
        let g = s_field.gradient_at(i);
        let mut si = [zero(); 2];
        for (l, v) in si.iter_mut().enumerate().take(n) {
            *v = C64::new(0.5 * g[2 * l], -0.5 * g[2 * l + 1]);
        }
        let mut norm = zero();
        for l in 0..n {
            for m in 0..n {
                norm += si[l] * si[m].conj() * inv.get(m, l);
            }
        }
        let s = s_field.values[i];
        out.push((
            i,
            GradientSample {
                s,
                t,
                lhs: 2.0 * norm.re,
                rhs: 4.0 * s * t,
            },
        ));
    }
    Ok(out)
}

/// Hypothesis constants and bound inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct HessianBounds {
    pub lambda: f64,
    pub Lambda: f64,
    pub M: f64,
    pub N: f64,
    pub r: f64,
    pub K: f64,
    pub m: f64,
    pub L: f64,
}

impl HessianBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.lambda <= self.Lambda
            && self.M >= 0.0
            && self.N >= 0.0
            && self.L >= 0.0
            && self.m > 0.0
            && self.K >= 0.0
            && self.r > 0.0;
        if ok && [self.Lambda, self.M, self.N, self.L, self.K].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid Hessian bounds {self:?}")))
        }
    }
}

/// C_n·K^{n+1}·m^{−1}·(1 + √L).
pub fn prop24_bound(bounds: &HessianBounds, n: usize, c_n: f64) -> Result<f64> {
    bounds.validate()?;
    if !(c_n > 0.0) {
        return Err(Error::domain(format!("C_n = {c_n} must be positive")));
    }
    Ok(c_n * bounds.K.powi(n as i32 + 1) / bounds.m * (1.0 + bounds.L.sqrt()))
}

/// C_n λ⁻¹Λ³((1+M)⁻²N² + λ⁻¹Λ(1+M)) r⁻².
pub fn theorem61_rhs(b: &HessianBounds, c_n: f64) -> f64 {
    c_n / b.lambda * b.Lambda.powi(3) * (b.N * b.N / (1.0 + b.M).powi(2) + b.Lambda / b.lambda * (1.0 + b.M)) / (b.r * b.r)
}

/// Same lattice and mask as `u`, filled with log f.
fn log_field(u: &GridField, f: &dyn Fn(&[f64]) -> f64) -> Result<GridField> {
    let dim = u.dim();
    let mut phi = u.clone();
    for i in 0..phi.len() {
        if phi.mask[i] == Cell::Exterior {
            continue;
        }
        let v = f(&u.point(i)[..dim]);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Hypothesis(format!(
                "f = {v} is not bounded below by a positive constant at {:?}",
                &u.point(i)[..dim]
            )));
        }
        phi.values[i] = v.ln();
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Theorem61Ledger {
    pub bounds: HessianBounds,
    pub c_n: f64,
    /// max over B_{r/2} of Σ|u_{ij̄k}|².
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// max over B_{r/2} of |u_{ij̄k}|²_g.
    pub s_max: f64,
    /// max of Σ|u_{ij̄k}|² − Λ³|u_{ij̄k}|²_g (≤ 0 when the relation holds).
    pub lambda3_gap: f64,
    /// Coefficient A = 2C₁(1+M)λ⁻¹r₀² with C₁ = C_n, r₀ = 3r/4.
    pub A: f64,
    pub g_max: f64,
    pub g_argmax: Vec<f64>,
}

/// Evaluates the interior C³ bound for `u` on the ball `domain`.
/// `u` needs a 2-cell collar and must cover the ball.
pub fn theorem61_ledger(
    u: &GridField,
    f: &dyn Fn(&[f64]) -> f64,
    domain: &BallDomain,
    c_n: f64,
) -> Result<Theorem61Ledger> {
    u.require_collar(2)?;
    if !(c_n > 0.0) {
        return Err(Error::domain(format!("C_n = {c_n} must be positive")));
    }
    let n = u.n;
    let dim = u.dim();
    let r = domain.radius;
    let phi = log_field(u, f)?;
    let c = &domain.center[..dim];
    let pts: Vec<usize> = u.interior().filter(|&i| domain.contains(&u.point(i))).collect();
    if pts.is_empty() {
        return Err(Error::Resolution("no interior grid points inside the ledger ball".into()));
    }
    let mut lambda = f64::INFINITY;
    let mut big = 0.0f64;
    let mut m_phi = 0.0f64;
    let mut n_phi = 0.0f64;
    for &i in &pts {
        let h = u.complex_hessian_at(i);
        lambda = lambda.min(h.min_eig());
        big = big.max(h.max_eig());
        let pj = phi.jet_at(i, 3);
        let ph = pj.complex_hessian(n);
        let e = ph.herm_eigs();
        m_phi = m_phi.max(e[0].abs()).max(e[1].abs());
        n_phi = n_phi.max(mixed_norm2(n, &pj.mixed3(n)).sqrt());
    }
    if !(lambda > 0.0) {
        return Err(Error::PdLoss(format!("min eigenvalue {lambda} on the ledger ball")));
    }
    let bounds = HessianBounds {
        lambda,
        Lambda: big,
        M: m_phi * r * r,
        N: n_phi * r * r * r,
        r,
        K: 0.0,
        m: 1.0,
        L: 0.0,
    };
    let r0 = 0.75 * r;
    let a_coef = 2.0 * c_n * (1.0 + bounds.M) / lambda * r0 * r0;
    let mut lhs = 0.0f64;
    let mut s_max = 0.0f64;
    let mut gap = f64::NEG_INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    let mut g_arg = Vec::new();
    for &i in &pts {
        let p = u.point(i);
        let d = dist(&p[..dim], c);
        let jet = u.jet_at(i, 3);
        let h = jet.complex_hessian(n);
        let w = jet.mixed3(n);
        let sm = s_mixed(&h, &w)?;
        let e2 = mixed_norm2(n, &w);
        gap = gap.max(e2 - big.powi(3) * sm);
        if d < 0.5 * r {
            lhs = lhs.max(e2);
            s_max = s_max.max(sm);
        }
        if d < r0 {
            let xi = (r0 * r0 - d * d).powi(2);
            let g = xi * xi * sm + a_coef / lambda * h.trace().re;
            if g > g_max {
                g_max = g;
                g_arg = p[..dim].to_vec();
            }
        }
    }
    let rhs = theorem61_rhs(&bounds, c_n);
    Ok(Theorem61Ledger {
        bounds,
        c_n,
        lhs,
        rhs,
        ratio: lhs / rhs,
        s_max,
        lambda3_gap: gap,
        A: a_coef,
        g_max,
        g_argmax: g_arg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop24Record {
    pub bounds: HessianBounds,
    /// sup_x d_x |∇(u_{ij̄})(x)|.
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Measures [u_{ij̄}]*₁ on `domain` and the bound inputs K = sup Σu_{kk̄},
/// m = inf f, L = [log f]*₂ + [log f]*₃ (real derivatives, weighted by d_x).
pub fn measure_prop24(
    u: &GridField,
    f: &dyn Fn(&[f64]) -> f64,
    domain: &BallDomain,
    c_n: f64,
) -> Result<Prop24Record> {
    u.require_collar(2)?;
    let n = u.n;
    let dim = u.dim();
    let phi = log_field(u, f)?;
    let mut k_max = 0.0f64;
    let mut m_min = f64::INFINITY;
    let mut l2 = 0.0f64;
    let mut l3 = 0.0f64;
    let mut measured = 0.0f64;
    let mut lambda = f64::INFINITY;
    let mut big = 0.0f64;
    for i in u.interior() {
        let p = u.point(i);
        if !domain.contains(&p) {
            continue;
        }
        let dx = domain.boundary_distance(&p);
        let jet = u.jet_at(i, 3);
        let h = jet.complex_hessian(n);
        k_max = k_max.max(h.trace().re);
        lambda = lambda.min(h.min_eig());
        big = big.max(h.max_eig());
        m_min = m_min.min(f(&p[..dim]));
        // |∇u_{ij̄}|² summed over entries = 4 Σ|u_{ij̄k}|².
        measured = measured.max(dx * 2.0 * mixed_norm2(n, &jet.mixed3(n)).sqrt());
        let pj = phi.jet_at(i, 3);
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                s2 += pj.d2[a][b].powi(2);
                for c in 0..dim {
                    s3 += pj.d3[a][b][c].powi(2);
                }
            }
        }
        l2 = l2.max(dx * dx * s2.sqrt());
        l3 = l3.max(dx * dx * dx * s3.sqrt());
    }
    if !(m_min.is_finite()) {
        return Err(Error::Resolution("no interior grid points inside the domain".into()));
    }
    let bounds = HessianBounds {
        lambda,
        Lambda: big,
        M: 0.0,
        N: 0.0,
        r: domain.radius,
        K: k_max,
        m: m_min,
        L: l2 + l3,
    };
    let bound = prop24_bound(&bounds, n, c_n)?;
    Ok(Prop24Record {
        bounds,
        measured,
        bound,
        ratio: measured / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{test_solution, third_derivatives, CatalogKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cube(name: &str, n: usize, center: &[f64], h: f64, collar: usize) -> (GridField, crate::field::TestSolution) {
        let s = test_solution(name, n).unwrap();
        let g = GridField::sample_cube(n, center, 2, h, collar, |x| s.u(x)).unwrap();
        (g, s)
    }

    #[test]
    fn quadratic_has_zero_s() {
        let (g, _) = cube("QUAD", 2, &[0.1, 0.2, -0.3, 0.0], 0.1, 2);
        let s = compute_s(&g).unwrap();
        assert!(s.defined().all(|i| s.values[i].abs() < 1e-12));
        let s = compute_s_mixed(&g).unwrap();
        assert!(s.defined().all(|i| s.values[i].abs() < 1e-12));
    }

    #[test]
    fn pluri3_center_value() {
        for t in [0.1, 0.05, 0.3] {
            let name = format!("PLURI3:{t}");
            let (g, _) = cube(&name, 2, &[0.0; 4], 0.05, 2);
            let s = compute_s(&g).unwrap();
            let c = g.lattice.nearest(&[0.0; 4]).unwrap();
            assert_abs_diff_eq!(s.values[c], 9.0 * t * t, epsilon = 1e-9);
            // Mixed third derivatives vanish: the perturbation is pluriharmonic.
            let sm = compute_s_mixed(&g).unwrap();
            assert!(sm.values[c].abs() < 1e-9);
        }
    }

    #[test]
    fn exp_s_vanishes_at_origin() {
        let (g, _) = cube("EXP", 2, &[0.0; 4], 0.02, 2);
        let s = compute_s(&g).unwrap();
        let c = g.lattice.nearest(&[0.0; 4]).unwrap();
        assert!(s.values[c].abs() < 1e-10, "{}", s.values[c]);
    }

    #[test]
    fn s_adds_pluriharmonic_invariance() {
        // u + Re(z₁z₂) has the same third derivatives and Hessian as u.
        let e = test_solution("EXP", 2).unwrap();
        let c = [0.2, -0.1, 0.1, 0.3];
        let a = GridField::sample_cube(2, &c, 2, 0.05, 2, |x| e.u(x)).unwrap();
        let b = GridField::sample_cube(2, &c, 2, 0.05, 2, |x| e.u(x) + x[0] * x[2] - x[1] * x[3]).unwrap();
        let sa = compute_s(&a).unwrap();
        let sb = compute_s(&b).unwrap();
        for i in sa.interior() {
            assert_abs_diff_eq!(sa.values[i], sb.values[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn non_pd_is_rejected() {
        let g = GridField::sample_cube(1, &[0.0, 0.0], 4, 0.05, 2, |x| -(x[0] * x[0] + x[1] * x[1])).unwrap();
        assert!(matches!(compute_s(&g), Err(Error::PdLoss(_))));
        let f = |_: &[f64]| -1.0;
        let (q, _) = cube("QUAD", 1, &[0.0, 0.0], 0.1, 2);
        let ball = BallDomain::new(1, &[0.0, 0.0], 0.1).unwrap();
        assert!(matches!(theorem61_ledger(&q, &f, &ball, 1.0), Err(Error::Hypothesis(_))));
    }

    fn cmat_from(v: &[f64; 4]) -> CMat {
        // PD Hermitian 2×2 from a, c > 0 and an off-diagonal small enough.
        let (a, c) = (1.0 + v[0].abs(), 1.0 + v[1].abs());
        let b = C64::new(0.4 * v[2], 0.4 * v[3]);
        CMat {
            n: 2,
            m: [[C64::new(a, 0.0), b], [b.conj(), C64::new(c, 0.0)]],
        }
    }

    fn tensor_from(v: &[f64]) -> Tensor3 {
        let mut t = [[[zero(); 2]; 2]; 2];
        let mut k = 0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    t[a][b][c] = C64::new(v[k], v[k + 1]);
                    k += 2;
                }
            }
        }
        t
    }

    fn unitary(th: f64, ph: f64) -> CMat {
        let (c, s) = (th.cos(), th.sin());
        let e = C64::new(ph.cos(), ph.sin());
        CMat {
            n: 2,
            m: [[C64::new(c, 0.0), -e.conj() * s], [e * s, C64::new(c, 0.0)]],
        }
    }

    proptest! {
        #[test]
        fn s_is_nonnegative_and_covariant(
            hv in prop::array::uniform4(-1.0f64..1.0),
            tv in prop::collection::vec(-1.0f64..1.0, 16),
            th in 0.0f64..6.3, ph in 0.0f64..6.3,
        ) {
            let h = cmat_from(&hv);
            let t = tensor_from(&tv);
            let s = s_holomorphic(&h, &t).unwrap();
            let sm = s_mixed(&h, &t).unwrap();
            prop_assert!(s >= -1e-12 && sm >= -1e-12);
            // z = A w: M' = AᵀMĀ, holomorphic slots pick up A, antiholomorphic Ā.
            let a = unitary(th, ph);
            let at = CMat::from_fn(2, |i, j| a.get(j, i));
            let h2 = at.mul(&h).mul(&a.conj());
            let mut th3 = [[[zero(); 2]; 2]; 2];
            let mut tm3 = [[[zero(); 2]; 2]; 2];
            for x in 0..2 { for y in 0..2 { for z in 0..2 {
                for i in 0..2 { for j in 0..2 { for k in 0..2 {
                    th3[x][y][z] += a.get(i, x) * a.get(j, y) * a.get(k, z) * t[i][j][k];
                    tm3[x][y][z] += a.get(i, x) * a.get(j, y).conj() * a.get(k, z) * t[i][j][k];
                }}}
            }}}
            prop_assert!((s_holomorphic(&h2, &th3).unwrap() - s).abs() <= 1e-10 * (1.0 + s));
            prop_assert!((s_mixed(&h2, &tm3).unwrap() - sm).abs() <= 1e-10 * (1.0 + sm));
            // Σ|W|² ≤ Λ³ |W|²_g.
            prop_assert!(mixed_norm2(2, &t) <= h.max_eig().powi(3) * sm * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn identity_residual_is_second_order() {
        let e = test_solution("EXP", 2).unwrap();
        let c = [0.2, -0.1, 0.1, 0.3];
        let mut res = Vec::new();
        for h in [0.08, 0.04, 0.02] {
            let g = GridField::sample_cube(2, &c, 2, h, 2, |x| e.u(x)).unwrap();
            let s = identity_samples(&g).unwrap();
            assert_eq!(s.len(), 1);
            assert!(s[0].1.quadratic > 0.0);
            res.push(s[0].1.residual);
        }
        for w in res.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "{res:?}");
        }
    }

    #[test]
    fn gradient_inequality_holds() {
        let e = test_solution("EXP", 2).unwrap();
        let c = [0.3, -0.2, 0.1, 0.25];
        let g = GridField::sample_cube(2, &c, 4, 0.01, 3, |x| e.u(x)).unwrap();
        let s = gradient_samples(&g).unwrap();
        assert!(!s.is_empty());
        for (_, v) in s {
            assert!(v.t >= 0.0 && v.s > 0.0);
            assert!(v.lhs <= v.rhs + 1e-4 * (1.0 + v.rhs), "{v:?}");
        }
    }

    #[test]
    fn chern_derivatives_reproduce_grad_s() {
        // ∂_l S = ⟨D_l W, W⟩ + ⟨W, D_l̄ W⟩ against central differences of S.
        let e = test_solution("EXP", 2).unwrap();
        let c = [0.3, -0.2, 0.1, 0.25];
        let g = GridField::sample_cube(2, &c, 3, 0.005, 3, |x| e.u(x)).unwrap();
        let s_field = compute_s_mixed(&g).unwrap();
        let i = g.lattice.nearest(&c).unwrap();
        let jet = g.jet_at(i, 4);
        let h = jet.complex_hessian(2);
        let w = jet.mixed3(2);
        let (inv, dw, dbw) = chern_derivatives(
            &h,
            &w,
            &jet.complex4(2, [false, true, false, false]),
            &jet.complex4(2, [false, true, false, true]),
        )
        .unwrap();
        let grad = s_field.gradient_at(i);
        for l in 0..2 {
            let mut acc = zero();
            for (i1, j, k, a, b, cc) in index6(2) {
                let pair = inv.get(a, i1) * inv.get(j, b) * inv.get(cc, k);
                acc += pair * (dw[l][i1][j][k] * w[a][b][cc].conj() + w[i1][j][k] * dbw[l][a][b][cc].conj());
            }
            let num = C64::new(0.5 * grad[2 * l], -0.5 * grad[2 * l + 1]);
            assert!((acc - num).norm() < 1e-3 * (1.0 + num.norm()), "{acc} {num}");
        }
    }

    fn index6(n: usize) -> Vec<(usize, usize, usize, usize, usize, usize)> {
        let mut v = Vec::new();
        for a in 0..n.pow(6) {
            let d = |p: u32| a / n.pow(p) % n;
            v.push((d(0), d(1), d(2), d(3), d(4), d(5)));
        }
        v
    }

    #[test]
    fn ledger_trivial_cases_and_scaling() {
        let one = |_: &[f64]| 1.0;
        let q = test_solution("QUAD", 2).unwrap();
        let ball = BallDomain::new(2, &[0.0; 4], 0.2).unwrap();
        let g = GridField::sample_ball(ball, 0.05, 2, |x| q.u(x)).unwrap();
        let led = theorem61_ledger(&g, &one, &ball, 1.0).unwrap();
        assert!(led.lhs < 1e-20 && led.ratio < 1e-20);

        let p = test_solution("PLURI3:0.1", 2).unwrap();
        let g = GridField::sample_ball(ball, 0.05, 2, |x| p.u(x)).unwrap();
        let led = theorem61_ledger(&g, &one, &ball, 1.0).unwrap();
        assert!(led.lhs < 1e-18, "{}", led.lhs);
        assert!(compute_s(&g).unwrap().sup_interior() > 0.0);

        let mut ratios = Vec::new();
        let e = test_solution("EXP", 1).unwrap();
        let fe = |x: &[f64]| e.f(x);
        for r in [1.0, 0.5, 0.25] {
            // ũ(w) = u(rw)/r² on the unit ball, grid spacing scaled with r.
            let unit = BallDomain::new(1, &[0.0, 0.0], 1.0).unwrap();
            let g = GridField::sample_ball(unit, 1.0 / 16.0, 2, |w| e.u(&[r * w[0], r * w[1]]) / (r * r)).unwrap();
            let f = |w: &[f64]| fe(&[r * w[0], r * w[1]]);
            let led = theorem61_ledger(&g, &f, &unit, 1.0).unwrap();
            let big = BallDomain::new(1, &[0.0, 0.0], r).unwrap();
            let gb = GridField::sample_ball(big, r / 16.0, 2, |x| e.u(x)).unwrap();
            let lb = theorem61_ledger(&gb, &fe, &big, 1.0).unwrap();
            assert_abs_diff_eq!(led.lhs, lb.lhs * r * r, epsilon = 1e-8 * (1.0 + lb.lhs));
            ratios.push(lb.ratio);
        }
        assert!(ratios.iter().all(|x| x.is_finite() && *x > 0.0));
    }

    #[test]
    fn prop24_trivial() {
        let b = HessianBounds {
            lambda: 1.0,
            Lambda: 1.0,
            M: 0.0,
            N: 0.0,
            r: 1.0,
            K: 1.0,
            m: 1.0,
            L: 0.0,
        };
        assert_eq!(prop24_bound(&b, 2, 3.5).unwrap(), 3.5);
        let mut bad = b;
        bad.m = 0.0;
        assert!(prop24_bound(&bad, 2, 1.0).is_err());
        let q = test_solution("QUAD", 1).unwrap();
        let unit = BallDomain::new(1, &[0.0, 0.0], 1.0).unwrap();
        let g = GridField::sample_ball(unit, 1.0 / 8.0, 2, |x| q.u(x)).unwrap();
        let rec = measure_prop24(&g, &|_| 1.0, &unit, 1.0).unwrap();
        assert!(rec.measured < 1e-10 && rec.measured <= rec.bound);
        let _ = (third_derivatives, CatalogKind::Quad);
    }
}
