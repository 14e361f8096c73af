//! Central finite differences and their Wirtinger combinations.
//!
//! Second derivatives use the 3-point / 4-point-mixed stencils; third and
//! fourth derivatives are compositions of those (reach 2), symmetrised over
//! the index pairings so the resulting tensors are exactly symmetric.

use alloc::vec::Vec;

use super::{GridField, Lattice};
use crate::error::Result;
use crate::linalg::{CMat, C64};
use crate::MAX_DIM;

pub type Tensor3 = [[[C64; 2]; 2]; 2];
pub type Tensor4 = [[[[C64; 2]; 2]; 2]; 2];

/// A per-point quantity over the interior points of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField<T> {
    pub n: usize,
    pub lattice: Lattice,
    pub points: Vec<usize>,
    pub data: Vec<T>,
}

pub type HermitianField = PointField<CMat>;

impl HermitianField {
    pub fn max_hermitian_defect(&self) -> f64 {
        self.data.iter().map(|m| m.hermitian_defect()).fold(0.0, f64::max)
    }

    pub fn min_eig(&self) -> f64 {
        self.data.iter().map(|m| m.min_eig()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_eig(&self) -> f64 {
        self.data.iter().map(|m| m.max_eig()).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl GridField {
    #[inline]
    fn step(&self, a: usize) -> isize {
        self.lattice.strides[a] as isize
    }

    /// ∂²u/∂x_a∂x_b at `idx` (reach 1).
    #[inline]
    pub fn d2(&self, idx: usize, a: usize, b: usize) -> f64 {
        self.d2_off(idx, 0, a, b)
    }

    #[inline]
    fn d2_off(&self, idx: usize, o: isize, a: usize, b: usize) -> f64 {
        let h2 = self.lattice.h * self.lattice.h;
        let sa = self.step(a);
        if a == b {
            (self.at(idx, o + sa) - 2.0 * self.at(idx, o) + self.at(idx, o - sa)) / h2
        } else {
            let sb = self.step(b);
            (self.at(idx, o + sa + sb) - self.at(idx, o + sa - sb) - self.at(idx, o - sa + sb)
                + self.at(idx, o - sa - sb))
                / (4.0 * h2)
        }
    }

    #[inline]
    fn d1c_d2(&self, idx: usize, c: usize, a: usize, b: usize) -> f64 {
        let sc = self.step(c);
        (self.d2_off(idx, sc, a, b) - self.d2_off(idx, -sc, a, b)) / (2.0 * self.lattice.h)
    }

    fn d2cd_d2ab(&self, idx: usize, c: usize, d: usize, a: usize, b: usize) -> f64 {
        let h2 = self.lattice.h * self.lattice.h;
        let sc = self.step(c);
        if c == d {
            (self.d2_off(idx, sc, a, b) - 2.0 * self.d2_off(idx, 0, a, b)
                + self.d2_off(idx, -sc, a, b))
                / h2
        } else {
            let sd = self.step(d);
            (self.d2_off(idx, sc + sd, a, b)
                - self.d2_off(idx, sc - sd, a, b)
                - self.d2_off(idx, -sc + sd, a, b)
                + self.d2_off(idx, -sc - sd, a, b))
                / (4.0 * h2)
        }
    }

    /// Symmetrised third derivative ∂³u/∂x_a∂x_b∂x_c (reach 2).
    pub fn d3(&self, idx: usize, a: usize, b: usize, c: usize) -> f64 {
        if a == b && b == c {
            return self.d1c_d2(idx, c, a, b);
        }
        (self.d1c_d2(idx, c, a, b) + self.d1c_d2(idx, a, b, c) + self.d1c_d2(idx, b, a, c)) / 3.0
    }

    /// Symmetrised fourth derivative (reach 2).
    pub fn d4(&self, idx: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        (self.d2cd_d2ab(idx, c, d, a, b)
            + self.d2cd_d2ab(idx, b, d, a, c)
            + self.d2cd_d2ab(idx, b, c, a, d))
            / 3.0
    }

    /// Real Hessian (dim × dim, zero-padded).
    pub fn real_hessian_at(&self, idx: usize) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        let dim = self.dim();
        for a in 0..dim {
            for b in a..dim {
                let v = self.d2(idx, a, b);
                m[a][b] = v;
                m[b][a] = v;
            }
        }
        m
    }

    /// Sum of the pure second differences (the (2·dim+1)-point Laplacian).
    pub fn laplacian_at(&self, idx: usize) -> f64 {
        (0..self.dim()).map(|a| self.d2(idx, a, a)).sum()
    }

    /// (u_{ij̄}) = ¼[(D_{x_i x_j} + D_{y_i y_j}) + i(D_{x_i y_j} − D_{y_i x_j})].
    pub fn complex_hessian_at(&self, idx: usize) -> CMat {
        let n = self.n;
        let mut m = CMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                let re = self.d2(idx, xi, xj) + self.d2(idx, yi, yj);
                let im = if i == j {
                    0.0
                } else {
                    self.d2(idx, xi, yj) - self.d2(idx, yi, xj)
                };
                m.m[i][j] = C64::new(0.25 * re, 0.25 * im);
            }
        }
        m
    }

    /// Real derivative jet up to `order` (≤ 4) at `idx`.
    pub fn jet_at(&self, idx: usize, order: usize) -> RealJet {
        let dim = self.dim();
        let mut jet = RealJet::new(dim);
        jet.d1 = self.gradient_at(idx);
        jet.d2 = self.real_hessian_at(idx);
        if order >= 3 {
            for a in 0..dim {
                for b in a..dim {
                    for c in b..dim {
                        let v = self.d3(idx, a, b, c);
                        for p in perms3([a, b, c]) {
                            jet.d3[p[0]][p[1]][p[2]] = v;
                        }
                    }
                }
            }
        }
        if order >= 4 {
            for a in 0..dim {
                for b in a..dim {
                    for c in b..dim {
                        for d in c..dim {
                            let v = self.d4(idx, a, b, c, d);
                            for p in perms4([a, b, c, d]) {
                                jet.d4[p[0]][p[1]][p[2]][p[3]] = v;
                            }
                        }
                    }
                }
            }
        }
        jet
    }
}

fn perms3(v: [usize; 3]) -> [[usize; 3]; 6] {
    let [a, b, c] = v;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

fn perms4(v: [usize; 4]) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    if i != j && i != k && i != l && j != k && j != l && k != l {
                        out.push([v[i], v[j], v[k], v[l]]);
                    }
                }
            }
        }
    }
    out
}

/// Real derivatives of orders 1–4 at one point (only the first `dim` axes used).
#[derive(Debug, Clone, PartialEq)]
pub struct RealJet {
    pub dim: usize,
    pub d1: [f64; MAX_DIM],
    pub d2: [[f64; MAX_DIM]; MAX_DIM],
    pub d3: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
    pub d4: [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl RealJet {
    pub fn new(dim: usize) -> Self {
        RealJet {
            dim,
            d1: [0.0; MAX_DIM],
            d2: [[0.0; MAX_DIM]; MAX_DIM],
            d3: [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM],
            d4: [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
        }
    }

    fn real(&self, axes: &[usize]) -> f64 {
        match axes.len() {
            1 => self.d1[axes[0]],
            2 => self.d2[axes[0]][axes[1]],
            3 => self.d3[axes[0]][axes[1]][axes[2]],
            4 => self.d4[axes[0]][axes[1]][axes[2]][axes[3]],
            _ => 0.0,
        }
    }

    /// Wirtinger derivative along `dirs`: `(k, false)` is ∂/∂z_k and
    /// `(k, true)` is ∂/∂z̄_k, with ∂_z = ½(∂_x − i∂_y), ∂_z̄ = ½(∂_x + i∂_y).
    pub fn wirtinger(&self, dirs: &[(usize, bool)]) -> C64 {
        let k = dirs.len();
        let mut acc = C64::new(0.0, 0.0);
        let mut axes = [0usize; 4];
        for combo in 0..(1usize << k) {
            let mut coef = C64::new(1.0, 0.0);
            for (slot, &(z, bar)) in dirs.iter().enumerate() {
                if combo >> slot & 1 == 0 {
                    axes[slot] = 2 * z;
                    coef *= 0.5;
                } else {
                    axes[slot] = 2 * z + 1;
                    coef *= if bar { C64::new(0.0, 0.5) } else { C64::new(0.0, -0.5) };
                }
            }
            acc += coef * self.real(&axes[..k]);
        }
        acc
    }

    /// u_{ijk} = ∂³u/∂z_i∂z_j∂z_k.
    pub fn holomorphic3(&self, n: usize) -> Tensor3 {
        let mut t = [[[C64::new(0.0, 0.0); 2]; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[i][j][k] = self.wirtinger(&[(i, false), (j, false), (k, false)]);
                }
            }
        }
        t
    }

    /// `t[i][j][k]` = u_{i j̄ k} = ∂³u/∂z_i∂z̄_j∂z_k.
    pub fn mixed3(&self, n: usize) -> Tensor3 {
        let mut t = [[[C64::new(0.0, 0.0); 2]; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[i][j][k] = self.wirtinger(&[(i, false), (j, true), (k, false)]);
                }
            }
        }
        t
    }

    /// Fourth Wirtinger derivative with barred slots flagged in `bars`.
    pub fn complex4(&self, n: usize, bars: [bool; 4]) -> Tensor4 {
        let mut t = [[[[C64::new(0.0, 0.0); 2]; 2]; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t[i][j][k][l] = self.wirtinger(&[
                            (i, bars[0]),
                            (j, bars[1]),
                            (k, bars[2]),
                            (l, bars[3]),
                        ]);
                    }
                }
            }
        }
        t
    }

    /// (u_{ij̄}) from the real Hessian.
    pub fn complex_hessian(&self, n: usize) -> CMat {
        CMat::from_fn(n, |i, j| self.wirtinger(&[(i, false), (j, true)]))
    }
}

/// Discrete complex Hessian at every interior point (needs a 1-cell collar).
pub fn complex_hessian(u: &GridField) -> Result<HermitianField> {
    u.require_collar(1)?;
    let points: Vec<usize> = u.interior().collect();
    let data = points.iter().map(|&i| u.complex_hessian_at(i)).collect();
    Ok(PointField {
        n: u.n,
        lattice: u.lattice,
        points,
        data,
    })
}

/// det(u_{ij̄}) on the interior; the result has no collar.
pub fn ma_determinant(u: &GridField) -> Result<GridField> {
    u.require_collar(1)?;
    u.derive(u.collar, |f, i| f.complex_hessian_at(i).det().re)
}

/// Σ_k u_{kk̄} = ¼Δu, kept on the interior and the shrunk collar.
pub fn complex_laplacian(u: &GridField) -> Result<GridField> {
    u.derive(1, |f, i| 0.25 * f.laplacian_at(i))
}

/// u_{ijk} at every interior point (needs a 2-cell collar).
pub fn third_derivatives(u: &GridField) -> Result<PointField<Tensor3>> {
    u.require_collar(2)?;
    let points: Vec<usize> = u.interior().collect();
    let data = points.iter().map(|&i| u.jet_at(i, 3).holomorphic3(u.n)).collect();
    Ok(PointField {
        n: u.n,
        lattice: u.lattice,
        points,
        data,
    })
}

impl<T> PointField<T> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, &T)> {
        self.points.iter().copied().zip(self.data.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{test_solution, BallDomain};
    use approx::assert_abs_diff_eq;
    use num_complex::ComplexFloat;

    fn z(x: &[f64], k: usize) -> C64 {
        C64::new(x[2 * k], x[2 * k + 1])
    }

    fn abs2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn ball(n: usize, r: f64) -> BallDomain {
        BallDomain::new(n, &[0.05, -0.1, 0.1, 0.02][..2 * n], r).unwrap()
    }

    #[test]
    fn quadratic_gives_identity_exactly() {
        for n in [1, 2] {
            let u = GridField::sample_ball(ball(n, 0.5), 0.1, 1, abs2).unwrap();
            let hf = complex_hessian(&u).unwrap();
            for m in &hf.data {
                assert!(m.sub(&CMat::identity(n)).frobenius() < 1e-12);
            }
            let det = ma_determinant(&u).unwrap();
            for i in det.interior() {
                assert_abs_diff_eq!(det.values[i], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quartic_hessian_matches_symbolic_oracle() {
        // u = |z|⁴: u_{ij̄} = 2|z|²δ_ij + 2 z̄_i z_j, det = 8|z|⁴ (n = 2).
        let u = GridField::sample_ball(ball(2, 0.5), 0.05, 1, |x| abs2(x).powi(2)).unwrap();
        let hf = complex_hessian(&u).unwrap();
        let mut max_err: f64 = 0.0;
        for (idx, m) in hf.iter() {
            let p = u.point(idx);
            let r2 = abs2(&p);
            let exact = CMat::from_fn(2, |i, j| {
                let d = if i == j { 2.0 * r2 } else { 0.0 };
                C64::new(d, 0.0) + 2.0 * z(&p, i).conj() * z(&p, j)
            });
            max_err = max_err.max(m.sub(&exact).frobenius());
            assert_abs_diff_eq!(exact.det().re, 8.0 * r2 * r2, epsilon = 1e-12);
            assert!(m.hermitian_defect() < 1e-13);
        }
        // Stencil error for a quartic is a constant multiple of h².
        assert!(max_err < 4.0 * 0.05 * 0.05, "{max_err}");
    }

    #[test]
    fn pluriharmonic_has_zero_hessian() {
        let re_z3 = |x: &[f64]| x[0].powi(3) - 3.0 * x[0] * x[1] * x[1];
        for n in [1, 2] {
            let u = GridField::sample_ball(ball(n, 0.5), 0.1, 1, re_z3).unwrap();
            let hf = complex_hessian(&u).unwrap();
            assert!(hf.data.iter().all(|m| m.frobenius() < 1e-11));
        }
    }

    #[test]
    fn n1_determinant_is_quarter_laplacian() {
        let sol = test_solution("EXP", 1).unwrap();
        let u = GridField::sample_ball(ball(1, 0.5), 0.05, 1, |x| sol.u(x)).unwrap();
        let det = ma_determinant(&u).unwrap();
        for i in det.interior() {
            let h = u.h();
            let s0 = u.lattice.strides[0] as isize;
            let s1 = u.lattice.strides[1] as isize;
            let lap5 = (u.at(i, s0) + u.at(i, -s0) + u.at(i, s1) + u.at(i, -s1) - 4.0 * u.values[i])
                / (h * h);
            assert!((det.values[i] - 0.25 * lap5).abs() < 1e-12 * (1.0 + lap5.abs()));
        }
    }

    #[test]
    fn ma_determinant_second_order_on_smooth_catalog() {
        for (name, n) in [("EXP", 1), ("EXP", 2), ("PLURI3:0.3", 2), ("QUAD", 2)] {
            let sol = test_solution(name, n).unwrap();
            let mut errs = Vec::new();
            for h in [0.1, 0.05, 0.025, 0.0125] {
                if n == 2 && h < 0.02 {
                    break;
                }
                let u = GridField::sample_ball(ball(n, 0.4), h, 1, |x| sol.u(x)).unwrap();
                let det = ma_determinant(&u).unwrap();
                let err = det
                    .interior()
                    .map(|i| (det.values[i] - sol.f(&u.point(i)[..2 * n])).abs())
                    .fold(0.0, f64::max);
                errs.push(err);
            }
            for w in errs.windows(2) {
                if w[0] > 1e-11 {
                    assert!(w[0] / w[1] >= 3.5, "{name} n={n}: {errs:?}");
                } else {
                    assert!(w[1] < 1e-11);
                }
            }
        }
    }

    #[test]
    fn third_derivative_oracles() {
        let t = 0.3;
        let u = GridField::sample_ball(ball(2, 0.4), 0.05, 2, |x| {
            abs2(x) + t * (x[0].powi(3) - 3.0 * x[0] * x[1] * x[1])
        })
        .unwrap();
        let tf = third_derivatives(&u).unwrap();
        for tensor in &tf.data {
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let expect = if i + j + k == 0 { 3.0 * t } else { 0.0 };
                        assert!((tensor[i][j][k] - expect).abs() < 1e-9);
                    }
                }
            }
        }
        let q = GridField::sample_ball(ball(2, 0.4), 0.1, 2, abs2).unwrap();
        let tq = third_derivatives(&q).unwrap();
        assert!(tq.data.iter().flatten().flatten().flatten().all(|v| v.abs() < 1e-9));

        let e = GridField::sample_ball(BallDomain::new(2, &[0.0; 4], 0.4).unwrap(), 0.05, 2, |x| {
            abs2(x).exp()
        })
        .unwrap();
        let c = e.lattice.nearest(&[0.0; 4]).unwrap();
        let t0 = e.jet_at(c, 3).holomorphic3(2);
        assert!(t0.iter().flatten().flatten().all(|v| v.abs() < 1e-9));
        assert!(matches!(
            third_derivatives(&GridField::sample_ball(ball(1, 0.4), 0.1, 1, abs2).unwrap()),
            Err(crate::Error::Collar { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn third_derivatives_symmetric() {
        let sol = test_solution("EXP", 2).unwrap();
        let u = GridField::sample_ball(ball(2, 0.3), 0.075, 2, |x| sol.u(x) + x[1] * x[2] * x[3] * x[0])
            .unwrap();
        let tf = third_derivatives(&u).unwrap();
        for t in &tf.data {
            for p in perms3([0, 1, 1]).iter().chain(perms3([0, 0, 1]).iter()) {
                assert!((t[p[0]][p[1]][p[2]] - t[p[1]][p[2]][p[0]]).abs() < 1e-12);
                assert!((t[p[0]][p[1]][p[2]] - t[p[2]][p[1]][p[0]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wirtinger_of_monomials() {
        // u = z̄₁ z₁² z₂ expressed in real coordinates; u_{1 1̄ 1} = 2 z₂,
        // u_{1 1̄ 2} = 2 z₁, u_{1 1 1̄ 2} = 2 (exact on polynomials of degree 4).
        let f = |x: &[f64]| {
            let z1 = C64::new(x[0], x[1]);
            let z2 = C64::new(x[2], x[3]);
            (z1.conj() * z1 * z1 * z2).re
        };
        let fi = |x: &[f64]| {
            let z1 = C64::new(x[0], x[1]);
            let z2 = C64::new(x[2], x[3]);
            (z1.conj() * z1 * z1 * z2).im
        };
        let p = [0.1, 0.2, -0.3, 0.05];
        let gr = GridField::sample_cube(2, &p, 3, 0.05, 2, f).unwrap();
        let gi = GridField::sample_cube(2, &p, 3, 0.05, 2, fi).unwrap();
        let c = gr.lattice.nearest(&p).unwrap();
        let (jr, ji) = (gr.jet_at(c, 4), gi.jet_at(c, 4));
        let w = |d: &[(usize, bool)]| jr.wirtinger(d) + C64::new(0.0, 1.0) * ji.wirtinger(d);
        let z2 = C64::new(p[2], p[3]);
        let z1 = C64::new(p[0], p[1]);
        assert!((w(&[(0, false), (0, true), (0, false)]) - 2.0 * z2).abs() < 1e-9);
        assert!((w(&[(0, false), (0, true), (1, false)]) - 2.0 * z1).abs() < 1e-9);
        assert!((w(&[(0, false), (0, false), (0, true), (1, false)]) - 2.0).abs() < 1e-9);
        assert!(w(&[(0, false), (0, false), (0, false)]).abs() < 1e-9);
    }
}
