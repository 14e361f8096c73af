//! Small dense complex matrices (n ≤ 2) and sparse iterative solvers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense n×n complex matrix with n ∈ {1, 2}; unused entries are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub m: [[C64; 2]; 2],
}

impl CMat {
    pub fn zero(n: usize) -> Self {
        debug_assert!(n == 1 || n == 2);
        CMat { n, m: [[ZERO; 2]; 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zero(n);
        for i in 0..n {
            a.m[i][i] = ONE;
        }
        a
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut a = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                a.m[i][j] = f(i, j);
            }
        }
        a
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    pub fn add(&self, o: &CMat) -> CMat {
        CMat::from_fn(self.n, |i, j| self.m[i][j] + o.m[i][j])
    }

    pub fn sub(&self, o: &CMat) -> CMat {
        CMat::from_fn(self.n, |i, j| self.m[i][j] - o.m[i][j])
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat::from_fn(self.n, |i, j| self.m[i][j] * s)
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        CMat::from_fn(self.n, |i, j| {
            let mut acc = ZERO;
            for k in 0..self.n {
                acc += self.m[i][k] * o.m[k][j];
            }
            acc
        })
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self.m[j][i].conj())
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self.m[i][j].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.m[i][i]).sum()
    }

    pub fn det(&self) -> C64 {
        if self.n == 1 {
            self.m[0][0]
        } else {
            self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
        }
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.m[i][j].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// max |A − A*| entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.m[i][j] - self.m[j][i].conj()).norm());
            }
        }
        d
    }

    pub fn inverse(&self) -> Result<CMat> {
        let det = self.det();
        let scale = self.frobenius().powi(self.n as i32);
        if !(det.norm() > 1e-300 && det.norm() > 1e-14 * scale) {
            return Err(Error::Singular(format!("determinant {det} too small to invert")));
        }
        if self.n == 1 {
            return Ok(CMat::from_fn(1, |_, _| ONE / det));
        }
        let inv = ONE / det;
        let mut r = CMat::zero(2);
        r.m[0][0] = self.m[1][1] * inv;
        r.m[1][1] = self.m[0][0] * inv;
        r.m[0][1] = -self.m[0][1] * inv;
        r.m[1][0] = -self.m[1][0] * inv;
        Ok(r)
    }

    /// Eigenvalues (ascending) of the Hermitian part, closed form.
    /// For n = 1 both entries equal the single eigenvalue.
    pub fn herm_eigs(&self) -> [f64; 2] {
        if self.n == 1 {
            let a = self.m[0][0].re;
            return [a, a];
        }
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let b = (self.m[0][1] + self.m[1][0].conj()) * 0.5;
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    pub fn min_eig(&self) -> f64 {
        self.herm_eigs()[0]
    }

    pub fn max_eig(&self) -> f64 {
        self.herm_eigs()[1]
    }

    /// Hermitian positive-definite square root, closed form:
    /// √A = (A + √det·I)/√(tr A + 2√det) for n = 2.
    pub fn herm_sqrt(&self) -> Result<CMat> {
        if self.min_eig() <= 0.0 {
            return Err(Error::PdLoss(format!(
                "square root of a matrix with min eigenvalue {}",
                self.min_eig()
            )));
        }
        if self.n == 1 {
            return Ok(CMat::from_fn(1, |_, _| C64::new(self.m[0][0].re.sqrt(), 0.0)));
        }
        let sd = self.det().re.sqrt();
        let s = (self.trace().re + 2.0 * sd).sqrt();
        Ok(self.add(&CMat::identity(2).scale(C64::new(sd, 0.0))).scale(C64::new(1.0 / s, 0.0)))
    }

    pub fn herm_inv_sqrt(&self) -> Result<CMat> {
        self.herm_sqrt()?.inverse()
    }

    /// Re tr(A B) without forming the product.
    pub fn re_trace_product(&self, b: &CMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for k in 0..self.n {
                s += (self.m[i][k] * b.m[k][i]).re;
            }
        }
        s
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_capacity(nrows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        CsrMatrix {
            nrows: 0,
            row_ptr,
            col_idx: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    /// Appends a row; entries are sorted by column and duplicates summed.
    pub fn push_row(&mut self, entries: &mut [(usize, f64)]) {
        entries.sort_unstable_by_key(|e| e.0);
        let start = self.col_idx.len();
        for &(c, v) in entries.iter() {
            if self.col_idx.len() > start && *self.col_idx.last().unwrap() == c {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.col_idx.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        self.nrows += 1;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            *yr = acc;
        }
    }

    /// r = b − Ax with Neumaier-compensated row sums.
    pub fn residual_compensated(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        for (row, rr) in r.iter_mut().enumerate().take(self.nrows) {
            let mut sum = b[row];
            let mut c = 0.0;
            for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                let term = -(self.vals[p] * x[self.col_idx[p]]);
                let t = sum + term;
                c += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                sum = t;
            }
            *rr = sum + c;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&p| self.col_idx[p] == r)
                    .map_or(0.0, |p| self.vals[p])
            })
            .collect()
    }
}

/// Preconditioners for the Krylov solvers.
#[derive(Debug, Clone)]
pub enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    /// Incomplete LU with zero fill; `diag[r]` indexes the diagonal entry of row r.
    Ilu0 { lu: CsrMatrix, diag: Vec<usize> },
}

impl Precond {
    pub fn jacobi(a: &CsrMatrix) -> Result<Self> {
        let d = a.diagonal();
        let mut inv = Vec::with_capacity(d.len());
        for (r, v) in d.into_iter().enumerate() {
            if v == 0.0 {
                return Err(Error::Singular(format!("zero diagonal in row {r}")));
            }
            inv.push(1.0 / v);
        }
        Ok(Precond::Jacobi(inv))
    }

    pub fn ilu0(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.nrows;
        let mut diag = vec![usize::MAX; n];
        for (r, d) in diag.iter_mut().enumerate() {
            if let Some(p) = (lu.row_ptr[r]..lu.row_ptr[r + 1]).find(|&p| lu.col_idx[p] == r) {
                *d = p;
            } else {
                return Err(Error::Singular(format!("missing diagonal in row {r}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in s..e {
                pos[lu.col_idx[p]] = p;
            }
            for p in s..diag[i] {
                let k = lu.col_idx[p];
                let piv = lu.vals[diag[k]];
                if piv == 0.0 {
                    return Err(Error::Singular(format!("zero pivot in row {k}")));
                }
                let lik = lu.vals[p] / piv;
                lu.vals[p] = lik;
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[q];
                    let t = pos[j];
                    if t != usize::MAX {
                        lu.vals[t] -= lik * lu.vals[q];
                    }
                }
            }
            for p in s..e {
                pos[lu.col_idx[p]] = usize::MAX;
            }
            if lu.vals[diag[i]] == 0.0 {
                return Err(Error::Singular(format!("zero pivot in row {i}")));
            }
        }
        Ok(Precond::Ilu0 { lu, diag })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Ilu0 { lu, diag } => {
                let n = lu.nrows;
                for i in 0..n {
                    let mut acc = r[i];
                    for p in lu.row_ptr[i]..diag[i] {
                        acc -= lu.vals[p] * z[lu.col_idx[p]];
                    }
                    z[i] = acc;
                }
                for i in (0..n).rev() {
                    let mut acc = z[i];
                    for p in diag[i] + 1..lu.row_ptr[i + 1] {
                        acc -= lu.vals[p] * z[lu.col_idx[p]];
                    }
                    z[i] = acc / lu.vals[diag[i]];
                }
            }
        }
    }
}

/// Outcome of an iterative linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final ‖b − Ax‖₂.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for SPD `a`. Stops when
/// ‖r‖₂ ≤ `tol`·‖b‖₂ (absolute `tol` if b = 0).
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &Precond,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    cg_to(a, b, x, pre, tol * norm2(b).max(1.0), max_iter)
}

/// CG followed by `rounds` of iterative refinement against a compensated
/// residual. Drives the true residual well below what plain CG reaches when
/// its recurrence drifts from b − Ax.
pub fn cg_refined(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &Precond,
    tol: f64,
    max_iter: usize,
    rounds: usize,
) -> Result<KrylovStats> {
    let mut stats = cg(a, b, x, pre, tol, max_iter)?;
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];
    for _ in 0..rounds {
        a.residual_compensated(b, x, &mut r);
        let rn = norm2(&r);
        if rn == 0.0 {
            break;
        }
        d.iter_mut().for_each(|v| *v = 0.0);
        let s = cg_to(a, &r, &mut d, pre, 1e-3 * rn, max_iter)?;
        stats.iterations += s.iterations;
        for i in 0..n {
            x[i] += d[i];
        }
        stats.residual = rn;
    }
    Ok(stats)
}

fn cg_to(a: &CsrMatrix, b: &[f64], x: &mut [f64], pre: &Precond, target: f64, max_iter: usize) -> Result<KrylovStats> {
    let n = b.len();
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm2(&r);
    for it in 0..max_iter {
        if res <= target {
            return Ok(KrylovStats {
                iterations: it,
                residual: res,
            });
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm2(&r);
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= target {
        Ok(KrylovStats {
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

/// Right-preconditioned BiCGSTAB. Same stopping rule as [`cg`].
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &Precond,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let target = tol * norm2(b).max(1.0);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm2(&r);
    for it in 0..max_iter {
        if res <= target {
            return Ok(KrylovStats {
                iterations: it,
                residual: res,
            });
        }
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Singular("BiCGSTAB breakdown".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        a.matvec(&phat, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            return Err(Error::Singular("BiCGSTAB breakdown".into()));
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(KrylovStats {
                iterations: it + 1,
                residual: norm2(&s),
            });
        }
        pre.apply(&s, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
    }
    if res <= target {
        Ok(KrylovStats {
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn herm(a: f64, d: f64, br: f64, bi: f64) -> CMat {
        let mut m = CMat::zero(2);
        m.m[0][0] = C64::new(a, 0.0);
        m.m[1][1] = C64::new(d, 0.0);
        m.m[0][1] = C64::new(br, bi);
        m.m[1][0] = C64::new(br, -bi);
        m
    }

    // A = B B* + s I with B arbitrary is Hermitian positive definite.
    fn pd_from(v: [f64; 8], s: f64) -> CMat {
        let b = CMat::from_fn(2, |i, j| C64::new(v[4 * i + 2 * j], v[4 * i + 2 * j + 1]));
        b.mul(&b.adjoint()).add(&CMat::identity(2).scale(C64::new(s, 0.0)))
    }

    #[test]
    fn eigen_det_inverse_small_cases() {
        let m = herm(2.0, 2.0, 1.0, 0.0);
        assert_eq!(m.herm_eigs(), [1.0, 3.0]);
        assert_abs_diff_eq!(m.det().re, 3.0, epsilon = 1e-15);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        assert!(id.sub(&CMat::identity(2)).frobenius() < 1e-15);
        assert!(CMat::zero(2).inverse().is_err());
        let one = CMat::from_fn(1, |_, _| C64::new(4.0, 0.0));
        assert_eq!(one.herm_eigs(), [4.0, 4.0]);
        assert_abs_diff_eq!(one.herm_inv_sqrt().unwrap().m[0][0].re, 0.5, epsilon = 1e-15);
        assert!(herm(1.0, -1.0, 0.0, 0.0).herm_sqrt().is_err());
    }

    proptest! {
        #[test]
        fn sqrt_and_eigs_consistent(v in proptest::array::uniform8(-2.0f64..2.0), s in 0.05f64..2.0) {
            let a = pd_from(v, s);
            let r = a.herm_sqrt().unwrap();
            prop_assert!(r.mul(&r).sub(&a).frobenius() < 1e-11 * (1.0 + a.frobenius()));
            prop_assert!(r.hermitian_defect() < 1e-12 * (1.0 + a.frobenius()));
            let w = a.herm_inv_sqrt().unwrap();
            let id = w.mul(&a).mul(&w);
            prop_assert!(id.sub(&CMat::identity(2)).frobenius() < 1e-9);
            let [l0, l1] = a.herm_eigs();
            prop_assert!((l0 * l1 - a.det().re).abs() < 1e-10 * (1.0 + a.frobenius().powi(2)));
            prop_assert!((l0 + l1 - a.trace().re).abs() < 1e-12 * (1.0 + a.frobenius()));
        }

        // Minkowski determinant inequality: det^{1/2} is concave on PD 2×2 Hermitian matrices.
        #[test]
        fn det_root_concavity(v in proptest::array::uniform8(-2.0f64..2.0),
                              w in proptest::array::uniform8(-2.0f64..2.0),
                              s in 0.01f64..1.0, t in 0.01f64..1.0) {
            let a = pd_from(v, s);
            let b = pd_from(w, t);
            let lhs = a.add(&b).det().re.sqrt();
            let rhs = a.det().re.sqrt() + b.det().re.sqrt();
            prop_assert!(lhs >= rhs - 1e-12 * (1.0 + lhs));
        }
    }

    // 1-D Dirichlet Laplacian with nonsymmetric advection term.
    fn test_matrix(n: usize, adv: f64) -> CsrMatrix {
        let mut a = CsrMatrix::with_capacity(n, 3 * n);
        for i in 0..n {
            let mut row = Vec::new();
            row.push((i, 2.0));
            if i > 0 {
                row.push((i - 1, -1.0 - adv));
            }
            if i + 1 < n {
                row.push((i + 1, -1.0 + adv));
            }
            a.push_row(&mut row);
        }
        a
    }

    #[test]
    fn krylov_solvers_recover_known_solution() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let a = test_matrix(n, 0.0);
        let mut b = vec![0.0; n];
        a.matvec(&xs, &mut b);
        let mut x = vec![0.0; n];
        cg(&a, &b, &mut x, &Precond::jacobi(&a).unwrap(), 1e-12, 1000).unwrap();
        assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-8));

        let a = test_matrix(n, 0.3);
        a.matvec(&xs, &mut b);
        for pre in [Precond::Identity, Precond::jacobi(&a).unwrap(), Precond::ilu0(&a).unwrap()] {
            let mut x = vec![0.0; n];
            let st = bicgstab(&a, &b, &mut x, &pre, 1e-12, 2000).unwrap();
            assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-8), "{st:?}");
        }
        // ILU(0) of a tridiagonal matrix is its exact LU factorization.
        let mut x = vec![0.0; n];
        let st = bicgstab(&a, &b, &mut x, &Precond::ilu0(&a).unwrap(), 1e-12, 10).unwrap();
        assert!(st.iterations <= 2);
    }

    #[test]
    fn push_row_merges_duplicates() {
        let mut a = CsrMatrix::with_capacity(1, 3);
        a.push_row(&mut [(2, 1.0), (0, 1.0), (2, 2.0)]);
        assert_eq!(a.col_idx, vec![0, 2]);
        assert_eq!(a.vals, vec![1.0, 3.0]);
        assert_eq!(a.diagonal(), vec![1.0]);
    }

    #[test]
    fn refinement_reaches_round_off() {
        // Dirichlet 1-D Laplacian with a parabola as its exact discrete solution.
        let n = 600;
        let mut a = CsrMatrix::with_capacity(n, 3 * n);
        for i in 0..n {
            let mut row = vec![(i, 2.0)];
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            a.push_row(&mut row);
        }
        let b = vec![2e-6; n];
        let exact: Vec<f64> = (1..=n).map(|i| 1e-6 * (i * (n + 1 - i)) as f64).collect();
        let err = |x: &[f64]| x.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let mut plain = vec![0.0; n];
        cg(&a, &b, &mut plain, &Precond::Identity, 1e-13, 10 * n).unwrap();
        let mut refined = vec![0.0; n];
        cg_refined(&a, &b, &mut refined, &Precond::Identity, 1e-13, 10 * n, 3).unwrap();
        assert!(err(&refined) < 1e-12, "{}", err(&refined));
        assert!(err(&refined) <= err(&plain));
    }
}
