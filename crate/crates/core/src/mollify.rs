//! The bump mollifier ρ_ε and discrete convolution.
//!
//! Weights are the profile exp(−1/(1 − |w/ε|²)) sampled at lattice offsets
//! |w| < ε and normalised to unit discrete mass.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BallDomain, Cell, GridField};
use crate::{Point, MAX_DIM};

/// Kernel radius must span at least this many lattice cells.
pub const MIN_KERNEL_CELLS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub n: usize,
    pub eps: f64,
    /// Lattice spacing of the weights.
    pub h: f64,
    /// Largest |offset| along any axis, in cells.
    pub reach: usize,
    pub offsets: Vec<[isize; MAX_DIM]>,
    pub weights: Vec<f64>,
    /// Σ w |y|², the radial second moment.
    pub m2: f64,
}

fn profile(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

impl Kernel {
    /// Kernel of radius `eps` sampled on the lattice hℤ^{2n}; needs eps ≥ 4h.
    pub fn on_lattice(n: usize, eps: f64, h: f64) -> Result<Self> {
        crate::field::check_n(n)?;
        if !(eps > 0.0 && h > 0.0) {
            return Err(Error::domain(format!("kernel radius {eps} and spacing {h} must be positive")));
        }
        if eps < MIN_KERNEL_CELLS * h * (1.0 - 1e-12) {
            return Err(Error::Resolution(format!(
                "kernel radius {eps} is below {MIN_KERNEL_CELLS} cells of size {h}"
            )));
        }
        let dim = 2 * n;
        let ratio = eps / h;
        let reach = (ratio - 1e-12).ceil() as usize;
        let r = reach as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut o = [0isize; MAX_DIM];
        let mut lo = [0isize; MAX_DIM];
        let mut hi = [0isize; MAX_DIM];
        for a in 0..dim {
            lo[a] = -r;
            hi[a] = r;
        }
        o[..dim].copy_from_slice(&lo[..dim]);
        loop {
            let r2 = o[..dim].iter().map(|&v| (v * v) as f64).sum::<f64>() / (ratio * ratio);
            let w = profile(r2);
            if w > 0.0 {
                offsets.push(o);
                weights.push(w);
            }
            let mut a = 0;
            loop {
                if a == dim {
                    break;
                }
                if o[a] < hi[a] {
                    o[a] += 1;
                    break;
                }
                o[a] = lo[a];
                a += 1;
            }
            if a == dim {
                break;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let m2 = offsets
            .iter()
            .zip(&weights)
            .map(|(o, w)| w * h * h * o[..dim].iter().map(|&v| (v * v) as f64).sum::<f64>())
            .sum();
        Ok(Kernel {
            n,
            eps,
            h,
            reach,
            offsets,
            weights,
            m2,
        })
    }

    /// Kernel with its own lattice of spacing eps/cells (independent of any grid).
    pub fn with_cells(n: usize, eps: f64, cells: usize) -> Result<Self> {
        Self::on_lattice(n, eps, eps / cells as f64)
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// (ρ_ε ∗ f)(x) for a closed-form source.
    pub fn convolve_at(&self, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
        let dim = self.dim();
        let mut acc = 0.0;
        let mut y: Point = [0.0; MAX_DIM];
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            for a in 0..dim {
                y[a] = x[a] + self.h * o[a] as f64;
            }
            acc += w * f(&y[..dim]);
        }
        acc
    }
}

/// Discrete convolution ρ_ε ∗ u on u's lattice. The output keeps u's collar
/// width; its ball (or box) shrinks by the kernel reach.
pub fn mollify(u: &GridField, eps: f64) -> Result<GridField> {
    let k = Kernel::on_lattice(u.n, eps, u.h())?;
    mollify_with(u, &k)
}

pub fn mollify_with(u: &GridField, k: &Kernel) -> Result<GridField> {
    if k.n != u.n || (k.h - u.h()).abs() > 1e-12 * u.h() {
        return Err(Error::Mismatch("kernel lattice differs from field lattice".into()));
    }
    let dim = u.dim();
    let l = &u.lattice;
    let mut out = match &u.ball {
        Some(b) => {
            let radius = b.radius - k.eps;
            if radius < crate::field::MIN_POINTS_PER_RADIUS * u.h() {
                return Err(Error::Support(format!(
                    "ball of radius {} leaves {} after shrinking by eps = {}",
                    b.radius, radius, k.eps
                )));
            }
            GridField::on_ball(BallDomain::new(b.n, &b.center, radius)?, u.h(), u.collar)?
        }
        None => {
            let r = k.reach;
            let mut counts = [1usize; MAX_DIM];
            for a in 0..dim {
                if l.shape[a] < 2 * r + 2 * u.collar + 1 {
                    return Err(Error::Support(format!(
                        "box of {} points cannot host a kernel of reach {r} with collar {}",
                        l.shape[a], u.collar
                    )));
                }
                counts[a] = l.shape[a] - 2 * r;
            }
            let origin: Vec<f64> = (0..dim).map(|a| l.coord(a, r)).collect();
            let mut g = GridField::on_box(u.n, &origin, &counts[..dim], u.h(), u.collar)?;
            let mut ai = [0usize; MAX_DIM];
            let mut at = [0.0; MAX_DIM];
            for a in 0..dim {
                ai[a] = l.anchor_index[a].saturating_sub(r);
                at[a] = l.coord(a, ai[a] + r);
            }
            g.lattice = g.lattice.anchored(ai, &at[..dim]);
            g
        }
    };
    let offs: Vec<isize> = k
        .offsets
        .iter()
        .map(|o| (0..dim).map(|a| o[a] * l.strides[a] as isize).sum())
        .collect();
    for idx in 0..out.len() {
        if out.mask[idx] == Cell::Exterior {
            continue;
        }
        let p = out.point(idx);
        let src = l
            .nearest(&p[..dim])
            .ok_or_else(|| Error::Support(format!("output point {:?} outside the source grid", &p[..dim])))?;
        let c = l.coords(src);
        if (0..dim).any(|a| c[a] < k.reach || c[a] + k.reach >= l.shape[a]) {
            return Err(Error::Support(format!(
                "kernel around {:?} leaves the source grid",
                &p[..dim]
            )));
        }
        let mut acc = 0.0;
        for (off, w) in offs.iter().zip(&k.weights) {
            let j = (src as isize + off) as usize;
            if u.mask[j] == Cell::Exterior {
                return Err(Error::Support(format!(
                    "kernel around {:?} touches undefined samples",
                    &p[..dim]
                )));
            }
            acc += w * u.values[j];
        }
        out.values[idx] = acc;
    }
    Ok(out)
}

/// Regularity trade-off of ρ_ε ∗ u at one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub eps: f64,
    /// max Frobenius norm of the real Hessian of ρ_ε ∗ u.
    pub hessian_sup: f64,
    /// sup |ρ_ε ∗ u − u|.
    pub sup_diff: f64,
}

/// Measures ρ_ε ∗ u over the interior of the mollified field, restricted to
/// `region` when given.
pub fn smoothness_report(u: &GridField, eps: f64, region: Option<&BallDomain>) -> Result<SmoothnessReport> {
    u.require_collar(1)?;
    let m = mollify(u, eps)?;
    let dim = u.dim();
    let mut hess: f64 = 0.0;
    let mut diff: f64 = 0.0;
    let mut seen = false;
    for idx in m.interior() {
        let p = m.point(idx);
        if let Some(r) = region {
            if !r.contains(&p) {
                continue;
            }
        }
        seen = true;
        let hm = m.real_hessian_at(idx);
        let f: f64 = (0..dim)
            .flat_map(|a| (0..dim).map(move |b| (a, b)))
            .map(|(a, b)| hm[a][b] * hm[a][b])
            .sum::<f64>()
            .sqrt();
        hess = hess.max(f);
        let src = u.lattice.nearest(&p[..dim]).expect("mollified grid lies inside source");
        diff = diff.max((m.values[idx] - u.values[src]).abs());
    }
    if !seen {
        return Err(Error::Support("measurement region contains no mollified points".into()));
    }
    Ok(SmoothnessReport {
        eps,
        hessian_sup: hess,
        sup_diff: diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ma_determinant, test_solution};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn abs2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn kernel_invariants() {
        for n in [1, 2] {
            let k = Kernel::on_lattice(n, 0.5, 0.1).unwrap();
            assert_abs_diff_eq!(k.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert!(k.weights.iter().all(|&w| w > 0.0));
            for o in &k.offsets {
                let r = (0..2 * n).map(|a| (o[a] as f64 * 0.1).powi(2)).sum::<f64>().sqrt();
                assert!(r < 0.5);
            }
            // Reflection symmetry: weights at o and −o agree.
            for (o, w) in k.offsets.iter().zip(&k.weights) {
                let neg: [isize; 4] = [-o[0], -o[1], -o[2], -o[3]];
                let j = k.offsets.iter().position(|q| q[..2 * n] == neg[..2 * n]).unwrap();
                assert_eq!(*w, k.weights[j]);
            }
        }
        assert!(matches!(Kernel::on_lattice(1, 0.3, 0.1), Err(Error::Resolution(_))));
    }

    #[test]
    fn constants_linears_and_quadratic_shift() {
        for n in [1, 2] {
            let dim = 2 * n;
            let ball = BallDomain::new(n, &[0.1, 0.0, -0.1, 0.05][..dim], 1.0).unwrap();
            let h = if n == 1 { 0.05 } else { 0.125 };
            let eps = 4.0 * h;
            let c = GridField::sample_ball(ball, h, 1, |_| 2.5).unwrap();
            let mc = mollify(&c, eps).unwrap();
            assert!(mc.defined().all(|i| (mc.values[i] - 2.5).abs() < 1e-13));
            let lin = |x: &[f64]| 1.0 + x.iter().enumerate().map(|(a, v)| (a as f64 + 1.0) * v).sum::<f64>();
            let ml = mollify(&GridField::sample_ball(ball, h, 1, lin).unwrap(), eps).unwrap();
            assert!(ml.defined().all(|i| (ml.values[i] - lin(&ml.point(i)[..dim])).abs() < 1e-13));
            let k = Kernel::on_lattice(n, eps, h).unwrap();
            // Independent quadrature of Σ w|y|².
            let raw: Vec<(f64, f64)> = k
                .offsets
                .iter()
                .map(|o| {
                    let y2: f64 = (0..dim).map(|a| (o[a] as f64 * h).powi(2)).sum();
                    (profile(y2 / (eps * eps)), y2)
                })
                .collect();
            let m2 = raw.iter().map(|(w, y)| w * y).sum::<f64>() / raw.iter().map(|r| r.0).sum::<f64>();
            assert_abs_diff_eq!(k.m2, m2, epsilon = 1e-15);
            let mq = mollify(&GridField::sample_ball(ball, h, 1, abs2).unwrap(), eps).unwrap();
            for i in mq.defined() {
                assert_abs_diff_eq!(mq.values[i], abs2(&mq.point(i)[..dim]) + k.m2, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn psh_members_are_raised() {
        for (name, n) in [("QUAD", 2), ("EXP", 2), ("PLURI3:0.5", 2), ("POGO", 2), ("EXP", 1)] {
            let s = test_solution(name, n).unwrap();
            let dim = 2 * n;
            let center = [0.05, 0.0, 0.2, 0.0];
            let k = Kernel::with_cells(n, 0.2, 4).unwrap();
            for i in 0..50 {
                let mut x = [0.0; 4];
                for a in 0..dim {
                    x[a] = center[a] + 0.3 * ((i * 7 + a * 3) as f64 * 0.7).sin();
                }
                let v = k.convolve_at(&|y| s.u(y), &x[..dim]);
                assert!(v >= s.u(&x) - 1e-12, "{name}: {v} < {}", s.u(&x));
            }
        }
    }

    #[test]
    fn det_root_super_mean() {
        let s = test_solution("EXP", 2).unwrap();
        let ball = BallDomain::new(2, &[0.0; 4], 0.75).unwrap();
        let h = 0.0625;
        let u = GridField::sample_ball(ball, h, 1, |x| s.u(x)).unwrap();
        let mu = mollify(&u, 4.0 * h).unwrap();
        let det = ma_determinant(&mu).unwrap();
        let froot = GridField::sample_ball(ball, h, 1, |x| s.f(x).sqrt()).unwrap();
        let mf = mollify(&froot, 4.0 * h).unwrap();
        for i in det.interior() {
            assert!(det.values[i].sqrt() >= mf.values[i] - 4.0 * h * h);
        }
    }

    #[test]
    fn smooth_hessian_bound_is_flat() {
        let s = test_solution("EXP", 1).unwrap();
        let h = 0.01;
        let u = GridField::sample_cube(1, &[0.1, 0.1], 40, h, 1, |x| s.u(x)).unwrap();
        let region = BallDomain::new(1, &[0.1, 0.1], 0.05).unwrap();
        let mut samples = Vec::new();
        for c in [16, 12, 8, 6, 4] {
            let r = smoothness_report(&u, c as f64 * h, Some(&region)).unwrap();
            samples.push((r.eps, r.hessian_sup));
        }
        let fit = crate::norms::fit_loglog(&samples, false).unwrap();
        assert!(fit.slope.abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn support_errors() {
        let u = GridField::sample_cube(1, &[0.0, 0.0], 5, 0.1, 1, |_| 1.0).unwrap();
        assert!(mollify(&u, 0.4).is_ok());
        assert!(matches!(mollify(&u, 0.5), Err(Error::Support(_))));
        let b = GridField::sample_ball(BallDomain::new(1, &[0.0, 0.0], 0.5).unwrap(), 0.1, 1, |_| 1.0).unwrap();
        assert!(matches!(mollify(&b, 0.4), Err(Error::Support(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn order_preserving(a in proptest::array::uniform3(-1.0f64..1.0), bump in 0.0f64..1.0) {
            let f = move |x: &[f64]| a[0] * x[0].sin() + a[1] * x[1] * x[1] + a[2] * (x[0] * x[1]).cos();
            let g = move |x: &[f64]| f(x) + bump * (1.0 + x[0]).abs();
            let u = GridField::sample_cube(1, &[0.0, 0.0], 12, 0.05, 1, f).unwrap();
            let v = GridField::sample_cube(1, &[0.0, 0.0], 12, 0.05, 1, g).unwrap();
            let mu = mollify(&u, 0.25).unwrap();
            let mv = mollify(&v, 0.25).unwrap();
            for i in mu.defined() {
                prop_assert!(mu.values[i] <= mv.values[i] + 1e-15);
            }
        }
    }
}
