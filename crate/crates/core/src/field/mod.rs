//! Grid-sampled scalar fields on boxes and balls in ℂⁿ ≅ ℝ^{2n}.
//!
//! A field lives on a uniform lattice. Every lattice point carries a [`Cell`]
//! label: `Interior` points are where equations and measurements live,
//! `Collar` points hold Dirichlet data or the extra rows that a stencil needs,
//! and `Exterior` points are placeholders (value 0) that no stencil touches.

mod catalog;
mod stencil;

pub use catalog::{test_solution, CatalogKind, TestSolution};
pub use stencil::{
    complex_hessian, complex_laplacian, ma_determinant, third_derivatives, HermitianField,
    Tensor3, Tensor4,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point, MAX_DIM};

/// Smallest admissible radius/spacing ratio: a ball spans ≥ 9 points per axis.
pub const MIN_POINTS_PER_RADIUS: f64 = 4.0;

/// Point label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Cell {
    Exterior = 0,
    Interior = 1,
    Collar = 2,
}

impl Cell {
    pub fn from_u8(b: u8) -> Option<Cell> {
        match b {
            0 => Some(Cell::Exterior),
            1 => Some(Cell::Interior),
            2 => Some(Cell::Collar),
            _ => None,
        }
    }
}

/// Open ball B_R(c) ⊂ ℝ^{2n}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallDomain {
    pub n: usize,
    pub center: Point,
    pub radius: f64,
}

impl BallDomain {
    pub fn new(n: usize, center: &[f64], radius: f64) -> Result<Self> {
        check_n(n)?;
        if center.len() < 2 * n {
            return Err(Error::domain(format!(
                "center has {} coordinates, need {}",
                center.len(),
                2 * n
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("radius {radius} must be positive")));
        }
        let mut c = [0.0; MAX_DIM];
        c[..2 * n].copy_from_slice(&center[..2 * n]);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("center must be finite"));
        }
        Ok(BallDomain {
            n,
            center: c,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn dist_to_center(&self, x: &[f64]) -> f64 {
        dist(&self.center[..self.dim()], &x[..self.dim()])
    }

    /// d_x = R − |x − c| (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.radius - self.dist_to_center(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist_to_center(x) < self.radius
    }

    /// True if `other` ⊂ `self` (closed inclusion).
    pub fn contains_ball(&self, other: &BallDomain) -> bool {
        self.dist_to_center(&other.center) + other.radius <= self.radius * (1.0 + 1e-12)
    }
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("complex dimension {n} not supported (1 or 2)")))
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Uniform lattice `origin + h·i`, `0 ≤ i_a < shape[a]`, row-major with the
/// last axis fastest. Axes beyond `dim` have extent 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub shape: [usize; MAX_DIM],
    pub strides: [usize; MAX_DIM],
    pub origin: Point,
    pub h: f64,
    /// Coordinates are `anchor + h·(i − anchor_index)`, so the anchor point
    /// (a ball center, say) is reproduced exactly.
    pub anchor: Point,
    pub anchor_index: [usize; MAX_DIM],
}

impl Lattice {
    pub fn new(dim: usize, shape: &[usize], origin: &[f64], h: f64) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::domain(format!("lattice dimension {dim} must be 2 or 4")));
        }
        if shape.len() < dim || origin.len() < dim {
            return Err(Error::domain("shape/origin shorter than lattice dimension"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("spacing {h} must be positive")));
        }
        let mut s = [1usize; MAX_DIM];
        let mut o = [0.0; MAX_DIM];
        for a in 0..dim {
            if shape[a] == 0 {
                return Err(Error::domain("empty lattice axis"));
            }
            s[a] = shape[a];
            o[a] = origin[a];
        }
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1usize;
        for a in (0..MAX_DIM).rev() {
            strides[a] = acc;
            acc = acc
                .checked_mul(s[a])
                .ok_or_else(|| Error::domain("lattice too large"))?;
        }
        Ok(Lattice {
            dim,
            shape: s,
            strides,
            origin: o,
            h,
            anchor: o,
            anchor_index: [0; MAX_DIM],
        })
    }

    /// Re-anchors the lattice at the node `index`, whose coordinates become `at`.
    pub fn anchored(mut self, index: [usize; MAX_DIM], at: &[f64]) -> Self {
        self.anchor_index = index;
        for a in 0..self.dim {
            self.anchor[a] = at[a];
            self.origin[a] = self.coord(a, 0);
        }
        self
    }

    #[inline]
    pub fn coord(&self, a: usize, i: usize) -> f64 {
        self.anchor[a] + self.h * (i as f64 - self.anchor_index[a] as f64)
    }

    /// Continuous lattice coordinate of `x` along axis `a`.
    #[inline]
    pub fn fractional(&self, a: usize, x: f64) -> f64 {
        (x - self.anchor[a]) / self.h + self.anchor_index[a] as f64
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut c = [0usize; MAX_DIM];
        for a in 0..MAX_DIM {
            c[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        c
    }

    pub fn index(&self, c: &[usize; MAX_DIM]) -> usize {
        (0..MAX_DIM).map(|a| c[a] * self.strides[a]).sum()
    }

    pub fn point(&self, idx: usize) -> Point {
        let c = self.coords(idx);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.coord(a, c[a]);
        }
        p
    }

    /// Index of the lattice point nearest to `x`, if inside the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut c = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let s = self.fractional(a, x[a]).round();
            if s < 0.0 || s >= self.shape[a] as f64 {
                return None;
            }
            c[a] = s as usize;
        }
        Some(self.index(&c))
    }

    /// Signed index offset for a displacement in lattice steps.
    #[inline]
    pub fn offset(&self, steps: &[(usize, isize)]) -> isize {
        steps
            .iter()
            .map(|&(a, d)| d * self.strides[a] as isize)
            .sum()
    }

    fn same_geometry(&self, o: &Lattice) -> bool {
        self.dim == o.dim
            && self.shape == o.shape
            && self.h == o.h
            && self.origin == o.origin
            && self.anchor == o.anchor
            && self.anchor_index == o.anchor_index
    }
}

/// Sampled scalar field with interior/collar/exterior mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub mask: Vec<Cell>,
    pub ball: Option<BallDomain>,
    /// Width (in cells, Chebyshev metric) of the collar around the interior.
    pub collar: usize,
}

impl GridField {
    /// Zero field on a lattice aligned so the ball center is a lattice point.
    /// Interior = lattice points strictly inside the ball; the collar is the
    /// Chebyshev `collar`-neighbourhood of the interior.
    pub fn on_ball(ball: BallDomain, h: f64, collar: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::domain(format!("spacing {h} must be positive")));
        }
        let ratio = ball.radius / h;
        if ratio < MIN_POINTS_PER_RADIUS - 1e-9 {
            return Err(Error::Resolution(format!(
                "ball of radius {} spans {:.2} cells per radius at h = {h}, need >= {MIN_POINTS_PER_RADIUS}",
                ball.radius, ratio
            )));
        }
        let dim = ball.dim();
        let half = (ratio - 1e-9).ceil() as usize + collar;
        let shape = [2 * half + 1; MAX_DIM];
        let mut origin = [0.0; MAX_DIM];
        for a in 0..dim {
            origin[a] = ball.center[a] - h * half as f64;
        }
        let lattice = Lattice::new(dim, &shape[..dim], &origin[..dim], h)?
            .anchored([half; MAX_DIM], &ball.center[..dim]);
        let len = lattice.len();
        let mut inside = vec![0u8; len];
        let r_cut = ball.radius - 1e-9 * h;
        for (idx, flag) in inside.iter_mut().enumerate() {
            if ball.dist_to_center(&lattice.point(idx)) < r_cut {
                *flag = 1;
            }
        }
        let mask = dilate_mask(&lattice, &inside, collar);
        Ok(GridField {
            n: ball.n,
            lattice,
            values: vec![0.0; len],
            mask,
            ball: Some(ball),
            collar,
        })
    }

    /// Ball field with spacing R/m.
    pub fn on_ball_m(ball: BallDomain, points_per_radius: usize, collar: usize) -> Result<Self> {
        Self::on_ball(ball, ball.radius / points_per_radius as f64, collar)
    }

    /// Zero field on a box with `counts[a]` points per axis; interior points
    /// are those at least `collar` cells from every face.
    pub fn on_box(n: usize, origin: &[f64], counts: &[usize], h: f64, collar: usize) -> Result<Self> {
        check_n(n)?;
        let dim = 2 * n;
        let lattice = Lattice::new(dim, counts, origin, h)?;
        if counts[..dim].iter().any(|&c| c < 2 * collar + 1) {
            return Err(Error::Resolution(format!(
                "box with {:?} points per axis has no interior for collar {collar}",
                &counts[..dim]
            )));
        }
        let len = lattice.len();
        let mut mask = vec![Cell::Collar; len];
        for (idx, m) in mask.iter_mut().enumerate() {
            let c = lattice.coords(idx);
            if (0..dim).all(|a| c[a] >= collar && c[a] + collar < lattice.shape[a]) {
                *m = Cell::Interior;
            }
        }
        Ok(GridField {
            n,
            lattice,
            values: vec![0.0; len],
            mask,
            ball: None,
            collar,
        })
    }

    /// Sets every non-exterior value from `f`.
    pub fn fill(&mut self, f: impl Fn(&[f64]) -> f64) -> Result<()> {
        let dim = self.dim();
        for idx in 0..self.values.len() {
            if self.mask[idx] != Cell::Exterior {
                let v = f(&self.lattice.point(idx)[..dim]);
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "non-finite sample {v} at {:?}",
                        &self.lattice.point(idx)[..dim]
                    )));
                }
                self.values[idx] = v;
            }
        }
        Ok(())
    }

    pub fn sample_ball(
        ball: BallDomain,
        h: f64,
        collar: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = Self::on_ball(ball, h, collar)?;
        g.fill(f)?;
        Ok(g)
    }

    pub fn sample_box(
        n: usize,
        origin: &[f64],
        counts: &[usize],
        h: f64,
        collar: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = Self::on_box(n, origin, counts, h, collar)?;
        g.fill(f)?;
        Ok(g)
    }

    /// Cube of half-width `half` cells centred on `center`.
    pub fn sample_cube(
        n: usize,
        center: &[f64],
        half: usize,
        h: f64,
        collar: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = 2 * n;
        let origin: Vec<f64> = (0..dim).map(|a| center[a] - h * half as f64).collect();
        let mut g = Self::on_box(n, &origin, &[2 * half + 1; MAX_DIM], h, collar)?;
        g.lattice = g.lattice.anchored([half; MAX_DIM], &center[..dim]);
        g.fill(f)?;
        Ok(g)
    }

    /// Same geometry, new values (exterior entries forced to 0).
    pub fn with_values(&self, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a lattice of {} points",
                values.len(),
                self.values.len()
            )));
        }
        for (v, m) in values.iter_mut().zip(&self.mask) {
            if *m == Cell::Exterior {
                *v = 0.0;
            }
        }
        Ok(GridField {
            values,
            ..self.clone()
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m == Cell::Exterior { 0.0 } else { f(v) })
            .collect();
        GridField {
            values,
            ..self.clone()
        }
    }

    /// Pointwise `a·self + b·other` on identical geometry.
    pub fn axpby(&self, a: f64, other: &GridField, b: f64) -> Result<Self> {
        self.check_same(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridField {
            values,
            ..self.clone()
        })
    }

    pub fn check_same(&self, other: &GridField) -> Result<()> {
        if self.n != other.n || !self.lattice.same_geometry(&other.lattice) || self.mask != other.mask
        {
            return Err(Error::Mismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, idx: usize) -> Point {
        self.lattice.point(idx)
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == Cell::Interior)
            .map(|(i, _)| i)
    }

    pub fn defined(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m != Cell::Exterior)
            .map(|(i, _)| i)
    }

    pub fn interior_count(&self) -> usize {
        self.mask.iter().filter(|m| **m == Cell::Interior).count()
    }

    /// Distance to the boundary of the measurement domain: the ball if one is
    /// attached, otherwise the box spanned by the interior points.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if let Some(b) = &self.ball {
            return b.boundary_distance(x);
        }
        let l = &self.lattice;
        let mut d = f64::INFINITY;
        for a in 0..l.dim {
            let lo = l.coord(a, self.collar);
            let hi = l.coord(a, l.shape[a] - 1 - self.collar);
            d = d.min(x[a] - lo).min(hi - x[a]);
        }
        d
    }

    pub fn require_collar(&self, reach: usize) -> Result<()> {
        if self.collar < reach {
            Err(Error::Collar {
                needed: reach,
                available: self.collar,
            })
        } else {
            Ok(())
        }
    }

    #[inline]
    pub(crate) fn at(&self, idx: usize, off: isize) -> f64 {
        let j = (idx as isize + off) as usize;
        debug_assert!(self.mask[j] != Cell::Exterior, "stencil touched exterior point");
        self.values[j]
    }

    /// Evaluates a stencil quantity at every non-exterior point whose
    /// `reach`-neighbourhood is defined; the result has collar `collar − reach`.
    pub fn derive(&self, reach: usize, f: impl Fn(&GridField, usize) -> f64) -> Result<Self> {
        self.require_collar(reach)?;
        let collar = self.collar - reach;
        let mask = if self.ball.is_some() {
            let inside: Vec<u8> = self.mask.iter().map(|m| (*m == Cell::Interior) as u8).collect();
            dilate_mask(&self.lattice, &inside, collar)
        } else {
            let dim = self.dim();
            let l = &self.lattice;
            (0..self.len())
                .map(|idx| {
                    let c = l.coords(idx);
                    if self.mask[idx] == Cell::Interior {
                        Cell::Interior
                    } else if (0..dim).all(|a| c[a] >= reach && c[a] + reach < l.shape[a]) {
                        Cell::Collar
                    } else {
                        Cell::Exterior
                    }
                })
                .collect()
        };
        let values = mask
            .iter()
            .enumerate()
            .map(|(idx, m)| if *m == Cell::Exterior { 0.0 } else { f(self, idx) })
            .collect();
        Ok(GridField {
            n: self.n,
            lattice: self.lattice,
            values,
            mask,
            ball: self.ball,
            collar,
        })
    }

    /// Tensor-product cubic Lagrange interpolation. Exact at lattice nodes and
    /// on cubic polynomials; every node of the 4^dim stencil must be defined.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let l = &self.lattice;
        let dim = l.dim;
        let mut base = [0isize; MAX_DIM];
        let mut w = [[0.0f64; 4]; MAX_DIM];
        let mut exact = [false; MAX_DIM];
        for a in 0..dim {
            let s = l.fractional(a, x[a]);
            let fl = s.floor();
            let mut fr = s - fl;
            let mut i = fl as isize;
            if fr > 1.0 - 1e-10 {
                i += 1;
                fr = 0.0;
            } else if fr < 1e-10 {
                fr = 0.0;
            }
            base[a] = i;
            if fr == 0.0 {
                exact[a] = true;
                w[a] = [0.0, 1.0, 0.0, 0.0];
            } else {
                let t = fr;
                w[a] = [
                    -t * (t - 1.0) * (t - 2.0) / 6.0,
                    (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                    -(t + 1.0) * t * (t - 2.0) / 2.0,
                    (t + 1.0) * t * (t - 1.0) / 6.0,
                ];
            }
        }
        let mut lo = [0isize; MAX_DIM];
        let mut hi = [0isize; MAX_DIM];
        for a in 0..dim {
            if exact[a] {
                lo[a] = 1;
                hi[a] = 1;
            } else {
                lo[a] = 0;
                hi[a] = 3;
            }
            if base[a] + lo[a] - 1 < 0 || base[a] + hi[a] > l.shape[a] as isize {
                return Err(Error::Support(format!(
                    "interpolation stencil at {:?} leaves the grid",
                    &x[..dim]
                )));
            }
        }
        let mut acc = 0.0;
        let mut k = [0isize; MAX_DIM];
        k[..dim].copy_from_slice(&lo[..dim]);
        loop {
            let mut weight = 1.0;
            let mut c = [0usize; MAX_DIM];
            for a in 0..dim {
                weight *= w[a][k[a] as usize];
                c[a] = (base[a] + k[a] - 1) as usize;
            }
            let idx = l.index(&c);
            if self.mask[idx] == Cell::Exterior {
                return Err(Error::Support(format!(
                    "interpolation stencil at {:?} touches an undefined point",
                    &x[..dim]
                )));
            }
            acc += weight * self.values[idx];
            let mut a = 0;
            loop {
                if a == dim {
                    return Ok(acc);
                }
                if k[a] < hi[a] {
                    k[a] += 1;
                    break;
                }
                k[a] = lo[a];
                a += 1;
            }
        }
    }

    /// Central-difference gradient at a point with a defined 1-neighbourhood.
    pub fn gradient_at(&self, idx: usize) -> Point {
        let mut g = [0.0; MAX_DIM];
        let h = self.h();
        for (a, ga) in g.iter_mut().enumerate().take(self.dim()) {
            let s = self.lattice.strides[a] as isize;
            *ga = (self.at(idx, s) - self.at(idx, -s)) / (2.0 * h);
        }
        g
    }

    /// Maximum of |values| over the interior.
    pub fn sup_interior(&self) -> f64 {
        self.interior().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }
}

/// Chebyshev dilation of `inside` by `r` cells. Returns the full mask.
fn dilate_mask(l: &Lattice, inside: &[u8], r: usize) -> Vec<Cell> {
    let mut cur: Vec<u8> = inside.to_vec();
    if r > 0 {
        let mut next = vec![0u8; cur.len()];
        for a in 0..l.dim {
            let n_a = l.shape[a];
            let s = l.strides[a];
            for idx in 0..cur.len() {
                let c = (idx / s) % n_a;
                let lo = c.saturating_sub(r);
                let hi = (c + r).min(n_a - 1);
                let base = idx - c * s;
                let mut v = 0u8;
                for j in lo..=hi {
                    v |= cur[base + j * s];
                    if v != 0 {
                        break;
                    }
                }
                next[idx] = v;
            }
            core::mem::swap(&mut cur, &mut next);
        }
    }
    cur.iter()
        .zip(inside)
        .map(|(&d, &i)| {
            if i != 0 {
                Cell::Interior
            } else if d != 0 {
                Cell::Collar
            } else {
                Cell::Exterior
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ball_lattice_geometry() {
        let ball = BallDomain::new(1, &[0.1, -0.2], 1.0).unwrap();
        let g = GridField::on_ball_m(ball, 4, 1).unwrap();
        assert_eq!(g.lattice.shape[..2], [11, 11]);
        let c = g.lattice.nearest(&[0.1, -0.2]).unwrap();
        assert_eq!(g.mask[c], Cell::Interior);
        assert_eq!(g.point(c)[..2], [0.1, -0.2]);
        // (±R, 0) lies on the sphere: collar, not interior.
        let e = g.lattice.nearest(&[1.1, -0.2]).unwrap();
        assert_eq!(g.mask[e], Cell::Collar);
        for idx in g.interior() {
            assert!(ball.contains(&g.point(idx)));
            let cc = g.lattice.coords(idx);
            for a in 0..2 {
                for d in [-1isize, 1] {
                    let mut q = cc;
                    q[a] = (q[a] as isize + d) as usize;
                    assert_ne!(g.mask[g.lattice.index(&q)], Cell::Exterior);
                }
            }
        }
        assert!(matches!(
            GridField::on_ball(ball, 0.3, 1),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn collar_is_chebyshev_dilation() {
        let ball = BallDomain::new(2, &[0.0; 4], 1.0).unwrap();
        let g = GridField::on_ball_m(ball, 4, 2).unwrap();
        let l = g.lattice;
        for idx in 0..g.len() {
            let c = l.coords(idx);
            let mut near = false;
            for j in g.interior() {
                let d = l.coords(j);
                if (0..4).all(|a| (c[a] as isize - d[a] as isize).abs() <= 2) {
                    near = true;
                    break;
                }
            }
            match g.mask[idx] {
                Cell::Interior => {}
                Cell::Collar => assert!(near),
                Cell::Exterior => assert!(!near),
            }
        }
    }

    #[test]
    fn interpolation_exact_on_cubics_and_nodes() {
        let f = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1] * x[1] + x[0] * x[0] * x[1] + 0.5 * x[1].powi(3);
        let g = GridField::sample_cube(1, &[0.0, 0.0], 6, 0.1, 1, f).unwrap();
        for p in [[0.013, -0.21], [0.25, 0.25], [-0.31, 0.077]] {
            assert_abs_diff_eq!(g.interpolate(&p).unwrap(), f(&p), epsilon = 1e-13);
        }
        for idx in g.interior() {
            let p = g.point(idx);
            assert_eq!(g.interpolate(&p[..2]).unwrap(), g.values[idx]);
        }
        assert!(g.interpolate(&[0.65, 0.0]).is_err());
    }

    #[test]
    fn box_boundary_distance_and_derive() {
        let g = GridField::sample_cube(1, &[0.0, 0.0], 4, 0.25, 2, |x| x[0] * x[0]).unwrap();
        assert_abs_diff_eq!(g.boundary_distance(&[0.0, 0.0]), 0.5, epsilon = 1e-15);
        let d = g
            .derive(1, |f, i| {
                let s = f.lattice.strides[0] as isize;
                (f.at(i, s) - 2.0 * f.at(i, 0) + f.at(i, -s)) / (f.h() * f.h())
            })
            .unwrap();
        assert_eq!(d.collar, 1);
        for idx in d.defined() {
            assert_abs_diff_eq!(d.values[idx], 2.0, epsilon = 1e-12);
        }
        assert!(matches!(d.derive(2, |_, _| 0.0), Err(Error::Collar { needed: 2, available: 1 })));
    }
}
