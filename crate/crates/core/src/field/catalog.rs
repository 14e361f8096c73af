//! Closed-form plurisubharmonic solutions with their Monge-Ampère densities.

use alloc::format;
use alloc::string::String;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::check_n;
use crate::error::{Error, Result};
use crate::{Point, MAX_DIM};

/// Default perturbation size for `PLURI3`.
pub const PLURI3_DEFAULT_T: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CatalogKind {
    /// u = |z|², f = 1.
    Quad,
    /// u = e^{|z|²}, f = e^{n|z|²}(1 + |z|²).
    Exp,
    /// u = |z|² + t·Re(z₁³), f = 1.
    Pluri3 { t: f64 },
    /// u = (1 + |z₂|²)|z₁|^{2−2/n} (n = 2), f = 1/4; Lipschitz across {z₁ = 0}.
    Pogo,
}

/// A catalog member in a fixed complex dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSolution {
    pub kind: CatalogKind,
    pub n: usize,
}

/// Looks up a catalog entry by name: `QUAD`, `EXP`, `PLURI3` (or `PLURI3:<t>`), `POGO`.
pub fn test_solution(name: &str, n: usize) -> Result<TestSolution> {
    check_n(n)?;
    let upper = name.trim().to_ascii_uppercase();
    let kind = match upper.as_str() {
        "QUAD" => CatalogKind::Quad,
        "EXP" => CatalogKind::Exp,
        "PLURI3" => CatalogKind::Pluri3 {
            t: PLURI3_DEFAULT_T,
        },
        "POGO" => {
            if n < 2 {
                return Err(Error::domain("POGO needs complex dimension n >= 2"));
            }
            CatalogKind::Pogo
        }
        s => match s.strip_prefix("PLURI3:").map(str::parse::<f64>) {
            Some(Ok(t)) if t.is_finite() => CatalogKind::Pluri3 { t },
            _ => return Err(Error::UnknownSolution(String::from(name))),
        },
    };
    Ok(TestSolution { kind, n })
}

fn abs2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl TestSolution {
    pub fn name(&self) -> String {
        match self.kind {
            CatalogKind::Quad => "QUAD".into(),
            CatalogKind::Exp => "EXP".into(),
            CatalogKind::Pluri3 { t } => format!("PLURI3:{t}"),
            CatalogKind::Pogo => "POGO".into(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn smooth(&self) -> bool {
        !matches!(self.kind, CatalogKind::Pogo)
    }

    /// Hölder exponent of the gradient (1 for smooth members).
    pub fn beta_eff(&self) -> f64 {
        match self.kind {
            CatalogKind::Pogo => 1.0 - 2.0 / self.n as f64,
            _ => 1.0,
        }
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        let x = &x[..self.dim()];
        match self.kind {
            CatalogKind::Quad => abs2(x),
            CatalogKind::Exp => abs2(x).exp(),
            CatalogKind::Pluri3 { t } => abs2(x) + t * (x[0].powi(3) - 3.0 * x[0] * x[1] * x[1]),
            CatalogKind::Pogo => (1.0 + abs2(&x[2..4])) * abs2(&x[0..2]).sqrt(),
        }
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        let x = &x[..self.dim()];
        match self.kind {
            CatalogKind::Quad | CatalogKind::Pluri3 { .. } => 1.0,
            CatalogKind::Exp => {
                let r2 = abs2(x);
                (self.n as f64 * r2).exp() * (1.0 + r2)
            }
            CatalogKind::Pogo => 0.25,
        }
    }

    /// Real gradient; for POGO on {z₁ = 0} the x₁, y₁ components are set to 0.
    pub fn grad_u(&self, x: &[f64]) -> Point {
        let dim = self.dim();
        let mut g = [0.0; MAX_DIM];
        match self.kind {
            CatalogKind::Quad => {
                for a in 0..dim {
                    g[a] = 2.0 * x[a];
                }
            }
            CatalogKind::Exp => {
                let e = abs2(&x[..dim]).exp();
                for a in 0..dim {
                    g[a] = 2.0 * x[a] * e;
                }
            }
            CatalogKind::Pluri3 { t } => {
                for a in 0..dim {
                    g[a] = 2.0 * x[a];
                }
                g[0] += 3.0 * t * (x[0] * x[0] - x[1] * x[1]);
                g[1] -= 6.0 * t * x[0] * x[1];
            }
            CatalogKind::Pogo => {
                let r = abs2(&x[0..2]).sqrt();
                let w = 1.0 + abs2(&x[2..4]);
                if r > 0.0 {
                    g[0] = w * x[0] / r;
                    g[1] = w * x[1] / r;
                }
                g[2] = 2.0 * x[2] * r;
                g[3] = 2.0 * x[3] * r;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, C64};
    use approx::assert_abs_diff_eq;

    // Closed-form complex Hessians derived by hand.
    fn hessian_oracle(s: &TestSolution, x: &[f64]) -> CMat {
        let n = s.n;
        let z = |k: usize| C64::new(x[2 * k], x[2 * k + 1]);
        match s.kind {
            CatalogKind::Quad | CatalogKind::Pluri3 { .. } => CMat::identity(n),
            CatalogKind::Exp => {
                let e = abs2(&x[..2 * n]).exp();
                CMat::from_fn(n, |i, j| {
                    let d = if i == j { 1.0 } else { 0.0 };
                    (C64::new(d, 0.0) + z(i).conj() * z(j)) * e
                })
            }
            CatalogKind::Pogo => {
                let r = z(0).norm();
                let w = 1.0 + z(1).norm_sqr();
                let mut m = CMat::zero(2);
                m.m[0][0] = C64::new(w / (4.0 * r), 0.0);
                m.m[1][1] = C64::new(r, 0.0);
                m.m[0][1] = z(0).conj() * z(1) / (2.0 * r);
                m.m[1][0] = m.m[0][1].conj();
                m
            }
        }
    }

    #[test]
    fn densities_match_oracle_determinants() {
        let pts = [[0.1, -0.2, 0.3, 0.05], [0.4, 0.1, -0.2, -0.3], [-0.05, 0.02, 0.6, 0.1]];
        for (name, n) in [("QUAD", 1), ("QUAD", 2), ("EXP", 1), ("EXP", 2), ("PLURI3:0.2", 2), ("POGO", 2)] {
            let s = test_solution(name, n).unwrap();
            for p in &pts {
                let det = hessian_oracle(&s, p).det().re;
                assert_abs_diff_eq!(det, s.f(p), epsilon = 1e-12 * (1.0 + det.abs()));
            }
        }
        let e1 = test_solution("EXP", 1).unwrap();
        let p = [0.3, 0.4];
        assert_abs_diff_eq!(e1.f(&p), 0.25f64.exp() * 1.25, epsilon = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = [0.21, -0.13, 0.32, 0.07];
        for (name, n) in [("QUAD", 2), ("EXP", 2), ("PLURI3:0.5", 1), ("POGO", 2)] {
            let s = test_solution(name, n).unwrap();
            let g = s.grad_u(&p);
            for a in 0..2 * n {
                let mut xp = p;
                let mut xm = p;
                xp[a] += 1e-6;
                xm[a] -= 1e-6;
                let fd = (s.u(&xp) - s.u(&xm)) / 2e-6;
                assert_abs_diff_eq!(g[a], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn lookup_and_flags() {
        assert!(test_solution("QUAD", 2).unwrap().smooth());
        let pogo = test_solution("pogo", 2).unwrap();
        assert!(!pogo.smooth());
        assert_eq!(pogo.beta_eff(), 0.0);
        assert!(test_solution("POGO", 1).is_err());
        assert!(matches!(test_solution("NOPE", 2), Err(Error::UnknownSolution(_))));
        assert_eq!(
            test_solution("PLURI3:0.05", 2).unwrap().kind,
            CatalogKind::Pluri3 { t: 0.05 }
        );
        assert!(test_solution("QUAD", 3).is_err());
    }
}
