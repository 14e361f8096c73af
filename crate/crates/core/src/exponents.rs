//! Closed-form exponent bookkeeping: the β₀ threshold, the contraction map φ
//! and its iterates, the admissible window for μ, and the choice of
//! (γ, μ, ε) that makes the gradient-Hölder increments of the cascade decay.
//!
//! All formulas are evaluated in `f64`; comparisons use [`EXPONENT_TOL`].

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for exponent identities.
pub const EXPONENT_TOL: f64 = 1e-12;

/// Margin applied to the decay exponent: ε = `EPS_MARGIN`·min(E₁, E₂).
pub const EPS_MARGIN: f64 = 0.99;

/// γ is searched over 1 − 2^{−m}, m = 1..=`GAMMA_SCAN_MAX`.
pub const GAMMA_SCAN_MAX: u32 = 32;

/// The exponent tuple threading the auxiliary construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentParams {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub eps: f64,
}

/// Admissible interval for μ at fixed (n, α, β, δ, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuWindow {
    pub lower: f64,
    /// `f64::INFINITY` in the degenerate case β = 1.
    pub upper: f64,
    pub feasible: bool,
}

/// Result of iterating φ from a starting value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSequence {
    pub values: Vec<f64>,
    pub limit: f64,
    pub converged: bool,
}

fn check_n_alpha(n: u32, alpha: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::domain(format!("complex dimension n = {n} must be >= 1")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

/// β₀(n, α) = 1 − α / (n(2+α) − 1).
pub fn beta0(n: u32, alpha: f64) -> Result<f64> {
    check_n_alpha(n, alpha)?;
    let n = n as f64;
    Ok(1.0 - alpha / (n * (2.0 + alpha) - 1.0))
}

fn phi_unchecked(n: f64, alpha: f64, delta: f64) -> f64 {
    let a = (2.0 + alpha) * (2.0 - delta) - (1.0 + delta);
    1.0 - 2.0 * a / ((2.0 + alpha) * (1.0 + delta) * (n + 1.0) + a)
}

/// The contraction map φ_{n,α}(δ); β₀ is its fixed point.
///
/// Accepts δ ∈ [β₀ − tol, 1] so the fixed point itself can be evaluated.
pub fn phi(n: u32, alpha: f64, delta: f64) -> Result<f64> {
    let b0 = beta0(n, alpha)?;
    if !(delta >= b0 - EXPONENT_TOL && delta <= 1.0) {
        return Err(Error::domain(format!(
            "delta = {delta} must lie in (beta0 = {b0}, 1]"
        )));
    }
    Ok(phi_unchecked(n as f64, alpha, delta))
}

/// Iterates δ₁ = φ(1), δ_{i+1} = φ(δ_i) until |δ_i − β₀| < tol.
pub fn delta_sequence(n: u32, alpha: f64, tol: f64, max_iter: usize) -> Result<DeltaSequence> {
    delta_sequence_from(n, alpha, 1.0, tol, max_iter)
}

/// Same as [`delta_sequence`] with an explicit starting value (δ₁ = φ(start)).
pub fn delta_sequence_from(
    n: u32,
    alpha: f64,
    start: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DeltaSequence> {
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let limit = beta0(n, alpha)?;
    let mut values = Vec::new();
    let mut delta = start;
    let mut converged = false;
    while values.len() < max_iter {
        delta = phi(n, alpha, delta)?;
        values.push(delta);
        if (delta - limit).abs() < tol {
            converged = true;
            break;
        }
    }
    Ok(DeltaSequence {
        values,
        limit,
        converged,
    })
}

fn check_window_inputs(n: u32, alpha: f64, beta: f64, delta: f64, gamma: f64) -> Result<()> {
    check_n_alpha(n, alpha)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain(format!("beta = {beta} must lie in (0, 1]")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta = {delta} must lie in (0, 1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    Ok(())
}

/// The interval of μ for which both increment-decay inequalities hold.
///
/// Solving the two inequalities for μ gives
/// `lower = γ(1+δ) / ((1+γ−δ)(1+β) − (1+δ)(1−β)(n+1))` and
/// `upper = ((1+γ−δ)(2+α) − γ(1+δ)) / ((1+δ)(1−β)(n+1))`.
/// β = 1 makes the upper bound infinite.
pub fn mu_window(n: u32, alpha: f64, beta: f64, delta: f64, gamma: f64) -> Result<MuWindow> {
    check_window_inputs(n, alpha, beta, delta, gamma)?;
    let nf = n as f64;
    let c = (1.0 + delta) * (1.0 - beta) * (nf + 1.0);
    let lower_den = (1.0 + gamma - delta) * (1.0 + beta) - c;
    let upper_num = (1.0 + gamma - delta) * (2.0 + alpha) - gamma * (1.0 + delta);
    let upper = if c > 0.0 {
        upper_num / c
    } else if upper_num > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    if lower_den <= 0.0 {
        return Ok(MuWindow {
            lower: f64::INFINITY,
            upper,
            feasible: false,
        });
    }
    let lower = gamma * (1.0 + delta) / lower_den;
    Ok(MuWindow {
        lower,
        upper,
        feasible: lower < upper && upper > 1.0,
    })
}

/// Smallest β (exclusive) for which the μ-window at (n, α, δ, γ) is nonempty:
/// `1 − 2E / ((2+α)(1+δ)(n+1) + E)` with `E = (2+α)(1+γ−δ) − γ(1+δ)`.
/// At γ = 1 this is φ(δ).
pub fn feasibility_threshold(n: u32, alpha: f64, delta: f64, gamma: f64) -> Result<f64> {
    check_window_inputs(n, alpha, 0.5, delta, gamma)?;
    let nf = n as f64;
    let e = (2.0 + alpha) * (1.0 + gamma - delta) - gamma * (1.0 + delta);
    Ok(1.0 - 2.0 * e / ((2.0 + alpha) * (1.0 + delta) * (nf + 1.0) + e))
}

/// Left-hand sides (E₁, E₂) of the two decay inequalities; both must be
/// positive for the increments to decay like t_k^ε.
pub fn decay_margins(n: u32, alpha: f64, beta: f64, delta: f64, gamma: f64, mu: f64) -> (f64, f64) {
    let nf = n as f64;
    let lead = (1.0 + gamma - delta) / (2.0 + gamma);
    let tail = (1.0 + delta) / (2.0 + gamma) * (mu * (beta - 1.0) * (nf + 1.0) + 2.0)
        - (1.0 + delta);
    (lead * mu * (1.0 + beta) + tail, lead * (2.0 + alpha) + tail)
}

/// Chooses (γ, μ, ε) for β ∈ (φ(δ), 1), δ ∈ (β₀, 1].
///
/// γ is the first of 1 − 2^{−m} whose threshold lies below β; μ is the
/// geometric mean of the window clipped to (max(1, lower), upper); ε is
/// 0.99·min(E₁, E₂).
pub fn plan_exponents(n: u32, alpha: f64, beta: f64, delta: f64) -> Result<ExponentParams> {
    let b0 = beta0(n, alpha)?;
    if !(delta > b0 && delta <= 1.0) {
        return Err(Error::domain(format!(
            "delta = {delta} must lie in (beta0 = {b0}, 1]"
        )));
    }
    if !(beta < 1.0) {
        return Err(Error::domain(format!("beta = {beta} must be < 1")));
    }
    let phi_delta = phi(n, alpha, delta)?;
    if !(beta > phi_delta) {
        return Err(Error::Infeasible(format!(
            "beta = {beta} is not above phi(delta) = {phi_delta}"
        )));
    }
    for m in 1..=GAMMA_SCAN_MAX {
        let gamma = 1.0 - (0.5f64).powi(m as i32);
        if !(beta > feasibility_threshold(n, alpha, delta, gamma)?) {
            continue;
        }
        let window = mu_window(n, alpha, beta, delta, gamma)?;
        if !window.feasible {
            continue;
        }
        let lo = window.lower.max(1.0);
        let mu = (lo * window.upper).sqrt();
        let (e1, e2) = decay_margins(n, alpha, beta, delta, gamma, mu);
        let eps = EPS_MARGIN * e1.min(e2);
        if !(eps > 0.0) {
            continue;
        }
        return Ok(ExponentParams {
            n,
            alpha,
            beta,
            delta,
            gamma,
            mu,
            eps,
        });
    }
    Err(Error::Infeasible(format!(
        "no gamma = 1 - 2^-m (m <= {GAMMA_SCAN_MAX}) admits beta = {beta}, delta = {delta}"
    )))
}

/// The interpolation parameter used when trading sup-norm decay against
/// second-derivative growth at scale t, clipped to (0, 1].
pub fn epsilon_interp(t: f64, params: &ExponentParams) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("t = {t} must lie in (0, 1]")));
    }
    let ExponentParams {
        n,
        alpha,
        beta,
        gamma,
        mu,
        ..
    } = *params;
    let nf = n as f64;
    let num = t.powf(mu * (1.0 + beta)) + t.powf(2.0 + alpha);
    let den = 2.0 * t.powf((nf + 1.0) * mu * (beta - 1.0) + 2.0);
    Ok((num / den).powf(1.0 / (2.0 + gamma)).min(1.0))
}

/// β-threshold when f has k derivatives plus α-Hölder (τ = k + α ∈ (1, 3]).
/// τ = 3 is the C^{2,1} case with threshold 1 − 1/n.
pub fn variant_threshold(n: u32, tau: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("complex dimension must be >= 1"));
    }
    if !(tau > 1.0 && tau <= 3.0) {
        return Err(Error::domain(format!("tau = {tau} must lie in (1, 3]")));
    }
    let nf = n as f64;
    if tau == 3.0 {
        Ok(1.0 - 1.0 / nf)
    } else {
        Ok(1.0 - tau / (nf * (2.0 + tau) - 2.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const GRID_N: [u32; 3] = [1, 2, 3];
    const GRID_ALPHA: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

    #[test]
    fn beta0_values() {
        assert_abs_diff_eq!(beta0(2, 1.0).unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(beta0(1, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(beta0(1, 1e-9).unwrap() > 1.0 - 1e-8);
        assert!(beta0(0, 0.5).is_err());
        assert!(beta0(2, 0.0).is_err());
        assert!(beta0(2, 1.5).is_err());
    }

    #[test]
    fn phi_values() {
        assert_abs_diff_eq!(phi(2, 1.0, 0.8).unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(phi(2, 1.0, 1.0).unwrap(), 17.0 / 19.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi(1, 1.0, 1.0).unwrap(), 11.0 / 13.0, epsilon = 1e-15);
        assert!(phi(2, 1.0, 0.7).is_err());
    }

    #[test]
    fn phi_fixed_point_contraction_and_monotonicity() {
        for n in GRID_N {
            for alpha in GRID_ALPHA {
                let b0 = beta0(n, alpha).unwrap();
                assert!((phi(n, alpha, b0).unwrap() - b0).abs() < 1e-12);
                let mut prev = phi(n, alpha, b0).unwrap();
                for i in 1..=1000 {
                    let d = b0 + (1.0 - b0) * i as f64 / 1000.0;
                    let p = phi(n, alpha, d).unwrap();
                    assert!(p > prev, "phi not increasing at n={n} alpha={alpha} d={d}");
                    assert!(p < d, "phi(d) >= d at n={n} alpha={alpha} d={d}");
                    prev = p;
                }
            }
        }
    }

    #[test]
    fn delta_sequence_limits() {
        let s = delta_sequence(2, 1.0, 1e-6, 200).unwrap();
        assert!(s.converged);
        assert_abs_diff_eq!(s.values[0], 17.0 / 19.0, epsilon = 1e-12);
        assert!((s.values.last().unwrap() - 0.8).abs() < 1e-6);
        assert!(s.values.windows(2).all(|w| w[1] < w[0]));

        let s = delta_sequence(1, 0.5, 1e-6, 200).unwrap();
        assert!(s.converged);
        assert!((s.values.last().unwrap() - 2.0 / 3.0).abs() < 1e-6);

        let b0 = beta0(3, 0.25).unwrap();
        let s = delta_sequence_from(3, 0.25, b0, 1e-6, 10).unwrap();
        assert!(s.values.iter().all(|v| (v - b0).abs() < 1e-12));

        let s = delta_sequence(1, 0.25, 1e-12, 3).unwrap();
        assert!(!s.converged);
        assert_eq!(s.values.len(), 3);
    }

    #[test]
    fn mu_window_examples() {
        let w = mu_window(2, 1.0, 0.95, 0.9, 0.99).unwrap();
        // lower = 0.99·1.9 / (1.09·1.95 − 1.9·0.05·3), upper = (1.09·3 − 0.99·1.9) / (1.9·0.05·3)
        assert_abs_diff_eq!(w.lower, 1.881 / 1.8405, epsilon = 1e-12);
        assert_abs_diff_eq!(w.upper, 1.389 / 0.285, epsilon = 1e-12);
        assert_abs_diff_eq!(w.upper, 4.8737, epsilon = 1e-4);
        assert!(w.feasible);

        let w = mu_window(2, 1.0, 0.5, 0.9, 0.99).unwrap();
        assert!(!w.feasible);

        let beta = phi(2, 1.0, 0.9).unwrap();
        let w = mu_window(2, 1.0, beta, 0.9, 1.0).unwrap();
        assert_abs_diff_eq!(w.lower, w.upper, epsilon = 1e-12);
        let w = mu_window(2, 1.0, beta - 1e-6, 0.9, 1.0).unwrap();
        assert!(!w.feasible);
    }

    #[test]
    fn mu_window_degenerate_beta_one() {
        let w = mu_window(2, 1.0, 1.0, 0.9, 0.5).unwrap();
        assert!(w.upper.is_infinite());
        assert!(w.feasible);
        assert_abs_diff_eq!(w.lower, 0.5 * 1.9 / (0.6 * 2.0), epsilon = 1e-15);
    }

    #[test]
    fn threshold_examples() {
        for n in GRID_N {
            for alpha in GRID_ALPHA {
                let b0 = beta0(n, alpha).unwrap();
                for i in 1..=10 {
                    let d = b0 + (1.0 - b0) * i as f64 / 10.0;
                    let t = feasibility_threshold(n, alpha, d, 1.0).unwrap();
                    assert!((t - phi(n, alpha, d).unwrap()).abs() < 1e-12);
                    let mut prev = f64::INFINITY;
                    for m in 1..200 {
                        let g = m as f64 / 200.0;
                        let v = feasibility_threshold(n, alpha, d, g).unwrap();
                        assert!(v < prev);
                        prev = v;
                    }
                }
            }
        }
        assert!(feasibility_threshold(2, 1.0, 0.9, 0.99).unwrap() < 0.95);
    }

    #[test]
    fn plan_example_and_errors() {
        let p = plan_exponents(2, 1.0, 0.95, 0.9).unwrap();
        let w = mu_window(2, 1.0, 0.95, 0.9, p.gamma).unwrap();
        assert!(p.mu > w.lower.max(1.0) && p.mu < w.upper);
        assert!(p.eps > 0.0);
        let g99 = mu_window(2, 1.0, 0.95, 0.9, 0.99).unwrap();
        assert!(g99.feasible);

        let phi_d = phi(2, 1.0, 0.9).unwrap();
        assert!(matches!(
            plan_exponents(2, 1.0, phi_d - 1e-3, 0.9),
            Err(Error::Infeasible(_))
        ));
        assert!(plan_exponents(2, 1.0, 1.0, 0.9).is_err());
        assert!(plan_exponents(2, 1.0, 0.95, 0.7).is_err());
    }

    #[test]
    fn epsilon_interp_behaviour() {
        let zero = ExponentParams {
            n: 1,
            alpha: 1.0,
            beta: 1.0,
            delta: 1.0,
            gamma: 1.0,
            mu: 1.0,
            eps: 0.1,
        };
        assert_abs_diff_eq!(epsilon_interp(1.0, &zero).unwrap(), 1.0, epsilon = 1e-15);

        let p = plan_exponents(2, 1.0, 0.95, 0.9).unwrap();
        let expo = ((p.mu * (1.0 + p.beta)).min(2.0 + p.alpha)
            - ((p.n as f64 + 1.0) * p.mu * (p.beta - 1.0) + 2.0))
            / (2.0 + p.gamma);
        let (t1, t2) = (1e-6, 1e-7);
        let slope = (epsilon_interp(t1, &p).unwrap().ln() - epsilon_interp(t2, &p).unwrap().ln())
            / (t1.ln() - t2.ln());
        assert!((slope - expo).abs() < 2e-2, "slope {slope} vs {expo}");
        if expo > 0.0 {
            let mut prev = 0.0;
            for i in 1..100 {
                let t = 1e-6 * i as f64;
                let e = epsilon_interp(t, &p).unwrap();
                assert!(e >= prev);
                prev = e;
            }
        }
        assert!(epsilon_interp(0.0, &p).is_err());
    }

    #[test]
    fn variant_thresholds() {
        assert_abs_diff_eq!(variant_threshold(2, 2.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(variant_threshold(2, 3.0).unwrap(), 0.5, epsilon = 1e-15);
        for n in 2..=3 {
            let mut prev = f64::INFINITY;
            for i in 1..=200 {
                let tau = 1.0 + 2.0 * i as f64 / 200.0;
                let v = variant_threshold(n, tau).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
        assert!(variant_threshold(2, 1.0).is_err());
        assert!(variant_threshold(2, 3.5).is_err());
    }

    // Independent evaluation of the two decay inequalities, written from the
    // unsimplified exponents of t in the increment bound.
    fn margins_direct(p: &ExponentParams) -> (f64, f64) {
        let n = p.n as f64;
        let growth = (n + 1.0) * p.mu * (p.beta - 1.0) + 2.0;
        let w = (1.0 + p.delta) / (2.0 + p.gamma);
        let v = (1.0 + p.gamma - p.delta) / (2.0 + p.gamma);
        let e1 = v * p.mu * (1.0 + p.beta) + w * growth - (1.0 + p.delta);
        let e2 = v * (2.0 + p.alpha) + w * growth - (1.0 + p.delta);
        (e1, e2)
    }

    proptest::proptest! {
        #[test]
        fn window_threshold_duality(
            n in 1u32..=3,
            alpha in 0.05f64..=1.0,
            beta in 0.05f64..0.999,
            delta in 0.05f64..=1.0,
            gamma in 0.05f64..=1.0,
        ) {
            let w = mu_window(n, alpha, beta, delta, gamma).unwrap();
            let th = feasibility_threshold(n, alpha, delta, gamma).unwrap();
            // Skip a thin band around the threshold where rounding decides.
            proptest::prop_assume!((beta - th).abs() > 1e-9);
            proptest::prop_assert_eq!(w.feasible, beta > th);
        }

        #[test]
        fn plan_satisfies_decay_system(
            n in 1u32..=3,
            alpha in 0.05f64..=1.0,
            s in 0.01f64..=1.0,
            r in 0.01f64..0.99,
        ) {
            let b0 = beta0(n, alpha).unwrap();
            let delta = b0 + s * (1.0 - b0);
            proptest::prop_assume!(delta > b0 + 1e-9);
            let ph = phi(n, alpha, delta).unwrap();
            let beta = ph + r * (1.0 - ph);
            proptest::prop_assume!(beta > ph + 1e-9 && beta < 1.0 - 1e-9);
            let p = plan_exponents(n, alpha, beta, delta).unwrap();
            let (e1, e2) = margins_direct(&p);
            proptest::prop_assert!(p.mu > 1.0);
            proptest::prop_assert!(p.eps > 0.0);
            proptest::prop_assert!(e1 > p.eps && e2 > p.eps);
        }
    }
}
