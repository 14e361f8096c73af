use cmalab_core::cascade::{
    build_auxiliary, cross_center_compare, gradient_telescope, rescaled_profiles, run_cascade, verify_sandwich,
    CascadeConfig,
};
use cmalab_core::exponents::{plan_exponents, ExponentParams};
use cmalab_core::field::test_solution;
use cmalab_core::norms::fit_loglog;

fn params(n: u32, mu: f64) -> ExponentParams {
    let mut p = plan_exponents(n, 1.0, 0.95, 0.9).unwrap();
    p.mu = mu;
    p
}

fn exp_cfg() -> CascadeConfig {
    CascadeConfig::new(&[0.3, 0.2], 0.5, 0.5, 6, params(1, 1.25))
}

#[test]
fn exp_gradient_telescope_rate() {
    let e = test_solution("EXP", 1).unwrap();
    let cfg = exp_cfg();
    let rep = run_cascade(&e, &cfg).unwrap();
    assert_eq!(rep.levels.len(), 7);
    assert!(rep.rejected.is_empty() && rep.failures.is_empty());
    let tel = gradient_telescope(&rep, &e).unwrap();
    assert!(tel.identity_residual <= 1e-12, "{}", tel.identity_residual);
    assert!(tel.fit.unwrap().slope >= cfg.params.delta - 0.1);
    // Sup sandwich constant stays within a factor 3.
    assert!(rep.sandwich_spread <= 3.0, "{}", rep.sandwich_spread);
    // |φ − u| decays at least like the sandwich rate.
    let want = (cfg.params.mu * 2.0).min(2.0 + cfg.params.alpha) - 0.1;
    assert!(rep.fits.sup_diff.unwrap().slope >= want);
}

#[test]
fn exp_rescaled_profiles() {
    let e = test_solution("EXP", 1).unwrap();
    let cfg = exp_cfg();
    let mut samples = Vec::new();
    for k in 0..4 {
        let phi = build_auxiliary(&e, &cfg, k).unwrap().solution;
        let r = rescaled_profiles(&e, &phi, &cfg, cfg.t_k(k)).unwrap();
        samples.push((r.t, r.v_linear, r.w_linear, r.w_minus_v));
    }
    let v: Vec<_> = samples.iter().map(|s| (s.0, s.1)).collect();
    let w: Vec<_> = samples.iter().map(|s| (s.0, s.2)).collect();
    let wv: Vec<_> = samples.iter().map(|s| (s.0, s.3)).collect();
    let sv = fit_loglog(&v, false).unwrap().slope;
    assert!((sv - 1.0).abs() < 0.05, "{sv}");
    assert!(fit_loglog(&w, false).unwrap().slope >= cfg.params.delta - 0.1);
    assert!(fit_loglog(&wv, false).unwrap().slope >= cfg.params.delta - 0.1);
}

#[test]
fn exp_cross_center_rate() {
    let e = test_solution("EXP", 1).unwrap();
    let mut cfg = exp_cfg();
    cfg.points_per_radius = 16;
    let x0 = [0.3, 0.2];
    let mut samples = Vec::new();
    for t in [0.5, 0.25, 0.125, 0.0625] {
        let dt = cfg.d * t;
        let y0 = [0.3 + dt / 16.0, 0.2 - dt / 16.0];
        let r = cross_center_compare(&e, &x0, &y0, &cfg, t).unwrap();
        samples.push((dt, r.sup_grad_diff));
    }
    let fit = fit_loglog(&samples, false).unwrap();
    assert!(fit.slope >= cfg.params.delta - 0.15, "{samples:?} {}", fit.slope);
}

#[test]
fn exp_sandwich_constants_bounded() {
    let e = test_solution("EXP", 1).unwrap();
    let cfg = exp_cfg();
    let mut c = Vec::new();
    for k in 0..4 {
        let phi = build_auxiliary(&e, &cfg, k).unwrap().solution;
        let s = verify_sandwich(&e, &cfg, k, &phi).unwrap();
        c.push(s.c_hat);
    }
    let hi = c.iter().cloned().fold(0.0, f64::max);
    let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(lo > 0.0 && hi / lo <= 3.0, "{c:?}");
}

#[test]
fn exp_cascade_n2_shallow() {
    let e = test_solution("EXP", 2).unwrap();
    let mut cfg = CascadeConfig::new(&[0.3, 0.2, 0.1, 0.0], 0.5, 0.5, 4, params(2, 1.25));
    cfg.points_per_radius = 16;
    let rep = run_cascade(&e, &cfg).unwrap();
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    let p = &cfg.params;
    let v_sup = rep.fits.v_sup.as_ref().unwrap().slope;
    assert!(v_sup >= (2.0 * p.mu).min(2.0 + p.alpha) - 0.1, "{v_sup}");
    let v_lip = rep.fits.v_lip.as_ref().unwrap().slope;
    assert!(v_lip >= p.delta - 0.1, "{v_lip}");
    assert!(rep.telescope_residual.unwrap() <= 1e-12);
}

#[test]
fn pogo_auxiliary_hessian_growth() {
    let p = test_solution("POGO", 2).unwrap();
    let mut cfg = CascadeConfig::new(&[0.4, 0.0, 0.1, 0.0], 0.5, 0.5, 4, params(2, 1.25));
    cfg.points_per_radius = 16;
    cfg.beta_eff = p.beta_eff().max(1e-9);
    let rep = run_cascade(&p, &cfg).unwrap();
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    let slope = rep.fits.hessian_sup.unwrap().slope;
    let want = cfg.params.mu * (p.beta_eff() - 1.0) - 0.1;
    assert!(slope >= want, "{slope} < {want}");
}
