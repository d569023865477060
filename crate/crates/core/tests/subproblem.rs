use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rpqn::lmqn::{QuasiNewtonKind, SpectralSplit};
use rpqn::oracle::{
    in_subdifferential, lambda_max, lambda_min, normal_vector, prox_dense, prox_dense_coordinate,
    random_metric, random_regularizer, random_spd, residual_dense, RandomMetric,
};
use rpqn::problem::Regularizer;
use rpqn::prox::ScaledProxContext;
use rpqn::subsolver::{
    eval_g, eval_l, factor_metric, prox_metric, semismooth_newton, solve_subproblem, AlphaPair, NewtonOptions,
    SubproblemError,
};

fn sample_metric(rng: &mut SplitMix64, n_max: usize) -> RandomMetric {
    loop {
        let n = rng.random_range(10..=n_max);
        let m = rng.random_range(1..=5);
        let kind = if rng.random() { QuasiNewtonKind::Bfgs } else { QuasiNewtonKind::Sr1 };
        let mu = 10f64.powf(rng.random_range(-3.0..=1.0));
        if let Some(metric) = random_metric(rng, n, m, kind, mu) {
            return metric;
        }
    }
}

fn model_value(reg: &Regularizer, b: &DMatrix<f64>, x: &DVector<f64>, g: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let xd = x + d;
    g.dot(d) + 0.5 * d.dot(&(b * d)) + reg.eval(xd.as_slice()).unwrap()
}

#[test]
fn inverse_matches_dense_inverse() {
    let mut rng = SplitMix64::seed_from_u64(21);
    for _ in 0..40 {
        let metric = sample_metric(&mut rng, 40);
        let n = metric.dense.nrows();
        let inv = metric.dense.clone().try_inverse().unwrap();
        let v = normal_vector(&mut rng, n);
        let w = normal_vector(&mut rng, n);
        let bv = metric.fac.apply_b_inv(&v);
        assert!((&bv - &inv * &v).norm() <= 1e-10 * (1.0 + bv.norm()));
        assert!((metric.fac.apply_b_inv(&metric.fac.apply_metric(&v)) - &v).norm() <= 1e-10 * (1.0 + v.norm()));
        let lhs = bv.dot(&w);
        let rhs = v.dot(&metric.fac.apply_b_inv(&w));
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        assert!((metric.fac.apply_metric(&v) - &metric.dense * &v).norm() <= 1e-9 * (1.0 + v.norm()));
    }
}

#[test]
fn indefinite_metric_is_detected() {
    let mut rng = SplitMix64::seed_from_u64(22);
    let mut seen = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=12);
        let u2 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
        let u1 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let (gamma, mu) = (rng.random_range(0.1..2.0), rng.random_range(0.0..1.0));
        let split = SpectralSplit { u1: u1.clone(), u2: u2.clone(), dropped: 0 };
        let dense = DMatrix::identity(n, n) * (gamma + mu) + &u1 * u1.transpose() - &u2 * u2.transpose();
        let min = lambda_min(&dense);
        match factor_metric(&split, gamma, mu) {
            Err(SubproblemError::NotPositiveDefinite) => {
                assert!(min <= 1e-6, "rejected a positive definite metric ({min:e})");
                seen += 1;
            }
            Ok(_) => assert!(min > 0.0, "accepted an indefinite metric ({min:e})"),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(seen > 10);
}

#[test]
fn prox_metric_matches_both_oracles() {
    let mut rng = SplitMix64::seed_from_u64(23);
    for trial in 0..30 {
        let metric = sample_metric(&mut rng, 30);
        let n = metric.dense.nrows();
        let reg = random_regularizer(&mut rng, n, trial % 2 == 1);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let y = normal_vector(&mut rng, n) * 2.0;
        let out = prox_metric(&metric.fac, &ctx, &y, NewtonOptions::default()).unwrap();
        let a = prox_dense(&metric.dense, &reg, &y);
        let b = prox_dense_coordinate(&metric.dense, &reg, &y);
        assert!((&a - &b).amax() <= 1e-8, "oracles disagree: {:e}", (&a - &b).amax());
        assert!((&out.point - &a).amax() <= 1e-7, "trial {trial}: {:e}", (&out.point - &a).amax());
    }
}

#[test]
fn zero_regularizer_prox_is_identity_and_step_is_newton() {
    let mut rng = SplitMix64::seed_from_u64(24);
    let metric = sample_metric(&mut rng, 20);
    let n = metric.dense.nrows();
    let reg = Regularizer::Zero;
    let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
    let y = normal_vector(&mut rng, n);
    let out = prox_metric(&metric.fac, &ctx, &y, NewtonOptions::default()).unwrap();
    assert_eq!(out.point, y);
    let x = normal_vector(&mut rng, n);
    let g = normal_vector(&mut rng, n);
    let sol = solve_subproblem(&x, &g, &metric.fac, &ctx, NewtonOptions::default()).unwrap();
    let exact = -metric.dense.clone().lu().solve(&g).unwrap();
    assert!((sol.d - exact).norm() <= 1e-9 * (1.0 + g.norm()));
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = SplitMix64::seed_from_u64(25);
    let mut checked = 0;
    while checked < 30 {
        let metric = sample_metric(&mut rng, 25);
        let n = metric.dense.nrows();
        let (r1, r2) = (metric.fac.r1(), metric.fac.r2());
        let reg = random_regularizer(&mut rng, n, checked % 2 == 0);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let y = normal_vector(&mut rng, n) * 2.0;
        let alpha = AlphaPair { alpha1: normal_vector(&mut rng, r1) * 0.1, alpha2: normal_vector(&mut rng, r2) * 0.1 };
        let dir = AlphaPair { alpha1: normal_vector(&mut rng, r1), alpha2: normal_vector(&mut rng, r2) };
        let h = 1e-7;
        let shifted = |t: f64| AlphaPair {
            alpha1: &alpha.alpha1 + &dir.alpha1 * t,
            alpha2: &alpha.alpha2 + &dir.alpha2 * t,
        };
        let fd = (eval_l(&metric.fac, &ctx, &y, &shifted(h)) - eval_l(&metric.fac, &ctx, &y, &shifted(-h))) / (2.0 * h);
        let g = eval_g(&metric.fac, &ctx, &y, &alpha);
        let mut stacked = DVector::zeros(r1 + r2);
        stacked.rows_mut(0, r1).copy_from(&dir.alpha1);
        stacked.rows_mut(r1, r2).copy_from(&dir.alpha2);
        let gd = g * stacked;
        // The prox is piecewise smooth; skip samples whose stencil crosses a kink.
        let g_plus = eval_g(&metric.fac, &ctx, &y, &shifted(h));
        let g_minus = eval_g(&metric.fac, &ctx, &y, &shifted(-h));
        if (&g_plus - &g_minus).amax() > 1e-3 {
            continue;
        }
        assert!((&fd - &gd).norm() <= 1e-4 * (1.0 + gd.norm()), "{:e}", (&fd - &gd).norm());
        checked += 1;
    }
}

#[test]
fn subproblem_solution_is_minimal_and_stationary() {
    let mut rng = SplitMix64::seed_from_u64(26);
    for trial in 0..10 {
        let metric = sample_metric(&mut rng, 25);
        let n = metric.dense.nrows();
        let reg = random_regularizer(&mut rng, n, trial % 2 == 0);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let x = normal_vector(&mut rng, n);
        let g = normal_vector(&mut rng, n);
        let sol = solve_subproblem(&x, &g, &metric.fac, &ctx, NewtonOptions::default()).unwrap();
        let best = model_value(&reg, &metric.dense, &x, &g, &sol.d);
        for probe in 0..100 {
            let scale = 10f64.powi(-(probe % 6));
            let v = &sol.d + normal_vector(&mut rng, n) * scale;
            assert!(model_value(&reg, &metric.dense, &x, &g, &v) >= best - 1e-10);
        }
        // -(g + B d) is a subgradient of phi at x + d
        let sub = -(&g + &metric.dense * &sol.d);
        assert!(in_subdifferential(&reg, &(&x + &sol.d), &sub, 1e-7));
    }
}

#[test]
fn residual_scaling_between_metrics() {
    let mut rng = SplitMix64::seed_from_u64(27);
    for trial in 0..100 {
        let n = rng.random_range(2..=20);
        let h = random_spd(&mut rng, n, 0.2, 5.0);
        let ht = random_spd(&mut rng, n, 0.2, 5.0);
        let reg = random_regularizer(&mut rng, n, trial % 2 == 0);
        let x = normal_vector(&mut rng, n);
        let g = normal_vector(&mut rng, n);
        let r = residual_dense(&h, &reg, &x, &g).norm();
        let rt = residual_dense(&ht, &reg, &x, &g).norm();
        let bound = (1.0 + lambda_max(&ht) / lambda_min(&h)) * (lambda_max(&h) / lambda_min(&ht)) * r;
        assert!(rt <= bound * (1.0 + 1e-9) + 1e-12, "trial {trial}: {rt} > {bound}");
    }
}

#[test]
fn newton_residual_decreases_on_l1() {
    let mut rng = SplitMix64::seed_from_u64(28);
    for _ in 0..20 {
        let metric = sample_metric(&mut rng, 30);
        let n = metric.dense.nrows();
        let reg = random_regularizer(&mut rng, n, false);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let y = normal_vector(&mut rng, n) * 2.0;
        let mut alpha = AlphaPair::zeros(metric.fac.r1(), metric.fac.r2());
        let mut last = eval_l(&metric.fac, &ctx, &y, &alpha).norm();
        for _ in 0..10 {
            if last < 1e-10 {
                break;
            }
            let one = NewtonOptions { tol: 0.0, max_iter: 1, ..Default::default() };
            alpha = match semismooth_newton(&metric.fac, &ctx, &y, &alpha, one) {
                Ok(out) => out.alpha,
                Err(SubproblemError::NoConvergence { best, .. }) => best,
                Err(e) => panic!("{e}"),
            };
            let now = eval_l(&metric.fac, &ctx, &y, &alpha).norm();
            assert!(now <= last * (1.0 + 1e-8) + 1e-13, "{now:e} > {last:e}");
            last = now;
        }
    }
}

#[test]
fn coefficients_at_the_prox_point_solve_the_system() {
    let mut rng = SplitMix64::seed_from_u64(27);
    for i in 0..40 {
        let metric = sample_metric(&mut rng, 30);
        let n = metric.dense.nrows();
        let reg = random_regularizer(&mut rng, n, i % 2 == 0);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let y = normal_vector(&mut rng, n) * 2.0;
        let p = prox_metric(&metric.fac, &ctx, &y, NewtonOptions::default()).unwrap().point;
        let alpha = metric.fac.alpha_at(&y, &p);
        assert!(eval_l(&metric.fac, &ctx, &y, &alpha).norm() < 1e-8);
    }
}

#[test]
fn warm_and_cold_starts_agree() {
    let mut rng = SplitMix64::seed_from_u64(28);
    for i in 0..40 {
        let metric = sample_metric(&mut rng, 30);
        let n = metric.dense.nrows();
        let reg = random_regularizer(&mut rng, n, i % 2 == 1);
        let ctx = ScaledProxContext::new(&reg, metric.fac.gamma_hat()).unwrap();
        let (x, g) = (normal_vector(&mut rng, n), normal_vector(&mut rng, n));
        let warm = solve_subproblem(&x, &g, &metric.fac, &ctx, NewtonOptions::default()).unwrap();
        let cold_opts = NewtonOptions { warm_start: false, ..Default::default() };
        let cold = solve_subproblem(&x, &g, &metric.fac, &ctx, cold_opts).unwrap();
        assert!((warm.d - cold.d).amax() < 1e-9);
    }
}
