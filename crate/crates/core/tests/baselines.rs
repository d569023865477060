use nalgebra::DVector;
use rpqn::baselines::{fista_solve, sparsa_solve, FistaConfig, SparsaConfig};
use rpqn::problem::{make_lasso, make_student_t_restoration};
use rpqn::trace::StopRule;

#[test]
fn fista_curvature_never_decreases() {
    let inst = make_lasso(1, 80, 40, 0.1).unwrap();
    let out = fista_solve(&inst.problem, &DVector::zeros(80), &FistaConfig::default()).unwrap();
    let rows = &out.trace.rows;
    assert!(!rows.is_empty());
    for w in rows.windows(2) {
        assert!(w[1].mu >= w[0].mu);
    }
    assert!(out.trace.final_state.mu >= rows.last().unwrap().mu);
    assert!(out.trace.final_state.mu <= 2.0 * inst.data.lipschitz());
}

#[test]
fn frozen_spectral_step_is_proximal_gradient() {
    let inst = make_lasso(2, 40, 20, 0.1).unwrap();
    let l = 1.5 * inst.data.lipschitz();
    let cfg = SparsaConfig {
        alpha_min: l,
        alpha_max: l,
        max_iter: 25,
        stop: StopRule::Residual { tol: 0.0 },
        ..Default::default()
    };
    let out = sparsa_solve(&inst.problem, &DVector::zeros(40), &cfg).unwrap();
    assert_eq!(out.trace.iterations(), 25);
    assert!(out.trace.rows.iter().all(|r| r.sub_iters == 1));
    let ctx = inst.problem.prox_context(l).unwrap();
    let mut x = DVector::zeros(40);
    for _ in 0..25 {
        let g = inst.problem.eval_gradient(&x).unwrap();
        x = ctx.prox(&(&x - g / l));
    }
    assert!((out.x - x).amax() <= 1e-13);
}

#[test]
fn sparsa_is_monotone_on_restoration() {
    let inst = make_student_t_restoration(1, 16, 1e-4, 1e-3).unwrap();
    let cfg = SparsaConfig { max_iter: 300, ..Default::default() };
    let out = sparsa_solve(&inst.problem, &inst.start, &cfg).unwrap();
    let mut psi: Vec<f64> = out.trace.rows.iter().map(|r| r.psi).collect();
    psi.push(out.trace.final_state.psi);
    for w in psi.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert!(out.trace.final_state.psi < out.trace.rows[0].psi);
}

#[test]
fn fista_respects_quadratic_bound() {
    // with L0 above the Lipschitz constant no backtracking is ever needed
    let inst = make_lasso(3, 40, 20, 0.1).unwrap();
    let cfg = FistaConfig { l0: 1.01 * inst.data.lipschitz(), max_iter: 50, ..Default::default() };
    let out = fista_solve(&inst.problem, &DVector::zeros(40), &cfg).unwrap();
    assert!(out.trace.rows.iter().all(|r| r.sub_iters == 1 && r.mu == cfg.l0));
}
