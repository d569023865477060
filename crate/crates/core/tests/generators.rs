use nalgebra::DVector;
use rand::SeedableRng;
use rand::Rng;
use rand_xoshiro::SplitMix64;
use rpqn::problem::{
    haar2d, haar2d_inverse, make_group_lasso, make_lasso, make_student_t_restoration, CompositeProblem,
    GaussianBlur, Haar2d,
};

fn check_gradient(problem: &CompositeProblem, x: &DVector<f64>) {
    let g = problem.eval_gradient(x).unwrap();
    let mut fd = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (problem.eval_smooth(&xp).unwrap() - problem.eval_smooth(&xm).unwrap()) / (2.0 * h);
    }
    let rel = (&fd - &g).norm() / g.norm().max(1.0);
    assert!(rel <= 1e-5, "relative gradient error {rel:e}");
}

fn random_point(rng: &mut SplitMix64, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

#[test]
fn least_squares_gradients() {
    let mut rng = SplitMix64::seed_from_u64(31);
    for seed in 0..3 {
        let gl = make_group_lasso(seed, 2).unwrap();
        check_gradient(&gl.problem, &random_point(&mut rng, gl.problem.dim(), 1.0));
        let lasso = make_lasso(seed, 40, 20, 0.1).unwrap();
        check_gradient(&lasso.problem, &random_point(&mut rng, 40, 1.0));
    }
}

#[test]
fn restoration_gradient() {
    let mut rng = SplitMix64::seed_from_u64(32);
    let inst = make_student_t_restoration(3, 16, 1e-4, 1e-3).unwrap();
    check_gradient(&inst.problem, &inst.start);
    let x = &inst.start + random_point(&mut rng, inst.start.len(), 0.1);
    check_gradient(&inst.problem, &x);
}

#[test]
fn haar_is_orthonormal_and_invertible() {
    let mut rng = SplitMix64::seed_from_u64(33);
    for (side, levels) in [(8, 1), (16, 2), (32, 3)] {
        let img = nalgebra::DMatrix::from_fn(side, side, |_, _| rng.random_range(-1.0..1.0));
        let c = haar2d(&img, levels).unwrap();
        assert!((c.norm() - img.norm()).abs() <= 1e-12 * img.norm());
        let back = haar2d_inverse(&c, side, levels).unwrap();
        assert!((back - &img).amax() <= 1e-12);
        let t = Haar2d::new(side, levels).unwrap();
        let a: Vec<f64> = (0..side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&t.forward(&a), &t.forward(&b)) - dot(&a, &b)).abs() <= 1e-11);
    }
}

#[test]
fn blur_adjoint_identity() {
    let mut rng = SplitMix64::seed_from_u64(34);
    for side in [16, 32, 64] {
        let blur = GaussianBlur::new(side);
        let u: Vec<f64> = (0..side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = dot(&blur.apply(&u), &v);
        let rhs = dot(&u, &blur.adjoint(&v));
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn generation_is_deterministic() {
    let a = make_group_lasso(9, 2).unwrap();
    let b = make_group_lasso(9, 2).unwrap();
    assert_eq!(a.data.a, b.data.a);
    assert_eq!(a.regularizer, b.regularizer);
    let c = make_lasso(9, 30, 15, 0.1).unwrap();
    let d = make_lasso(10, 30, 15, 0.1).unwrap();
    assert_ne!(c.data.b, d.data.b);
}
