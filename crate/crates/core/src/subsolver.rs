//! Exact evaluation of `prox_phi^{B_hat}` for
//! `B_hat = gamma_hat I + U1 U1^T - U2 U2^T`.
//!
//! The prox in the full metric equals the scaled prox at a shifted point,
//!
//! ```text
//! prox^{B_hat}(y) = prox^{gamma_hat I}(y + B1^{-1} U2 a2 - U1 a1 / gamma_hat),
//! ```
//!
//! where `B1 = gamma_hat I + U1 U1^T` and `(a1, a2)` is the unique zero of
//!
//! ```text
//! L1(a) = U1^T (y + B1^{-1} U2 a2 - p(a)) + a1
//! L2(a) = U2^T (y - p(a)) + a2,        p(a) = prox^{gamma_hat I}(z(a)).
//! ```
//!
//! `L` is solved by semismooth Newton with the generalized derivative
//!
//! ```text
//! G(a) = [U1 U2]^T P(z) [U1 / gamma_hat, -B1^{-1} U2] + [[I, U1^T B1^{-1} U2], [0, I]].
//! ```
//!
//! Inverses of `B1` and `B_hat` are applied through Sherman-Morrison-Woodbury
//! with cached Cholesky factors of the small Gram matrices
//! `I + U1^T U1 / gamma_hat` and `I - U2^T B1^{-1} U2`. A failed factorization
//! of the latter is exactly the statement that `B_hat` is not positive
//! definite.
//!
//! [`prox_metric`] starts Newton from `a = 0`. [`solve_subproblem`] by default
//! starts from [`MetricFactors::alpha_at`] the current iterate, which is the
//! exact zero when `d = 0` and close to it once the outer steps are small.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::lmqn::SpectralSplit;
use crate::prox::ScaledProxContext;

/// Smallest admissible Cholesky pivot (squared) of `I - U2^T B1^{-1} U2`,
/// whose eigenvalues lie in `(0, 1]` for a positive definite metric.
const MIN_SCHUR_PIVOT: f64 = 1e-13;

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubproblemError {
    #[error("regularized metric is not positive definite")]
    NotPositiveDefinite,
    #[error("semismooth Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { best: AlphaPair, residual: f64, iterations: usize },
}

/// Coefficients `(a1, a2)` of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPair {
    pub alpha1: DVector<f64>,
    pub alpha2: DVector<f64>,
}

impl AlphaPair {
    pub fn zeros(r1: usize, r2: usize) -> Self {
        Self { alpha1: DVector::zeros(r1), alpha2: DVector::zeros(r2) }
    }

    fn stacked(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.alpha1.len() + self.alpha2.len());
        v.rows_mut(0, self.alpha1.len()).copy_from(&self.alpha1);
        v.rows_mut(self.alpha1.len(), self.alpha2.len()).copy_from(&self.alpha2);
        v
    }

    fn from_stacked(v: &DVector<f64>, r1: usize) -> Self {
        Self {
            alpha1: v.rows(0, r1).into_owned(),
            alpha2: v.rows(r1, v.len() - r1).into_owned(),
        }
    }
}

/// Factored form of `B_hat = gamma_hat I + U1 U1^T - U2 U2^T`.
#[derive(Debug, Clone)]
pub struct MetricFactors {
    gamma_hat: f64,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
    chol1: Option<Cholesky<f64, Dyn>>,
    chol2: Option<Cholesky<f64, Dyn>>,
    /// `B1^{-1} U2`
    w: DMatrix<f64>,
    /// `U1^T B1^{-1} U2`
    cross: DMatrix<f64>,
    /// `[U1 U2]`
    u: DMatrix<f64>,
    /// `[U1 / gamma_hat, -B1^{-1} U2]`
    shift_dirs: DMatrix<f64>,
}

/// Factors `split` shifted by `gamma + mu`, or reports that the result is
/// not positive definite.
pub fn factor_metric(split: &SpectralSplit, gamma: f64, mu: f64) -> Result<MetricFactors, SubproblemError> {
    let gamma_hat = gamma + mu;
    if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
        return Err(SubproblemError::NotPositiveDefinite);
    }
    let n = split.dim();
    let (r1, r2) = (split.u1.ncols(), split.u2.ncols());
    let u1 = split.u1.clone();
    let u2 = split.u2.clone();

    let chol1 = if r1 > 0 {
        let gram = DMatrix::identity(r1, r1) + u1.tr_mul(&u1) / gamma_hat;
        Some(Cholesky::new(gram).ok_or(SubproblemError::NotPositiveDefinite)?)
    } else {
        None
    };
    let mut fac = MetricFactors {
        gamma_hat,
        u1,
        u2,
        chol1,
        chol2: None,
        w: DMatrix::zeros(n, r2),
        cross: DMatrix::zeros(r1, r2),
        u: DMatrix::zeros(n, r1 + r2),
        shift_dirs: DMatrix::zeros(n, r1 + r2),
    };
    if r2 > 0 {
        let w = fac.apply_b1_inv_mat(&fac.u2);
        let schur = DMatrix::identity(r2, r2) - fac.u2.tr_mul(&w);
        let chol = Cholesky::new(schur).ok_or(SubproblemError::NotPositiveDefinite)?;
        if chol.l_dirty().diagonal().iter().any(|&d| !(d * d >= MIN_SCHUR_PIVOT)) {
            return Err(SubproblemError::NotPositiveDefinite);
        }
        fac.cross = fac.u1.tr_mul(&w);
        fac.w = w;
        fac.chol2 = Some(chol);
    }
    fac.u.columns_mut(0, r1).copy_from(&fac.u1);
    fac.u.columns_mut(r1, r2).copy_from(&fac.u2);
    fac.shift_dirs.columns_mut(0, r1).copy_from(&(&fac.u1 / gamma_hat));
    fac.shift_dirs.columns_mut(r1, r2).copy_from(&-&fac.w);
    Ok(fac)
}

impl MetricFactors {
    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn r1(&self) -> usize {
        self.u1.ncols()
    }

    pub fn r2(&self) -> usize {
        self.u2.ncols()
    }

    /// `B_hat v`.
    pub fn apply_metric(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.gamma_hat;
        if self.r1() > 0 {
            out += &self.u1 * self.u1.tr_mul(v);
        }
        if self.r2() > 0 {
            out -= &self.u2 * self.u2.tr_mul(v);
        }
        out
    }

    /// `B1^{-1} v = v / g - U1 (I + U1^T U1 / g)^{-1} U1^T v / g^2`.
    pub fn apply_b1_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        let g = self.gamma_hat;
        match &self.chol1 {
            None => v / g,
            Some(c) => v / g - &self.u1 * c.solve(&self.u1.tr_mul(v)) / (g * g),
        }
    }

    fn apply_b1_inv_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let g = self.gamma_hat;
        match &self.chol1 {
            None => m / g,
            Some(c) => m / g - &self.u1 * c.solve(&self.u1.tr_mul(m)) / (g * g),
        }
    }

    /// Coefficients that would solve `L(alpha) = 0` if `p` were
    /// `prox_phi^{B_hat}(y)`: `alpha2 = -U2^T (y - p)` and
    /// `alpha1 = -U1^T (y + B1^{-1} U2 alpha2 - p)`.
    pub fn alpha_at(&self, y: &DVector<f64>, p: &DVector<f64>) -> AlphaPair {
        let res = y - p;
        let alpha2 = -self.u2.tr_mul(&res);
        let alpha1 = -self.u1.tr_mul(&(res + &self.w * &alpha2));
        AlphaPair { alpha1, alpha2 }
    }

    /// `B_hat^{-1} v = B1^{-1} v + W (I - U2^T W)^{-1} W^T v` with `W = B1^{-1} U2`.
    pub fn apply_b_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        let base = self.apply_b1_inv(v);
        match &self.chol2 {
            None => base,
            Some(c) => base + &self.w * c.solve(&self.w.tr_mul(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Start [`solve_subproblem`] from the coefficients implied by `d = 0`
    /// instead of `alpha = 0`.
    pub warm_start: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10, warm_start: true }
    }
}

/// Converged semismooth Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub alpha: AlphaPair,
    pub iterations: usize,
    pub residual: f64,
    /// `prox^{gamma_hat I}(z(alpha))`, i.e. `prox^{B_hat}(y)`.
    pub point: DVector<f64>,
}

struct Coupled<'s> {
    fac: &'s MetricFactors,
    ctx: &'s ScaledProxContext<'s>,
    y: &'s DVector<f64>,
}

struct Evaluation {
    z: DVector<f64>,
    p: DVector<f64>,
    residual: DVector<f64>,
}

impl Coupled<'_> {
    fn new<'s>(fac: &'s MetricFactors, ctx: &'s ScaledProxContext<'s>, y: &'s DVector<f64>) -> Coupled<'s> {
        let rel = (ctx.gamma_hat() - fac.gamma_hat).abs() / fac.gamma_hat;
        assert!(rel <= 1e-12, "prox context and metric use different scales");
        assert_eq!(y.len(), fac.dim(), "point dimension");
        Coupled { fac, ctx, y }
    }

    fn eval(&self, alpha: &DVector<f64>) -> Evaluation {
        let f = self.fac;
        let (r1, r2) = (f.r1(), f.r2());
        let a1 = alpha.rows(0, r1);
        let a2 = alpha.rows(r1, r2);
        let mut v = self.y.clone();
        if r2 > 0 {
            v += &f.w * a2;
        }
        let mut z = v.clone();
        if r1 > 0 {
            z -= &f.u1 * a1 / f.gamma_hat;
        }
        let p = self.ctx.prox(&z);
        let mut residual = DVector::zeros(r1 + r2);
        if r1 > 0 {
            residual.rows_mut(0, r1).copy_from(&(f.u1.tr_mul(&(&v - &p)) + a1));
        }
        if r2 > 0 {
            residual.rows_mut(r1, r2).copy_from(&(f.u2.tr_mul(&(self.y - &p)) + a2));
        }
        Evaluation { z, p, residual }
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let f = self.fac;
        let (r1, r2) = (f.r1(), f.r2());
        let mut g = self.ctx.newton_derivative(z).sandwich(&f.u, &f.shift_dirs);
        for i in 0..r1 + r2 {
            g[(i, i)] += 1.0;
        }
        if r1 > 0 && r2 > 0 {
            let mut block = g.view_mut((0, r1), (r1, r2));
            block += &f.cross;
        }
        g
    }
}

/// `L(alpha)`, stacked as `(L1, L2)`.
pub fn eval_l(fac: &MetricFactors, ctx: &ScaledProxContext<'_>, y: &DVector<f64>, alpha: &AlphaPair) -> DVector<f64> {
    Coupled::new(fac, ctx, y).eval(&alpha.stacked()).residual
}

/// Generalized derivative `G(alpha)` of [`eval_l`].
pub fn eval_g(fac: &MetricFactors, ctx: &ScaledProxContext<'_>, y: &DVector<f64>, alpha: &AlphaPair) -> DMatrix<f64> {
    let sys = Coupled::new(fac, ctx, y);
    let e = sys.eval(&alpha.stacked());
    sys.jacobian(&e.z)
}

fn newton_direction(g: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let finite = |d: &DVector<f64>| d.iter().all(|v| v.is_finite());
    if let Some(d) = g.clone().lu().solve(rhs).filter(finite) {
        return Some(d);
    }
    let scale = g.diagonal().amax().max(1.0);
    let n = g.nrows();
    (g + DMatrix::identity(n, n) * (1e-12 * scale)).lu().solve(rhs).filter(finite)
}

/// `alpha - t step` with the first `t = 1, 1/2, 1/4, ...` that decreases
/// `||L||^2` sufficiently, with its evaluation. Falls back to the full step.
fn damped_update(
    sys: &Coupled<'_>,
    alpha: &DVector<f64>,
    step: &DVector<f64>,
    res: f64,
) -> (DVector<f64>, Evaluation) {
    let full = alpha - step;
    let full_eval = sys.eval(&full);
    if full_eval.residual.norm_squared() <= (1.0 - 2e-4) * res * res {
        return (full, full_eval);
    }
    let mut t = 0.5;
    for _ in 1..MAX_HALVINGS {
        let trial = alpha - step * t;
        let e = sys.eval(&trial);
        if e.residual.norm_squared() <= (1.0 - 2e-4 * t) * res * res {
            return (trial, e);
        }
        t *= 0.5;
    }
    (full, full_eval)
}

/// Semismooth Newton on `L(alpha) = 0`, stopping at `||L|| < tol`.
///
/// Steps are damped by backtracking on `||L||^2` when the full step does
/// not reduce it; pure Newton can cycle between pieces of the prox.
pub fn semismooth_newton(
    fac: &MetricFactors,
    ctx: &ScaledProxContext<'_>,
    y: &DVector<f64>,
    alpha0: &AlphaPair,
    opts: NewtonOptions,
) -> Result<NewtonOutcome, SubproblemError> {
    let sys = Coupled::new(fac, ctx, y);
    let r1 = fac.r1();
    let mut alpha = alpha0.stacked();
    assert_eq!(alpha.len(), r1 + fac.r2(), "initial coefficient dimension");
    let mut best = (f64::INFINITY, alpha.clone());
    let mut e = sys.eval(&alpha);
    for iter in 0..=opts.max_iter {
        let res = e.residual.norm();
        if res < best.0 {
            best = (res, alpha.clone());
        }
        // an empty system is solved by the empty coefficient vector
        if res < opts.tol || alpha.is_empty() {
            return Ok(NewtonOutcome {
                alpha: AlphaPair::from_stacked(&alpha, r1),
                iterations: iter,
                residual: res,
                point: e.p,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        match newton_direction(sys.jacobian(&e.z), &e.residual) {
            Some(step) => (alpha, e) = damped_update(&sys, &alpha, &step, res),
            None => {
                return Err(SubproblemError::NoConvergence {
                    best: AlphaPair::from_stacked(&best.1, r1),
                    residual: best.0,
                    iterations: iter,
                })
            }
        }
    }
    Err(SubproblemError::NoConvergence {
        best: AlphaPair::from_stacked(&best.1, r1),
        residual: best.0,
        iterations: opts.max_iter,
    })
}

/// `prox_phi^{B_hat}(y)` with the Newton iteration count.
pub fn prox_metric(
    fac: &MetricFactors,
    ctx: &ScaledProxContext<'_>,
    y: &DVector<f64>,
    opts: NewtonOptions,
) -> Result<NewtonOutcome, SubproblemError> {
    semismooth_newton(fac, ctx, y, &AlphaPair::zeros(fac.r1(), fac.r2()), opts)
}

/// Exact minimizer `d` of `g^T d + 1/2 d^T B_hat d + phi(x + d)`.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub d: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `d = prox^{B_hat}(x - B_hat^{-1} g) - x`.
pub fn solve_subproblem(
    x: &DVector<f64>,
    g: &DVector<f64>,
    fac: &MetricFactors,
    ctx: &ScaledProxContext<'_>,
    opts: NewtonOptions,
) -> Result<SubproblemSolution, SubproblemError> {
    let y = x - fac.apply_b_inv(g);
    let alpha0 = if opts.warm_start { fac.alpha_at(&y, x) } else { AlphaPair::zeros(fac.r1(), fac.r2()) };
    let out = semismooth_newton(fac, ctx, &y, &alpha0, opts)?;
    Ok(SubproblemSolution { d: out.point - x, iterations: out.iterations, residual: out.residual })
}
