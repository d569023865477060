//! Composite problems `psi = f + phi` and seeded instance generators.

mod blur;
mod generators;
mod haar;
pub mod io;
mod least_squares;
mod regularizer;
pub(crate) use regularizer::block_norm as regularizer_block_norm;
mod restoration;
pub(crate) mod rng;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::prox::ScaledProxContext;

pub use blur::GaussianBlur;
pub use generators::{make_group_lasso, make_lasso, random_groups, Family, LeastSquaresInstance};
pub use haar::{haar2d, haar2d_inverse, Haar2d};
pub use least_squares::{DenseLeastSquaresData, LeastSquares};
pub use regularizer::{Groups, Regularizer};
pub use restoration::{
    make_student_t_restoration, synthetic_test_image, RestorationInstance, StudentTLoss,
};

/// Smooth part `f` of a composite problem.
pub trait SmoothPart: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// `f(x + d) - f(x)` given `f_x = f(x)` and `grad_x = grad f(x)`.
    ///
    /// The default subtracts two evaluations. Smooth parts with a closed form
    /// should override it: near a solution the difference is far below the
    /// rounding error of `f` itself.
    fn value_change(&self, x: &DVector<f64>, d: &DVector<f64>, f_x: f64, grad_x: &DVector<f64>) -> f64 {
        let _ = grad_x;
        self.value(&(x + d)) - f_x
    }

    /// Number of applications of the underlying linear operator (and its
    /// adjoint) performed so far, when the smooth part has one.
    fn operator_applications(&self) -> u64 {
        0
    }
}

/// Snapshot of evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub f_evals: u64,
    pub g_evals: u64,
    pub prox_evals: u64,
    /// Applications of `A` and `A^T`, counted separately.
    pub matvecs: u64,
}

impl EvalCounts {
    pub fn since(&self, start: &EvalCounts) -> EvalCounts {
        EvalCounts {
            f_evals: self.f_evals - start.f_evals,
            g_evals: self.g_evals - start.g_evals,
            prox_evals: self.prox_evals - start.prox_evals,
            matvecs: self.matvecs - start.matvecs,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    f: AtomicU64,
    g: AtomicU64,
    prox: AtomicU64,
}

/// `psi(x) = f(x) + phi(x)` on `R^n`.
///
/// Every evaluation through this type is counted, including proximity
/// operators obtained from [`CompositeProblem::prox_context`]. Counters are
/// atomic, so a problem can be shared read-only between threads.
pub struct CompositeProblem {
    smooth: Box<dyn SmoothPart>,
    regularizer: Regularizer,
    counters: Counters,
}

impl std::fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dim", &self.dim())
            .field("regularizer", &self.regularizer)
            .finish_non_exhaustive()
    }
}

impl CompositeProblem {
    pub fn new(smooth: impl SmoothPart + 'static, regularizer: Regularizer) -> Result<Self> {
        regularizer.check_dim(smooth.dim())?;
        Ok(Self { smooth: Box::new(smooth), regularizer, counters: Counters::default() })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn smooth(&self) -> &dyn SmoothPart {
        self.smooth.as_ref()
    }

    /// `psi(x)`.
    pub fn eval_objective(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.objective(x))
    }

    /// `f(x)`.
    pub fn eval_smooth(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.value(x))
    }

    /// `grad f(x)`.
    pub fn eval_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.gradient(x))
    }

    /// `phi(x)`. Not counted.
    pub fn eval_regularizer(&self, x: &DVector<f64>) -> Result<f64> {
        self.regularizer.eval(x.as_slice())
    }

    /// Scaled proximity operator context with `gamma_hat * I`, wired to this
    /// problem's prox counter.
    pub fn prox_context(&self, gamma_hat: f64) -> Result<ScaledProxContext<'_>> {
        Ok(ScaledProxContext::new(&self.regularizer, gamma_hat)?.counted(&self.counters.prox))
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            f_evals: self.counters.f.load(Ordering::Relaxed),
            g_evals: self.counters.g.load(Ordering::Relaxed),
            prox_evals: self.counters.prox.load(Ordering::Relaxed),
            matvecs: self.smooth.operator_applications(),
        }
    }

    pub(crate) fn objective(&self, x: &DVector<f64>) -> f64 {
        self.value(x) + self.phi(x)
    }

    pub(crate) fn value(&self, x: &DVector<f64>) -> f64 {
        self.counters.f.fetch_add(1, Ordering::Relaxed);
        self.smooth.value(x)
    }

    pub(crate) fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.counters.g.fetch_add(1, Ordering::Relaxed);
        self.smooth.gradient(x)
    }

    pub(crate) fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.counters.f.fetch_add(1, Ordering::Relaxed);
        self.counters.g.fetch_add(1, Ordering::Relaxed);
        self.smooth.value_and_gradient(x)
    }

    pub(crate) fn value_change(&self, x: &DVector<f64>, d: &DVector<f64>, f_x: f64, grad_x: &DVector<f64>) -> f64 {
        self.counters.f.fetch_add(1, Ordering::Relaxed);
        self.smooth.value_change(x, d, f_x, grad_x)
    }

    pub(crate) fn phi(&self, x: &DVector<f64>) -> f64 {
        self.regularizer.value(x.as_slice())
    }

    pub(crate) fn phi_change(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.regularizer.value_change(x.as_slice(), d.as_slice())
    }
}

/// `f(x) = 1/2 ||x - c||^2`, mostly useful for tests and examples.
#[derive(Debug, Clone)]
pub struct ShiftedQuadratic {
    pub center: DVector<f64>,
}

impl SmoothPart for ShiftedQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.center).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.center
    }

    fn value_change(&self, _x: &DVector<f64>, d: &DVector<f64>, _f_x: f64, grad_x: &DVector<f64>) -> f64 {
        grad_x.dot(d) + 0.5 * d.norm_squared()
    }
}
