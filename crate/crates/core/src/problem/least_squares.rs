use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::SmoothPart;
use crate::error::{check_dim, invalid, Result};

/// Data `(A, b)` of `1/2 ||Ax - b||^2`, with `A` of size `m x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLeastSquaresData {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseLeastSquaresData {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("least-squares data contains non-finite entries"));
        }
        Ok(Self { a, b })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Largest eigenvalue of `A^T A`, i.e. the Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> f64 {
        let ata = self.a.tr_mul(&self.a);
        ata.symmetric_eigenvalues().max()
    }
}

/// `f(x) = 1/2 ||Ax - b||^2`.
#[derive(Debug)]
pub struct LeastSquares {
    data: Arc<DenseLeastSquaresData>,
    matvecs: AtomicU64,
}

impl LeastSquares {
    pub fn new(data: Arc<DenseLeastSquaresData>) -> Self {
        Self { data, matvecs: AtomicU64::new(0) }
    }

    pub fn data(&self) -> &DenseLeastSquaresData {
        &self.data
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        &self.data.a * x - &self.data.b
    }

    fn adjoint(&self, r: &DVector<f64>) -> DVector<f64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        self.data.a.tr_mul(r)
    }
}

impl SmoothPart for LeastSquares {
    fn dim(&self) -> usize {
        self.data.cols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.adjoint(&self.residual(x))
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = self.residual(x);
        (0.5 * r.norm_squared(), self.adjoint(&r))
    }

    /// `grad f(x)^T d + 1/2 ||A d||^2`, one product with `A`.
    fn value_change(&self, _x: &DVector<f64>, d: &DVector<f64>, _f_x: f64, grad_x: &DVector<f64>) -> f64 {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        grad_x.dot(d) + 0.5 * (&self.data.a * d).norm_squared()
    }

    fn operator_applications(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }
}
