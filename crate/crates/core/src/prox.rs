//! Scaled proximity operators `prox_phi^{gamma_hat I}` and their Newton
//! derivatives.
//!
//! With metric `gamma_hat * I` the proximity operator
//! `argmin_y phi(y) + gamma_hat/2 ||y - x||^2` has threshold
//! `t = lambda / gamma_hat`:
//!
//! * `l1`: componentwise soft thresholding, `sign(x_i) max(|x_i| - t, 0)`;
//! * group `l2,1`: blockwise shrinkage, `x_g max(1 - t / ||x_g||, 0)`.
//!
//! The Newton derivative `P(x)` is the diagonal 0/1 activity pattern for
//! `l1`, and per active block `(1 - t/||x_g||) I + t/||x_g||^3 x_g x_g^T`
//! (zero on inactive blocks). Both are applied as operators; no `n x n`
//! matrix is ever formed.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::problem::{Groups, Regularizer};

/// Regularizer paired with the scalar metric `gamma_hat * I`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProxContext<'a> {
    reg: &'a Regularizer,
    gamma_hat: f64,
    counter: Option<&'a AtomicU64>,
}

impl<'a> ScaledProxContext<'a> {
    pub fn new(reg: &'a Regularizer, gamma_hat: f64) -> Result<Self> {
        if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
            return Err(invalid(format!("metric scale must be positive, got {gamma_hat}")));
        }
        Ok(Self { reg, gamma_hat, counter: None })
    }

    pub(crate) fn counted(mut self, counter: &'a AtomicU64) -> Self {
        self.counter = Some(counter);
        self
    }

    pub fn regularizer(&self) -> &'a Regularizer {
        self.reg
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    /// Same regularizer (and counter) with a different metric scale.
    pub fn rescaled(&self, gamma_hat: f64) -> Result<Self> {
        let mut ctx = Self::new(self.reg, gamma_hat)?;
        ctx.counter = self.counter;
        Ok(ctx)
    }

    pub fn threshold(&self) -> f64 {
        self.reg.lambda() / self.gamma_hat
    }

    /// `prox_phi^{gamma_hat I}(x)`.
    pub fn prox(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(c) = self.counter {
            c.fetch_add(1, Ordering::Relaxed);
        }
        let t = self.threshold();
        match self.reg {
            Regularizer::Zero => x.clone(),
            Regularizer::L1 { .. } => x.map(|v| soft_threshold(v, t)),
            Regularizer::GroupL21 { groups, .. } => {
                let mut p = x.clone();
                for g in groups.iter() {
                    let norm = block_norm(x, g);
                    let scale = if norm > t { 1.0 - t / norm } else { 0.0 };
                    for &i in g {
                        p[i] *= scale;
                    }
                }
                p
            }
        }
    }

    /// Newton derivative of [`ScaledProxContext::prox`] at `x`.
    pub fn newton_derivative(&self, x: &DVector<f64>) -> NewtonDerivative<'a> {
        let t = self.threshold();
        match self.reg {
            Regularizer::Zero => NewtonDerivative::Identity,
            Regularizer::L1 { .. } => {
                NewtonDerivative::Diagonal(x.iter().map(|v| v.abs() >= t).collect())
            }
            Regularizer::GroupL21 { groups, .. } => {
                let blocks = groups
                    .iter()
                    .map(|g| {
                        let norm = block_norm(x, g);
                        if norm >= t && norm > 0.0 {
                            BlockDerivative::Active {
                                shrink: 1.0 - t / norm,
                                rank_one: t / (norm * norm * norm),
                                x: g.iter().map(|&i| x[i]).collect(),
                            }
                        } else {
                            BlockDerivative::Inactive
                        }
                    })
                    .collect();
                NewtonDerivative::Blocks { groups, blocks }
            }
        }
    }

    /// `P(x) v`.
    pub fn newton_derivative_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.newton_derivative(x).apply(v)
    }
}

/// A Newton derivative `P` of the scaled proximity operator, kept in
/// structured form.
#[derive(Debug, Clone)]
pub enum NewtonDerivative<'a> {
    Identity,
    /// `true` marks active (unit) diagonal entries.
    Diagonal(Vec<bool>),
    Blocks { groups: &'a Groups, blocks: Vec<BlockDerivative> },
}

#[derive(Debug, Clone)]
pub enum BlockDerivative {
    Inactive,
    Active { shrink: f64, rank_one: f64, x: Vec<f64> },
}

impl NewtonDerivative<'_> {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NewtonDerivative::Identity => v.clone(),
            NewtonDerivative::Diagonal(mask) => {
                DVector::from_iterator(v.len(), v.iter().zip(mask).map(|(&vi, &on)| if on { vi } else { 0.0 }))
            }
            NewtonDerivative::Blocks { groups, blocks } => {
                let mut out = DVector::zeros(v.len());
                for (g, b) in groups.iter().zip(blocks) {
                    if let BlockDerivative::Active { shrink, rank_one, x } = b {
                        let xv: f64 = g.iter().zip(x).map(|(&i, xi)| xi * v[i]).sum();
                        for (&i, xi) in g.iter().zip(x) {
                            out[i] = shrink * v[i] + rank_one * xi * xv;
                        }
                    }
                }
                out
            }
        }
    }

    /// `L^T P R`. For a diagonal `P` only the active rows are touched.
    pub fn sandwich(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            NewtonDerivative::Identity => left.tr_mul(right),
            NewtonDerivative::Diagonal(mask) => {
                let active: Vec<usize> = mask.iter().enumerate().filter_map(|(i, &on)| on.then_some(i)).collect();
                left.select_rows(&active).tr_mul(&right.select_rows(&active))
            }
            NewtonDerivative::Blocks { .. } => left.tr_mul(&self.apply_columns(right)),
        }
    }

    /// `P M`, column by column.
    pub fn apply_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, col) in m.column_iter().enumerate() {
            out.set_column(j, &self.apply(&col.into_owned()));
        }
        out
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn block_norm(x: &DVector<f64>, idx: &[usize]) -> f64 {
    crate::problem::regularizer_block_norm(x.as_slice(), idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn soft_threshold_example() {
        let reg = Regularizer::l1(2.0).unwrap();
        let ctx = ScaledProxContext::new(&reg, 2.0).unwrap();
        assert_eq!(ctx.prox(&dvector![2.0, -0.5, 0.0]), dvector![1.0, 0.0, 0.0]);
    }

    #[test]
    fn group_shrink_by_half() {
        let reg = Regularizer::group_l21(1.0, Groups::single(2)).unwrap();
        let ctx = ScaledProxContext::new(&reg, 1.0).unwrap();
        let x = dvector![1.2, -1.6];
        assert!((ctx.prox(&x) - &x / 2.0).norm() < 1e-15);
    }

    #[test]
    fn zero_group_stays_zero() {
        let reg = Regularizer::group_l21(1.0, Groups::single(3)).unwrap();
        let ctx = ScaledProxContext::new(&reg, 1.0).unwrap();
        assert_eq!(ctx.prox(&DVector::zeros(3)), DVector::zeros(3));
    }

    #[test]
    fn l1_derivative_pattern() {
        let reg = Regularizer::l1(1.0).unwrap();
        let ctx = ScaledProxContext::new(&reg, 1.0).unwrap();
        let pv = ctx.newton_derivative_apply(&dvector![2.0, 0.5], &dvector![3.0, 3.0]);
        assert_eq!(pv, dvector![3.0, 0.0]);
    }

    #[test]
    fn sandwich_matches_dense_product() {
        use crate::problem::Groups;
        let left = DMatrix::from_fn(5, 2, |i, j| (i as f64) - 0.5 * j as f64);
        let right = DMatrix::from_fn(5, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let x = dvector![2.0, 0.1, -3.0, 0.4, 1.5];
        let regs = [
            Regularizer::Zero,
            Regularizer::l1(0.5).unwrap(),
            Regularizer::group_l21(1.0, Groups::new(vec![vec![0, 2], vec![1, 3, 4]], 5).unwrap()).unwrap(),
        ];
        for reg in &regs {
            let ctx = ScaledProxContext::new(reg, 1.0).unwrap();
            let p = ctx.newton_derivative(&x);
            let dense = left.tr_mul(&p.apply_columns(&right));
            assert!((p.sandwich(&left, &right) - dense).amax() < 1e-14);
        }
    }

    #[test]
    fn zero_derivative_is_identity() {
        let reg = Regularizer::Zero;
        let ctx = ScaledProxContext::new(&reg, 3.0).unwrap();
        let v = dvector![1.0, -2.0];
        assert_eq!(ctx.newton_derivative_apply(&dvector![5.0, 0.0], &v), v);
        assert_eq!(ctx.prox(&v), v);
    }

    #[test]
    fn boundary_uses_active_branch() {
        let reg = Regularizer::l1(1.0).unwrap();
        let ctx = ScaledProxContext::new(&reg, 1.0).unwrap();
        assert_eq!(ctx.newton_derivative_apply(&dvector![1.0], &dvector![2.0]), dvector![2.0]);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        let reg = Regularizer::Zero;
        assert!(ScaledProxContext::new(&reg, 0.0).is_err());
        assert!(ScaledProxContext::new(&reg, f64::INFINITY).is_err());
    }
}
