use nalgebra::DVector;
use rpqn::problem::{
    make_group_lasso, make_lasso, make_student_t_restoration, CompositeProblem, LeastSquaresInstance, Regularizer,
    RestorationInstance,
};

use crate::error::Result;
use crate::spec::Scale;

pub const LASSO_LAMBDA: f64 = 0.1;
pub const RESTORATION_LAMBDA: f64 = 1e-4;
pub const RESTORATION_NOISE: f64 = 1e-3;

/// A generated benchmark problem with its customary starting point.
#[derive(Debug)]
pub enum Instance {
    LeastSquares(LeastSquaresInstance),
    Restoration(RestorationInstance),
}

impl Instance {
    /// Builds the instance for `scale`; `lambda` overrides the family default.
    pub fn build(scale: Scale, seed: u64, lambda: Option<f64>) -> Result<Self> {
        Ok(match scale {
            Scale::GroupLasso { k } => {
                let inst = make_group_lasso(seed, k)?;
                match lambda {
                    None => Instance::LeastSquares(inst),
                    Some(l) => {
                        let groups = inst.regularizer.groups().expect("grouped family").clone();
                        Instance::LeastSquares(LeastSquaresInstance::from_parts(
                            (*inst.data).clone(),
                            Regularizer::group_l21(l, groups)?,
                            inst.family,
                            seed,
                        )?)
                    }
                }
            }
            Scale::Lasso { n, m } => Instance::LeastSquares(make_lasso(seed, n, m, lambda.unwrap_or(LASSO_LAMBDA))?),
            Scale::Restoration { side } => Instance::Restoration(make_student_t_restoration(
                seed,
                side,
                lambda.unwrap_or(RESTORATION_LAMBDA),
                RESTORATION_NOISE,
            )?),
        })
    }

    pub fn problem(&self) -> &CompositeProblem {
        match self {
            Instance::LeastSquares(i) => &i.problem,
            Instance::Restoration(i) => &i.problem,
        }
    }

    /// The origin for least squares, the observation's coefficients for
    /// restoration.
    pub fn start(&self) -> DVector<f64> {
        match self {
            Instance::LeastSquares(i) => DVector::zeros(i.problem.dim()),
            Instance::Restoration(i) => i.start.clone(),
        }
    }

    /// `lambda_max(A^T A)` for least-squares instances.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Instance::LeastSquares(i) => Some(i.data.lipschitz()),
            Instance::Restoration(_) => None,
        }
    }
}
