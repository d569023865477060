//! Regularized proximal quasi-Newton methods for composite problems
//!
//! ```text
//! minimize  psi(x) = f(x) + phi(x)
//! ```
//!
//! where `f` is smooth (possibly nonconvex) and `phi` is a convex, real-valued
//! regularizer (`l1` or group `l2,1`). Each outer iteration minimizes a
//! quadratic model built from a limited-memory BFGS or SR1 matrix plus a
//! multiple `mu * I` of the identity. Acceptance of the step and the update of
//! `mu` follow a ratio test on predicted versus actual reduction, so no line
//! search and no trust-region radius are needed.
//!
//! The subproblem is a proximity operator in the variable metric
//! `B + mu I = (gamma + mu) I + U1 U1^T - U2 U2^T`. It is evaluated exactly by
//! reducing it to a tiny nonlinear system in `r1 + r2` unknowns, solved with a
//! semismooth Newton method, plus Sherman-Morrison-Woodbury solves with the
//! metric. See [`subsolver`].
//!
//! ```
//! use nalgebra::DVector;
//! use rpqn::problem::make_lasso;
//! use rpqn::solver::{solve, RpqnConfig, Status};
//!
//! let inst = make_lasso(7, 60, 30, 0.1).unwrap();
//! let x0 = DVector::zeros(60);
//! let out = solve(&inst.problem, &x0, &RpqnConfig::default()).unwrap();
//! assert_eq!(out.status, Status::Converged);
//! assert!(out.trace.final_state.res_norm.unwrap() <= 1e-6);
//! ```
//!
//! The guide in `book/` walks through the pieces; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod baselines;
mod error;
pub mod lmqn;
#[cfg(any(test, feature = "oracles"))]
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod solver;
pub mod subsolver;
pub mod trace;

pub use error::{Error, Result};

/// Book chapters, compiled so their listings run under `cargo test --doc`.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/problems.md")]
    pub mod problems {}
    #[doc = include_str!("../../../book/src/prox.md")]
    pub mod prox {}
    #[doc = include_str!("../../../book/src/compact.md")]
    pub mod compact {}
    #[doc = include_str!("../../../book/src/subproblem.md")]
    pub mod subproblem {}
    #[doc = include_str!("../../../book/src/method.md")]
    pub mod method {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub mod benchmarks {}
}
