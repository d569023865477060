//! The regularized proximal quasi-Newton driver.
//!
//! Each iteration builds the limited-memory matrix `B_k`, solves
//!
//! ```text
//! min_d  grad f(x)^T d + 1/2 d^T (B_k + mu_k I) d + phi(x + d)
//! ```
//!
//! exactly, and compares the predicted reduction
//! `pred = -(grad f^T d + phi(x + d) - phi(x)) - 1/2 d^T B_k d`
//! with the actual reduction `ared = psi(x) - psi(x + d)`. Steps that cannot
//! be computed, or whose `pred <= p_min ||d|| ||r(x)||`, are unsuccessful
//! without evaluating `psi(x + d)`. Otherwise `rho = ared / pred` picks the
//! class:
//!
//! | `rho`              | class             | `x`      | `mu`           |
//! |--------------------|-------------------|----------|----------------|
//! | `<= c1`            | unsuccessful      | kept     | `sigma2 * mu`  |
//! | `(c1, c2]`         | successful        | `x + d`  | kept           |
//! | `> c2`             | highly successful | `x + d`  | `sigma1 * mu`  |
//!
//! Curvature pairs are only added after accepted steps. `mu` never drops
//! below `mu_min`; without a floor a long run of highly successful steps
//! underflows it to zero, where `sigma2 * mu` can no longer recover.
//!
//! Both reductions are formed from increments `f(x + d) - f(x)` and
//! `phi(x + d) - phi(x)` computed without cancellation (see
//! [`SmoothPart::value_change`](crate::problem::SmoothPart::value_change)),
//! and `psi` is carried forward as `psi - ared`. Subtracting two objective
//! values instead stalls the ratio test once `pred` reaches the rounding
//! level of `psi`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::lmqn::{eigensplit, gamma_init, CompactRep, PairBuffer, PairOutcome, QuasiNewtonKind};
use crate::problem::CompositeProblem;
use crate::subsolver::{factor_metric, solve_subproblem, NewtonOptions, SubproblemError};
use crate::trace::{IterationRecord, Recorder, StopRule, TraceTable};

pub use crate::trace::StepClass;

/// Below this, a predicted reduction that passed the gate is treated as degenerate.
const PRED_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpqnConfig {
    pub mu0: f64,
    pub p_min: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Floor applied after the `sigma1` decrease.
    pub mu_min: f64,
    /// Pair acceptance threshold for BFGS, and relative eigenvalue cutoff
    /// of the spectral split.
    pub eps_skip: f64,
    pub memory: usize,
    pub kind: QuasiNewtonKind,
    pub stop: StopRule,
    pub max_iter: usize,
    #[serde(skip)]
    pub newton: NewtonOptions,
}

impl Default for RpqnConfig {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            p_min: 1e-4,
            c1: 1e-4,
            c2: 0.9,
            sigma1: 0.5,
            sigma2: 4.0,
            mu_min: 1e-12,
            eps_skip: 1e-8,
            memory: 5,
            kind: QuasiNewtonKind::Bfgs,
            stop: StopRule::Residual { tol: 1e-6 },
            max_iter: 10_000,
            newton: NewtonOptions::default(),
        }
    }
}

impl RpqnConfig {
    pub fn with_memory(mut self, memory: usize) -> Self {
        self.memory = memory;
        self
    }

    pub fn with_kind(mut self, kind: QuasiNewtonKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(invalid(what.to_string())) };
        check(self.mu0 > 0.0 && self.mu0.is_finite(), "mu0 must be positive")?;
        check(self.p_min > 0.0 && self.p_min < 0.5, "p_min must lie in (0, 1/2)")?;
        check(self.c1 > 0.0 && self.c1 < 0.5, "c1 must lie in (0, 1/2)")?;
        check(self.c2 > self.c1 && self.c2 < 1.0, "c2 must lie in (c1, 1)")?;
        check(self.sigma1 > 0.0 && self.sigma1 < 1.0, "sigma1 must lie in (0, 1)")?;
        check(self.sigma2 > 1.0 && self.sigma2.is_finite(), "sigma2 must exceed 1")?;
        check(self.mu_min >= 0.0 && self.mu_min.is_finite(), "mu_min must be nonnegative")?;
        check(self.eps_skip > 0.0, "eps_skip must be positive")?;
        check(self.newton.tol > 0.0, "Newton tolerance must be positive")?;
        match self.stop {
            StopRule::Residual { tol } => check(tol >= 0.0, "residual tolerance must be nonnegative"),
            StopRule::ObjectiveError { psi_star, tol } => {
                check(psi_star.is_finite() && tol >= 0.0, "objective-error stop needs finite psi_star")
            }
        }
    }
}

/// Iterate with cached evaluations. `f`, `phi` and `psi` are advanced by
/// increments after the initial evaluation.
#[derive(Debug, Clone)]
pub struct RpqnState {
    pub x: DVector<f64>,
    pub mu: f64,
    pub buffer: PairBuffer,
    pub gamma: f64,
    pub k: usize,
    pub f: f64,
    pub phi: f64,
    pub psi: f64,
    pub grad: DVector<f64>,
    pub res_norm: f64,
}

impl RpqnState {
    pub fn new(problem: &CompositeProblem, x0: &DVector<f64>, config: &RpqnConfig) -> Result<Self> {
        check_dim(problem.dim(), x0.len())?;
        let (f, grad) = problem.value_and_gradient(x0);
        let phi = problem.phi(x0);
        let res_norm = residual_from_gradient(problem, x0, &grad).norm();
        Ok(Self {
            x: x0.clone(),
            mu: config.mu0,
            buffer: PairBuffer::new(config.memory),
            gamma: 1.0,
            k: 0,
            f,
            phi,
            psi: f + phi,
            grad,
            res_norm,
        })
    }
}

/// Stationarity residual `r(x) = prox^{I}(x - grad f(x)) - x`.
pub fn residual(problem: &CompositeProblem, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(problem.dim(), x.len())?;
    Ok(residual_from_gradient(problem, x, &problem.gradient(x)))
}

pub(crate) fn residual_from_gradient(problem: &CompositeProblem, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    let ctx = problem.prox_context(1.0).expect("unit scale is valid");
    ctx.prox(&(x - g)) - x
}

/// `psi(x) - q(d)` for the unregularized model `q`.
pub fn predicted_reduction(g: &DVector<f64>, d: &DVector<f64>, phi_x: f64, phi_xd: f64, bd: &DVector<f64>) -> f64 {
    -(g.dot(d) + phi_xd - phi_x) - 0.5 * d.dot(bd)
}

pub fn classify_step(rho: f64, c1: f64, c2: f64) -> StepClass {
    if rho.is_nan() || rho <= c1 {
        StepClass::Unsuccessful
    } else if rho <= c2 {
        StepClass::Successful
    } else {
        StepClass::HighlySuccessful
    }
}

/// Why a step was rejected before the ratio test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    NotPositiveDefinite,
    NoConvergence,
    Numerical,
    PredictionTooSmall,
    DegeneratePrediction,
}

/// Outcome of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub class: StepClass,
    pub rho: Option<f64>,
    pub pred: Option<f64>,
    pub ared: Option<f64>,
    pub d_norm: f64,
    pub sub_iters: usize,
    pub skipped_pair: bool,
    pub rejection: Option<Rejection>,
}

impl StepReport {
    fn rejected(why: Rejection, pred: Option<f64>, d_norm: f64, sub_iters: usize) -> Self {
        Self {
            class: StepClass::Unsuccessful,
            rho: None,
            pred,
            ared: None,
            d_norm,
            sub_iters,
            skipped_pair: false,
            rejection: Some(why),
        }
    }
}

/// One full iteration on `state`.
pub fn rpqn_step(problem: &CompositeProblem, state: &mut RpqnState, config: &RpqnConfig) -> StepReport {
    let report = match trial_step(problem, state, config) {
        Ok((d, d_b_d, sub_iters)) => assess_step(problem, state, config, &d, d_b_d, sub_iters),
        Err((why, sub_iters)) => {
            state.mu *= config.sigma2;
            StepReport::rejected(why, None, 0.0, sub_iters)
        }
    };
    state.k += 1;
    report
}

fn trial_step(
    problem: &CompositeProblem,
    state: &RpqnState,
    config: &RpqnConfig,
) -> std::result::Result<(DVector<f64>, f64, usize), (Rejection, usize)> {
    let rep = if state.buffer.is_empty() {
        CompactRep::scaled_identity(state.x.len(), state.gamma, config.kind)
    } else {
        CompactRep::build(&state.buffer, state.gamma, config.kind).map_err(|_| (Rejection::Numerical, 0))?
    };
    let split = eigensplit(&rep, config.eps_skip).map_err(|_| (Rejection::Numerical, 0))?;
    let fac = factor_metric(&split, state.gamma, state.mu).map_err(|_| (Rejection::NotPositiveDefinite, 0))?;
    let ctx = problem.prox_context(fac.gamma_hat()).map_err(|_| (Rejection::Numerical, 0))?;
    match solve_subproblem(&state.x, &state.grad, &fac, &ctx, config.newton) {
        Ok(sol) => {
            if sol.d.iter().any(|v| !v.is_finite()) {
                return Err((Rejection::Numerical, sol.iterations));
            }
            let d_b_d = sol.d.dot(&split.apply(state.gamma, &sol.d));
            Ok((sol.d, d_b_d, sol.iterations))
        }
        Err(SubproblemError::NoConvergence { iterations, .. }) => Err((Rejection::NoConvergence, iterations)),
        Err(SubproblemError::NotPositiveDefinite) => Err((Rejection::NotPositiveDefinite, 0)),
    }
}

/// Ratio test and updates for a trial step `d` with curvature `d^T B d`.
///
/// Does not advance `state.k`; [`rpqn_step`] does.
pub fn assess_step(
    problem: &CompositeProblem,
    state: &mut RpqnState,
    config: &RpqnConfig,
    d: &DVector<f64>,
    d_b_d: f64,
    sub_iters: usize,
) -> StepReport {
    let d_norm = d.norm();
    let trial = &state.x + d;
    // both reductions use cancellation-free increments of f and phi
    let dphi = problem.phi_change(&state.x, d);
    let pred = -(state.grad.dot(d) + dphi) - 0.5 * d_b_d;
    if !(pred > config.p_min * d_norm * state.res_norm) {
        state.mu *= config.sigma2;
        return StepReport::rejected(Rejection::PredictionTooSmall, Some(pred), d_norm, sub_iters);
    }
    if pred < PRED_FLOOR {
        state.mu *= config.sigma2;
        return StepReport::rejected(Rejection::DegeneratePrediction, Some(pred), d_norm, sub_iters);
    }
    let df = problem.value_change(&state.x, d, state.f, &state.grad);
    let ared = -(df + dphi);
    let rho = ared / pred;
    let class = classify_step(rho, config.c1, config.c2);
    let mut report = StepReport {
        class,
        rho: Some(rho),
        pred: Some(pred),
        ared: Some(ared),
        d_norm,
        sub_iters,
        skipped_pair: false,
        rejection: None,
    };
    match class {
        StepClass::Unsuccessful => {
            state.mu *= config.sigma2;
            return report;
        }
        StepClass::Successful => {}
        StepClass::HighlySuccessful => state.mu = (state.mu * config.sigma1).max(config.mu_min),
    }
    let grad = problem.gradient(&trial);
    let y = &grad - &state.grad;
    let outcome = state
        .buffer
        .push(d.clone(), y.clone(), config.kind, config.eps_skip)
        .unwrap_or(PairOutcome::Skipped);
    if outcome == PairOutcome::Accepted {
        state.gamma = gamma_init(d, &y, state.gamma);
    }
    report.skipped_pair = outcome == PairOutcome::Skipped;
    state.res_norm = residual_from_gradient(problem, &trial, &grad).norm();
    state.x = trial;
    state.f += df;
    state.phi += dphi;
    state.psi -= ared;
    state.grad = grad;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: DVector<f64>,
    pub trace: TraceTable,
    pub status: Status,
}

/// Runs the method from `x0` until `config.stop` holds or `config.max_iter`
/// iterations have been performed.
pub fn solve(problem: &CompositeProblem, x0: &DVector<f64>, config: &RpqnConfig) -> Result<SolveResult> {
    config.validate()?;
    let mut rec = Recorder::start(config.stop.psi_star());
    let mut state = RpqnState::new(problem, x0, config)?;
    let status = loop {
        if config.stop.is_met(state.psi, Some(state.res_norm)) {
            break Status::Converged;
        }
        if state.k >= config.max_iter {
            break Status::MaxIter;
        }
        let (time_s, psi, res_norm, mu) = (rec.elapsed(), state.psi, state.res_norm, state.mu);
        let r = rpqn_step(problem, &mut state, config);
        rec.push(IterationRecord {
            k: 0,
            time_s,
            psi,
            obj_err: None,
            res_norm: Some(res_norm),
            mu,
            rho: r.rho,
            step_class: Some(r.class),
            pred: r.pred,
            ared: r.ared,
            d_norm: r.d_norm,
            sub_iters: r.sub_iters,
            skipped_pair: r.skipped_pair,
            counts: problem.counts(),
        });
    };
    let trace = rec.finish(state.psi, Some(state.res_norm), state.mu, problem.counts());
    Ok(SolveResult { x: state.x, trace, status })
}
