//! First-order reference solvers: FISTA and SpaRSA.
//!
//! Both take steps `x+ = prox^{L I}(x - grad f(x) / L)` and differ in how the
//! curvature estimate `L` evolves. FISTA only ever increases `L` (backtracking
//! on the quadratic upper bound) and extrapolates with Nesterov momentum.
//! SpaRSA resets `L` every iteration to the Barzilai-Borwein value
//! `s^T y / s^T s` and backtracks on a sufficient-decrease test, which keeps
//! `psi` monotone and does not rely on convexity.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::problem::CompositeProblem;
use crate::solver::{residual_from_gradient, SolveResult, Status};
use crate::trace::{IterationRecord, Recorder, StopRule};

/// Sufficient-decrease constant of the SpaRSA acceptance test.
const SPARSA_DECREASE: f64 = 1e-4;
/// Upper bound on backtracking trials per iteration.
const MAX_BACKTRACKS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FistaConfig {
    pub l0: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub stop: StopRule,
}

impl Default for FistaConfig {
    fn default() -> Self {
        Self { l0: 1.0, eta: 2.0, max_iter: 100_000, stop: StopRule::Residual { tol: 1e-6 } }
    }
}

impl FistaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return Err(invalid("FISTA initial Lipschitz estimate must be positive"));
        }
        if !(self.eta > 1.0) {
            return Err(invalid("FISTA backtracking factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsaConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub stop: StopRule,
}

impl Default for SparsaConfig {
    fn default() -> Self {
        Self {
            alpha_min: 1e-30,
            alpha_max: 1e30,
            eta: 2.0,
            max_iter: 100_000,
            stop: StopRule::Residual { tol: 1e-6 },
        }
    }
}

impl SparsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(invalid("SpaRSA safeguards need 0 < alpha_min <= alpha_max < inf"));
        }
        if !(self.eta > 1.0) {
            return Err(invalid("SpaRSA backtracking factor must exceed 1"));
        }
        Ok(())
    }
}

fn prox_step(problem: &CompositeProblem, x: &DVector<f64>, g: &DVector<f64>, l: f64) -> DVector<f64> {
    let ctx = problem.prox_context(l).expect("curvature estimate stays positive");
    ctx.prox(&(x - g / l))
}

/// FISTA with backtracking on `L`; intended for convex `f`.
pub fn fista_solve(problem: &CompositeProblem, x0: &DVector<f64>, config: &FistaConfig) -> Result<SolveResult> {
    config.validate()?;
    check_dim(problem.dim(), x0.len())?;
    let mut rec = Recorder::start(config.stop.psi_star());
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0f64;
    let mut l = config.l0;
    let mut psi = problem.objective(&x);
    let residual_at = |x: &DVector<f64>| {
        config.stop.needs_residual().then(|| residual_from_gradient(problem, x, &problem.gradient(x)).norm())
    };
    let mut res = residual_at(&x);
    let mut k = 0;
    let status = loop {
        if config.stop.is_met(psi, res) {
            break Status::Converged;
        }
        if k >= config.max_iter {
            break Status::MaxIter;
        }
        let time_s = rec.elapsed();
        let (fy, gy) = problem.value_and_gradient(&y);
        let mut trials = 0;
        let (x_new, f_new) = loop {
            trials += 1;
            let cand = prox_step(problem, &y, &gy, l);
            let step = &cand - &y;
            let df = problem.value_change(&y, &step, fy, &gy);
            if df <= gy.dot(&step) + 0.5 * l * step.norm_squared() || trials >= MAX_BACKTRACKS {
                break (cand, fy + df);
            }
            l *= config.eta;
        };
        let psi_new = f_new + problem.phi(&x_new);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        let d_norm = (&x_new - &x).norm();
        rec.push(IterationRecord {
            k,
            time_s,
            psi,
            obj_err: None,
            res_norm: res,
            mu: l,
            rho: None,
            step_class: None,
            pred: None,
            ared: Some(psi - psi_new),
            d_norm,
            sub_iters: trials,
            skipped_pair: false,
            counts: problem.counts(),
        });
        x = x_new;
        psi = psi_new;
        t = t_new;
        res = residual_at(&x);
        k += 1;
    };
    let trace = rec.finish(psi, res, l, problem.counts());
    Ok(SolveResult { x, trace, status })
}

/// SpaRSA with Barzilai-Borwein curvature and monotone acceptance.
pub fn sparsa_solve(problem: &CompositeProblem, x0: &DVector<f64>, config: &SparsaConfig) -> Result<SolveResult> {
    config.validate()?;
    check_dim(problem.dim(), x0.len())?;
    let mut rec = Recorder::start(config.stop.psi_star());
    let mut x = x0.clone();
    let (mut f, mut g) = problem.value_and_gradient(&x);
    // advanced by increments, like the quasi-Newton driver
    let mut psi = f + problem.phi(&x);
    let mut res = residual_from_gradient(problem, &x, &g).norm();
    let mut l = 1.0f64.clamp(config.alpha_min, config.alpha_max);
    let mut k = 0;
    let status = loop {
        if config.stop.is_met(psi, Some(res)) {
            break Status::Converged;
        }
        if k >= config.max_iter {
            break Status::MaxIter;
        }
        let time_s = rec.elapsed();
        let mut trials = 0;
        let (x_new, df, dphi) = loop {
            trials += 1;
            let cand = prox_step(problem, &x, &g, l);
            let step = &cand - &x;
            let df = problem.value_change(&x, &step, f, &g);
            let dphi = problem.phi_change(&x, &step);
            let decrease = 0.5 * l * SPARSA_DECREASE * step.norm_squared();
            if df + dphi <= -decrease || trials >= MAX_BACKTRACKS {
                break (cand, df, dphi);
            }
            l *= config.eta;
        };
        let s = &x_new - &x;
        let accepted = df + dphi <= 0.0;
        rec.push(IterationRecord {
            k,
            time_s,
            psi,
            obj_err: None,
            res_norm: Some(res),
            mu: l,
            rho: None,
            step_class: None,
            pred: None,
            ared: Some(-(df + dphi)),
            d_norm: s.norm(),
            sub_iters: trials,
            skipped_pair: false,
            counts: problem.counts(),
        });
        k += 1;
        if !accepted {
            // backtracking budget exhausted without decrease; x is numerically stationary
            break Status::MaxIter;
        }
        let g_new = problem.gradient(&x_new);
        let y = &g_new - &g;
        let ss = s.norm_squared();
        l = if ss > 0.0 { (s.dot(&y) / ss).clamp(config.alpha_min, config.alpha_max) } else { l };
        if l.is_nan() {
            l = config.alpha_max;
        }
        res = residual_from_gradient(problem, &x_new, &g_new).norm();
        x = x_new;
        f += df;
        psi += df + dphi;
        g = g_new;
    };
    let trace = rec.finish(psi, Some(res), l, problem.counts());
    Ok(SolveResult { x, trace, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Regularizer, ShiftedQuadratic};
    use nalgebra::dvector;

    fn scalar_problem() -> CompositeProblem {
        CompositeProblem::new(ShiftedQuadratic { center: dvector![1.0] }, Regularizer::l1(1.0).unwrap()).unwrap()
    }

    #[test]
    fn fista_scalar() {
        let cfg = FistaConfig { stop: StopRule::Residual { tol: 1e-10 }, ..Default::default() };
        let out = fista_solve(&scalar_problem(), &dvector![5.0], &cfg).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!((out.trace.final_state.psi - 0.5).abs() < 1e-8);
    }

    #[test]
    fn sparsa_scalar() {
        let cfg = SparsaConfig { stop: StopRule::Residual { tol: 1e-10 }, ..Default::default() };
        let out = sparsa_solve(&scalar_problem(), &dvector![5.0], &cfg).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!((out.trace.final_state.psi - 0.5).abs() < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(FistaConfig { eta: 1.0, ..Default::default() }.validate().is_err());
        assert!(SparsaConfig { alpha_min: 2.0, alpha_max: 1.0, ..Default::default() }.validate().is_err());
    }
}
