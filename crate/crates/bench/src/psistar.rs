//! Reference optimal values from a tight-tolerance quasi-Newton run.

use std::fs;
use std::path::{Path, PathBuf};

use rpqn::lmqn::QuasiNewtonKind;
use rpqn::problem::Family;
use rpqn::solver::{solve, RpqnConfig, Status};
use rpqn::trace::StopRule;
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};
use crate::instance::Instance;
use crate::spec::Scale;
use crate::BenchError;

pub const PSI_STAR_TOL: f64 = 1e-10;
pub const PSI_STAR_MAX_ITER: usize = 100_000;
pub const PSI_STAR_MEMORY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiStar {
    pub family: Family,
    pub scale: String,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub psi_star: f64,
    pub res_norm: f64,
    pub iterations: usize,
    /// Set when the reference run stopped at the iteration limit.
    pub warning: bool,
}

pub fn reference_config() -> RpqnConfig {
    RpqnConfig::default()
        .with_kind(QuasiNewtonKind::Bfgs)
        .with_memory(PSI_STAR_MEMORY)
        .with_stop(StopRule::Residual { tol: PSI_STAR_TOL })
        .with_max_iter(PSI_STAR_MAX_ITER)
}

/// Runs the reference solve. The method is monotone, so the final value is
/// also the best one seen.
pub fn compute_psi_star(instance: &Instance) -> Result<(f64, f64, usize, bool)> {
    let out = solve(instance.problem(), &instance.start(), &reference_config())?;
    let fin = &out.trace.final_state;
    Ok((fin.psi, fin.res_norm.unwrap_or(f64::NAN), fin.k, out.status == Status::MaxIter))
}

pub fn cache_path(cache: &Path, scale: Scale, seed: u64) -> PathBuf {
    cache.join(scale.family().name()).join(scale.to_string()).join(seed.to_string()).join("psistar.json")
}

/// Cached [`compute_psi_star`]. Entries recorded with a different `lambda`
/// are recomputed.
pub fn psi_star_cached(cache: &Path, scale: Scale, seed: u64, lambda: Option<f64>) -> Result<PsiStar> {
    let path = cache_path(cache, scale, seed);
    if let Ok(text) = fs::read_to_string(&path) {
        let hit: PsiStar =
            serde_json::from_str(&text).map_err(|source| BenchError::Json { path: path.clone(), source })?;
        if hit.lambda == lambda {
            return Ok(hit);
        }
    }
    let instance = Instance::build(scale, seed, lambda)?;
    let (psi_star, res_norm, iterations, warning) = compute_psi_star(&instance)?;
    if warning {
        eprintln!(
            "warning: reference run for {} {} seed {seed} hit {PSI_STAR_MAX_ITER} iterations (residual {res_norm:e})",
            scale.family(),
            scale
        );
    }
    let entry = PsiStar {
        family: scale.family(),
        scale: scale.to_string(),
        seed,
        lambda,
        psi_star,
        res_norm,
        iterations,
        warning,
    };
    fs::create_dir_all(path.parent().expect("nested path")).at(&path)?;
    let text = serde_json::to_string_pretty(&entry).expect("plain data");
    fs::write(&path, text + "\n").at(&path)?;
    Ok(entry)
}
