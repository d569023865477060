//! Run specifications, shared by the CLI flags and `--config` files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rpqn::baselines::{FistaConfig, SparsaConfig};
use rpqn::lmqn::QuasiNewtonKind;
use rpqn::problem::Family;
use rpqn::solver::RpqnConfig;
use rpqn::trace::StopRule;
use serde::{Deserialize, Serialize};

use crate::error::{validation, BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    RpqnBfgs,
    RpqnSr1,
    Fista,
    Sparsa,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::RpqnBfgs, SolverKind::RpqnSr1, SolverKind::Fista, SolverKind::Sparsa];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::RpqnBfgs => "rpqn-bfgs",
            SolverKind::RpqnSr1 => "rpqn-sr1",
            SolverKind::Fista => "fista",
            SolverKind::Sparsa => "sparsa",
        }
    }

    pub fn quasi_newton(&self) -> Option<QuasiNewtonKind> {
        match self {
            SolverKind::RpqnBfgs => Some(QuasiNewtonKind::Bfgs),
            SolverKind::RpqnSr1 => Some(QuasiNewtonKind::Sr1),
            _ => None,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| validation(format!("unknown solver `{s}`")))
    }
}

/// Size parameters of an instance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    /// `n = 25k`, `m = 16k`.
    GroupLasso { k: usize },
    Lasso { n: usize, m: usize },
    Restoration { side: usize },
}

impl Scale {
    /// Parses `k` (group lasso), `n` or `nxm` (lasso, `m = n/2` by default)
    /// or the image side (Student-t).
    pub fn parse(family: Family, text: &str) -> Result<Self> {
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| validation(format!("bad scale `{text}` for {family}")))
        };
        match family {
            Family::GroupLasso => Ok(Scale::GroupLasso { k: int(text)? }),
            Family::Lasso => match text.split_once('x') {
                Some((n, m)) => Ok(Scale::Lasso { n: int(n)?, m: int(m)? }),
                None => {
                    let n = int(text)?;
                    Ok(Scale::Lasso { n, m: (n / 2).max(1) })
                }
            },
            Family::StudentT => {
                let side = int(text)?;
                if side < 16 || !side.is_power_of_two() {
                    return Err(validation(format!("image side must be a power of two >= 16, got {side}")));
                }
                Ok(Scale::Restoration { side })
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Scale::GroupLasso { .. } => Family::GroupLasso,
            Scale::Lasso { .. } => Family::Lasso,
            Scale::Restoration { .. } => Family::StudentT,
        }
    }
}

/// Canonical form, also used as the cache key.
impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::GroupLasso { k } => write!(f, "{k}"),
            Scale::Lasso { n, m } => write!(f, "{n}x{m}"),
            Scale::Restoration { side } => write!(f, "{side}"),
        }
    }
}

/// One benchmark configuration. The JSON form uses the same field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub family: Family,
    pub scale: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub solver: SolverKind,
    /// Quasi-Newton memory; ignored by the first-order solvers.
    #[serde(default = "default_memory")]
    pub memory: usize,
    /// Objective value error at which a run stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_memory() -> usize {
    5
}

fn default_tol() -> f64 {
    1e-6
}

fn default_reps() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_cache() -> PathBuf {
    PathBuf::from("cache")
}

impl RunSpec {
    pub fn new(family: Family, scale: impl Into<String>, solver: SolverKind) -> Self {
        Self {
            family,
            scale: scale.into(),
            seed: default_seed(),
            solver,
            memory: default_memory(),
            tol: default_tol(),
            max_iter: None,
            reps: default_reps(),
            out: default_out(),
            cache: default_cache(),
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<Scale> {
        let scale = Scale::parse(self.family, &self.scale)?;
        if self.solver == SolverKind::Fista && !self.family.is_convex() {
            return Err(validation(format!("fista is only run on convex families, not {}", self.family)));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(validation("tolerance must be finite and nonnegative"));
        }
        if self.reps == 0 {
            return Err(validation("at least one repetition is required"));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(validation("lambda must be positive"));
            }
        }
        Ok(scale)
    }

    /// Directory-friendly name, e.g. `group-lasso-4-rpqn-bfgs-m3`.
    pub fn label(&self) -> String {
        let scale = Scale::parse(self.family, &self.scale).map_or(self.scale.clone(), |s| s.to_string());
        match self.solver.quasi_newton() {
            Some(_) => format!("{}-{}-{}-m{}", self.family, scale, self.solver, self.memory),
            None => format!("{}-{}-{}", self.family, scale, self.solver),
        }
    }

    pub fn stop(&self, psi_star: f64) -> StopRule {
        StopRule::ObjectiveError { psi_star, tol: self.tol }
    }

    pub fn rpqn_config(&self, psi_star: f64) -> Option<RpqnConfig> {
        let kind = self.solver.quasi_newton()?;
        let mut cfg = RpqnConfig::default().with_kind(kind).with_memory(self.memory).with_stop(self.stop(psi_star));
        if let Some(m) = self.max_iter {
            cfg = cfg.with_max_iter(m);
        }
        Some(cfg)
    }

    pub fn fista_config(&self, psi_star: f64) -> FistaConfig {
        let mut cfg = FistaConfig { stop: self.stop(psi_star), ..Default::default() };
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }

    pub fn sparsa_config(&self, psi_star: f64) -> SparsaConfig {
        let mut cfg = SparsaConfig { stop: self.stop(psi_star), ..Default::default() };
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_forms() {
        assert_eq!(Scale::parse(Family::Lasso, "300").unwrap(), Scale::Lasso { n: 300, m: 150 });
        assert_eq!(Scale::parse(Family::Lasso, "300x100").unwrap().to_string(), "300x100");
        assert_eq!(Scale::parse(Family::GroupLasso, "4").unwrap(), Scale::GroupLasso { k: 4 });
        assert!(Scale::parse(Family::StudentT, "24").is_err());
        assert!(Scale::parse(Family::GroupLasso, "0").is_err());
    }

    #[test]
    fn fista_rejects_nonconvex_family() {
        let spec = RunSpec::new(Family::StudentT, "32", SolverKind::Fista);
        assert!(matches!(spec.validate(), Err(BenchError::Validation(_))));
        assert!(RunSpec::new(Family::StudentT, "32", SolverKind::Sparsa).validate().is_ok());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let spec: RunSpec =
            serde_json::from_str(r#"{"family": "lasso", "scale": "40", "solver": "rpqn-sr1", "memory": 2}"#).unwrap();
        assert_eq!(spec.seed, 1);
        assert_eq!(spec.tol, 1e-6);
        assert_eq!(spec.label(), "lasso-40x20-rpqn-sr1-m2");
        let back: RunSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<RunSpec>(r#"{"family": "lasso", "scale": "4", "solver": "fista", "x": 1}"#).is_err());
    }

    #[test]
    fn solver_names() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
    }
}
