use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{seeded, InstanceRng};
use super::{CompositeProblem, DenseLeastSquaresData, Groups, LeastSquares, Regularizer};
use crate::error::{invalid, Result};

/// Benchmark instance families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GroupLasso,
    Lasso,
    StudentT,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::GroupLasso => "group-lasso",
            Family::Lasso => "lasso",
            Family::StudentT => "student-t",
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Family::StudentT)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group-lasso" => Ok(Family::GroupLasso),
            "lasso" => Ok(Family::Lasso),
            "student-t" => Ok(Family::StudentT),
            other => Err(invalid(format!("unknown problem family `{other}`"))),
        }
    }
}

/// A generated least-squares instance with its raw data.
#[derive(Debug)]
pub struct LeastSquaresInstance {
    pub problem: CompositeProblem,
    pub data: Arc<DenseLeastSquaresData>,
    pub regularizer: Regularizer,
    pub family: Family,
    pub seed: u64,
}

impl LeastSquaresInstance {
    pub fn from_parts(
        data: DenseLeastSquaresData,
        regularizer: Regularizer,
        family: Family,
        seed: u64,
    ) -> Result<Self> {
        let data = Arc::new(data);
        let problem = CompositeProblem::new(LeastSquares::new(data.clone()), regularizer.clone())?;
        Ok(Self { problem, data, regularizer, family, seed })
    }
}

/// Group-sparse least squares: `n = 25k`, `m = 16k`, uniform `[0, 1]`
/// entries in `A` and `b`, `lambda = 1`, random groups of 4 to 12 indices.
pub fn make_group_lasso(seed: u64, k: usize) -> Result<LeastSquaresInstance> {
    if k == 0 {
        return Err(invalid("group lasso scale k must be at least 1"));
    }
    let (n, m) = (25 * k, 16 * k);
    let mut rng = seeded(seed);
    let a = DMatrix::from_row_iterator(m, n, (0..m * n).map(|_| rng.random::<f64>()));
    let b = DVector::from_iterator(m, (0..m).map(|_| rng.random::<f64>()));
    let groups = random_groups(&mut rng, n, 4, 12)?;
    let reg = Regularizer::group_l21(1.0, groups)?;
    LeastSquaresInstance::from_parts(DenseLeastSquaresData::new(a, b)?, reg, Family::GroupLasso, seed)
}

/// LASSO with i.i.d. standard normal `A` (`m x n`) and `b`.
pub fn make_lasso(seed: u64, n: usize, m: usize, lambda: f64) -> Result<LeastSquaresInstance> {
    if n == 0 || m == 0 {
        return Err(invalid("lasso dimensions must be positive"));
    }
    let mut rng = seeded(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let a = DMatrix::from_row_iterator(m, n, (0..m * n).map(|_| normal()));
    let b = DVector::from_iterator(m, (0..m).map(|_| normal()));
    let reg = Regularizer::l1(lambda)?;
    LeastSquaresInstance::from_parts(DenseLeastSquaresData::new(a, b)?, reg, Family::Lasso, seed)
}

/// Random partition of `0..n`: indices are shuffled, then cut into groups
/// whose sizes are drawn uniformly from `min..=max`. A remainder shorter than
/// `min` is merged into the last full group.
pub fn random_groups(rng: &mut InstanceRng, n: usize, min: usize, max: usize) -> Result<Groups> {
    if min == 0 || min > max {
        return Err(invalid(format!("bad group size range {min}..={max}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut rest = perm.as_slice();
    while !rest.is_empty() {
        let size = rng.random_range(min..=max);
        if rest.len() < min && !sets.is_empty() {
            sets.last_mut().expect("nonempty").extend_from_slice(rest);
            break;
        }
        let (head, tail) = rest.split_at(size.min(rest.len()));
        sets.push(head.to_vec());
        rest = tail;
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    Groups::new(sets, n)
}
