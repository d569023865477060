use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// A partition of `{0, .., n-1}` into index groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Groups {
    sets: Vec<Vec<usize>>,
    dim: usize,
}

impl Groups {
    /// Validates that `sets` covers `0..dim` exactly once. Empty groups are rejected.
    pub fn new(sets: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for (j, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidPartition(format!("group {j} is empty")));
            }
            for &i in set {
                if i >= dim {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} in group {j} is out of range for dimension {dim}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidPartition(format!("index {i} is not covered")));
        }
        Ok(Self { sets, dim })
    }

    /// One group containing every index.
    pub fn single(dim: usize) -> Self {
        Self { sets: vec![(0..dim).collect()], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }
}

impl TryFrom<Vec<Vec<usize>>> for Groups {
    type Error = Error;

    fn try_from(sets: Vec<Vec<usize>>) -> Result<Self> {
        let dim = sets.iter().map(Vec::len).sum();
        Groups::new(sets, dim)
    }
}

impl From<Groups> for Vec<Vec<usize>> {
    fn from(g: Groups) -> Self {
        g.sets
    }
}

/// The nonsmooth part `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    /// `lambda * ||x||_1`
    L1 { lambda: f64 },
    /// `lambda * sum_j ||x_{I_j}||_2`
    GroupL21 { lambda: f64, groups: Groups },
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Regularizer::L1 { lambda })
    }

    pub fn group_l21(lambda: f64, groups: Groups) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Regularizer::GroupL21 { lambda, groups })
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } | Regularizer::GroupL21 { lambda, .. } => *lambda,
        }
    }

    pub fn groups(&self) -> Option<&Groups> {
        match self {
            Regularizer::GroupL21 { groups, .. } => Some(groups),
            _ => None,
        }
    }

    /// Checks that the regularizer can act on vectors of length `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            Regularizer::GroupL21 { groups, .. } => check_dim(groups.dim(), n),
            _ => Ok(()),
        }
    }

    /// `phi(x)`, checking dimensions.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.value(x))
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::GroupL21 { lambda, groups } => {
                lambda * groups.iter().map(|g| block_norm(x, g)).sum::<f64>()
            }
        }
    }

    /// `phi(x + d) - phi(x)` without cancellation, using
    /// `|a + b| - |a| = b (2a + b) / (|a + b| + |a|)` termwise or blockwise.
    pub(crate) fn value_change(&self, x: &[f64], d: &[f64]) -> f64 {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => {
                lambda
                    * x.iter()
                        .zip(d)
                        .map(|(&a, &b)| ratio(b * (2.0 * a + b), (a + b).abs() + a.abs()))
                        .sum::<f64>()
            }
            Regularizer::GroupL21 { lambda, groups } => {
                lambda
                    * groups
                        .iter()
                        .map(|g| {
                            let (mut num, mut moved) = (0.0, 0.0);
                            for &i in g {
                                num += d[i] * (2.0 * x[i] + d[i]);
                                moved += (x[i] + d[i]) * (x[i] + d[i]);
                            }
                            ratio(num, moved.sqrt() + block_norm(x, g))
                        })
                        .sum::<f64>()
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("regularization weight must be positive, got {lambda}")))
    }
}

pub(crate) fn block_norm(x: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}
