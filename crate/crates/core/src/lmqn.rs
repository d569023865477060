//! Limited-memory quasi-Newton matrices in compact form.
//!
//! With `S = [s_old .. s_new]`, `Y = [y_old .. y_new]`, `D = diag(S^T Y)` and
//! `L` the strict lower triangle of `S^T Y`, both updates of `gamma I` read
//! `B = gamma I + A Q^{-1} A^T`:
//!
//! | kind | `A`              | `Q`                                    |
//! |------|------------------|----------------------------------------|
//! | BFGS | `[gamma S, Y]`   | `[[-gamma S^T S, -L], [-L^T, D]]`      |
//! | SR1  | `Y - gamma S`    | `D + L + L^T - gamma S^T S`            |
//!
//! [`eigensplit`] rewrites the correction as `U1 U1^T - U2 U2^T` from the
//! eigendecomposition of the small matrix `Q`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuasiNewtonKind {
    Bfgs,
    Sr1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOutcome {
    Accepted,
    Skipped,
}

/// FIFO store of the most recent `memory` curvature pairs `(s, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBuffer {
    memory: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl PairBuffer {
    pub fn new(memory: usize) -> Self {
        Self { memory, pairs: VecDeque::with_capacity(memory) }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Oldest pair first.
    pub fn pairs(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        self.pairs.iter().map(|(s, y)| (s, y))
    }

    pub fn newest(&self) -> Option<(&DVector<f64>, &DVector<f64>)> {
        self.pairs.back().map(|(s, y)| (s, y))
    }

    /// Stores `(s, y)` unless it fails the acceptance test for `kind`.
    ///
    /// BFGS pairs need `s^T y >= eps ||s||^2`. SR1 pairs are always kept;
    /// ill-conditioned directions are filtered later by [`eigensplit`]. A zero
    /// step is never stored, and nothing is stored with memory zero.
    pub fn push(
        &mut self,
        s: DVector<f64>,
        y: DVector<f64>,
        kind: QuasiNewtonKind,
        eps: f64,
    ) -> Result<PairOutcome> {
        check_dim(s.len(), y.len())?;
        if let Some((s0, _)) = self.pairs.front() {
            check_dim(s0.len(), s.len())?;
        }
        let ss = s.norm_squared();
        if self.memory == 0 || ss == 0.0 {
            return Ok(PairOutcome::Skipped);
        }
        if kind == QuasiNewtonKind::Bfgs && s.dot(&y) < eps * ss {
            return Ok(PairOutcome::Skipped);
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
        Ok(PairOutcome::Accepted)
    }
}

/// Initial scaling `gamma = y^T y / s^T y`, or `fallback` when `s^T y <= 0`.
pub fn gamma_init(s: &DVector<f64>, y: &DVector<f64>, fallback: f64) -> f64 {
    let sy = s.dot(y);
    let g = y.norm_squared() / sy;
    if sy > 0.0 && g.is_finite() && g > 0.0 {
        g
    } else {
        fallback
    }
}

/// `B = gamma I + A Q^{-1} A^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactRep {
    pub kind: QuasiNewtonKind,
    pub gamma: f64,
    /// `n x s`
    pub a: DMatrix<f64>,
    /// `s x s`, symmetric
    pub q: DMatrix<f64>,
}

impl CompactRep {
    pub fn build(buf: &PairBuffer, gamma: f64, kind: QuasiNewtonKind) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("initial scaling must be positive, got {gamma}")));
        }
        let m = buf.len();
        let n = buf.newest().map_or(0, |(s, _)| s.len());
        let mut s_mat = DMatrix::zeros(n, m);
        let mut y_mat = DMatrix::zeros(n, m);
        for (j, (s, y)) in buf.pairs().enumerate() {
            s_mat.set_column(j, s);
            y_mat.set_column(j, y);
        }
        let sy = s_mat.tr_mul(&y_mat);
        let ss = s_mat.tr_mul(&s_mat);
        let lower = DMatrix::from_fn(m, m, |i, j| if i > j { sy[(i, j)] } else { 0.0 });
        let diag = DMatrix::from_fn(m, m, |i, j| if i == j { sy[(i, j)] } else { 0.0 });
        let (a, q) = match kind {
            QuasiNewtonKind::Bfgs => {
                let mut a = DMatrix::zeros(n, 2 * m);
                a.columns_mut(0, m).copy_from(&(&s_mat * gamma));
                a.columns_mut(m, m).copy_from(&y_mat);
                let mut q = DMatrix::zeros(2 * m, 2 * m);
                q.view_mut((0, 0), (m, m)).copy_from(&(&ss * -gamma));
                q.view_mut((0, m), (m, m)).copy_from(&-&lower);
                q.view_mut((m, 0), (m, m)).copy_from(&-lower.transpose());
                q.view_mut((m, m), (m, m)).copy_from(&diag);
                (a, q)
            }
            QuasiNewtonKind::Sr1 => {
                let a = &y_mat - &s_mat * gamma;
                let q = &diag + &lower + lower.transpose() - &ss * gamma;
                (a, q)
            }
        };
        Ok(Self { kind, gamma, a, q })
    }

    /// Representation of `gamma I` on `R^n` (no stored pairs).
    pub fn scaled_identity(n: usize, gamma: f64, kind: QuasiNewtonKind) -> Self {
        Self { kind, gamma, a: DMatrix::zeros(n, 0), q: DMatrix::zeros(0, 0) }
    }

    /// Number of columns of `A`.
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `B v = gamma v + A Q^{-1} A^T v`, solving with an LU factorization of `Q`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if self.rank() == 0 {
            return Ok(v * self.gamma);
        }
        check_dim(self.a.nrows(), v.len())?;
        let rhs = self.a.tr_mul(v);
        let w = self
            .q
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|w| w.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::Numerical("singular middle matrix; use the filtered split".into()))?;
        Ok(v * self.gamma + &self.a * w)
    }
}

/// `A Q^{-1} A^T = U1 U1^T - U2 U2^T` after dropping ill-conditioned
/// eigendirections of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub dropped: usize,
}

impl SpectralSplit {
    pub fn empty(n: usize) -> Self {
        Self { u1: DMatrix::zeros(n, 0), u2: DMatrix::zeros(n, 0), dropped: 0 }
    }

    pub fn dim(&self) -> usize {
        self.u1.nrows()
    }

    /// `(gamma I + U1 U1^T - U2 U2^T) v`.
    pub fn apply(&self, gamma: f64, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * gamma;
        if self.u1.ncols() > 0 {
            out += &self.u1 * self.u1.tr_mul(v);
        }
        if self.u2.ncols() > 0 {
            out -= &self.u2 * self.u2.tr_mul(v);
        }
        out
    }
}

/// Splits the correction of `rep` into positive and negative parts.
///
/// `Q = V diag(l) V^T` is decomposed directly; the eigenvalues of `Q^{-1}`
/// are `1/l_i` with the same eigenvectors. Directions with
/// `|l_i| <= eps * max_j |l_j|` are dropped. Retained directions give columns
/// `(A v_i) / sqrt(|l_i|)` of `U1` (for `l_i > 0`) or `U2` (for `l_i < 0`).
pub fn eigensplit(rep: &CompactRep, eps: f64) -> Result<SpectralSplit> {
    let n = rep.a.nrows();
    let s = rep.rank();
    if s == 0 {
        return Ok(SpectralSplit::empty(n));
    }
    if rep.q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entries in the middle matrix".into()));
    }
    let eig = rep.q.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let cut = eps * scale;
    let av = &rep.a * &eig.eigenvectors;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::Numerical("eigendecomposition failed".into()));
        }
        if l > cut && l > 0.0 {
            pos.push(av.column(i) / l.sqrt());
        } else if l < -cut && l < 0.0 {
            neg.push(av.column(i) / (-l).sqrt());
        }
    }
    let dropped = s - pos.len() - neg.len();
    let stack = |cols: Vec<DVector<f64>>| {
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    };
    Ok(SpectralSplit { u1: stack(pos), u2: stack(neg), dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn bfgs_push_rules() {
        let mut buf = PairBuffer::new(3);
        let eps = 1e-8;
        assert_eq!(
            buf.push(dvector![1.0, 0.0], dvector![2.0, 0.0], QuasiNewtonKind::Bfgs, eps).unwrap(),
            PairOutcome::Accepted
        );
        assert_eq!(
            buf.push(dvector![1.0, 0.0], dvector![-1.0, 0.0], QuasiNewtonKind::Bfgs, eps).unwrap(),
            PairOutcome::Skipped
        );
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn sr1_stores_negative_curvature_but_not_zero_steps() {
        let mut buf = PairBuffer::new(2);
        let k = QuasiNewtonKind::Sr1;
        assert_eq!(buf.push(dvector![1.0, 0.0], dvector![-1.0, 0.0], k, 1e-8).unwrap(), PairOutcome::Accepted);
        assert_eq!(buf.push(dvector![0.0, 0.0], dvector![1.0, 0.0], k, 1e-8).unwrap(), PairOutcome::Skipped);
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = PairBuffer::new(3);
        for i in 1..=4 {
            let s = dvector![i as f64, 0.0];
            buf.push(s.clone(), s * 2.0, QuasiNewtonKind::Bfgs, 1e-8).unwrap();
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.pairs().next().unwrap().0[0], 2.0);
        assert_eq!(buf.newest().unwrap().0[0], 4.0);
    }

    #[test]
    fn zero_memory_stores_nothing() {
        let mut buf = PairBuffer::new(0);
        let out = buf.push(dvector![1.0], dvector![1.0], QuasiNewtonKind::Bfgs, 1e-8).unwrap();
        assert_eq!(out, PairOutcome::Skipped);
        assert!(buf.is_empty());
    }

    #[test]
    fn push_checks_dimensions() {
        let mut buf = PairBuffer::new(2);
        assert!(buf.push(dvector![1.0], dvector![1.0, 2.0], QuasiNewtonKind::Sr1, 1e-8).is_err());
        buf.push(dvector![1.0], dvector![1.0], QuasiNewtonKind::Sr1, 1e-8).unwrap();
        assert!(buf.push(dvector![1.0, 0.0], dvector![1.0, 0.0], QuasiNewtonKind::Sr1, 1e-8).is_err());
    }

    #[test]
    fn gamma_init_cases() {
        assert_eq!(gamma_init(&dvector![1.0, 0.0], &dvector![2.0, 0.0], 1.0), 2.0);
        assert_eq!(gamma_init(&dvector![0.3, -1.0], &dvector![0.3, -1.0], 5.0), 1.0);
        assert_eq!(gamma_init(&dvector![1.0, 0.0], &dvector![-1.0, 0.0], 3.0), 3.0);
    }

    #[test]
    fn empty_buffer_is_scaled_identity() {
        let rep = CompactRep::build(&PairBuffer::new(3), 2.0, QuasiNewtonKind::Bfgs).unwrap();
        assert_eq!(rep.rank(), 0);
        let v = dvector![1.0, -3.0];
        assert_eq!(rep.apply(&v).unwrap(), &v * 2.0);
        let split = eigensplit(&rep, 1e-8).unwrap();
        assert_eq!(split.apply(2.0, &v), &v * 2.0);
    }

    #[test]
    fn diagonal_split() {
        let rep = CompactRep {
            kind: QuasiNewtonKind::Sr1,
            gamma: 1.0,
            a: DMatrix::identity(3, 2),
            q: dmatrix![2.0, 0.0; 0.0, -4.0],
        };
        let split = eigensplit(&rep, 1e-8).unwrap();
        assert_eq!((split.u1.ncols(), split.u2.ncols(), split.dropped), (1, 1, 0));
        assert!((split.u1.column(0).norm() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((split.u1[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((split.u2.column(0).norm() - 0.5).abs() < 1e-15);
        assert!((split.u2[(1, 0)].abs() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn near_singular_direction_is_dropped() {
        let rep = CompactRep {
            kind: QuasiNewtonKind::Sr1,
            gamma: 1.0,
            a: DMatrix::identity(4, 2),
            q: dmatrix![1.0, 0.0; 0.0, 1e-12],
        };
        let split = eigensplit(&rep, 1e-8).unwrap();
        assert_eq!((split.u1.ncols(), split.u2.ncols(), split.dropped), (1, 0, 1));
    }

    #[test]
    fn bfgs_shapes() {
        let mut buf = PairBuffer::new(4);
        buf.push(dvector![1.0, 0.0, 0.0], dvector![2.0, 0.1, 0.0], QuasiNewtonKind::Bfgs, 1e-8).unwrap();
        buf.push(dvector![0.0, 1.0, 0.5], dvector![0.1, 1.0, 0.5], QuasiNewtonKind::Bfgs, 1e-8).unwrap();
        let rep = CompactRep::build(&buf, 1.5, QuasiNewtonKind::Bfgs).unwrap();
        assert_eq!((rep.a.nrows(), rep.a.ncols(), rep.q.nrows()), (3, 4, 4));
        assert_eq!(rep.q, rep.q.transpose());
        let sr1 = CompactRep::build(&buf, 1.5, QuasiNewtonKind::Sr1).unwrap();
        assert_eq!((sr1.a.ncols(), sr1.q.nrows()), (2, 2));
    }

    #[test]
    fn singular_middle_matrix_is_reported() {
        let rep = CompactRep {
            kind: QuasiNewtonKind::Sr1,
            gamma: 1.0,
            a: DMatrix::identity(2, 1),
            q: dmatrix![0.0],
        };
        assert!(rep.apply(&dvector![1.0, 1.0]).is_err());
    }
}
