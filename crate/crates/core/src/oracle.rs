//! Dense reference implementations for tests. Small dimensions only.
//!
//! Nothing here is used by the solvers; every routine works on explicit
//! `n x n` matrices and simple iterations so it can check the structured
//! code paths independently.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lmqn::{eigensplit, gamma_init, CompactRep, PairBuffer, QuasiNewtonKind, SpectralSplit};
use crate::problem::{Groups, Regularizer};
use crate::prox::ScaledProxContext;
use crate::subsolver::{factor_metric, MetricFactors};

pub fn normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = normal_matrix(rng, n, n).qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// `m` pairs `(s, y = M s)` for a random SPD `M` with spectrum in `[0.5, 5]`.
pub fn random_pairs<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    let hess = random_spd(rng, n, 0.5, 5.0);
    (0..m)
        .map(|_| {
            let s = normal_vector(rng, n);
            let y = &hess * &s;
            (s, y)
        })
        .collect()
}

/// Random partition of `0..n` into groups of 1 to 5 indices.
pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Groups {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let mut sets = Vec::new();
    let mut rest = &idx[..];
    while !rest.is_empty() {
        let take = rng.random_range(1..=5).min(rest.len());
        sets.push(rest[..take].to_vec());
        rest = &rest[take..];
    }
    Groups::new(sets, n).expect("valid partition")
}

/// `l1` or group `l2,1` with `lambda` in `[0.05, 1]`.
pub fn random_regularizer<R: Rng>(rng: &mut R, n: usize, grouped: bool) -> Regularizer {
    let lambda = rng.random_range(0.05..=1.0);
    if grouped {
        Regularizer::group_l21(lambda, random_partition(rng, n)).expect("valid")
    } else {
        Regularizer::l1(lambda).expect("valid")
    }
}

/// A limited-memory metric `B + mu I` with its dense counterpart.
pub struct RandomMetric {
    pub pairs: Vec<(DVector<f64>, DVector<f64>)>,
    pub kind: QuasiNewtonKind,
    pub gamma: f64,
    pub mu: f64,
    pub rep: CompactRep,
    pub split: SpectralSplit,
    pub fac: MetricFactors,
    /// `B + mu I` from the dense recursion.
    pub dense: DMatrix<f64>,
}

/// Builds a random metric; `None` when it is not positive definite or the
/// spectral split dropped directions (then the dense recursion is not the
/// matrix actually used).
pub fn random_metric<R: Rng>(rng: &mut R, n: usize, m: usize, kind: QuasiNewtonKind, mu: f64) -> Option<RandomMetric> {
    let pairs = random_pairs(rng, n, m);
    let mut buf = PairBuffer::new(m);
    for (s, y) in &pairs {
        buf.push(s.clone(), y.clone(), kind, 1e-8).expect("dimensions agree");
    }
    let (s, y) = pairs.last()?;
    let gamma = gamma_init(s, y, 1.0);
    let rep = CompactRep::build(&buf, gamma, kind).ok()?;
    let split = eigensplit(&rep, 1e-8).ok()?;
    if split.dropped > 0 {
        return None;
    }
    let fac = factor_metric(&split, gamma, mu).ok()?;
    let b = match kind {
        QuasiNewtonKind::Bfgs => dense_bfgs(&pairs, gamma, n),
        QuasiNewtonKind::Sr1 => dense_sr1(&pairs, gamma, n),
    };
    let dense = b + DMatrix::identity(n, n) * mu;
    if lambda_min(&dense) <= 1e-6 {
        return None;
    }
    Some(RandomMetric { pairs, kind, gamma, mu, rep, split, fac, dense })
}

/// Dense BFGS recursion from `gamma I` over `pairs` (oldest first).
pub fn dense_bfgs(pairs: &[(DVector<f64>, DVector<f64>)], gamma: f64, n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::identity(n, n) * gamma;
    for (s, y) in pairs {
        let bs = &b * s;
        b += y * y.transpose() / s.dot(y) - &bs * bs.transpose() / s.dot(&bs);
    }
    b
}

/// Dense SR1 recursion from `gamma I`.
pub fn dense_sr1(pairs: &[(DVector<f64>, DVector<f64>)], gamma: f64, n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::identity(n, n) * gamma;
    for (s, y) in pairs {
        let r = y - &b * s;
        b += &r * r.transpose() / r.dot(s);
    }
    b
}

/// `gamma I + A Q^{-1} A^T` with an explicit inverse.
pub fn compact_dense(rep: &CompactRep) -> DMatrix<f64> {
    let n = rep.a.nrows();
    let mut b = DMatrix::identity(n, n) * rep.gamma;
    if rep.rank() > 0 {
        let qinv = rep.q.clone().try_inverse().expect("invertible middle matrix");
        b += &rep.a * qinv * rep.a.transpose();
    }
    b
}

/// `gamma I + U1 U1^T - U2 U2^T`.
pub fn split_dense(split: &SpectralSplit, gamma: f64) -> DMatrix<f64> {
    let n = split.dim();
    DMatrix::identity(n, n) * gamma + &split.u1 * split.u1.transpose() - &split.u2 * split.u2.transpose()
}

pub fn lambda_max(h: &DMatrix<f64>) -> f64 {
    h.clone().symmetric_eigenvalues().max()
}

pub fn lambda_min(h: &DMatrix<f64>) -> f64 {
    h.clone().symmetric_eigenvalues().min()
}

/// `prox_phi^H(y)` by proximal gradient with step `1 / lambda_max(H)`,
/// iterated until successive iterates differ by less than `1e-13` (max norm).
pub fn prox_dense(h: &DMatrix<f64>, reg: &Regularizer, y: &DVector<f64>) -> DVector<f64> {
    let lip = lambda_max(h);
    let ctx = ScaledProxContext::new(reg, lip).expect("positive definite metric");
    let mut u = y.clone();
    for _ in 0..5_000_000 {
        let next = ctx.prox(&(&u - h * (&u - y) / lip));
        let change = (&next - &u).amax();
        u = next;
        if change < 1e-13 {
            break;
        }
    }
    u
}

/// `prox_phi^H(y)` by exact coordinate descent (`l1`) or block descent with
/// an inner proximal-gradient loop (group `l2,1`).
pub fn prox_dense_coordinate(h: &DMatrix<f64>, reg: &Regularizer, y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let mut u = y.clone();
    // grad = H (u - y)
    let mut grad = h * (&u - y);
    let update = |u: &mut DVector<f64>, grad: &mut DVector<f64>, i: usize, v: f64| {
        let delta = v - u[i];
        if delta != 0.0 {
            *grad += h.column(i) * delta;
            u[i] = v;
        }
    };
    for _ in 0..1_000_000 {
        let mut change = 0.0f64;
        match reg {
            Regularizer::Zero => return y.clone(),
            Regularizer::L1 { lambda } => {
                for i in 0..n {
                    let hii = h[(i, i)];
                    let c = grad[i] - hii * (u[i] - y[i]);
                    let target = y[i] - c / hii;
                    let t = lambda / hii;
                    let v = target.signum() * (target.abs() - t).max(0.0);
                    change = change.max((v - u[i]).abs());
                    update(&mut u, &mut grad, i, v);
                }
            }
            Regularizer::GroupL21 { lambda, groups } => {
                for g in groups.iter() {
                    let hgg = DMatrix::from_fn(g.len(), g.len(), |a, b| h[(g[a], g[b])]);
                    let lip = lambda_max(&hgg);
                    for _ in 0..100_000 {
                        let ub: Vec<f64> = g.iter().map(|&i| u[i] - grad[i] / lip).collect();
                        let norm = ub.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let scale = if norm > lambda / lip { 1.0 - lambda / lip / norm } else { 0.0 };
                        let mut inner = 0.0f64;
                        for (&i, v) in g.iter().zip(ub) {
                            inner = inner.max((v * scale - u[i]).abs());
                            update(&mut u, &mut grad, i, v * scale);
                        }
                        change = change.max(inner);
                        if inner < 1e-15 {
                            break;
                        }
                    }
                }
            }
        }
        if change < 1e-14 {
            break;
        }
    }
    u
}

/// `r_H(x) = prox^H(x - H^{-1} g) - x`.
pub fn residual_dense(h: &DMatrix<f64>, reg: &Regularizer, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    let step = h.clone().cholesky().expect("SPD metric").solve(g);
    prox_dense(h, reg, &(x - step)) - x
}

/// Whether `v` lies in the subdifferential of `reg` at `p`, up to `tol`.
pub fn in_subdifferential(reg: &Regularizer, p: &DVector<f64>, v: &DVector<f64>, tol: f64) -> bool {
    match reg {
        Regularizer::Zero => v.amax() <= tol,
        Regularizer::L1 { lambda } => p.iter().zip(v.iter()).all(|(&pi, &vi)| {
            if pi != 0.0 {
                (vi - lambda * pi.signum()).abs() <= tol
            } else {
                vi.abs() <= lambda + tol
            }
        }),
        Regularizer::GroupL21 { lambda, groups } => groups.iter().all(|g| {
            let pn = g.iter().map(|&i| p[i] * p[i]).sum::<f64>().sqrt();
            if pn > 0.0 {
                g.iter().all(|&i| (v[i] - lambda * p[i] / pn).abs() <= tol)
            } else {
                g.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt() <= lambda + tol
            }
        }),
    }
}
