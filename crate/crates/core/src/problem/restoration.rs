use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;
use rand_distr::{Distribution, StudentT};

use super::rng::seeded;
use super::{CompositeProblem, GaussianBlur, Haar2d, Regularizer, SmoothPart};
use crate::error::{invalid, Result};

const HAAR_LEVELS: usize = 4;

/// Student-t data fidelity in Haar coordinates:
/// `f(y) = sum_i log((A W^T y - b)_i^2 + 1)` with `A` the Gaussian blur and
/// `W` the orthonormal level-4 Haar transform.
#[derive(Debug)]
pub struct StudentTLoss {
    blur: GaussianBlur,
    haar: Haar2d,
    observed: Vec<f64>,
    matvecs: AtomicU64,
}

impl StudentTLoss {
    pub fn new(side: usize, observed: Vec<f64>) -> Result<Self> {
        let haar = Haar2d::new(side, HAAR_LEVELS)?;
        crate::error::check_dim(side * side, observed.len())?;
        Ok(Self { blur: GaussianBlur::new(side), haar, observed, matvecs: AtomicU64::new(0) })
    }

    pub fn haar(&self) -> &Haar2d {
        &self.haar
    }

    pub fn blur(&self) -> &GaussianBlur {
        &self.blur
    }

    fn residual(&self, y: &DVector<f64>) -> Vec<f64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        let mut r = self.blur.apply(&self.haar.inverse(y.as_slice()));
        r.iter_mut().zip(&self.observed).for_each(|(ri, bi)| *ri -= bi);
        r
    }

    fn pullback(&self, r: &[f64]) -> DVector<f64> {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        let u: Vec<f64> = r.iter().map(|&ri| 2.0 * ri / (ri * ri + 1.0)).collect();
        DVector::from_vec(self.haar.forward(&self.blur.adjoint(&u)))
    }
}

fn loss(r: &[f64]) -> f64 {
    r.iter().map(|&ri| (ri * ri).ln_1p()).sum()
}

impl SmoothPart for StudentTLoss {
    fn dim(&self) -> usize {
        self.haar.len()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        loss(&self.residual(y))
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        self.pullback(&self.residual(y))
    }

    fn value_and_gradient(&self, y: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = self.residual(y);
        (loss(&r), self.pullback(&r))
    }

    fn operator_applications(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }
}

/// A deblurring instance posed in wavelet coordinates.
#[derive(Debug)]
pub struct RestorationInstance {
    pub problem: CompositeProblem,
    pub side: usize,
    /// Ground-truth image, row-major.
    pub truth: Vec<f64>,
    /// Blurred, noisy observation, row-major.
    pub observed: Vec<f64>,
    /// Haar coefficients of the observation; the customary starting point.
    pub start: DVector<f64>,
    pub seed: u64,
}

impl RestorationInstance {
    /// Maps wavelet coefficients back to an image.
    pub fn image(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        Haar2d::new(self.side, HAAR_LEVELS).expect("validated side").inverse(coeffs.as_slice())
    }
}

/// Deterministic piecewise-constant test image with values in `[0, 1]`.
pub fn synthetic_test_image(side: usize) -> Vec<f64> {
    let s = side as f64;
    let mut img = vec![0.1; side * side];
    for r in 0..side {
        for c in 0..side {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            let v = &mut img[r * side + c];
            if (s / 8.0..s / 2.0).contains(&y) && (s / 8.0..5.0 * s / 8.0).contains(&x) {
                *v = 0.9;
            }
            let (dy, dx) = (y - 0.65 * s, x - 0.6 * s);
            if dy * dy + dx * dx <= (s / 5.0).powi(2) {
                *v = 0.5;
            }
            if (3.0 * s / 4.0..7.0 * s / 8.0).contains(&y) && x < s / 3.0 {
                *v = 0.7;
            }
        }
    }
    img
}

/// Blurred test image plus Cauchy (Student-t, one degree of freedom) noise,
/// restored under an `l1` penalty on Haar coefficients.
pub fn make_student_t_restoration(
    seed: u64,
    side: usize,
    lambda: f64,
    noise_scale: f64,
) -> Result<RestorationInstance> {
    if side < 16 || !side.is_power_of_two() {
        return Err(invalid(format!("image side must be a power of two >= 16, got {side}")));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(invalid("noise scale must be finite and nonnegative"));
    }
    let truth = synthetic_test_image(side);
    let blur = GaussianBlur::new(side);
    let mut rng = seeded(seed);
    let cauchy = StudentT::new(1.0).expect("one degree of freedom");
    let observed: Vec<f64> = blur
        .apply(&truth)
        .into_iter()
        .map(|v| v + noise_scale * cauchy.sample(&mut rng))
        .collect();
    let smooth = StudentTLoss::new(side, observed.clone())?;
    let start = DVector::from_vec(smooth.haar().forward(&observed));
    let problem = CompositeProblem::new(smooth, Regularizer::l1(lambda)?)?;
    Ok(RestorationInstance { problem, side, truth, observed, start, seed })
}
