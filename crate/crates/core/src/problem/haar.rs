use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Orthonormal 2D Haar transform of a `side x side` image.
///
/// Images and coefficient arrays are stored row-major as vectors of length
/// `side^2`. Each level transforms the rows and then the columns of the
/// current top-left approximation block; coarse approximation coefficients
/// end up in the top-left `side / 2^levels` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Haar2d {
    side: usize,
    levels: usize,
}

impl Haar2d {
    pub fn new(side: usize, levels: usize) -> Result<Self> {
        if side == 0 || levels == 0 || levels >= usize::BITS as usize || !side.is_multiple_of(1 << levels) {
            return Err(invalid(format!(
                "image side {side} is not divisible by 2^{levels}"
            )));
        }
        Ok(Self { side, levels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn forward(&self, image: &[f64]) -> Vec<f64> {
        assert_eq!(image.len(), self.len(), "image length");
        let mut c = image.to_vec();
        let mut buf = vec![0.0; self.side];
        let mut block = self.side;
        for _ in 0..self.levels {
            for r in 0..block {
                let row = &mut c[r * self.side..r * self.side + block];
                analyze(row, &mut buf[..block]);
            }
            for col in 0..block {
                let mut line: Vec<f64> = (0..block).map(|r| c[r * self.side + col]).collect();
                analyze(&mut line, &mut buf[..block]);
                for (r, v) in line.into_iter().enumerate() {
                    c[r * self.side + col] = v;
                }
            }
            block /= 2;
        }
        c
    }

    /// Inverse (equivalently, adjoint) of [`Haar2d::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "coefficient length");
        let mut x = coeffs.to_vec();
        let mut buf = vec![0.0; self.side];
        let mut block = self.side >> (self.levels - 1);
        for _ in 0..self.levels {
            for col in 0..block {
                let mut line: Vec<f64> = (0..block).map(|r| x[r * self.side + col]).collect();
                synthesize(&mut line, &mut buf[..block]);
                for (r, v) in line.into_iter().enumerate() {
                    x[r * self.side + col] = v;
                }
            }
            for r in 0..block {
                let row = &mut x[r * self.side..r * self.side + block];
                synthesize(row, &mut buf[..block]);
            }
            block *= 2;
        }
        x
    }
}

// [x0 x1 x2 x3 ..] -> [averages | details], both scaled by 1/sqrt(2).
fn analyze(line: &mut [f64], buf: &mut [f64]) {
    let half = line.len() / 2;
    for i in 0..half {
        let (a, b) = (line[2 * i], line[2 * i + 1]);
        buf[i] = (a + b) * FRAC_1_SQRT_2;
        buf[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    line.copy_from_slice(buf);
}

fn synthesize(line: &mut [f64], buf: &mut [f64]) {
    let half = line.len() / 2;
    for i in 0..half {
        let (s, d) = (line[i], line[half + i]);
        buf[2 * i] = (s + d) * FRAC_1_SQRT_2;
        buf[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    line.copy_from_slice(buf);
}

fn square_side(image: &DMatrix<f64>) -> Result<usize> {
    if image.nrows() != image.ncols() {
        return Err(Error::DimensionMismatch { expected: image.nrows(), found: image.ncols() });
    }
    Ok(image.nrows())
}

/// Haar coefficients of a square image as a row-major vector.
pub fn haar2d(image: &DMatrix<f64>, levels: usize) -> Result<DVector<f64>> {
    let side = square_side(image)?;
    let h = Haar2d::new(side, levels)?;
    let row_major: Vec<f64> = image.transpose().iter().copied().collect();
    Ok(DVector::from_vec(h.forward(&row_major)))
}

/// Inverse of [`haar2d`].
pub fn haar2d_inverse(coeffs: &DVector<f64>, side: usize, levels: usize) -> Result<DMatrix<f64>> {
    let h = Haar2d::new(side, levels)?;
    if coeffs.len() != h.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), found: coeffs.len() });
    }
    Ok(DMatrix::from_row_slice(side, side, &h.inverse(coeffs.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(side: usize) -> DMatrix<f64> {
        DMatrix::from_fn(side, side, |i, j| ((i * 31 + j * 17) % 23) as f64 - 11.0 + 0.25 * i as f64)
    }

    #[test]
    fn round_trip_and_norm() {
        let x = ramp(32);
        let c = haar2d(&x, 4).unwrap();
        assert!((c.norm() - x.norm()).abs() <= 1e-12 * x.norm());
        let back = haar2d_inverse(&c, 32, 4).unwrap();
        assert!((back - &x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn constant_image_has_single_coefficient() {
        let x = DMatrix::from_element(16, 16, 3.0);
        let c = haar2d(&x, 4).unwrap();
        let nonzero: Vec<usize> = (0..c.len()).filter(|&i| c[i].abs() > 1e-12).collect();
        assert_eq!(nonzero, vec![0]);
        assert!((c[0] - 3.0 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_incompatible_sizes() {
        assert!(Haar2d::new(24, 4).is_err());
        assert!(haar2d(&DMatrix::zeros(16, 8), 1).is_err());
        assert!(haar2d_inverse(&DVector::zeros(10), 16, 4).is_err());
    }

    #[test]
    fn basis_vectors_are_orthonormal() {
        let h = Haar2d::new(16, 4).unwrap();
        let cols: Vec<Vec<f64>> = [0usize, 1, 17, 100, 255]
            .iter()
            .map(|&i| {
                let mut e = vec![0.0; 256];
                e[i] = 1.0;
                h.inverse(&e)
            })
            .collect();
        for (a, ca) in cols.iter().enumerate() {
            for (b, cb) in cols.iter().enumerate() {
                let dot: f64 = ca.iter().zip(cb).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }
}
