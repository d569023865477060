use crate::error::{check_dim, Result};

const HALF: usize = 4;
const WIDTH: usize = 2 * HALF + 1;

/// 9x9 Gaussian blur with standard deviation 4 and symmetric (half-sample)
/// reflective boundaries, acting on row-major `side x side` images.
///
/// The kernel is separable, so the operator is applied as a row pass
/// followed by a column pass. [`GaussianBlur::adjoint`] is the exact
/// transpose of [`GaussianBlur::apply`], boundary folding included.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlur {
    side: usize,
    taps: [f64; WIDTH],
}

impl GaussianBlur {
    pub fn new(side: usize) -> Self {
        Self::with_sigma(side, 4.0)
    }

    pub fn with_sigma(side: usize, sigma: f64) -> Self {
        assert!(side > HALF, "image side must exceed the kernel radius");
        let mut taps = [0.0; WIDTH];
        for (i, t) in taps.iter_mut().enumerate() {
            let d = i as f64 - HALF as f64;
            *t = (-d * d / (2.0 * sigma * sigma)).exp();
        }
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);
        Self { side, taps }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// The 2D kernel `k[a][b] = taps[a] * taps[b]`; sums to one.
    pub fn kernel(&self) -> [[f64; WIDTH]; WIDTH] {
        let mut k = [[0.0; WIDTH]; WIDTH];
        for (a, row) in k.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.taps[a] * self.taps[b];
            }
        }
        k
    }

    pub fn apply(&self, image: &[f64]) -> Vec<f64> {
        let rows = self.pass(image, Axis::Row, false);
        self.pass(&rows, Axis::Col, false)
    }

    pub fn adjoint(&self, image: &[f64]) -> Vec<f64> {
        let cols = self.pass(image, Axis::Col, true);
        self.pass(&cols, Axis::Row, true)
    }

    pub fn try_apply(&self, image: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.side * self.side, image.len())?;
        Ok(self.apply(image))
    }

    pub fn try_adjoint(&self, image: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.side * self.side, image.len())?;
        Ok(self.adjoint(image))
    }

    fn pass(&self, input: &[f64], axis: Axis, transpose: bool) -> Vec<f64> {
        let n = self.side;
        assert_eq!(input.len(), n * n, "image length");
        let mut out = vec![0.0; n * n];
        let index = |line: usize, pos: usize| match axis {
            Axis::Row => line * n + pos,
            Axis::Col => pos * n + line,
        };
        for line in 0..n {
            for pos in 0..n {
                for (t, &w) in self.taps.iter().enumerate() {
                    let src = reflect(pos as isize + t as isize - HALF as isize, n);
                    if transpose {
                        out[index(line, src)] += w * input[index(line, pos)];
                    } else {
                        out[index(line, pos)] += w * input[index(line, src)];
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    r as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(side: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::problem::rng::seeded(seed);
        (0..side * side).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn total_variation(x: &[f64], side: usize) -> f64 {
        let mut tv = 0.0;
        for r in 0..side {
            for c in 0..side {
                if c + 1 < side {
                    tv += (x[r * side + c + 1] - x[r * side + c]).abs();
                }
                if r + 1 < side {
                    tv += (x[(r + 1) * side + c] - x[r * side + c]).abs();
                }
            }
        }
        tv
    }

    #[test]
    fn kernel_is_normalized() {
        let k = GaussianBlur::new(16).kernel();
        let s: f64 = k.iter().flatten().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_image_is_fixed() {
        let blur = GaussianBlur::new(16);
        let out = blur.apply(&vec![2.5; 256]);
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn adjoint_identity() {
        let blur = GaussianBlur::new(32);
        let x = random_image(32, 1);
        let y = random_image(32, 2);
        let lhs = dot(&blur.apply(&x), &y);
        let rhs = dot(&x, &blur.adjoint(&y));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn blur_reduces_total_variation() {
        let blur = GaussianBlur::new(32);
        let x = random_image(32, 5);
        assert!(total_variation(&blur.apply(&x), 32) < total_variation(&x, 32));
    }

    #[test]
    fn reflection_rule() {
        assert_eq!(reflect(-1, 8), 0);
        assert_eq!(reflect(-4, 8), 3);
        assert_eq!(reflect(8, 8), 7);
        assert_eq!(reflect(11, 8), 4);
    }

    #[test]
    fn length_checked() {
        assert!(GaussianBlur::new(16).try_apply(&[0.0; 10]).is_err());
    }
}
