//! Noise-free Gaussian-process surrogate with an isotropic squared-exponential
//! kernel, and the expected-improvement acquisition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Diagonal jitter added to the standardized kernel matrix.
pub const JITTER: f64 = 1e-10;

/// Length scales tried when fitting; the one with the largest marginal
/// likelihood wins.
const LENGTH_GRID: [f64; 9] = [0.01, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2];

pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    // lower Cholesky factor of the kernel matrix
    l: DMatrix<f64>,
    grid_index: usize,
    y_mean: f64,
    y_scale: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianProcess {
    /// Fits on `(x, y)`, choosing the length scale with the largest marginal
    /// likelihood among `candidates` (indices into the length-scale grid; all
    /// of them when empty). Returns `None` when no length scale gives a
    /// positive definite kernel matrix.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Option<Self> {
        Self::fit_with(x, y, &[])
    }

    pub(crate) fn fit_with(x: &[Vec<f64>], y: &[f64], candidates: &[usize]) -> Option<Self> {
        let n = y.len();
        if n == 0 {
            return None;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let d2 = DMatrix::from_fn(n, n, |i, j| sq_dist(&x[i], &x[j]));

        let all: Vec<usize> = (0..LENGTH_GRID.len()).collect();
        let grid = if candidates.is_empty() { &all[..] } else { candidates };
        let mut best: Option<(f64, usize, Cholesky<f64, Dyn>, DVector<f64>)> = None;
        for &g in grid {
            let length = LENGTH_GRID[g];
            let k = d2.map(|d| (-0.5 * d / (length * length)).exp())
                + DMatrix::identity(n, n) * JITTER;
            let Some(chol) = Cholesky::new(k) else {
                continue;
            };
            let alpha = chol.solve(&ys);
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|l| 2.0 * l.ln()).sum();
            let lml = -0.5 * ys.dot(&alpha) - 0.5 * log_det;
            if !lml.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|b| lml > b.0) {
                best = Some((lml, g, chol, alpha));
            }
        }
        let (_, grid_index, chol, alpha) = best?;
        let l = chol.l_dirty().clone();
        Some(Self {
            x: x.to_vec(),
            alpha,
            l,
            grid_index,
            y_mean,
            y_scale,
        })
    }

    /// Position of the fitted length scale in the grid.
    pub(crate) fn grid_index(&self) -> usize {
        self.grid_index
    }

    pub(crate) fn grid_len() -> usize {
        LENGTH_GRID.len()
    }

    pub fn length_scale(&self) -> f64 {
        LENGTH_GRID[self.grid_index]
    }

    /// Posterior mean and standard deviation at `p`, in objective units.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let length = self.length_scale();
        let inv = -0.5 / (length * length);
        let n = self.x.len();
        let mut v = [0.0f64; 64];
        let mut v_heap;
        let v: &mut [f64] = if n <= v.len() {
            &mut v[..n]
        } else {
            v_heap = vec![0.0; n];
            &mut v_heap
        };
        let mut mean = 0.0;
        for (i, xi) in self.x.iter().enumerate() {
            let k = (inv * sq_dist(xi, p)).exp();
            mean += k * self.alpha[i];
            v[i] = k;
        }
        // forward substitution L w = k, in place
        let mut quad = 0.0;
        for i in 0..n {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.l[(i, j)] * v[j];
            }
            v[i] = acc / self.l[(i, i)];
            quad += v[i] * v[i];
        }
        let var = (1.0 + JITTER - quad).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gap = mean - best;
    if sd <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}
