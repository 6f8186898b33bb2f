//! Translation-invariant kernels on uniform grids.
//!
//! Both singular kernels used by the laboratory act as Toeplitz matrices
//! between cell centres (and edges), so they are applied with a zero-padded
//! FFT in `O(n log n)`. [`Toeplitz::apply_direct`] keeps the plain pairwise
//! sum for cross-checks.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `y[i] = sum_j k[i + n_in - 1 - j] x[j]` for `i < n_out`.
pub struct Toeplitz {
    n_in: usize,
    n_out: usize,
    kernel: Vec<f64>,
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Toeplitz {
    /// `kernel` has length `n_out + n_in - 1`; entry `d + n_in - 1` is the
    /// coefficient for offset `i - j = d`.
    pub fn new(n_in: usize, n_out: usize, kernel: Vec<f64>) -> Self {
        assert_eq!(kernel.len(), n_out + n_in - 1, "kernel length");
        let size = kernel.len().next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_hat: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
        kernel_hat.resize(size, Complex64::new(0.0, 0.0));
        forward.process(&mut kernel_hat);
        Self {
            n_in,
            n_out,
            kernel,
            kernel_hat,
            forward,
            inverse,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_in);
        let size = self.kernel_hat.len();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        (0..self.n_out).map(|i| buf[i + self.n_in - 1].re * scale).collect()
    }

    /// Pairwise `O(n_in n_out)` evaluation.
    pub fn apply_direct(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|i| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| self.kernel[i + self.n_in - 1 - j] * v)
                    .sum()
            })
            .collect()
    }
}

/// `integral_0^1 integral_0^1 log|k + s - t| ds dt`, the cell-pair average of
/// `log|x - y|` on a unit grid at integer offset `k`.
pub fn unit_log_cell_average(k: i64) -> f64 {
    let k = k.unsigned_abs() as f64;
    if k < 8.0 {
        let q = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                0.5 * u * u * u.abs().ln() - 0.75 * u * u
            }
        };
        q(k + 1.0) - 2.0 * q(k) + q(k - 1.0)
    } else {
        // log k - sum_m k^{-2m} / (m (2m+1) (2m+2)); the closed form loses
        // about k^2 ulps to cancellation at large offsets.
        let inv2 = 1.0 / (k * k);
        let mut term = 1.0;
        let mut sum = 0.0;
        for m in 1..=12 {
            term *= inv2;
            let m = m as f64;
            sum += term / (m * (2.0 * m + 1.0) * (2.0 * m + 2.0));
        }
        k.ln() - sum
    }
}

/// Toeplitz operator mapping cell values `rho_j` to
/// `sum_j rho_j * (1/dx) integral_cell_i integral_cell_j log|x - y| dx dy / dx`,
/// i.e. the cell average of `log|.| * rho` for piecewise-constant `rho`.
pub fn log_convolution(n: usize, dx: f64) -> Toeplitz {
    let log_dx = dx.ln();
    let kernel = (0..2 * n - 1)
        .map(|idx| dx * (log_dx + unit_log_cell_average(idx as i64 - (n as i64 - 1))))
        .collect();
    Toeplitz::new(n, n, kernel)
}

/// Toeplitz operator from cell values to the `n + 1` edges:
/// `sum_j rho_j dx / (e_k - x_j)`. Edges never coincide with centres, so
/// this is the principal-value sum for `(p.v. 1/x) * rho`.
pub fn principal_value_at_edges(n: usize) -> Toeplitz {
    let kernel = (0..2 * n)
        .map(|idx| {
            let d = idx as f64 - (n as f64 - 1.0);
            1.0 / (d - 0.5)
        })
        .collect();
    Toeplitz::new(n, n + 1, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        for op in [log_convolution(37, 0.13), principal_value_at_edges(37)] {
            let a = op.apply(&x);
            let b = op.apply_direct(&x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12 * (1.0 + v.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn diagonal_cell_average_matches_closed_form() {
        // h^2 (log h - 3/2) for the diagonal cell pair
        let h: f64 = 0.25;
        let w = h * h * (h.ln() + unit_log_cell_average(0));
        assert!((w - h * h * (h.ln() - 1.5)).abs() < 1e-15);
    }

    #[test]
    fn cell_average_series_and_closed_form_agree() {
        for k in 2..8 {
            let kf = k as f64;
            let inv2 = 1.0 / (kf * kf);
            let mut term = 1.0;
            let mut s = 0.0;
            for m in 1..=40 {
                term *= inv2;
                let m = m as f64;
                s += term / (m * (2.0 * m + 1.0) * (2.0 * m + 2.0));
            }
            assert!((unit_log_cell_average(k) - (kf.ln() - s)).abs() < 1e-13);
        }
        // brute-force midpoint double integral at an offset past the switch
        let k = 9.0;
        let m = 2000;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let s = (a as f64 + 0.5) / m as f64;
                let t = (b as f64 + 0.5) / m as f64;
                acc += (k + s - t).ln();
            }
        }
        acc /= (m * m) as f64;
        assert!((acc - unit_log_cell_average(9)).abs() < 1e-8);
    }
}
