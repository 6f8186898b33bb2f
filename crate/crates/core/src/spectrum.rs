//! Fourier-side representation of one-dimensional probability densities.
//!
//! Only `xi >= 0` is stored: transforms of real densities satisfy
//! `rho_hat(-xi) = conj(rho_hat(xi))`. Frequencies are `xi_j = j * dxi`,
//! `j = 0..m`, with `xi_{m-1} = freq_max`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::Density1D;
use crate::error::{Error, Result};

/// Clipped mass above which an inverse transform is refused.
pub const MAX_CLIPPED_MASS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    freq_max: f64,
    values: Vec<Complex64>,
}

impl SpectralState {
    /// Checks `values[0] == 1` and `|values[j]| <= 1 + 1e-12`.
    pub fn new(freq_max: f64, values: Vec<Complex64>) -> Result<Self> {
        let s = Self::unchecked(freq_max, values)?;
        if s.values[0] != Complex64::new(1.0, 0.0) {
            return Err(Error::InvalidDensity(format!(
                "spectrum must equal 1 at xi = 0, got {}",
                s.values[0]
            )));
        }
        if let Some((j, v)) = s.values.iter().enumerate().find(|(_, v)| v.norm() > 1.0 + 1e-12) {
            return Err(Error::InvalidDensity(format!(
                "|rho_hat| = {} > 1 at mode {j}",
                v.norm()
            )));
        }
        Ok(s)
    }

    /// Grid checks only; used for solver intermediates.
    pub fn unchecked(freq_max: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(freq_max > 0.0 && freq_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("freq_max must be positive, got {freq_max}")));
        }
        // the moment estimators read the three lowest nonzero modes
        if values.len() < 4 {
            return Err(Error::InvalidGrid("at least 4 modes required".into()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidDensity("non-finite spectral value".into()));
        }
        Ok(Self { freq_max, values })
    }

    /// Samples `f` on the frequency grid and pins the zero mode to 1.
    pub fn from_fn(freq_max: f64, m: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let dxi = freq_max / (m - 1) as f64;
        let mut values: Vec<Complex64> = (0..m).map(|j| f(j as f64 * dxi)).collect();
        values[0] = Complex64::new(1.0, 0.0);
        Self::new(freq_max, values)
    }

    pub fn freq_max(&self) -> f64 {
        self.freq_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dxi(&self) -> f64 {
        self.freq_max / (self.values.len() - 1) as f64
    }

    pub fn xi(&self, j: usize) -> f64 {
        j as f64 * self.dxi()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len() && (self.freq_max - other.freq_max).abs() <= 1e-12 * self.freq_max
    }

    /// Linear interpolation at `0 <= xi <= freq_max`, extended by
    /// conjugate symmetry to negative frequencies.
    pub fn interpolate(&self, xi: f64) -> Complex64 {
        if xi < 0.0 {
            return self.interpolate(-xi).conj();
        }
        let s = xi / self.dxi();
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Centre of mass from `f_j = Im rho_hat(xi_j) / xi_j`, extrapolated to
    /// `xi = 0` in `xi^2` through the three lowest nonzero modes.
    pub fn mean(&self) -> f64 {
        let f = |j: usize| self.values[j].im / self.xi(j);
        1.5 * f(1) - 0.6 * f(2) + 0.1 * f(3)
    }

    /// Second moment from the two lowest nonzero modes, eliminating the
    /// quartic term: `M2 = -(16 (s1 - 1) - (s2 - 1)) / (6 dxi^2)`.
    pub fn second_moment(&self) -> f64 {
        let h = self.dxi();
        let s1 = self.values[1].re - 1.0;
        let s2 = self.values[2].re - 1.0;
        -(16.0 * s1 - s2) / (6.0 * h * h)
    }
}

/// `rho_hat(xi_j) = sum_i exp(i xi_j x_i) rho_i dx`, renormalised so the
/// zero mode is exactly 1.
pub fn fourier_transform(d: &Density1D, freq_max: f64, m: usize) -> Result<SpectralState> {
    let dxi = freq_max / (m - 1) as f64;
    let dx = d.dx();
    let xs: Vec<f64> = d.centers().collect();
    let mut values: Vec<Complex64> = (0..m)
        .map(|j| {
            let xi = j as f64 * dxi;
            let (mut re, mut im) = (0.0, 0.0);
            for (x, v) in xs.iter().zip(d.values()) {
                let (s, c) = (xi * x).sin_cos();
                re += c * v;
                im += s * v;
            }
            Complex64::new(re * dx, im * dx)
        })
        .collect();
    let mass = values[0].re;
    if !(mass > 0.0) {
        return Err(Error::ZeroMass { mass });
    }
    for v in values.iter_mut() {
        *v /= mass;
    }
    values[0] = Complex64::new(1.0, 0.0);
    SpectralState::unchecked(freq_max, values)
}

/// Result of an inverse transform: the density and how much negative mass
/// was clipped before renormalisation.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub density: Density1D,
    pub clipped_mass: f64,
}

/// `rho(x) = (1/pi) integral_0^Xi Re(rho_hat(xi) exp(-i xi x)) dxi` by the
/// trapezoid rule on the stored grid (the symmetric full-line trapezoid),
/// sampled at the centres of an `n`-cell grid on `(-half_width, half_width)`.
pub fn inverse_transform(s: &SpectralState, half_width: f64, n: usize) -> Result<Reconstruction> {
    let dx = 2.0 * half_width / n as f64;
    let dxi = s.dxi();
    let m = s.len();
    let mut raw: Vec<f64> = (0..n)
        .map(|i| {
            let x = -half_width + (i as f64 + 0.5) * dx;
            let mut acc = 0.0;
            for (j, v) in s.values().iter().enumerate() {
                let (sn, cs) = (j as f64 * dxi * x).sin_cos();
                // Re(v * exp(-i xi x))
                let term = v.re * cs + v.im * sn;
                let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                acc += w * term;
            }
            acc * dxi / PI
        })
        .collect();
    let clipped: f64 = raw.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * dx;
    if clipped > MAX_CLIPPED_MASS {
        return Err(Error::TruncationTooSevere { clipped });
    }
    for v in raw.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mass = raw.iter().sum::<f64>() * dx;
    if !(mass > 0.0) {
        return Err(Error::ZeroMass { mass });
    }
    for v in raw.iter_mut() {
        *v /= mass;
    }
    Ok(Reconstruction {
        density: Density1D::from_values(half_width, raw)?,
        clipped_mass: clipped,
    })
}
