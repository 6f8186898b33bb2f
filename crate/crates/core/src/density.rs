//! Cell-centred grid densities on a symmetric interval (N = 1) and on a
//! disc under radial symmetry (N = 2).
//!
//! Values live at uniform cell centres and every integral is a midpoint sum.
//! Constructors only check what holds for any nonnegative grid function;
//! probability and centring invariants are checked by [`Density1D::new`]
//! and [`RadialDensity2D::new`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass tolerance used by the probability constructors.
pub const TOL_MASS: f64 = 1e-8;

fn check_values(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "at least 2 cells required, got {}",
            values.len()
        )));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidDensity(format!("value at cell {i} is not finite")));
        }
        if v < 0.0 {
            return Err(Error::InvalidDensity(format!("negative value {v:e} at cell {i}")));
        }
    }
    Ok(())
}

/// Nonnegative density on `(-half_width, half_width)` with `n` uniform cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density1D {
    half_width: f64,
    values: Vec<f64>,
}

impl Density1D {
    /// Any nonnegative grid function; mass and centre are not checked.
    pub fn from_values(half_width: f64, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        check_values(&values)?;
        Ok(Self { half_width, values })
    }

    /// Probability density: unit mass within [`TOL_MASS`].
    pub fn new(half_width: f64, values: Vec<f64>) -> Result<Self> {
        let d = Self::from_values(half_width, values)?;
        let mass = d.mass();
        if (mass - 1.0).abs() > TOL_MASS {
            return Err(Error::InvalidDensity(format!("mass {mass} differs from 1")));
        }
        Ok(d)
    }

    /// Samples `f` at the cell centres. Negative samples are rejected.
    pub fn from_fn(half_width: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = 2.0 * half_width / n as f64;
        let values = (0..n).map(|i| f(-half_width + (i as f64 + 0.5) * dx)).collect();
        Self::from_values(half_width, values)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.values.len() as f64
    }

    /// Centre of cell `i`.
    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx()
    }

    /// Left edge of cell `k` (`k = n` is the right boundary).
    pub fn edge(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        let l = self.half_width;
        (0..self.len()).map(move |i| -l + (i as f64 + 0.5) * dx)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// First moment divided by the mass.
    pub fn mean(&self) -> f64 {
        let first: f64 = self.centers().zip(&self.values).map(|(x, v)| x * v).sum();
        first * self.dx() / self.mass()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.centers()
            .zip(&self.values)
            .map(|(x, v)| x.powi(k) * v)
            .sum::<f64>()
            * self.dx()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len() && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }

    /// Fails unless the centre of mass lies within `tol` of the origin.
    pub fn require_centered(&self, tol: f64) -> Result<()> {
        let m = self.mean();
        if m.abs() > tol {
            return Err(Error::InvalidDensity(format!("center of mass {m:e} is not zero")));
        }
        Ok(())
    }

    /// Linear interpolation between cell centres; flat between the outer
    /// centres and the boundary, zero outside the domain.
    pub fn interpolate(&self, x: f64) -> f64 {
        if !(x.abs() <= self.half_width) {
            return 0.0;
        }
        let n = self.len();
        let s = (x + self.half_width) / self.dx() - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        (1.0 - f) * self.values[i] + f * self.values[i + 1]
    }

    /// Dilation `lambda * rho(lambda * x)` resampled on the same grid.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        let values = self.centers().map(|x| lambda * self.interpolate(lambda * x)).collect();
        Self::from_values(self.half_width, values)
    }

    fn translated(&self, shift: f64) -> Self {
        let values = self.centers().map(|x| self.interpolate(x + shift)).collect();
        Self {
            half_width: self.half_width,
            values,
        }
    }
}

/// Radially symmetric planar density on `[0, radius)` with `n` uniform
/// radial cells. Mass is `2 pi sum rho_i r_i dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialDensity2D {
    radius: f64,
    values: Vec<f64>,
}

impl RadialDensity2D {
    pub fn from_values(radius: f64, values: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
        }
        check_values(&values)?;
        Ok(Self { radius, values })
    }

    pub fn new(radius: f64, values: Vec<f64>) -> Result<Self> {
        let d = Self::from_values(radius, values)?;
        let mass = d.mass();
        if (mass - 1.0).abs() > TOL_MASS {
            return Err(Error::InvalidDensity(format!("mass {mass} differs from 1")));
        }
        Ok(d)
    }

    pub fn from_fn(radius: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dr = radius / n as f64;
        let values = (0..n).map(|i| f((i as f64 + 0.5) * dr)).collect();
        Self::from_values(radius, values)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dr(&self) -> f64 {
        self.radius / self.values.len() as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn edge(&self, k: usize) -> f64 {
        k as f64 * self.dr()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let dr = self.dr();
        (0..self.len()).map(move |i| (i as f64 + 0.5) * dr)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mass of every annular cell, `2 pi rho_i r_i dr`. For piecewise
    /// constant densities this is exact.
    pub fn cell_masses(&self) -> Vec<f64> {
        let dr = self.dr();
        self.centers()
            .zip(&self.values)
            .map(|(r, v)| 2.0 * PI * v * r * dr)
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.cell_masses().iter().sum()
    }

    /// `integral |x|^k rho dx` over the plane.
    pub fn moment(&self, k: i32) -> f64 {
        self.centers().zip(self.cell_masses()).map(|(r, m)| r.powi(k) * m).sum()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len() && (self.radius - other.radius).abs() <= 1e-12 * self.radius
    }

    /// Linear interpolation in `r`; flat below the first centre and above
    /// the last one, zero outside the disc.
    pub fn interpolate(&self, r: f64) -> f64 {
        if !(r >= 0.0 && r <= self.radius) {
            return 0.0;
        }
        let n = self.len();
        let s = r / self.dr() - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        (1.0 - f) * self.values[i] + f * self.values[i + 1]
    }

    /// Dilation `lambda^2 rho(lambda r)` resampled on the same grid.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        let values = self
            .centers()
            .map(|r| lambda * lambda * self.interpolate(lambda * r))
            .collect();
        Self::from_values(self.radius, values)
    }
}

/// Either kind of grid density; used where operations accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyDensity {
    Line(Density1D),
    Radial(RadialDensity2D),
}

impl AnyDensity {
    pub fn dimension(&self) -> usize {
        match self {
            AnyDensity::Line(_) => 1,
            AnyDensity::Radial(_) => 2,
        }
    }
}

impl From<Density1D> for AnyDensity {
    fn from(d: Density1D) -> Self {
        AnyDensity::Line(d)
    }
}

impl From<RadialDensity2D> for AnyDensity {
    fn from(d: RadialDensity2D) -> Self {
        AnyDensity::Radial(d)
    }
}

/// Rescales to unit mass and re-centres the first moment at the origin by
/// interpolated translation.
pub fn normalize(d: &Density1D) -> Result<Density1D> {
    let mass = d.mass();
    if !(mass > TOL_MASS) {
        return Err(Error::ZeroMass { mass });
    }
    let mut out = scale_to_unit(d, mass);
    // Linear-interpolation shifts move the mean exactly unless mass leaves
    // the domain, so a few passes reach round-off.
    for _ in 0..4 {
        let mean = out.mean();
        if mean.abs() <= 1e-13 * out.half_width {
            break;
        }
        let shifted = out.translated(mean);
        let m = shifted.mass();
        if !(m > TOL_MASS) {
            return Err(Error::ZeroMass { mass: m });
        }
        out = scale_to_unit(&shifted, m);
    }
    Ok(out)
}

fn scale_to_unit(d: &Density1D, mass: f64) -> Density1D {
    Density1D {
        half_width: d.half_width,
        values: d.values.iter().map(|v| v / mass).collect(),
    }
}

/// Rescales a radial density to unit planar mass.
pub fn normalize_radial(d: &RadialDensity2D) -> Result<RadialDensity2D> {
    let mass = d.mass();
    if !(mass > TOL_MASS) {
        return Err(Error::ZeroMass { mass });
    }
    Ok(RadialDensity2D {
        radius: d.radius,
        values: d.values.iter().map(|v| v / mass).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn uniform_mass_two_is_halved() {
        let d = Density1D::from_values(1.0, vec![1.0; 64]).unwrap();
        assert!((d.mass() - 2.0).abs() < 1e-14);
        let n = normalize(&d).unwrap();
        assert!(n.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!((n.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalize_is_idempotent_on_cauchy() {
        let d = Density1D::from_fn(20.0, 400, |x| 1.0 / (PI * (1.0 + x * x))).unwrap();
        let once = normalize(&d).unwrap();
        let twice = normalize(&once).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_gaussian_is_recentered() {
        let d = Density1D::from_fn(8.0, 512, gaussian(0.3, 1.0)).unwrap();
        // independent trapezoid first moment before the shift
        let xs: Vec<f64> = d.centers().collect();
        let trap: f64 = xs
            .windows(2)
            .zip(d.values().windows(2))
            .map(|(x, v)| 0.5 * (x[1] - x[0]) * (x[0] * v[0] + x[1] * v[1]))
            .sum();
        assert!((trap - 0.3).abs() < 1e-3);
        let n = normalize(&d).unwrap();
        assert!(n.mean().abs() <= 1e-10, "mean {}", n.mean());
        assert!((n.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_is_rejected() {
        let d = Density1D::from_values(1.0, vec![0.0; 16]).unwrap();
        assert!(matches!(normalize(&d), Err(Error::ZeroMass { .. })));
        let r = RadialDensity2D::from_values(1.0, vec![0.0; 16]).unwrap();
        assert!(matches!(normalize_radial(&r), Err(Error::ZeroMass { .. })));
    }

    #[test]
    fn constructors_reject_bad_values() {
        assert!(Density1D::from_values(1.0, vec![1.0, -1e-3, 1.0]).is_err());
        assert!(Density1D::from_values(1.0, vec![1.0, f64::NAN]).is_err());
        assert!(Density1D::from_values(-1.0, vec![1.0; 4]).is_err());
        assert!(Density1D::new(1.0, vec![1.0; 4]).is_err());
        assert!(Density1D::new(1.0, vec![0.5; 4]).is_ok());
    }

    #[test]
    fn radial_uniform_disk_has_unit_mass() {
        let r = 2.0;
        let d = RadialDensity2D::from_fn(r, 100, |_| 1.0 / (PI * r * r)).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-13);
        assert!(RadialDensity2D::new(r, d.values().to_vec()).is_ok());
    }

    #[test]
    fn dilation_preserves_mass() {
        let d = Density1D::from_fn(10.0, 1000, gaussian(0.0, 1.0)).unwrap();
        let half = d.dilate(2.0).unwrap();
        assert!((half.mass() - 1.0).abs() < 1e-5);
        assert!((half.moment(2) - 0.25).abs() < 1e-3);
    }
}
