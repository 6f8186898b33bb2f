//! Stationary profiles: the explicit critical profile
//! `mu(x) = 1 / (pi (1 + |x|^2)^N)`, the self-similar profile `nu` of the
//! rescaled system for `chi < 1`, and residuals of the identities these
//! profiles satisfy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{normalize, normalize_radial, AnyDensity, Density1D, RadialDensity2D};
use crate::error::{Error, Result};
use crate::kernels::{log_convolution, principal_value_at_edges};

/// Uniform grid for either dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    /// `n` cells on `(-half_width, half_width)`.
    Line { half_width: f64, cells: usize },
    /// `n` radial cells on `[0, radius)`.
    Radial { radius: f64, cells: usize },
}

impl Grid {
    pub fn dimension(&self) -> usize {
        match self {
            Grid::Line { .. } => 1,
            Grid::Radial { .. } => 2,
        }
    }

    pub fn cells(&self) -> usize {
        match *self {
            Grid::Line { cells, .. } | Grid::Radial { cells, .. } => cells,
        }
    }

    /// Same extent, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Grid {
        match *self {
            Grid::Line { half_width, cells } => Grid::Line {
                half_width,
                cells: cells * factor,
            },
            Grid::Radial { radius, cells } => Grid::Radial {
                radius,
                cells: cells * factor,
            },
        }
    }
}

/// Which frame the equation is posed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Free,
    Rescaled,
}

/// The critical profile on a truncated grid.
#[derive(Debug, Clone)]
pub struct CriticalProfile {
    /// Samples renormalised to unit mass on the grid.
    pub density: AnyDensity,
    /// Mass of the exact profile outside the domain.
    pub truncated_mass: f64,
}

fn cauchy_1d(x: f64) -> f64 {
    1.0 / (PI * (1.0 + x * x))
}

fn cauchy_radial(r: f64) -> f64 {
    1.0 / (PI * (1.0 + r * r).powi(2))
}

/// `mu` sampled at the cell centres without renormalisation.
pub fn critical_samples(grid: Grid) -> Result<AnyDensity> {
    Ok(match grid {
        Grid::Line { half_width, cells } => Density1D::from_fn(half_width, cells, cauchy_1d)?.into(),
        Grid::Radial { radius, cells } => RadialDensity2D::from_fn(radius, cells, cauchy_radial)?.into(),
    })
}

/// `mu` sampled on the grid and renormalised to unit mass, with the mass the
/// exact profile carries outside the domain.
pub fn critical_profile(grid: Grid) -> Result<CriticalProfile> {
    Ok(match critical_samples(grid)? {
        AnyDensity::Line(d) => CriticalProfile {
            truncated_mass: 1.0 - 2.0 / PI * d.half_width().atan(),
            density: normalize(&d)?.into(),
        },
        AnyDensity::Radial(d) => CriticalProfile {
            truncated_mass: 1.0 / (1.0 + d.radius().powi(2)),
            density: normalize_radial(&d)?.into(),
        },
    })
}

/// Outcome of a self-similar profile solve.
#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub density: AnyDensity,
    pub iterations: usize,
    /// Sup-norm of `T(nu) - nu` for the fixed-point map `T`.
    pub residual: f64,
    pub second_moment: f64,
}

/// Fixed-point map for the 1D profile:
/// `T(rho)_i = exp(-x_i^2/2 - 2 chi U_i) / Z` where `U_i` is the cell average
/// of `log|.| * rho`. Its fixed point is the exact critical point of the
/// midpoint-discretised rescaled free energy.
struct LineMap {
    half_width: f64,
    xs: Vec<f64>,
    dx: f64,
    chi: f64,
    conv: crate::kernels::Toeplitz,
}

impl LineMap {
    fn log_image(&self, rho: &[f64]) -> Vec<f64> {
        let u = self.conv.apply(rho);
        self.xs
            .iter()
            .zip(&u)
            .map(|(x, u)| -0.5 * x * x - 2.0 * self.chi * u)
            .collect()
    }

    fn normalise_log(&self, logs: &[f64]) -> Vec<f64> {
        let top = logs.iter().cloned().fold(f64::MIN, f64::max);
        let mut v: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mass = v.iter().sum::<f64>() * self.dx;
        v.iter_mut().for_each(|x| *x /= mass);
        v
    }
}

/// Cumulated mass at the `n + 1` radial edges.
pub(crate) fn edge_masses(values: &[f64], dr: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        let r = (i as f64 + 0.5) * dr;
        acc += 2.0 * PI * v * r * dr;
        out.push(acc);
    }
    out
}

/// `integral_lo^hi M(s)/s ds` inside radial cell `[a, a + dr)` with constant
/// density `rho` and `M(a) = m_a`; exact for piecewise-constant densities.
pub(crate) fn mass_over_radius(rho: f64, m_a: f64, a: f64, lo: f64, hi: f64) -> f64 {
    let log_part = m_a - PI * rho * a * a;
    let log_term = if log_part == 0.0 || lo == 0.0 {
        0.0
    } else {
        log_part * (hi / lo).ln()
    };
    log_term + 0.5 * PI * rho * (hi * hi - lo * lo)
}

/// `Phi(r_i) = integral_0^{r_i} M(s)/s ds` at the cell centres.
fn radial_potential(values: &[f64], dr: f64) -> Vec<f64> {
    let m = edge_masses(values, dr);
    let mut phi_edge = 0.0;
    let mut out = Vec::with_capacity(values.len());
    for (i, &rho) in values.iter().enumerate() {
        let a = i as f64 * dr;
        let c = a + 0.5 * dr;
        out.push(phi_edge + mass_over_radius(rho, m[i], a, a, c));
        phi_edge += mass_over_radius(rho, m[i], a, a, a + dr);
    }
    out
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damped Picard iteration in log space, `log rho <- (1-theta) log rho +
/// theta log T(rho)`, with `theta` starting at 0.5 and halved whenever a
/// step fails to reduce the fixed-point residual.
fn damped_fixed_point(
    init: Vec<f64>,
    tol: f64,
    max_iter: usize,
    image: impl Fn(&[f64]) -> Vec<f64>,
    renormalise: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, usize, f64)> {
    let mut rho = init;
    let mut t_rho = image(&rho);
    let mut res = sup_diff(&rho, &t_rho);
    let mut theta: f64 = 0.5;
    for it in 0..max_iter {
        if res <= tol {
            return Ok((rho, it, res));
        }
        let logs: Vec<f64> = rho
            .iter()
            .zip(&t_rho)
            .map(|(a, b)| (1.0 - theta) * a.max(f64::MIN_POSITIVE).ln() + theta * b.max(f64::MIN_POSITIVE).ln())
            .collect();
        let cand = renormalise(&logs);
        let t_cand = image(&cand);
        let res_cand = sup_diff(&cand, &t_cand);
        if res_cand < res {
            rho = cand;
            t_rho = t_cand;
            res = res_cand;
            theta = (theta * 1.5).min(0.5);
        } else {
            theta *= 0.5;
            if theta < 1e-8 {
                break;
            }
        }
    }
    if res <= tol {
        Ok((rho, max_iter, res))
    } else {
        Err(Error::NoConvergence {
            max_iter,
            residual: res,
        })
    }
}

/// Self-similar profile `nu` of the rescaled system for `0 <= chi < 1`.
///
/// In 1D `nu ∝ exp(-x^2/2 - 2 chi (log|.| * nu))`; under radial symmetry
/// `nu ∝ exp(-r^2 - 4 chi integral_0^r M[nu](s)/s ds)`. Both are zero-flux
/// stationary states of the rescaled equation.
pub fn solve_self_similar(chi: f64, grid: Grid, tol: f64, max_iter: usize) -> Result<ProfileResult> {
    if !(0.0..1.0).contains(&chi) {
        return Err(Error::config(
            "chi",
            format!("self-similar profile requires 0 <= chi < 1, got {chi}"),
        ));
    }
    match grid {
        Grid::Line { half_width, cells } => {
            let d0 = Density1D::from_fn(half_width, cells, |_| 1.0)?;
            let dx = d0.dx();
            let map = LineMap {
                half_width,
                xs: d0.centers().collect(),
                dx,
                chi,
                conv: log_convolution(cells, dx),
            };
            let var = 1.0 - chi;
            let init: Vec<f64> = map.normalise_log(&map.xs.iter().map(|x| -x * x / (2.0 * var)).collect::<Vec<_>>());
            let (rho, iterations, residual) = damped_fixed_point(
                init,
                tol,
                max_iter,
                |r| map.normalise_log(&map.log_image(r)),
                |l| map.normalise_log(l),
            )?;
            let d = Density1D::from_values(map.half_width, rho)?;
            Ok(ProfileResult {
                second_moment: d.moment(2),
                density: d.into(),
                iterations,
                residual,
            })
        }
        Grid::Radial { radius, cells } => {
            let d0 = RadialDensity2D::from_fn(radius, cells, |_| 1.0)?;
            let dr = d0.dr();
            let rs: Vec<f64> = d0.centers().collect();
            let renorm = |logs: &[f64]| {
                let top = logs.iter().cloned().fold(f64::MIN, f64::max);
                let mut v: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
                let mass: f64 = v.iter().zip(&rs).map(|(v, r)| 2.0 * PI * v * r * dr).sum();
                v.iter_mut().for_each(|x| *x /= mass);
                v
            };
            let image = |rho: &[f64]| {
                let phi = radial_potential(rho, dr);
                let logs: Vec<f64> = rs.iter().zip(&phi).map(|(r, p)| -r * r - 4.0 * chi * p).collect();
                renorm(&logs)
            };
            let var = 1.0 - chi;
            let init = renorm(&rs.iter().map(|r| -r * r / var).collect::<Vec<_>>());
            let (rho, iterations, residual) = damped_fixed_point(init, tol, max_iter, image, renorm)?;
            let d = RadialDensity2D::from_values(radius, rho)?;
            Ok(ProfileResult {
                second_moment: d.moment(2),
                density: d.into(),
                iterations,
                residual,
            })
        }
    }
}

/// Which characterization identity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// `mu(p) = int int_0^1 mu(p - tq) mu(p - tq + q) dt dq`.
    Critical1d,
    /// `nu(p) = int int_0^1 (chi + q^2/2) nu(p - tq) nu(p - tq + q) dt dq`.
    Rescaled1d,
    /// `mu(b)/2 = 2 int_b^inf mu(a) M[mu](a) / a da`.
    CriticalRadial,
    /// `nu(b)/2 = int_b^inf nu(a) (2 chi M[nu](a)/a + a) da`.
    RescaledRadial,
}

/// Sup over the grid centres of `|LHS - RHS|` for the selected identity.
///
/// In 1D the inner `t`-integral is rewritten with `s = p - tq` as
/// `(1/q) int_{p-q}^p rho(s) rho(s+q) ds` and integrated exactly for the
/// piecewise-linear interpolant (zero outside the domain); the outer
/// `q`-integral is a trapezoid rule with step `dx`. Radial identities
/// integrate the exact cumulated mass of the piecewise-constant density.
pub fn characterization_residual(density: &AnyDensity, identity: Identity, chi: f64) -> Result<f64> {
    match (identity, density) {
        (Identity::Critical1d, AnyDensity::Line(d)) => Ok(line_residual(d, |_| 1.0)),
        (Identity::Rescaled1d, AnyDensity::Line(d)) => Ok(line_residual(d, |q| chi + 0.5 * q * q)),
        (Identity::CriticalRadial, AnyDensity::Radial(d)) => Ok(radial_residual(d, 1.0, false)),
        (Identity::RescaledRadial, AnyDensity::Radial(d)) => Ok(radial_residual(d, chi, true)),
        (id, d) => Err(Error::InvalidGrid(format!(
            "identity {id:?} does not apply to a {}-dimensional density",
            d.dimension()
        ))),
    }
}

/// Right-hand side of the 1D identity at every centre, for kernel weight `w(q)`.
pub fn line_identity_rhs(d: &Density1D, weight: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = d.len();
    let dx = d.dx();
    let v = d.values();
    let mut rhs = vec![0.0; n];
    // q = 0: the window integral tends to rho(p)^2
    let w0 = weight(0.0);
    for i in 0..n {
        rhs[i] += 0.5 * w0 * v[i] * v[i];
    }
    // prefix[k] = integral from x_{-1} (zero) to x_k of g, with g_k = v_k v_{k+l}
    let mut prefix = vec![0.0; n + 1];
    for l in 1..2 * n {
        let q = l as f64 * dx;
        let g = |k: isize| -> f64 {
            if k < 0 || (k as usize) >= n || (k as usize + l) >= n {
                0.0
            } else {
                v[k as usize] * v[k as usize + l]
            }
        };
        // exact integral of a product of two linear interpolants per cell
        let a = |k: isize| -> f64 {
            if k < 0 || k as usize >= n {
                0.0
            } else {
                v[k as usize]
            }
        };
        let b = |k: isize| -> f64 {
            let j = k + l as isize;
            if k < 0 || j < 0 || j as usize >= n {
                0.0
            } else {
                v[j as usize]
            }
        };
        prefix[0] = 0.0;
        let mut acc = 0.0;
        for k in 0..n {
            // cell [x_{k-1}, x_k]
            let (k0, k1) = (k as isize - 1, k as isize);
            let cell = dx / 6.0 * (2.0 * a(k0) * b(k0) + a(k0) * b(k1) + a(k1) * b(k0) + 2.0 * a(k1) * b(k1));
            acc += cell;
            prefix[k + 1] = acc;
        }
        let _ = g;
        let wq = weight(q) / q;
        let trap = if l == 2 * n - 1 { 0.5 } else { 1.0 };
        for i in 0..n {
            // integral from x_{i-l} to x_i
            let hi = prefix[i + 1];
            let lo = if i >= l { prefix[i + 1 - l] } else { 0.0 };
            rhs[i] += trap * wq * (hi - lo);
        }
    }
    // both signs of q contribute equally
    rhs.iter().map(|r| 2.0 * r * dx).collect()
}

fn line_residual(d: &Density1D, weight: impl Fn(f64) -> f64) -> f64 {
    let rhs = line_identity_rhs(d, weight);
    sup_diff(d.values(), &rhs)
}

fn radial_residual(d: &RadialDensity2D, chi: f64, rescaled: bool) -> f64 {
    let n = d.len();
    let dr = d.dr();
    let v = d.values();
    let m = edge_masses(v, dr);
    // integral of rho(s) (2 chi M(s)/s + [rescaled] s) over [lo, hi] in cell k
    let piece = |k: usize, lo: f64, hi: f64| -> f64 {
        let a = k as f64 * dr;
        let mut acc = 2.0 * chi * mass_over_radius(v[k], m[k], a, lo, hi);
        if rescaled {
            acc += 0.5 * (hi * hi - lo * lo);
        }
        v[k] * acc
    };
    let full: Vec<f64> = (0..n).map(|k| piece(k, k as f64 * dr, (k as f64 + 1.0) * dr)).collect();
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + full[k];
    }
    (0..n)
        .map(|i| {
            let c = (i as f64 + 0.5) * dr;
            let rhs = piece(i, c, (i as f64 + 1.0) * dr) + tail[i + 1];
            (0.5 * v[i] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Sup-norm residual of the zero-flux Euler-Lagrange equation at interior
/// cell edges:
/// 1D: `rho' + 2 chi rho (p.v. 1/x * rho) [+ x rho]`;
/// radial: `r rho'/2 + 2 chi rho M[rho] [+ r^2 rho]`.
/// Derivatives are centred differences of `log rho` weighted by the
/// geometric mean of the neighbouring values.
pub fn euler_lagrange_residual(density: &AnyDensity, chi: f64, frame: Frame) -> Result<f64> {
    let confine = if frame == Frame::Rescaled { 1.0 } else { 0.0 };
    match density {
        AnyDensity::Line(d) => {
            let n = d.len();
            let dx = d.dx();
            let v = d.values();
            let pv: Vec<f64> = if chi != 0.0 {
                principal_value_at_edges(n).apply(v)
            } else {
                vec![0.0; n + 1]
            };
            let mut worst: f64 = 0.0;
            for k in 1..n {
                let e = d.edge(k);
                let (a, b) = (v[k - 1], v[k]);
                let r = if a > 0.0 && b > 0.0 {
                    let g = (a * b).sqrt();
                    g * ((b.ln() - a.ln()) / dx + 2.0 * chi * pv[k] + confine * e)
                } else {
                    (b - a) / dx + 0.5 * (a + b) * (2.0 * chi * pv[k] + confine * e)
                };
                worst = worst.max(r.abs());
            }
            Ok(worst)
        }
        AnyDensity::Radial(d) => {
            let n = d.len();
            let dr = d.dr();
            let v = d.values();
            let m = edge_masses(v, dr);
            let mut worst: f64 = 0.0;
            for k in 1..n {
                let e = d.edge(k);
                let (a, b) = (v[k - 1], v[k]);
                let r = if a > 0.0 && b > 0.0 {
                    let g = (a * b).sqrt();
                    g * (0.5 * e * (b.ln() - a.ln()) / dr + 2.0 * chi * m[k] + confine * e * e)
                } else {
                    0.5 * e * (b - a) / dr + 0.5 * (a + b) * (2.0 * chi * m[k] + confine * e * e)
                };
                worst = worst.max(r.abs());
            }
            Ok(worst)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_at_origin() {
        assert!((cauchy_1d(0.0) - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        let p = critical_profile(Grid::Line {
            half_width: 40.0,
            cells: 512,
        })
        .unwrap();
        assert!((p.truncated_mass - (1.0 - 2.0 / PI * 40f64.atan())).abs() < 1e-15);
        if let AnyDensity::Line(d) = &p.density {
            assert!((d.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_truncated_mass_matches_quadrature() {
        let r = 50.0;
        let raw = critical_samples(Grid::Radial {
            radius: r,
            cells: 20000,
        })
        .unwrap();
        let AnyDensity::Radial(d) = raw else { unreachable!() };
        let exact = 1.0 - 1.0 / (1.0 + r * r);
        assert!((d.mass() - exact).abs() < 1e-6, "{} vs {exact}", d.mass());
        let p = critical_profile(Grid::Radial { radius: r, cells: 512 }).unwrap();
        assert!((p.truncated_mass - 1.0 / (1.0 + r * r)).abs() < 1e-16);
    }

    #[test]
    fn small_chi_profile_is_gaussian() {
        let p = solve_self_similar(
            1e-12,
            Grid::Line {
                half_width: 10.0,
                cells: 512,
            },
            1e-13,
            500,
        )
        .unwrap();
        let AnyDensity::Line(d) = &p.density else {
            unreachable!()
        };
        let mass: f64 = d.centers().map(|x| (-x * x / 2.0).exp()).sum::<f64>() * d.dx();
        let err = d
            .centers()
            .zip(d.values())
            .map(|(x, v)| (v - (-x * x / 2.0).exp() / mass).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let g = (2.0 * PI).sqrt();
        assert!((1.0 / mass - 1.0 / g).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_subcritical_chi() {
        assert!(solve_self_similar(
            1.0,
            Grid::Line {
                half_width: 8.0,
                cells: 64
            },
            1e-8,
            10
        )
        .is_err());
        assert!(solve_self_similar(
            -0.1,
            Grid::Line {
                half_width: 8.0,
                cells: 64
            },
            1e-8,
            10
        )
        .is_err());
    }

    #[test]
    fn residual_rejects_wrong_dimension() {
        let d: AnyDensity = Density1D::from_fn(4.0, 32, |_| 0.125).unwrap().into();
        assert!(characterization_residual(&d, Identity::CriticalRadial, 1.0).is_err());
    }

    #[test]
    fn gaussian_satisfies_ou_euler_lagrange_exactly() {
        let g = Density1D::from_fn(8.0, 400, |x| (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        let r = euler_lagrange_residual(&g.into(), 0.0, Frame::Rescaled).unwrap();
        assert!(r <= 1e-8, "{r}");
        let g2 = RadialDensity2D::from_fn(6.0, 300, |r| (-r * r).exp() / PI).unwrap();
        let r2 = euler_lagrange_residual(&g2.into(), 0.0, Frame::Rescaled).unwrap();
        assert!(r2 <= 1e-8, "{r2}");
    }

    #[test]
    fn radial_potential_of_uniform_disk() {
        // rho = 1/pi on the unit disc: M(s) = s^2, Phi(r) = r^2 / 2
        let d = RadialDensity2D::from_fn(1.0, 50, |_| 1.0 / PI).unwrap();
        let phi = radial_potential(d.values(), d.dr());
        for (r, p) in d.centers().zip(&phi) {
            assert!((p - 0.5 * r * r).abs() < 1e-13);
        }
    }
}
