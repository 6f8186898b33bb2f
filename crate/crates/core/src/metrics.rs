//! Distances and functionals: quantile-based Wasserstein-2, the Fourier
//! distance d1, free energies, moments, dissipation and decay-rate fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{AnyDensity, Density1D, RadialDensity2D};
use crate::error::{Error, Result};
use crate::kernels::{log_convolution, principal_value_at_edges};
use crate::profiles::{edge_masses, Frame};
use crate::spectrum::SpectralState;

/// Mass levels used by [`wasserstein2`].
pub const QUANTILE_LEVELS: usize = 4096;

/// Tolerance on the difference of centres of mass accepted by [`fourier_d1`].
pub const CENTER_TOL: f64 = 1e-6;

/// Cells with values below this are treated as empty by the entropy.
const EMPTY_CELL: f64 = 1e-300;

/// Pseudo-inverse of the cumulative distribution at a set of mass levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFunction {
    pub levels: Vec<f64>,
    pub positions: Vec<f64>,
}

/// `k` midpoint levels `(j + 1/2) / k`.
pub fn midpoint_levels(k: usize) -> Vec<f64> {
    (0..k).map(|j| (j as f64 + 0.5) / k as f64).collect()
}

/// Quantiles of a grid density. The cumulative mass is exact for the
/// piecewise-constant density: linear inside 1D cells, quadratic in `r`
/// inside radial cells (so radial quantiles are radii). Levels are fractions
/// of the total mass.
pub fn quantile(d: &AnyDensity, levels: &[f64]) -> QuantileFunction {
    let positions = match d {
        AnyDensity::Line(d) => line_quantiles(d, levels),
        AnyDensity::Radial(d) => radial_quantiles(d, levels),
    };
    QuantileFunction {
        levels: levels.to_vec(),
        positions,
    }
}

fn cumulative(cell_masses: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(cell_masses.len() + 1);
    c.push(0.0);
    let mut acc = 0.0;
    for m in cell_masses {
        acc += m;
        c.push(acc);
    }
    c
}

/// Index `k` of the first cell with `c[k] < target <= c[k + 1]`.
fn locate(c: &[f64], target: f64) -> usize {
    let n = c.len() - 1;
    let k = c.partition_point(|&v| v < target);
    k.saturating_sub(1).min(n - 1)
}

fn line_quantiles(d: &Density1D, levels: &[f64]) -> Vec<f64> {
    let dx = d.dx();
    let masses: Vec<f64> = d.values().iter().map(|v| v * dx).collect();
    let c = cumulative(&masses);
    let total = c[c.len() - 1];
    levels
        .iter()
        .map(|&m| {
            let target = m * total;
            let k = locate(&c, target);
            let frac = if masses[k] > 0.0 {
                ((target - c[k]) / masses[k]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            d.edge(k) + frac * dx
        })
        .collect()
}

fn radial_quantiles(d: &RadialDensity2D, levels: &[f64]) -> Vec<f64> {
    let dr = d.dr();
    let c = cumulative(&d.cell_masses());
    let total = c[c.len() - 1];
    levels
        .iter()
        .map(|&m| {
            let target = m * total;
            let k = locate(&c, target);
            let a = d.edge(k);
            let rho = d.values()[k];
            if rho > 0.0 {
                let r2 = a * a + (target - c[k]) / (PI * rho);
                r2.max(a * a).sqrt().min(a + dr)
            } else {
                a
            }
        })
        .collect()
}

/// `W2 = (int_0^1 |X1(m) - X2(m)|^2 dm)^{1/2}` by the midpoint rule over
/// [`QUANTILE_LEVELS`] levels. Radial densities are compared through their
/// radial mass distributions.
pub fn wasserstein2(d1: &AnyDensity, d2: &AnyDensity) -> Result<f64> {
    wasserstein2_with_levels(d1, d2, QUANTILE_LEVELS)
}

pub fn wasserstein2_with_levels(d1: &AnyDensity, d2: &AnyDensity, k: usize) -> Result<f64> {
    if d1.dimension() != d2.dimension() {
        return Err(Error::GridMismatch(
            "wasserstein2 needs two densities of the same kind".into(),
        ));
    }
    let levels = midpoint_levels(k);
    let q1 = quantile(d1, &levels);
    let q2 = quantile(d2, &levels);
    let s: f64 = q1
        .positions
        .iter()
        .zip(&q2.positions)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((s / k as f64).sqrt())
}

/// Value and maximiser of the Fourier distance d1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierDistance {
    pub value: f64,
    /// Frequency at which the supremum over the stored grid is attained.
    pub xi_star: f64,
    /// `freq_max >= 2 xi_star`: the grid extends well past the maximiser.
    pub resolved: bool,
}

/// `d1 = max_{xi_j > 0} |s1(xi_j) - s2(xi_j)| / xi_j` on the shared grid.
pub fn fourier_d1(s1: &SpectralState, s2: &SpectralState) -> Result<FourierDistance> {
    if !s1.same_grid(s2) {
        return Err(Error::GridMismatch(
            "fourier_d1 needs spectra on the same frequency grid".into(),
        ));
    }
    let (m1, m2) = (s1.mean(), s2.mean());
    if (m1 - m2).abs() > CENTER_TOL {
        return Err(Error::CenterMismatch { first: m1, second: m2 });
    }
    let mut best = (0.0, s1.xi(1));
    for j in 1..s1.len() {
        let xi = s1.xi(j);
        let v = (s1.values()[j] - s2.values()[j]).norm() / xi;
        if v > best.0 {
            best = (v, xi);
        }
    }
    Ok(FourierDistance {
        value: best.0,
        xi_star: best.1,
        resolved: s1.freq_max() >= 2.0 * best.1,
    })
}

/// Terms of the free energy `(1/N) int rho log rho + chi int int log|x-y| rho rho
/// [+ 1/2 int |x|^2 rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyReport {
    pub entropy: f64,
    pub interaction: f64,
    /// Zero in the free frame.
    pub confinement: f64,
    pub total: f64,
}

fn xlogx(v: f64) -> f64 {
    if v < EMPTY_CELL {
        0.0
    } else {
        v * v.ln()
    }
}

/// `int int log|x - y| rho(x) rho(y)` for a piecewise-constant 1D density,
/// exact cell by cell (the diagonal uses `dx^2 (log dx - 3/2)`).
pub fn log_interaction_1d(d: &Density1D) -> f64 {
    let dx = d.dx();
    let u = log_convolution(d.len(), dx).apply(d.values());
    d.values().iter().zip(&u).map(|(r, u)| r * u).sum::<f64>() * dx
}

/// `int_a^b r log r dr` and `int_a^b r^3 log r dr`.
fn radial_log_moments(a: f64, b: f64) -> (f64, f64) {
    let f1 = |r: f64| {
        if r == 0.0 {
            0.0
        } else {
            0.5 * r * r * r.ln() - 0.25 * r * r
        }
    };
    let f3 = |r: f64| {
        if r == 0.0 {
            0.0
        } else {
            let r4 = r * r * r * r;
            0.25 * r4 * r.ln() - r4 / 16.0
        }
    };
    (f1(b) - f1(a), f3(b) - f3(a))
}

/// `int int log|x - y| rho rho` for a radial planar density, reduced by
/// Newton's theorem to `2 int rho(r) M(r) log r 2 pi r dr` and integrated
/// exactly for the piecewise-constant density.
pub fn log_interaction_radial(d: &RadialDensity2D) -> f64 {
    let dr = d.dr();
    let m = edge_masses(d.values(), dr);
    d.values()
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let a = i as f64 * dr;
            let (i1, i3) = radial_log_moments(a, a + dr);
            // M(r) = M_a - pi rho a^2 + pi rho r^2 inside the cell
            let c0 = m[i] - PI * rho * a * a;
            2.0 * rho * 2.0 * PI * (c0 * i1 + PI * rho * i3)
        })
        .sum()
}

/// Free energy of a 1D (`N = 1`) or radial (`N = 2`) density.
pub fn free_energy(d: &AnyDensity, chi: f64, frame: Frame) -> FreeEnergyReport {
    let (entropy, interaction, m2) = match d {
        AnyDensity::Line(d) => {
            let h = d.values().iter().map(|&v| xlogx(v)).sum::<f64>() * d.dx();
            (h, log_interaction_1d(d), d.moment(2))
        }
        AnyDensity::Radial(d) => {
            let h: f64 = d
                .values()
                .iter()
                .zip(d.centers())
                .map(|(&v, r)| xlogx(v) * 2.0 * PI * r * d.dr())
                .sum();
            (0.5 * h, log_interaction_radial(d), d.moment(2))
        }
    };
    let interaction = chi * interaction;
    let confinement = if frame == Frame::Rescaled { 0.5 * m2 } else { 0.0 };
    FreeEnergyReport {
        entropy,
        interaction,
        confinement,
        total: entropy + interaction + confinement,
    }
}

/// `int |x|^2 rho` (planar for radial densities).
pub fn second_moment(d: &AnyDensity) -> f64 {
    match d {
        AnyDensity::Line(d) => d.moment(2),
        AnyDensity::Radial(d) => d.moment(2),
    }
}

/// `int rho |grad(N^{-1} log rho + 2 chi log|.| * rho [+ |x|^2/2])|^2`,
/// evaluated at interior cell edges with log-differences and the
/// geometric-mean density.
pub fn entropy_dissipation(d: &AnyDensity, chi: f64, frame: Frame) -> Result<f64> {
    let confine = if frame == Frame::Rescaled { 1.0 } else { 0.0 };
    match d {
        AnyDensity::Line(d) => {
            let v = d.values();
            if let Some(cell) = v.iter().position(|&x| x <= 0.0) {
                return Err(Error::NonPositiveDensity { cell });
            }
            let dx = d.dx();
            let pv = principal_value_at_edges(d.len()).apply(v);
            Ok((1..d.len())
                .map(|k| {
                    let g = (v[k - 1] * v[k]).sqrt();
                    let f = (v[k].ln() - v[k - 1].ln()) / dx + 2.0 * chi * pv[k] + confine * d.edge(k);
                    g * f * f * dx
                })
                .sum())
        }
        AnyDensity::Radial(d) => {
            let v = d.values();
            if let Some(cell) = v.iter().position(|&x| x <= 0.0) {
                return Err(Error::NonPositiveDensity { cell });
            }
            let dr = d.dr();
            let m = edge_masses(v, dr);
            Ok((1..d.len())
                .map(|k| {
                    let e = d.edge(k);
                    let g = (v[k - 1] * v[k]).sqrt();
                    let f = 0.5 * (v[k].ln() - v[k - 1].ln()) / dr + 2.0 * chi * m[k] / e + confine * e;
                    g * f * f * 2.0 * PI * e * dr
                })
                .sum())
        }
    }
}

/// Least-squares exponential fit `values ~ C exp(-rate t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Root-mean-square residual of the log-linear regression.
    pub residual: f64,
}

/// Fits `log(values)` against `times` over the samples with `t` in `window`
/// (inclusive) and returns the negated slope.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let mut pts = Vec::new();
    for (i, (&t, &v)) in times.iter().zip(values).enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveSeries { index: i });
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 10 {
        return Err(Error::TooFewSamples { samples: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|(t, y)| {
            let e = y - ym - slope * (t - tm);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        window,
        samples: pts.len(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{critical_profile, solve_self_similar, Grid};
    use num_complex::Complex64;

    #[test]
    fn uniform_quantiles_are_linear() {
        let d: AnyDensity = Density1D::new(0.5, vec![1.0; 64]).unwrap().into();
        let levels = midpoint_levels(100);
        let q = quantile(&d, &levels);
        for (m, x) in levels.iter().zip(&q.positions) {
            assert!((x - (m - 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_disk_quantiles() {
        let r = 2.0;
        let d: AnyDensity = RadialDensity2D::new(r, vec![1.0 / (PI * r * r); 50]).unwrap().into();
        let levels = midpoint_levels(37);
        let q = quantile(&d, &levels);
        for (m, x) in levels.iter().zip(&q.positions) {
            assert!((x - r * m.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn quantiles_skip_empty_cells() {
        let mut v = vec![0.0; 10];
        v[2] = 2.5;
        v[7] = 2.5;
        let d: AnyDensity = Density1D::new(1.0, v).unwrap().into();
        let q = quantile(&d, &[0.5, 0.75]);
        assert!((q.positions[0] - (-0.4)).abs() < 1e-14);
        assert!((q.positions[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn translation_shifts_w2_by_the_offset() {
        let g = |c: f64| -> AnyDensity {
            Density1D::from_fn(10.0, 1000, move |x| (-(x - c).powi(2) / 2.0).exp() / (2.0 * PI).sqrt())
                .unwrap()
                .into()
        };
        let w = wasserstein2(&g(0.0), &g(0.3)).unwrap();
        assert!((w - 0.3).abs() < 1e-6, "{w}");
        assert_eq!(wasserstein2(&g(0.1), &g(0.1)).unwrap(), 0.0);
    }

    #[test]
    fn d1_of_two_gaussians() {
        let s1 = SpectralState::from_fn(8.0, 1024, |x| Complex64::new((-x * x / 2.0).exp(), 0.0)).unwrap();
        let s2 = SpectralState::from_fn(8.0, 1024, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let d = fourier_d1(&s1, &s2).unwrap();
        // dense oracle on the closed forms
        let mut best: f64 = 0.0;
        for j in 1..=1_000_000 {
            let x = 8.0 * j as f64 / 1e6;
            best = best.max(((-x * x / 2.0).exp() - (-x * x).exp()).abs() / x);
        }
        assert!((d.value - best).abs() < 1e-4, "{} vs {best}", d.value);
        assert!(d.resolved);
        assert_eq!(fourier_d1(&s1, &s1).unwrap().value, 0.0);
    }

    #[test]
    fn d1_rejects_different_centres() {
        let s1 = SpectralState::from_fn(4.0, 64, |x| Complex64::new((-x * x / 2.0).exp(), 0.0)).unwrap();
        let s2 = SpectralState::from_fn(4.0, 64, |x| Complex64::from_polar((-x * x / 2.0).exp(), 0.5 * x)).unwrap();
        assert!(matches!(fourier_d1(&s1, &s2), Err(Error::CenterMismatch { .. })));
    }

    #[test]
    fn critical_free_energy_closed_forms() {
        let p = critical_profile(Grid::Line {
            half_width: 4000.0,
            cells: 262_144,
        })
        .unwrap();
        let f = free_energy(&p.density, 1.0, Frame::Free);
        assert!((f.total + (2.0 * PI).ln()).abs() < 1e-3, "{}", f.total);
        let p2 = critical_profile(Grid::Radial {
            radius: 200.0,
            cells: 40000,
        })
        .unwrap();
        let f2 = free_energy(&p2.density, 1.0, Frame::Free);
        assert!(
            (f2.total - (-0.5 * PI.ln() - 0.5)).abs() < 1e-3,
            "{}",
            f2.total - (-0.5 * PI.ln() - 0.5)
        );
    }

    #[test]
    fn gaussian_interaction_matches_fourier_side() {
        // E log|X - Y| for independent standard normals is -gamma/2
        let d = Density1D::from_fn(12.0, 2048, |x| (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).unwrap();
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((log_interaction_1d(&d) + euler_gamma / 2.0).abs() < 1e-5);
    }

    #[test]
    fn uniform_disk_interaction() {
        // int int log max(r, s) for the uniform unit disc is -1/4
        let d = RadialDensity2D::new(1.0, vec![1.0 / PI; 64]).unwrap();
        assert!((log_interaction_radial(&d) + 0.25).abs() < 1e-13);
    }

    #[test]
    fn dissipation_vanishes_at_the_profile() {
        for grid in [
            Grid::Line {
                half_width: 6.0,
                cells: 1024,
            },
            Grid::Radial {
                radius: 6.0,
                cells: 512,
            },
        ] {
            let nu = solve_self_similar(0.5, grid, 1e-12, 2000).unwrap();
            let diss = entropy_dissipation(&nu.density, 0.5, Frame::Rescaled).unwrap();
            assert!(diss <= 1e-3, "{diss}");
            assert!((second_moment(&nu.density) - 0.5).abs() < 1e-3);
        }
        let d: AnyDensity = Density1D::from_values(1.0, vec![0.0, 1.0, 1.0, 0.0]).unwrap().into();
        assert!(matches!(
            entropy_dissipation(&d, 1.0, Frame::Free),
            Err(Error::NonPositiveDensity { cell: 0 })
        ));
    }

    #[test]
    fn exact_exponential_fit() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
        assert!(matches!(
            fit_decay_rate(&t[..5], &v[..5], (0.0, 1.0)),
            Err(Error::TooFewSamples { .. })
        ));
        let mut bad = v.clone();
        bad[3] = 0.0;
        assert!(matches!(
            fit_decay_rate(&t, &bad, (0.0, 10.0)),
            Err(Error::NonPositiveSeries { index: 3 })
        ));
    }
}
