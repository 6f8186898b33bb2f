//! Finite-volume solvers in physical variables.
//!
//! 1D: `d_t rho = d_xx rho + 2 chi d_x(rho (p.v. 1/x) * rho) [+ d_x(x rho)]`.
//! Radial: `d_t(r rho) = 1/2 d_r(r d_r rho) + 2 chi d_r(rho M) [+ d_r(r^2 rho)]`.
//!
//! Both are written as `d_t rho = -div J` with `J = -D grad rho + a rho`
//! and updated explicitly in conservative form, so mass is conserved to
//! round-off and positivity holds under [`Stepper::stable_dt`].

use std::f64::consts::PI;

use crate::config::{FluxScheme, SimConfig};
use crate::density::{AnyDensity, Density1D, RadialDensity2D};
use crate::error::{Error, Result};
use crate::kernels::{principal_value_at_edges, Toeplitz};
use crate::metrics::{free_energy, second_moment, wasserstein2};
use crate::profiles::{edge_masses, solve_self_similar, Frame};
use crate::record::{RunRecord, RunStatus, Sample};

/// Fraction of the positivity limit used by [`run_physical`].
pub const SAFETY: f64 = 0.9;

/// Steps below this size count as a blow-up signature.
pub const DT_FLOOR: f64 = 1e-12;

/// Mass inside a grid-scale window above which a run is declared blown up:
/// three adjacent cells in 1D, the two innermost radial cells.
pub const CONCENTRATION: f64 = 0.5;

/// `z / (e^z - 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Edge coefficients with `F = alpha rho_left - beta rho_right`.
fn edge_coefficients(scheme: FluxScheme, diffusion: f64, drift: f64, h: f64) -> (f64, f64) {
    let d = diffusion / h;
    match scheme {
        FluxScheme::Upwind => (d + drift.max(0.0), d + (-drift).max(0.0)),
        FluxScheme::ScharfetterGummel => {
            let p = drift * h / diffusion;
            (d * bernoulli(-p), d * bernoulli(p))
        }
    }
}

/// Drift velocity of the 1D equation at the `n + 1` cell edges:
/// `v(e) = 2 chi sum_i rho_i dx / (e - x_i) [+ e]`. Mass moves with
/// velocity `-v`. The boundary entries are computed but carry no flux.
pub fn velocity_field_1d(rho: &Density1D, chi: f64, frame: Frame) -> Vec<f64> {
    velocity_with(&principal_value_at_edges(rho.len()), rho, chi, frame)
}

fn velocity_with(pv: &Toeplitz, rho: &Density1D, chi: f64, frame: Frame) -> Vec<f64> {
    let sums = if chi != 0.0 {
        pv.apply(rho.values())
    } else {
        vec![0.0; rho.len() + 1]
    };
    let confine = if frame == Frame::Rescaled { 1.0 } else { 0.0 };
    sums.iter()
        .enumerate()
        .map(|(k, s)| 2.0 * chi * s + confine * rho.edge(k))
        .collect()
}

/// `M(r)` at the `n + 1` radial edges from cumulative cell masses.
pub fn cumulated_mass_radial(rho: &RadialDensity2D) -> Vec<f64> {
    edge_masses(rho.values(), rho.dr())
}

/// Cached operators for repeated steps on one grid.
pub struct Stepper {
    chi: f64,
    frame: Frame,
    scheme: FluxScheme,
    pv: Option<Toeplitz>,
}

/// Per-edge flux coefficients and per-cell outflow rates.
struct Assembly {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Edge weights: 1 in 1D, the edge radius for radial grids.
    edge_w: Vec<f64>,
    /// Cell weights: `dx` in 1D, `r_i dr` for radial grids.
    cell_w: Vec<f64>,
}

impl Assembly {
    fn stable_dt(&self) -> f64 {
        let n = self.cell_w.len();
        let worst = (0..n)
            .map(|i| (self.edge_w[i + 1] * self.alpha[i + 1] + self.edge_w[i] * self.beta[i]) / self.cell_w[i])
            .fold(0.0, f64::max);
        if worst > 0.0 {
            1.0 / worst
        } else {
            f64::INFINITY
        }
    }

    fn apply(&self, v: &[f64], dt: f64) -> Vec<f64> {
        let n = v.len();
        let flux = |k: usize| -> f64 {
            if k == 0 || k == n {
                0.0
            } else {
                self.edge_w[k] * (self.alpha[k] * v[k - 1] - self.beta[k] * v[k])
            }
        };
        let mut out = Vec::with_capacity(n);
        let mut left = flux(0);
        for (i, vi) in v.iter().enumerate() {
            let right = flux(i + 1);
            out.push(vi - dt * (right - left) / self.cell_w[i]);
            left = right;
        }
        out
    }
}

impl Stepper {
    pub fn new(chi: f64, frame: Frame, scheme: FluxScheme) -> Self {
        Self {
            chi,
            frame,
            scheme,
            pv: None,
        }
    }

    fn assemble(&mut self, rho: &AnyDensity) -> Assembly {
        let confine = if self.frame == Frame::Rescaled { 1.0 } else { 0.0 };
        match rho {
            AnyDensity::Line(d) => {
                let n = d.len();
                if self.pv_len() != n {
                    self.pv = Some(principal_value_at_edges(n));
                }
                let v = velocity_with(self.pv.as_ref().unwrap(), d, self.chi, self.frame);
                let dx = d.dx();
                let (alpha, beta) = v.iter().map(|v| edge_coefficients(self.scheme, 1.0, -v, dx)).unzip();
                Assembly {
                    alpha,
                    beta,
                    edge_w: vec![1.0; n + 1],
                    cell_w: vec![dx; n],
                }
            }
            AnyDensity::Radial(d) => {
                let n = d.len();
                let dr = d.dr();
                let m = cumulated_mass_radial(d);
                let (alpha, beta) = (0..=n)
                    .map(|k| {
                        let e = d.edge(k);
                        let a = if k == 0 {
                            0.0
                        } else {
                            -(2.0 * self.chi * m[k] / e + confine * e)
                        };
                        edge_coefficients(self.scheme, 0.5, a, dr)
                    })
                    .unzip();
                Assembly {
                    alpha,
                    beta,
                    edge_w: (0..=n).map(|k| d.edge(k)).collect(),
                    cell_w: d.centers().map(|r| r * dr).collect(),
                }
            }
        }
    }

    fn pv_len(&self) -> usize {
        self.pv.as_ref().map_or(0, |t| t.n_in())
    }

    /// Largest step keeping every updated value nonnegative.
    pub fn stable_dt(&mut self, rho: &AnyDensity) -> f64 {
        self.assemble(rho).stable_dt()
    }

    /// One explicit step; returns the new state and the positivity limit
    /// it was checked against.
    pub fn step(&mut self, rho: &AnyDensity, dt: f64) -> Result<(AnyDensity, f64)> {
        let asm = self.assemble(rho);
        let limit = asm.stable_dt();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let next: AnyDensity = match rho {
            AnyDensity::Line(d) => Density1D::from_values(d.half_width(), clamp(asm.apply(d.values(), dt)))?.into(),
            AnyDensity::Radial(d) => RadialDensity2D::from_values(d.radius(), clamp(asm.apply(d.values(), dt)))?.into(),
        };
        Ok((next, limit))
    }
}

/// Removes round-off negatives (`>= -1e-300` relative to the scale of the
/// update is guaranteed by the step condition).
fn clamp(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 && *x > -1e-14 {
            *x = 0.0;
        }
    }
    v
}

/// One step of the 1D equation.
pub fn step_1d(rho: &Density1D, chi: f64, frame: Frame, dt: f64, scheme: FluxScheme) -> Result<Density1D> {
    match Stepper::new(chi, frame, scheme).step(&rho.clone().into(), dt)?.0 {
        AnyDensity::Line(d) => Ok(d),
        AnyDensity::Radial(_) => unreachable!(),
    }
}

/// One step of the radial equation.
pub fn step_radial(
    rho: &RadialDensity2D,
    chi: f64,
    frame: Frame,
    dt: f64,
    scheme: FluxScheme,
) -> Result<RadialDensity2D> {
    match Stepper::new(chi, frame, scheme).step(&rho.clone().into(), dt)?.0 {
        AnyDensity::Radial(d) => Ok(d),
        AnyDensity::Line(_) => unreachable!(),
    }
}

fn mass(d: &AnyDensity) -> f64 {
    match d {
        AnyDensity::Line(d) => d.mass(),
        AnyDensity::Radial(d) => d.mass(),
    }
}

/// Largest mass in a grid-scale window.
pub fn concentrated_mass(d: &AnyDensity) -> f64 {
    match d {
        AnyDensity::Line(d) => {
            let dx = d.dx();
            d.values()
                .windows(3)
                .map(|w| (w[0] + w[1] + w[2]) * dx)
                .fold(0.0, f64::max)
        }
        AnyDensity::Radial(d) => d.cell_masses().iter().take(2).sum(),
    }
}

fn sample(t: f64, d: &AnyDensity, chi: f64, reference: Option<&AnyDensity>) -> Result<Sample> {
    let f = free_energy(d, chi, Frame::Rescaled);
    Ok(Sample {
        t,
        second_moment: second_moment(d),
        free_energy: Some(f.entropy + f.interaction),
        free_energy_rescaled: Some(f.total),
        w2_to_reference: reference.map(|r| wasserstein2(d, r)).transpose()?,
        d1_to_reference: None,
        xi_star: None,
        tail: None,
        mass_error: mass(d) - 1.0,
    })
}

/// Self-similar profile on the run grid, when one exists (rescaled frame,
/// `chi < 1`).
pub fn reference_profile(config: &SimConfig) -> Result<Option<AnyDensity>> {
    if config.frame == Frame::Rescaled && config.chi < 1.0 {
        Ok(Some(
            solve_self_similar(config.chi, config.grid(), 1e-11, 20_000)?.density,
        ))
    } else {
        Ok(None)
    }
}

/// Integrates from `init` to `config.t_final`, recording diagnostics and
/// snapshots every `config.cadence`. Steps are `min(dt, SAFETY * limit)`.
/// The run stops with [`RunStatus::BlowupDetected`] when the step falls
/// below [`DT_FLOOR`] or a grid-scale window holds [`CONCENTRATION`] of the
/// mass, and with [`RunStatus::Diverged`] on non-finite values.
pub fn run_physical(config: &SimConfig, init: AnyDensity) -> Result<RunRecord> {
    config.validate()?;
    if init.dimension() != config.dimension {
        return Err(Error::config("dimension", "initial density has the wrong dimension"));
    }
    let reference = reference_profile(config)?;
    let mut stepper = Stepper::new(config.chi, config.frame, config.flux);
    let mut rho = init;
    let mut t = 0.0;
    let mut rec = RunRecord {
        samples: vec![sample(0.0, &rho, config.chi, reference.as_ref())?],
        status: RunStatus::Completed,
        snapshots: vec![(0.0, rho.clone())],
        spectra: Vec::new(),
        steps: 0,
    };
    let mut k = 1usize;
    let eps = 1e-12 * config.t_final.max(1.0);
    while t < config.t_final - eps {
        let next_sample = (k as f64 * config.cadence).min(config.t_final);
        let limit = stepper.stable_dt(&rho);
        if SAFETY * limit < DT_FLOOR {
            rec.status = RunStatus::BlowupDetected { t };
            break;
        }
        let dt = config.dt.min(SAFETY * limit).min(next_sample - t);
        let (next, _) = stepper.step(&rho, dt)?;
        rho = next;
        rec.steps += 1;
        t = if next_sample - t - dt <= eps {
            next_sample
        } else {
            t + dt
        };
        if !mass(&rho).is_finite() {
            rec.status = RunStatus::Diverged { t };
            break;
        }
        let blown = concentrated_mass(&rho) >= CONCENTRATION;
        if t >= next_sample - eps || blown {
            rec.samples.push(sample(t, &rho, config.chi, reference.as_ref())?);
            rec.snapshots.push((t, rho.clone()));
            if t >= next_sample - eps {
                k += 1;
            }
        }
        if blown {
            rec.status = RunStatus::BlowupDetected { t };
            break;
        }
    }
    Ok(rec)
}

/// Density of the radial heat kernel with diffusivity 1/2 started from a
/// Gaussian of planar second moment `v0`: second moment `v0 + 2t`.
pub fn radial_gaussian(v: f64) -> impl Fn(f64) -> f64 {
    move |r| (-r * r / v).exp() / (PI * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(var: f64, l: f64, n: usize) -> Density1D {
        Density1D::from_fn(l, n, |x| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()).unwrap()
    }

    #[test]
    fn symmetric_density_has_zero_velocity_at_origin() {
        let d = gaussian(1.0, 5.0, 64);
        let v = velocity_field_1d(&d, 0.7, Frame::Free);
        assert!(v[32].abs() < 1e-14);
        assert!(velocity_field_1d(&d, 0.0, Frame::Free).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_bumps_velocity() {
        // two bumps of mass 1/2 straddling -1 and 1; edge 0.5
        let n = 40;
        let l = 2.0;
        let dx = 2.0 * l / n as f64;
        let mut v = vec![0.0; n];
        let cell = |x: f64| ((x + l) / dx - 0.5).round() as usize;
        for c in [-1.05, -0.95, 0.95, 1.05] {
            v[cell(c)] = 0.25 / dx;
        }
        let d = Density1D::from_values(l, v).unwrap();
        let k = ((0.5 + l) / dx).round() as usize;
        assert!((d.edge(k) - 0.5).abs() < 1e-12);
        let vel = velocity_field_1d(&d, 0.5, Frame::Free);
        let exact: f64 = [-1.05, -0.95, 0.95, 1.05].iter().map(|c| 0.25 / (0.5 - c)).sum();
        assert!((vel[k] - exact).abs() < 1e-12);
        assert!((vel[k] + 2.0 / 3.0).abs() < 0.1);
    }

    #[test]
    fn cumulated_mass_of_critical_profile() {
        let d = RadialDensity2D::from_fn(50.0, 5000, |r| 1.0 / (PI * (1.0 + r * r).powi(2))).unwrap();
        let m = cumulated_mass_radial(&d);
        assert_eq!(m[0], 0.0);
        assert!(m.windows(2).all(|w| w[1] >= w[0]));
        assert!((m[100] - 0.5).abs() < 1e-4, "{}", m[100]);
    }

    #[test]
    fn heat_equation_matches_closed_form() {
        for scheme in [FluxScheme::Upwind, FluxScheme::ScharfetterGummel] {
            let mut rho: AnyDensity = gaussian(0.5, 10.0, 512).into();
            let mut s = Stepper::new(0.0, Frame::Free, scheme);
            let mut t = 0.0;
            while t < 1.0 - 1e-14 {
                let dt = (0.9 * s.stable_dt(&rho)).min(1.0 - t);
                rho = s.step(&rho, dt).unwrap().0;
                t += dt;
            }
            let AnyDensity::Line(d) = &rho else { unreachable!() };
            let exact = gaussian(2.5, 10.0, 512);
            let l1: f64 = d
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * d.dx();
            assert!(l1 <= 1e-3, "{l1}");
        }
    }

    #[test]
    fn radial_heat_matches_closed_form() {
        let mut rho: AnyDensity = RadialDensity2D::from_fn(8.0, 256, radial_gaussian(0.5)).unwrap().into();
        let mut s = Stepper::new(0.0, Frame::Free, FluxScheme::ScharfetterGummel);
        let mut t = 0.0;
        while t < 1.0 - 1e-14 {
            let dt = (0.9 * s.stable_dt(&rho)).min(1.0 - t);
            rho = s.step(&rho, dt).unwrap().0;
            t += dt;
        }
        let AnyDensity::Radial(d) = &rho else { unreachable!() };
        let exact = RadialDensity2D::from_fn(8.0, 256, radial_gaussian(2.5)).unwrap();
        let l1: f64 = d
            .values()
            .iter()
            .zip(exact.values())
            .zip(d.centers())
            .map(|((a, b), r)| (a - b).abs() * 2.0 * PI * r * d.dr())
            .sum();
        assert!(l1 <= 1e-3, "{l1}");
    }

    #[test]
    fn oversized_step_is_rejected() {
        let d = gaussian(1.0, 5.0, 64);
        let err = step_1d(&d, 0.5, Frame::Free, 1.0, FluxScheme::ScharfetterGummel).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let d = gaussian(0.3, 5.0, 128);
        let m0 = d.mass();
        let mut s = Stepper::new(0.8, Frame::Rescaled, FluxScheme::ScharfetterGummel);
        let mut rho: AnyDensity = d.into();
        for _ in 0..50 {
            let dt = 0.9 * s.stable_dt(&rho);
            let next = s.step(&rho, dt).unwrap().0;
            assert!((mass(&next) - mass(&rho)).abs() <= 1e-12);
            rho = next;
        }
        assert!((mass(&rho) - m0).abs() < 1e-12);
    }
}
