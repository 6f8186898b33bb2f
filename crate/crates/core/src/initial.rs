//! Initial conditions built from a [`SimConfig`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitKind, SimConfig};
use crate::density::{normalize, normalize_radial, AnyDensity, Density1D, RadialDensity2D};
use crate::error::Result;
use crate::profiles::{critical_profile, Grid};
use crate::spectrum::{fourier_transform, SpectralState};

/// Components of a Gaussian mixture: `(weight, mean, variance)`.
pub type Mixture = Vec<(f64, f64, f64)>;

/// Seeded mixture of 2 to 4 Gaussians with means in `[-1.5, 1.5]` and
/// variances in `[0.2, 1] * scale`. Weights sum to one.
pub fn random_mixture(rng: &mut ChaCha8Rng, scale: f64) -> Mixture {
    let k = rng.gen_range(2..=4);
    let mut comps: Mixture = (0..k)
        .map(|_| {
            (
                rng.gen_range(0.2..1.0),
                rng.gen_range(-1.5..1.5),
                scale * rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    let total: f64 = comps.iter().map(|c| c.0).sum();
    comps.iter_mut().for_each(|c| c.0 /= total);
    comps
}

pub fn mixture_pdf(m: &Mixture, x: f64) -> f64 {
    m.iter()
        .map(|(w, mu, v)| w * (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
        .sum()
}

/// Centred 1D Gaussian with variance `v`.
pub fn gaussian_1d(v: f64) -> impl Fn(f64) -> f64 {
    move |x| (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// Radial planar Gaussian with second moment `v`.
pub fn gaussian_radial(v: f64) -> impl Fn(f64) -> f64 {
    move |r| (-r * r / v).exp() / (PI * v)
}

/// Grid density for the configured initial condition, normalised (and
/// recentred in 1D).
pub fn initial_density(config: &SimConfig) -> Result<AnyDensity> {
    let v = config.init_variance;
    let grid = config.grid();
    Ok(match (config.init, grid) {
        (InitKind::Critical, _) => critical_profile(grid)?.density,
        (InitKind::Gaussian, Grid::Line { half_width, cells }) => {
            normalize(&Density1D::from_fn(half_width, cells, gaussian_1d(v))?)?.into()
        }
        (InitKind::Gaussian, Grid::Radial { radius, cells }) => {
            normalize_radial(&RadialDensity2D::from_fn(radius, cells, gaussian_radial(v))?)?.into()
        }
        (InitKind::Mixture, Grid::Line { half_width, cells }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let m = random_mixture(&mut rng, v);
            normalize(&Density1D::from_fn(half_width, cells, |x| mixture_pdf(&m, x))?)?.into()
        }
        (InitKind::Mixture, Grid::Radial { radius, cells }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let k = rng.gen_range(2..=4);
            let comps: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.gen_range(0.2..1.0), v * rng.gen_range(0.2..2.0)))
                .collect();
            let f = |r: f64| comps.iter().map(|(w, s)| w * gaussian_radial(*s)(r)).sum::<f64>();
            normalize_radial(&RadialDensity2D::from_fn(radius, cells, f)?)?.into()
        }
    })
}

/// Spectral initial condition. Gaussians use the exact transform
/// `exp(-v xi^2 / 2)`; other families transform the grid density.
pub fn initial_spectrum(config: &SimConfig) -> Result<SpectralState> {
    let v = config.init_variance;
    match config.init {
        InitKind::Gaussian => SpectralState::from_fn(config.freq_max, config.modes, |xi| {
            Complex64::new((-v * xi * xi / 2.0).exp(), 0.0)
        }),
        _ => match initial_density(config)? {
            AnyDensity::Line(d) => fourier_transform(&d, config.freq_max, config.modes),
            AnyDensity::Radial(_) => Err(crate::error::Error::config(
                "dimension",
                "spectral runs are one-dimensional",
            )),
        },
    }
}
