//! Numerical checks of the functional and pointwise inequalities.
//!
//! Every check reports an [`InequalityVerdict`]: the worst margin over its
//! trials, oriented so that a nonnegative margin means the inequality holds.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{normalize, normalize_radial, AnyDensity, Density1D, RadialDensity2D, TOL_MASS};
use crate::error::{Error, Result};
use crate::metrics::{free_energy, CENTER_TOL};
use crate::profiles::{solve_self_similar, Frame, Grid};
use crate::quadrature::{gauss_legendre, integrate};

/// Tolerance for inequalities between quadrature-evaluated functionals.
pub const FUNCTIONAL_TOL: f64 = 1e-3;
/// Tolerance for pointwise algebraic inequalities.
pub const POINTWISE_TOL: f64 = 1e-10;
/// Tolerance on the maximal second difference in the obstruction scan.
pub const CONCAVITY_TOL: f64 = 1e-8;
pub const CORPUS_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    /// Holds when the worst margin is at least `-tolerance`.
    LowerBound,
    /// Holds when every margin is within `tolerance` of zero.
    Equality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub id: String,
    pub kind: VerdictKind,
    /// Smallest margin (lower bounds) or the margin of largest modulus
    /// (equalities).
    pub worst_margin: f64,
    pub trials: usize,
    pub worst_inputs: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub holds: bool,
}

type Inputs = Vec<(&'static str, f64)>;

fn verdict(
    id: &str,
    kind: VerdictKind,
    tolerance: f64,
    trials: impl IntoIterator<Item = (f64, Inputs)>,
) -> InequalityVerdict {
    let badness = |m: f64| match kind {
        _ if m.is_nan() => f64::INFINITY,
        VerdictKind::LowerBound => -m,
        VerdictKind::Equality => m.abs(),
    };
    let mut count = 0;
    let mut worst: Option<(f64, Inputs)> = None;
    for (m, inputs) in trials {
        count += 1;
        if worst.as_ref().is_none_or(|(w, _)| badness(m) > badness(*w)) {
            worst = Some((m, inputs));
        }
    }
    let (worst_margin, inputs) = worst.unwrap_or((0.0, Vec::new()));
    let holds = count > 0
        && match kind {
            VerdictKind::LowerBound => worst_margin >= -tolerance,
            VerdictKind::Equality => worst_margin.abs() <= tolerance,
        };
    InequalityVerdict {
        id: id.to_string(),
        kind,
        worst_margin,
        trials: count,
        worst_inputs: inputs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        tolerance,
        holds,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveInput(name))
    }
}

// ---------------------------------------------------------------------------
// Pointwise inequalities

/// `log(m / sqrt(uv))` for `m = (u+v)/2`, without cancellation.
fn log_am_gm(u: f64, v: f64) -> f64 {
    let d = u.sqrt() - v.sqrt();
    (d * d / (2.0 * (u * v).sqrt())).ln_1p()
}

/// `(m^{g/2} - m^{-g/2})^2`.
fn sinh_square(m: f64, gamma: f64) -> f64 {
    4.0 * (0.5 * gamma * m.ln()).sinh().powi(2)
}

/// `x - log(1 + x)`, series near zero.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x * x * (0.5 - x * (1.0 / 3.0 - 0.25 * x))
    } else {
        x - x.ln_1p()
    }
}

/// `(1 + e)^{-g} - 1 + g e`, series near zero.
fn power_bregman(e: f64, gamma: f64) -> f64 {
    if e.abs() < 1e-3 {
        let c2 = gamma * (gamma + 1.0) / 2.0;
        let c3 = c2 * (gamma + 2.0) / 3.0;
        let c4 = c3 * (gamma + 3.0) / 4.0;
        e * e * (c2 - e * (c3 - e * c4))
    } else {
        (-gamma * e.ln_1p()).exp_m1() + gamma * e
    }
}

/// Margin `RHS - LHS` of
/// `a m^{-g} - b m^g <= (a+b)(u^{-g} + v^{-g})/2 - 2b`, `m = (u+v)/2`.
///
/// Evaluated as `(a+b)[(u^{-g}+v^{-g})/2 - m^{-g}] + b (m^{g/2} - m^{-g/2})^2`
/// with the Jensen gap written as
/// `m^{-g} [expm1(s) cosh d + 2 sinh^2(d/2)]`, `s = g log(m/sqrt(uv))`,
/// `d = (g/2) log(u/v)`, so no term cancels.
pub fn check_pointwise(u: f64, v: f64, alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    positive("u", u)?;
    positive("v", v)?;
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    positive("gamma", gamma)?;
    let m = 0.5 * (u + v);
    let s = gamma * log_am_gm(u, v);
    let d = 0.5 * gamma * (u / v).ln();
    let gap = m.powf(-gamma) * (s.exp_m1() * d.cosh() + 2.0 * (0.5 * d).sinh().powi(2));
    Ok((alpha + beta) * gap + beta * sinh_square(m, gamma))
}

/// Margin of the continuous version with `int_0^1 u` replaced by the mean of
/// the samples (midpoint rule). The Jensen gap is the mean of the Bregman
/// remainders of `z^{-g}` about the mean, which are nonnegative termwise.
pub fn check_pointwise_continuous(samples: &[f64], alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NonPositiveInput("samples"));
    }
    for &u in samples {
        positive("u", u)?;
    }
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    positive("gamma", gamma)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let bregman = samples
        .iter()
        .map(|&u| power_bregman((u - mean) / mean, gamma))
        .sum::<f64>()
        / samples.len() as f64;
    Ok((alpha + beta) * mean.powf(-gamma) * bregman + beta * sinh_square(mean, gamma))
}

/// Margin `LHS - RHS` of
/// `a log m + b m^2 >= (a + 2b)(log u + log v)/2 + b`,
/// evaluated as `(a+2b) log(m/sqrt(uv)) + b (w - log(1+w))`, `w = m^2 - 1`.
pub fn check_quadratic_jensen(u: f64, v: f64, alpha: f64, beta: f64) -> Result<f64> {
    positive("u", u)?;
    positive("v", v)?;
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    let m = 0.5 * (u + v);
    let w = (m - 1.0) * (m + 1.0);
    Ok((alpha + 2.0 * beta) * log_am_gm(u, v) + beta * x_minus_log1p(w))
}

/// Range of the log-uniform exponent in the randomized sweeps. Larger
/// exponents overflow `u^{-g}` at the ends of the sample range.
pub const GAMMA_RANGE: (f64, f64) = (1e-3, 10.0);
/// Range of the log-uniform variables in the randomized sweeps.
pub const SAMPLE_RANGE: (f64, f64) = (1e-3, 1e3);
/// Samples of `u(.)` in the continuous sweep.
pub const CONTINUOUS_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseLemma {
    Convex,
    Continuous,
    QuadraticJensen,
}

impl PointwiseLemma {
    pub const ALL: [PointwiseLemma; 3] = [Self::Convex, Self::Continuous, Self::QuadraticJensen];

    pub fn id(self) -> &'static str {
        match self {
            Self::Convex => "pointwise_convex",
            Self::Continuous => "pointwise_continuous",
            Self::QuadraticJensen => "quadratic_jensen",
        }
    }

    /// Margin at `u = v = 1` (constant samples for the continuous version).
    pub fn equality_margin(self, alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
        match self {
            Self::Convex => check_pointwise(1.0, 1.0, alpha, beta, gamma),
            Self::Continuous => check_pointwise_continuous(&[1.0; CONTINUOUS_SAMPLES], alpha, beta, gamma),
            Self::QuadraticJensen => check_quadratic_jensen(1.0, 1.0, alpha, beta),
        }
    }
}

/// Randomized sweep over log-uniform tuples.
pub fn sweep_pointwise(lemma: PointwiseLemma, trials: usize, seed: u64) -> Result<InequalityVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SAMPLE_RANGE;
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let alpha = log_uniform(&mut rng, lo, hi);
        let beta = log_uniform(&mut rng, lo, hi);
        let gamma = log_uniform(&mut rng, GAMMA_RANGE.0, GAMMA_RANGE.1);
        let entry = match lemma {
            PointwiseLemma::Convex | PointwiseLemma::QuadraticJensen => {
                let u = log_uniform(&mut rng, lo, hi);
                let v = log_uniform(&mut rng, lo, hi);
                if lemma == PointwiseLemma::Convex {
                    let m = check_pointwise(u, v, alpha, beta, gamma)?;
                    (
                        m,
                        vec![("u", u), ("v", v), ("alpha", alpha), ("beta", beta), ("gamma", gamma)],
                    )
                } else {
                    let m = check_quadratic_jensen(u, v, alpha, beta)?;
                    (m, vec![("u", u), ("v", v), ("alpha", alpha), ("beta", beta)])
                }
            }
            PointwiseLemma::Continuous => {
                let us: Vec<f64> = (0..CONTINUOUS_SAMPLES).map(|_| log_uniform(&mut rng, lo, hi)).collect();
                let m = check_pointwise_continuous(&us, alpha, beta, gamma)?;
                let mean = us.iter().sum::<f64>() / us.len() as f64;
                (
                    m,
                    vec![("mean_u", mean), ("alpha", alpha), ("beta", beta), ("gamma", gamma)],
                )
            }
        };
        out.push(entry);
    }
    Ok(verdict(lemma.id(), VerdictKind::LowerBound, POINTWISE_TOL, out))
}

// ---------------------------------------------------------------------------
// Jensen along transport maps

/// Increasing concave function with `K(0+) = -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcaveK {
    Log,
    NegInverse,
}

impl ConcaveK {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            ConcaveK::Log => z.ln(),
            ConcaveK::NegInverse => -1.0 / z,
        }
    }

    fn jensen_id(self) -> &'static str {
        match self {
            ConcaveK::Log => "transport_jensen_log",
            ConcaveK::NegInverse => "transport_jensen_neg_inverse",
        }
    }
}

/// Samples of `psi''` on a uniform grid starting at `start`, interpolated
/// linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Curvature {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(step > 0.0) {
            return Err(Error::InvalidGrid(
                "curvature needs two samples and a positive step".into(),
            ));
        }
        if let Some(sample) = values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NonConvexInput { sample });
        }
        Ok(Self { start, step, values })
    }

    pub fn from_fn(start: f64, end: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let step = (end - start) / (n.max(2) - 1) as f64;
        Self::new(start, step, (0..n).map(|i| f(start + i as f64 * step)).collect())
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn at(&self, x: f64) -> f64 {
        let s = ((x - self.start) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let f = s - i as f64;
        (1.0 - f) * self.values[i] + f * self.values[i + 1]
    }
}

/// Gauss-Legendre nodes in `t` for the segment integrals.
const SEGMENT_NODES: usize = 32;

/// `K(int_0^1 psi''([a,b]_t) dt) - int_0^1 K(psi''([a,b]_t)) dt`, both
/// integrals with the same Gauss-Legendre rule.
pub fn transport_jensen_margin(psi2: &Curvature, k: ConcaveK, a: f64, b: f64) -> f64 {
    let (t, w) = gauss_legendre(SEGMENT_NODES);
    let vals: Vec<f64> = t.iter().map(|t| psi2.at((1.0 - t) * a + t * b)).collect();
    let mean: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
    let avg_k: f64 = vals.iter().zip(&w).map(|(v, w)| w * k.eval(*v)).sum();
    k.eval(mean) - avg_k
}

pub fn check_transport_jensen(psi2: &Curvature, k: ConcaveK, pairs: &[(f64, f64)]) -> Result<InequalityVerdict> {
    let trials = pairs
        .iter()
        .map(|&(a, b)| (transport_jensen_margin(psi2, k, a, b), vec![("a", a), ("b", b)]));
    Ok(verdict(k.jensen_id(), VerdictKind::LowerBound, POINTWISE_TOL, trials))
}

/// Smooth positive `psi'' = exp(sum_k c_k sin(k pi x + p_k))` on `[0, 1]`.
pub fn random_curvature(rng: &mut ChaCha8Rng, samples: usize) -> Result<Curvature> {
    let modes: Vec<(f64, f64)> = (1..=4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    Curvature::from_fn(0.0, 1.0, samples, |x| {
        modes
            .iter()
            .enumerate()
            .map(|(k, (c, p))| c * ((k + 1) as f64 * PI * x + p).sin())
            .sum::<f64>()
            .exp()
    })
}

/// Random curvatures with random segments `(a, b)` in `[0, 1]`.
pub fn sweep_transport_jensen(k: ConcaveK, curves: usize, pairs: usize, seed: u64) -> Result<InequalityVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(curves * pairs);
    for c in 0..curves {
        let psi2 = random_curvature(&mut rng, 257)?;
        for _ in 0..pairs {
            let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            trials.push((
                transport_jensen_margin(&psi2, k, a, b),
                vec![("curve", c as f64), ("a", a), ("b", b)],
            ));
        }
    }
    Ok(verdict(k.jensen_id(), VerdictKind::LowerBound, POINTWISE_TOL, trials))
}

// ---------------------------------------------------------------------------
// Newton's theorem

/// `|1/2 int_0^{2 pi} log(r^2 + s^2 - 2 r s cos t) dt - 2 pi log max(r, s)|`
/// by adaptive quadrature with tolerance `tol`. The integrand is symmetric
/// about `pi` and its only possible singularity (at `r = s`) sits at the
/// endpoint `t = 0`, which the rule never evaluates.
pub fn newton_error(r: f64, s: f64, tol: f64) -> Result<f64> {
    positive("r", r)?;
    positive("s", s)?;
    let f = |t: f64| {
        let h = (0.5 * t).sin();
        0.5 * ((r - s).powi(2) + 4.0 * r * s * h * h).ln()
    };
    let (half, _) = integrate(f, 0.0, PI, tol);
    Ok((2.0 * half - 2.0 * PI * r.max(s).ln()).abs())
}

pub fn check_newton(r: f64, s: f64) -> Result<f64> {
    newton_error(r, s, 1e-12)
}

/// Largest Newton error over `(r, s)` pairs.
pub fn sweep_newton(pairs: &[(f64, f64)]) -> Result<InequalityVerdict> {
    let trials = pairs
        .iter()
        .map(|&(r, s)| check_newton(r, s).map(|e| (-e, vec![("r", r), ("s", s)])))
        .collect::<Result<Vec<_>>>()?;
    Ok(verdict("newton", VerdictKind::LowerBound, 1e-8, trials))
}

/// A grid of `n` pairs with `r != s` spanning three decades.
pub fn newton_grid(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let r = 10f64.powf(-1.0 + 2.0 * i as f64 / n as f64);
            let s = 10f64.powf(1.0 - 2.5 * ((i * 7) % n) as f64 / n as f64);
            if (r - s).abs() < 1e-3 {
                (r, 2.0 * s)
            } else {
                (r, s)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Three-dimensional obstruction

/// `H(t) = (1+t)^2 log(1+t)/t - (1-t)^2 log(1-t)/t - 2` on `(0, 1)`, with
/// the series `sum_j 4 t^{2j} / ((2j+1)(2j)(2j-1))` near zero.
pub fn h_function(t: f64) -> f64 {
    if t < 0.05 {
        let t2 = t * t;
        let mut term = t2;
        let mut sum = 0.0;
        for j in 1..40 {
            let k = 2.0 * j as f64;
            let add = 4.0 * term / ((k + 1.0) * k * (k - 1.0));
            sum += add;
            if add < 1e-18 * sum {
                break;
            }
            term *= t2;
        }
        sum
    } else {
        let p = (1.0 + t).powi(2) * t.ln_1p() / t;
        let m = if t < 1.0 {
            (1.0 - t).powi(2) * (-t).ln_1p() / t
        } else {
            0.0
        };
        p - m - 2.0
    }
}

/// `phi(t) = log(1 - t^3)`.
pub fn phi_3d(t: f64) -> f64 {
    (-t * t * t).ln_1p()
}

/// Second divided differences of `g = H o phi^{-1}` on the image of the
/// `t` grid, as `(t, d2)` at each interior point.
pub fn obstruction_second_differences(ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    for &t in ts {
        if !(1e-6..=1.0 - 1e-6).contains(&t) {
            return Err(Error::InvalidGrid(format!("t = {t} is not inside [1e-6, 1 - 1e-6]")));
        }
    }
    let mut ts = ts.to_vec();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    let y: Vec<f64> = ts.iter().map(|&t| phi_3d(t)).collect();
    let g: Vec<f64> = ts.iter().map(|&t| h_function(t)).collect();
    Ok((1..ts.len().saturating_sub(1))
        .map(|i| {
            let s1 = (g[i] - g[i - 1]) / (y[i] - y[i - 1]);
            let s2 = (g[i + 1] - g[i]) / (y[i + 1] - y[i]);
            // y decreases with t, so the divided difference is taken in y order
            (ts[i], 2.0 * (s1 - s2) / (y[i - 1] - y[i + 1]))
        })
        .collect())
}

/// Concavity scan; the margin is minus the second difference.
pub fn obstruction_scan_3d(ts: &[f64]) -> Result<InequalityVerdict> {
    let d2 = obstruction_second_differences(ts)?;
    let trials = d2.into_iter().map(|(t, d)| (-d, vec![("t", t)]));
    Ok(verdict(
        "obstruction_3d",
        VerdictKind::LowerBound,
        CONCAVITY_TOL,
        trials,
    ))
}

/// `n` uniformly spaced points in `[1e-6, 1 - 1e-6]`.
pub fn obstruction_grid(n: usize) -> Vec<f64> {
    let (a, b) = (1e-6, 1.0 - 1e-6);
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).min(b))
        .collect()
}

// ---------------------------------------------------------------------------
// Logarithmic HLS

/// Grid for the plain log-HLS corpus.
pub fn loghls_grid(dimension: usize) -> Grid {
    match dimension {
        1 => Grid::Line {
            half_width: 400.0,
            cells: 32768,
        },
        _ => Grid::Radial {
            radius: 100.0,
            cells: 16384,
        },
    }
}

/// Grid for dilations of the critical profile. Its slow tails need a wide
/// domain: truncating at `L` biases the 1D free energy by about
/// `0.64 / (lambda L)`.
pub fn dilation_grid(dimension: usize) -> Grid {
    match dimension {
        1 => Grid::Line {
            half_width: 4000.0,
            cells: 262144,
        },
        _ => Grid::Radial {
            radius: 200.0,
            cells: 40000,
        },
    }
}

/// Grid for the confined inequality and its profile.
pub fn confined_grid(dimension: usize) -> Grid {
    match dimension {
        1 => Grid::Line {
            half_width: 10.0,
            cells: 1024,
        },
        _ => Grid::Radial {
            radius: 8.0,
            cells: 1024,
        },
    }
}

/// `F[mu]` at `chi = 1`: `-log(2 pi)` for `N = 1`, `-log(pi)/2 - 1/2` for
/// `N = 2`.
pub fn extremal_free_energy(dimension: usize) -> f64 {
    match dimension {
        1 => -(2.0 * PI).ln(),
        _ => -0.5 * PI.ln() - 0.5,
    }
}

fn critical(dimension: usize, x: f64) -> f64 {
    match dimension {
        1 => 1.0 / (PI * (1.0 + x * x)),
        _ => 1.0 / (PI * (1.0 + x * x).powi(2)),
    }
}

fn rasterize(grid: Grid, f: impl Fn(f64) -> f64) -> Result<AnyDensity> {
    Ok(match grid {
        Grid::Line { half_width, cells } => normalize(&Density1D::from_fn(half_width, cells, f)?)?.into(),
        Grid::Radial { radius, cells } => normalize_radial(&RadialDensity2D::from_fn(radius, cells, f)?)?.into(),
    })
}

/// Seeded corpus cycling through Gaussian mixtures (2 to 5 components),
/// dilated and perturbed copies of `base`, and compactly supported bumps.
/// Radial mixtures include Gaussian rings. Members are normalised and, in
/// 1D, recentred.
pub fn corpus(grid: Grid, count: usize, seed: u64, base: &dyn Fn(f64) -> f64) -> Result<Vec<AnyDensity>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.dimension() as i32;
    (0..count)
        .map(|i| match i % 3 {
            0 => {
                let k = rng.gen_range(2..=5);
                let comps: Vec<(f64, f64, f64)> = (0..k)
                    .map(|_| {
                        (
                            rng.gen_range(0.2..1.0),
                            rng.gen_range(-1.5..1.5),
                            rng.gen_range(0.2..1.5),
                        )
                    })
                    .collect();
                rasterize(grid, |x| {
                    comps
                        .iter()
                        .map(|&(w, c, v)| {
                            if n == 1 {
                                w * (-(x - c).powi(2) / (2.0 * v)).exp() / v.sqrt()
                            } else {
                                // rings of radius |c|
                                w * (-(x - c.abs()).powi(2) / v).exp() / v
                            }
                        })
                        .sum()
                })
            }
            1 => {
                let lambda = log_uniform(&mut rng, 0.5, 2.0);
                let eps = rng.gen_range(-0.5..0.5);
                let k = rng.gen_range(0.5..3.0);
                rasterize(grid, |x| {
                    let bump = 1.0 + eps * (k * x).cos() * (-x * x / 4.0).exp();
                    lambda.powi(n) * base(lambda * x) * bump
                })
            }
            _ => {
                let w = rng.gen_range(0.5..3.0);
                let p = rng.gen_range(1.0..4.0);
                rasterize(grid, |x| (1.0 - (x / w).powi(2)).max(0.0).powf(p))
            }
        })
        .collect()
}

/// The 50-member corpus for the plain inequality, built around the
/// critical profile.
pub fn loghls_corpus(dimension: usize, seed: u64) -> Result<Vec<AnyDensity>> {
    corpus(loghls_grid(dimension), CORPUS_SIZE, seed, &|x| critical(dimension, x))
}

/// Self-similar profile on the confined grid.
pub fn confined_profile(dimension: usize, chi: f64) -> Result<AnyDensity> {
    Ok(solve_self_similar(chi, confined_grid(dimension), 1e-12, 20000)?.density)
}

/// The 50-member corpus for the confined inequality, built around `nu`.
pub fn confined_corpus(nu: &AnyDensity, seed: u64) -> Result<Vec<AnyDensity>> {
    let (grid, f): (Grid, Box<dyn Fn(f64) -> f64 + '_>) = match nu {
        AnyDensity::Line(d) => (
            Grid::Line {
                half_width: d.half_width(),
                cells: d.len(),
            },
            Box::new(move |x: f64| {
                if x.abs() < d.half_width() {
                    d.interpolate(x)
                } else {
                    0.0
                }
            }),
        ),
        AnyDensity::Radial(d) => (
            Grid::Radial {
                radius: d.radius(),
                cells: d.len(),
            },
            Box::new(move |r: f64| if r < d.radius() { d.interpolate(r) } else { 0.0 }),
        ),
    };
    corpus(grid, CORPUS_SIZE, seed, &*f)
}

fn validate(corpus: &[AnyDensity]) -> Result<usize> {
    let dimension = corpus.first().map_or(1, AnyDensity::dimension);
    for (index, d) in corpus.iter().enumerate() {
        if d.dimension() != dimension {
            return Err(Error::CorpusInvalid {
                index,
                reason: "mixed dimensions".into(),
            });
        }
        let (mass, mean) = match d {
            AnyDensity::Line(d) => (d.mass(), d.mean()),
            AnyDensity::Radial(d) => (d.mass(), 0.0),
        };
        if (mass - 1.0).abs() > TOL_MASS {
            return Err(Error::CorpusInvalid {
                index,
                reason: format!("mass {mass}"),
            });
        }
        if mean.abs() > CENTER_TOL {
            return Err(Error::CorpusInvalid {
                index,
                reason: format!("center of mass {mean}"),
            });
        }
    }
    Ok(dimension)
}

/// `F[rho] - F[mu]` at `chi = 1` for each member.
pub fn loghls_margins(corpus: &[AnyDensity]) -> Result<Vec<f64>> {
    let dimension = validate(corpus)?;
    let floor = extremal_free_energy(dimension);
    Ok(corpus
        .iter()
        .map(|d| free_energy(d, 1.0, Frame::Free).total - floor)
        .collect())
}

fn indexed(margins: Vec<f64>) -> impl Iterator<Item = (f64, Inputs)> {
    margins
        .into_iter()
        .enumerate()
        .map(|(i, m)| (m, vec![("index", i as f64)]))
}

pub fn check_loghls(corpus: &[AnyDensity]) -> Result<InequalityVerdict> {
    let id = format!("loghls_n{}", corpus.first().map_or(1, AnyDensity::dimension));
    Ok(verdict(
        &id,
        VerdictKind::LowerBound,
        FUNCTIONAL_TOL,
        indexed(loghls_margins(corpus)?),
    ))
}

/// `F[mu_lambda] - F[mu]` on the dilation grid; dilations are extremal, so
/// every margin should vanish.
pub fn check_loghls_dilations(dimension: usize, lambdas: &[f64]) -> Result<InequalityVerdict> {
    let grid = dilation_grid(dimension);
    let floor = extremal_free_energy(dimension);
    let trials = lambdas
        .iter()
        .map(|&lambda| {
            let d = rasterize(grid, |x| critical(dimension, lambda * x))?;
            let m = free_energy(&d, 1.0, Frame::Free).total - floor;
            Ok((m, vec![("lambda", lambda)]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(verdict(
        &format!("loghls_dilations_n{dimension}"),
        VerdictKind::Equality,
        FUNCTIONAL_TOL,
        trials,
    ))
}

/// `F_resc[rho] - F_resc[nu]` at `chi` for each member.
pub fn confined_margins(corpus: &[AnyDensity], chi: f64, nu: &AnyDensity) -> Result<Vec<f64>> {
    validate(corpus)?;
    if corpus.first().is_some_and(|d| d.dimension() != nu.dimension()) {
        return Err(Error::CorpusInvalid {
            index: 0,
            reason: "dimension differs from the profile".into(),
        });
    }
    let floor = free_energy(nu, chi, Frame::Rescaled).total;
    Ok(corpus
        .iter()
        .map(|d| free_energy(d, chi, Frame::Rescaled).total - floor)
        .collect())
}

pub fn check_loghls_confined(corpus: &[AnyDensity], chi: f64, nu: &AnyDensity) -> Result<InequalityVerdict> {
    let id = format!("loghls_confined_n{}_chi{chi}", nu.dimension());
    Ok(verdict(
        &id,
        VerdictKind::LowerBound,
        FUNCTIONAL_TOL,
        indexed(confined_margins(corpus, chi, nu)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_convex(u: f64, v: f64, a: f64, b: f64, g: f64) -> f64 {
        let m = 0.5 * (u + v);
        (a + b) * 0.5 * (u.powf(-g) + v.powf(-g)) - 2.0 * b - (a * m.powf(-g) - b * m.powf(g))
    }

    fn naive_quadratic(u: f64, v: f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (u + v);
        a * m.ln() + b * m * m - (a + 2.0 * b) * 0.5 * (u.ln() + v.ln()) - b
    }

    #[test]
    fn stable_forms_match_the_direct_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = log_uniform(&mut rng, 0.1, 10.0);
            let v = log_uniform(&mut rng, 0.1, 10.0);
            let a = log_uniform(&mut rng, 0.1, 10.0);
            let b = log_uniform(&mut rng, 0.1, 10.0);
            let g = log_uniform(&mut rng, 0.1, 3.0);
            let s = check_pointwise(u, v, a, b, g).unwrap();
            let n = naive_convex(u, v, a, b, g);
            assert!((s - n).abs() <= 1e-10 * (1.0 + n.abs()), "{s} {n}");
            let s = check_quadratic_jensen(u, v, a, b).unwrap();
            let n = naive_quadratic(u, v, a, b);
            assert!((s - n).abs() <= 1e-10 * (1.0 + n.abs()), "{s} {n}");
            let us = [u, v, a, b];
            let mean = us.iter().sum::<f64>() / 4.0;
            let direct = (a + b) * us.iter().map(|x| x.powf(-g)).sum::<f64>() / 4.0
                - 2.0 * b
                - (a * mean.powf(-g) - b * mean.powf(g));
            let s = check_pointwise_continuous(&us, a, b, g).unwrap();
            assert!((s - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "{s} {direct}");
        }
    }

    #[test]
    fn worked_example_is_strict() {
        let m = check_pointwise(2.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((m - naive_convex(2.0, 0.5, 1.0, 1.0, 1.0)).abs() < 1e-14);
        assert!(m > 0.0);
    }

    #[test]
    fn nonpositive_inputs_are_rejected() {
        assert_eq!(
            check_pointwise(0.0, 1.0, 1.0, 1.0, 1.0),
            Err(Error::NonPositiveInput("u"))
        );
        assert_eq!(
            check_quadratic_jensen(1.0, 1.0, 1.0, -1.0),
            Err(Error::NonPositiveInput("beta"))
        );
        assert_eq!(
            check_pointwise_continuous(&[1.0, f64::NAN], 1.0, 1.0, 1.0),
            Err(Error::NonPositiveInput("u"))
        );
    }

    #[test]
    fn transport_jensen_example() {
        let psi2 = Curvature::from_fn(0.0, 1.0, 4001, |x| 1.0 + x * x).unwrap();
        let m = transport_jensen_margin(&psi2, ConcaveK::Log, 0.0, 1.0);
        let (avg, _) = integrate(|t| (1.0 + t * t).ln(), 0.0, 1.0, 1e-14);
        let oracle = (4.0f64 / 3.0).ln() - avg;
        assert!((m - oracle).abs() < 1e-7, "{m} {oracle}");
        let flat = Curvature::from_fn(-1.0, 2.0, 10, |_| 3.0).unwrap();
        assert!(transport_jensen_margin(&flat, ConcaveK::NegInverse, -0.5, 1.7).abs() < 1e-15);
        assert_eq!(
            Curvature::new(0.0, 0.1, vec![1.0, 0.0, 1.0]),
            Err(Error::NonConvexInput { sample: 1 })
        );
    }

    #[test]
    fn newton_examples() {
        assert!(check_newton(2.0, 1.0).unwrap() < 1e-8);
        assert!(check_newton(1.0, 1.0).unwrap() < 1e-6);
        let e1 = check_newton(0.3, 1.7).unwrap();
        let e2 = check_newton(3.0, 17.0).unwrap();
        assert!((e1 - e2).abs() < 1e-10);
    }

    #[test]
    fn h_series_and_closed_form_agree() {
        for t in [0.049f64, 0.05, 0.051] {
            let t2 = t * t;
            let series: f64 = (1..30)
                .map(|j| {
                    let k = 2.0 * j as f64;
                    4.0 * t2.powi(j) / ((k + 1.0) * k * (k - 1.0))
                })
                .sum();
            assert!((h_function(t) - series).abs() < 1e-14, "{t}");
        }
        assert!(h_function(1e-4) < 1e-8);
        assert!((h_function(1e-4) - 2.0 / 3.0 * 1e-8).abs() < 1e-16);
    }

    #[test]
    fn three_points_near_one_half_are_concave() {
        let d2 = obstruction_second_differences(&[0.49, 0.5, 0.51]).unwrap();
        assert_eq!(d2.len(), 1);
        assert!(d2[0].1 < 0.0);
        assert!(obstruction_second_differences(&[0.0, 0.5, 0.6]).is_err());
    }

    #[test]
    fn verdicts_track_the_worst_trial() {
        let v = verdict(
            "x",
            VerdictKind::LowerBound,
            0.1,
            vec![(0.3, vec![("i", 0.0)]), (-0.05, vec![("i", 1.0)])],
        );
        assert_eq!(v.worst_margin, -0.05);
        assert_eq!(v.worst_inputs["i"], 1.0);
        assert!(v.holds);
        let v = verdict("x", VerdictKind::Equality, 0.1, vec![(0.3, vec![]), (-0.05, vec![])]);
        assert_eq!(v.worst_margin, 0.3);
        assert!(!v.holds);
        let v = verdict(
            "x",
            VerdictKind::LowerBound,
            0.1,
            vec![(f64::NAN, vec![]), (1.0, vec![])],
        );
        assert!(!v.holds);
    }

    #[test]
    fn corpus_rejects_uncentred_members() {
        let d = Density1D::from_fn(10.0, 256, |x| (-(x - 1.0).powi(2)).exp()).unwrap();
        let d = Density1D::new(10.0, d.values().iter().map(|v| v / d.mass()).collect()).unwrap();
        match loghls_margins(&[d.into()]) {
            Err(Error::CorpusInvalid { index: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
