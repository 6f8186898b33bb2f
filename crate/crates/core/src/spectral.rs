//! Fourier-side solver for the 1D equation
//! `d_t rho_hat = |xi|^2 (-rho_hat + chi B[rho_hat])`,
//! `B(xi) = int_0^1 rho_hat(sigma xi) rho_hat((1 - sigma) xi) d sigma`,
//! with the extra transport term `-xi d_xi rho_hat` in the rescaled frame.
//!
//! `B(xi)` only reads frequencies below `xi`, so a truncated frequency box
//! loses no information about the modes it keeps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{SimConfig, Solver};
use crate::density::AnyDensity;
use crate::error::{Error, Result};
use crate::metrics::fourier_d1;
use crate::profiles::{solve_self_similar, Frame};
use crate::quadrature::gauss_legendre;
use crate::record::{RunRecord, RunStatus, Sample};
use crate::spectrum::{fourier_transform, SpectralState};

/// Gauss-Legendre points in `sigma`.
pub const SIGMA_NODES: usize = 16;

/// Tail level above which the spectrum counts as flat at infinity.
pub const BLOWUP_THRESHOLD: f64 = 0.5;

/// Consecutive snapshots the tail must stay above the threshold.
pub const BLOWUP_PERSISTENCE: usize = 3;

/// Modulus above which a step is rejected as unstable.
pub const MODULUS_LIMIT: f64 = 1.0 + 1e-6;

type Node = (f64, usize, f64, usize, f64);

/// Precomputed interpolation stencils for `B` on one grid.
pub struct Bilinear {
    m: usize,
    /// Per mode: `(weight, i0, f0, i1, f1)` for each sigma node, where
    /// `rho_hat(sigma xi_j) = (1 - f0) s[i0] + f0 s[i0 + 1]`.
    stencil: Vec<Vec<Node>>,
}

impl Bilinear {
    pub fn new(m: usize, nodes: usize) -> Self {
        let (sig, w) = gauss_legendre(nodes);
        let split = |pos: f64| -> (usize, f64) {
            let i = (pos.floor() as usize).min(m - 2);
            (i, pos - i as f64)
        };
        let stencil = (0..m)
            .map(|j| {
                sig.iter()
                    .zip(&w)
                    .map(|(&s, &wk)| {
                        // positions in units of dxi: sigma j and (1 - sigma) j
                        let (i0, f0) = split(s * j as f64);
                        let (i1, f1) = split((1.0 - s) * j as f64);
                        (wk, i0, f0, i1, f1)
                    })
                    .collect()
            })
            .collect();
        Self { m, stencil }
    }

    /// `B_j` for every stored mode.
    pub fn apply(&self, s: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(s.len(), self.m);
        self.stencil
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(w, i0, f0, i1, f1)| {
                        let a = s[i0] * (1.0 - f0) + s[i0 + 1] * f0;
                        let b = s[i1] * (1.0 - f1) + s[i1 + 1] * f1;
                        a * b * w
                    })
                    .sum()
            })
            .collect()
    }
}

/// `|xi_j|^2 (-s_j + chi B_j)`.
pub fn rhs_fourier(s: &SpectralState, chi: f64) -> Vec<Complex64> {
    let b = Bilinear::new(s.len(), SIGMA_NODES).apply(s.values());
    s.values()
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(j, (v, b))| {
            let xi = s.xi(j);
            (b * chi - v) * (xi * xi)
        })
        .collect()
}

/// Discretisation of the rescaled transport term `-xi d_xi rho_hat`.
/// Characteristics leave the origin, so their feet lie towards `xi = 0`;
/// values at negative frequencies come from conjugate symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// First-order upwind; a convex combination, so `|rho_hat| <= 1` and
    /// the d1 contraction hold exactly, but the drift of the lowest modes
    /// is under-resolved by O(1/j).
    Upwind,
    /// Cubic interpolation at the foot of the characteristic through modes
    /// `j-2..=j+1` (quadratic on the top mode). Exact on cubics, so the
    /// centre of mass, read from the odd part near `xi = 0`, is transported
    /// without drift.
    Characteristic,
}

fn mode(v: &[Complex64], j: isize) -> Complex64 {
    if j < 0 {
        v[(-j) as usize].conj()
    } else {
        v[j as usize]
    }
}

/// [`rhs_fourier`] plus `-xi d_xi rho_hat` with the given stencil
/// (one-sided first- or second-order differences).
pub fn rhs_fourier_rescaled_with(s: &SpectralState, chi: f64, transport: Transport) -> Vec<Complex64> {
    let mut out = rhs_fourier(s, chi);
    let v = s.values();
    for j in 1..v.len() {
        let ji = j as isize;
        // xi_j d_xi = j (dxi d_xi)
        let diff = match transport {
            Transport::Upwind => v[j] - v[j - 1],
            Transport::Characteristic => (v[j] * 3.0 - mode(v, ji - 1) * 4.0 + mode(v, ji - 2)) * 0.5,
        };
        out[j] -= diff * j as f64;
    }
    out
}

/// [`rhs_fourier_rescaled_with`] using [`Transport::Characteristic`].
pub fn rhs_fourier_rescaled(s: &SpectralState, chi: f64) -> Vec<Complex64> {
    rhs_fourier_rescaled_with(s, chi, Transport::Characteristic)
}

/// Stored spectra of a run and the blow-up time, if any.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub blowup: Option<f64>,
}

impl RunRecord {
    pub fn spectral_trajectory(&self) -> SpectralTrajectory {
        let (times, states) = self.spectra.iter().cloned().unzip();
        SpectralTrajectory {
            times,
            states,
            blowup: match self.status {
                RunStatus::BlowupDetected { t } => Some(t),
                _ => None,
            },
        }
    }
}

/// `min |rho_hat|` over the top decile of stored frequencies.
pub fn tail_statistic(s: &SpectralState) -> f64 {
    let m = s.len();
    let start = m - (m / 10).max(1);
    s.values()[start..]
        .iter()
        .map(|v| v.norm())
        .fold(f64::INFINITY, f64::min)
}

/// First snapshot time starting a run of [`BLOWUP_PERSISTENCE`] snapshots
/// whose tail statistic exceeds [`BLOWUP_THRESHOLD`].
pub fn detect_blowup(traj: &SpectralTrajectory) -> Option<f64> {
    let mut run = 0;
    for (i, s) in traj.states.iter().enumerate() {
        if tail_statistic(s) > BLOWUP_THRESHOLD {
            run += 1;
            if run == BLOWUP_PERSISTENCE {
                return Some(traj.times[i + 1 - BLOWUP_PERSISTENCE]);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Largest step used by [`run_spectral`]: the configured `dt`, capped by
/// `0.5 / Xi^2` for the explicit quadratic term and, in the rescaled frame,
/// by the upwind transport limit `1 / (m - 1)`.
pub fn spectral_dt(config: &SimConfig) -> f64 {
    let mut dt = config.dt.min(0.5 / (config.freq_max * config.freq_max));
    if config.frame == Frame::Rescaled {
        dt = dt.min(1.0 / (config.modes - 1) as f64);
    }
    dt
}

/// Exponential time differencing: the factor `exp(-xi^2 dt)` is exact for
/// the linear part and `B` is frozen over the step,
/// `s <- e s + (1 - e) chi B`. In the rescaled frame a transport substep
/// `s(xi) <- s(xi e^{-dt})` comes first.
pub struct SpectralStepper {
    chi: f64,
    frame: Frame,
    transport: Transport,
    dt: f64,
    decay: Vec<f64>,
    bilinear: Bilinear,
}

impl SpectralStepper {
    pub fn new(chi: f64, frame: Frame, transport: Transport, freq_max: f64, m: usize, dt: f64) -> Self {
        let dxi = freq_max / (m - 1) as f64;
        Self {
            chi,
            frame,
            transport,
            dt,
            decay: (0..m).map(|j| (-(j as f64 * dxi).powi(2) * dt).exp()).collect(),
            bilinear: Bilinear::new(m, SIGMA_NODES),
        }
    }

    pub fn step(&self, s: &mut [Complex64]) {
        if self.frame == Frame::Rescaled {
            self.transport_substep(s);
        }
        if self.chi != 0.0 {
            let b = self.bilinear.apply(s);
            for ((v, e), b) in s.iter_mut().zip(&self.decay).zip(&b) {
                *v = *v * *e + b * ((1.0 - e) * self.chi);
            }
        } else {
            for (v, e) in s.iter_mut().zip(&self.decay) {
                *v *= *e;
            }
        }
        s[0] = Complex64::new(1.0, 0.0);
    }
}

impl SpectralStepper {
    fn transport_substep(&self, s: &mut [Complex64]) {
        match self.transport {
            Transport::Upwind => {
                for j in (1..s.len()).rev() {
                    let c = j as f64 * self.dt;
                    s[j] = s[j] * (1.0 - c) + s[j - 1] * c;
                }
            }
            Transport::Characteristic => {
                let shrink = (-self.dt).exp();
                let old = s.to_vec();
                let top = s.len() - 1;
                for (j, out) in s.iter_mut().enumerate().skip(1) {
                    // foot p = j e^{-dt} in index units, between j-1 and j
                    let p = j as f64 * shrink;
                    let ji = j as isize;
                    let stencil: &[isize] = if j < top {
                        &[ji - 2, ji - 1, ji, ji + 1]
                    } else {
                        &[ji - 2, ji - 1, ji]
                    };
                    *out = stencil
                        .iter()
                        .map(|&k| {
                            let w: f64 = stencil
                                .iter()
                                .filter(|&&l| l != k)
                                .map(|&l| (p - l as f64) / (k - l) as f64)
                                .product();
                            mode(&old, k) * w
                        })
                        .sum();
                }
            }
        }
    }
}

fn spectral_sample(t: f64, s: &SpectralState, reference: Option<&SpectralState>) -> Result<Sample> {
    let d1 = reference.map(|r| fourier_d1(s, r)).transpose()?;
    Ok(Sample {
        t,
        second_moment: s.second_moment(),
        free_energy: None,
        free_energy_rescaled: None,
        w2_to_reference: None,
        d1_to_reference: d1.map(|d| d.value),
        xi_star: d1.map(|d| d.xi_star),
        tail: Some(tail_statistic(s)),
        mass_error: s.values()[0].re - 1.0,
    })
}

/// Transform of the self-similar profile on the run's spatial grid, when
/// one exists.
pub fn spectral_reference(config: &SimConfig) -> Result<Option<SpectralState>> {
    if config.frame != Frame::Rescaled || config.chi >= 1.0 {
        return Ok(None);
    }
    match solve_self_similar(config.chi, config.grid(), 1e-11, 20_000)?.density {
        AnyDensity::Line(d) => Ok(Some(fourier_transform(&d, config.freq_max, config.modes)?)),
        AnyDensity::Radial(_) => Ok(None),
    }
}

/// Integrates `init` to `config.t_final`, storing spectra and diagnostics
/// every `config.cadence`. Stops early once [`detect_blowup`] fires on the
/// stored snapshots.
pub fn run_spectral(config: &SimConfig, init: SpectralState) -> Result<RunRecord> {
    config.validate()?;
    if config.solver != Solver::Spectral {
        return Err(Error::config("solver", "run_spectral needs solver = spectral"));
    }
    if init.len() != config.modes || (init.freq_max() - config.freq_max).abs() > 1e-12 * config.freq_max {
        return Err(Error::GridMismatch(
            "initial spectrum does not match the configured grid".into(),
        ));
    }
    let reference = spectral_reference(config)?;
    let dt_max = spectral_dt(config);
    let mut s = init.clone().into_values();
    let mut rec = RunRecord {
        samples: vec![spectral_sample(0.0, &init, reference.as_ref())?],
        status: RunStatus::Completed,
        snapshots: Vec::new(),
        spectra: vec![(0.0, init)],
        steps: 0,
    };
    let mut stepper = SpectralStepper::new(
        config.chi,
        config.frame,
        config.transport,
        config.freq_max,
        config.modes,
        dt_max,
    );
    let mut t = 0.0;
    let mut k = 1usize;
    let eps = 1e-12 * config.t_final.max(1.0);
    let mut above = 0usize;
    while t < config.t_final - eps {
        let next_sample = (k as f64 * config.cadence).min(config.t_final);
        let dt = dt_max.min(next_sample - t);
        if (dt - stepper.dt).abs() > 1e-15 * dt_max {
            stepper = SpectralStepper::new(
                config.chi,
                config.frame,
                config.transport,
                config.freq_max,
                config.modes,
                dt,
            );
        }
        stepper.step(&mut s);
        rec.steps += 1;
        t = if next_sample - t - dt <= eps {
            next_sample
        } else {
            t + dt
        };
        if s.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            rec.status = RunStatus::Diverged { t };
            break;
        }
        let modulus = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if modulus > MODULUS_LIMIT {
            return Err(Error::StepRejected { t, modulus });
        }
        if t >= next_sample - eps {
            k += 1;
            let state = SpectralState::unchecked(config.freq_max, s.clone())?;
            rec.samples.push(spectral_sample(t, &state, reference.as_ref())?);
            let tail = tail_statistic(&state);
            rec.spectra.push((t, state));
            above = if tail > BLOWUP_THRESHOLD { above + 1 } else { 0 };
            if above == BLOWUP_PERSISTENCE {
                let first = rec.spectra[rec.spectra.len() - BLOWUP_PERSISTENCE].0;
                rec.status = RunStatus::BlowupDetected { t: first };
                break;
            }
        }
    }
    Ok(rec)
}
