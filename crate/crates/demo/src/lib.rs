//! WebAssembly bindings for the browser demo in `www/`.

use wasm_bindgen::prelude::*;

use kslab::config::{SimConfig, Solver};
use kslab::initial::{initial_density, initial_spectrum};
use kslab::metrics::fit_decay_rate;
use kslab::physical::run_physical;
use kslab::profiles::{solve_self_similar, Frame, Grid};
use kslab::record::RunStatus;
use kslab::spectral::run_spectral;
use kslab::AnyDensity;

fn js_err(e: kslab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Sampled curve `y(x)` plus one scalar summary.
#[wasm_bindgen]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    summary: f64,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// Second moment for profiles, fitted rate for decay curves.
    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> f64 {
        self.summary
    }
}

/// Self-similar profile on `(-10, 10)` (1D) or `[0, 8)` (radial).
#[wasm_bindgen]
pub fn profile(chi: f64, dimension: usize) -> Result<Curve, JsError> {
    let grid = match dimension {
        1 => Grid::Line {
            half_width: 10.0,
            cells: 512,
        },
        _ => Grid::Radial {
            radius: 8.0,
            cells: 512,
        },
    };
    let p = solve_self_similar(chi, grid, 1e-10, 20_000).map_err(js_err)?;
    let (x, y) = match p.density {
        AnyDensity::Line(d) => (d.centers().collect(), d.values().to_vec()),
        AnyDensity::Radial(d) => (d.centers().collect(), d.values().to_vec()),
    };
    Ok(Curve {
        x,
        y,
        summary: p.second_moment,
    })
}

/// Moduli `|rho_hat(t, xi)|` of a free-frame spectral run from a unit Gaussian.
#[wasm_bindgen]
pub struct Spectra {
    xi: Vec<f64>,
    times: Vec<f64>,
    moduli: Vec<f64>,
    blowup: Option<f64>,
}

#[wasm_bindgen]
impl Spectra {
    #[wasm_bindgen(getter)]
    pub fn xi(&self) -> Vec<f64> {
        self.xi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// Row-major, one row of `xi().length` values per time.
    #[wasm_bindgen(getter)]
    pub fn moduli(&self) -> Vec<f64> {
        self.moduli.clone()
    }

    /// Detected blow-up time, if any.
    #[wasm_bindgen(getter)]
    pub fn blowup(&self) -> Option<f64> {
        self.blowup
    }
}

#[wasm_bindgen]
pub fn spectral_run(chi: f64, t_final: f64) -> Result<Spectra, JsError> {
    let cfg = SimConfig {
        chi,
        solver: Solver::Spectral,
        freq_max: 8.0,
        modes: 256,
        t_final,
        // blow-up needs three flagged snapshots before the modulus guard trips
        cadence: 0.01,
        ..SimConfig::default()
    };
    let rec = run_spectral(&cfg, initial_spectrum(&cfg).map_err(js_err)?).map_err(js_err)?;
    let xi = rec
        .spectra
        .first()
        .map(|(_, s)| (0..s.len()).map(|j| s.xi(j)).collect())
        .unwrap_or_default();
    Ok(Spectra {
        xi,
        times: rec.spectra.iter().map(|(t, _)| *t).collect(),
        moduli: rec
            .spectra
            .iter()
            .flat_map(|(_, s)| s.values().iter().map(|v| v.norm()))
            .collect(),
        blowup: match rec.status {
            RunStatus::BlowupDetected { t } => Some(t),
            _ => None,
        },
    })
}

/// `W2(rho(t), nu)^2` along a rescaled 1D run from a Gaussian of variance 2,
/// with the decay rate fitted over `[1, 3]`.
#[wasm_bindgen]
pub fn decay_curve(chi: f64) -> Result<Curve, JsError> {
    let cfg = SimConfig {
        chi,
        frame: Frame::Rescaled,
        half_width: 8.0,
        cells: 256,
        t_final: 4.0,
        cadence: 0.05,
        init_variance: 2.0,
        ..SimConfig::default()
    };
    let rec = run_physical(&cfg, initial_density(&cfg).map_err(js_err)?).map_err(js_err)?;
    let (x, w) = rec.pairs(|s| s.w2_to_reference);
    let y: Vec<f64> = w.iter().map(|w| w * w).collect();
    let fit = fit_decay_rate(&x, &y, (1.0, 3.0)).map_err(js_err)?;
    Ok(Curve {
        x,
        y,
        summary: fit.rate,
    })
}
