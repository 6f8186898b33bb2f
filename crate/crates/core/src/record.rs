//! Time series emitted by solver runs.

use serde::{Deserialize, Serialize};

use crate::density::AnyDensity;
use crate::spectrum::SpectralState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected { t: f64 },
    Diverged { t: f64 },
}

/// Diagnostics recorded at one time. Fields that do not apply to a run are
/// `None` (for instance the distance to the profile in the free frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub second_moment: f64,
    /// Free energy without confinement.
    pub free_energy: Option<f64>,
    /// Free energy including the confinement `1/2 int |x|^2 rho`.
    pub free_energy_rescaled: Option<f64>,
    pub w2_to_reference: Option<f64>,
    pub d1_to_reference: Option<f64>,
    /// Frequency attaining the d1 supremum.
    pub xi_star: Option<f64>,
    /// Minimum of `|rho_hat|` over the top decile of frequencies.
    pub tail: Option<f64>,
    /// Total mass minus one.
    pub mass_error: f64,
}

/// A run's diagnostics, terminal status and stored states.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub samples: Vec<Sample>,
    pub status: RunStatus,
    pub snapshots: Vec<(f64, AnyDensity)>,
    /// Spectral states at the snapshot times (spectral runs only).
    pub spectra: Vec<(f64, SpectralState)>,
    pub steps: usize,
}

impl RunRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn series(&self, f: impl Fn(&Sample) -> Option<f64>) -> Vec<f64> {
        self.samples.iter().filter_map(f).collect()
    }

    /// `(t, value)` pairs for the samples where `f` is defined.
    pub fn pairs(&self, f: impl Fn(&Sample) -> Option<f64>) -> (Vec<f64>, Vec<f64>) {
        self.samples.iter().filter_map(|s| f(s).map(|v| (s.t, v))).unzip()
    }

    pub fn final_density(&self) -> Option<&AnyDensity> {
        self.snapshots.last().map(|(_, d)| d)
    }
}
