//! Run configuration, read from flat `key = value` files.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{Frame, Grid};
use crate::spectral::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Spectral,
    Physical,
}

/// Edge flux used by the finite-volume solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxScheme {
    /// First-order upwind advection plus centred diffusion.
    Upwind,
    /// Exponentially fitted flux; exact for constant drift between two cells.
    ScharfetterGummel,
}

/// Initial condition family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Centred Gaussian with second moment `init_variance`.
    Gaussian,
    /// Seeded mixture of Gaussians, recentred.
    Mixture,
    /// The critical profile on the grid.
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub chi: f64,
    pub dimension: usize,
    pub frame: Frame,
    pub solver: Solver,
    /// `L` in 1D, `R` for radial grids.
    pub half_width: f64,
    pub cells: usize,
    pub freq_max: f64,
    pub modes: usize,
    /// Largest time step; solvers may take smaller steps.
    pub dt: f64,
    pub t_final: f64,
    /// Time between recorded diagnostics and snapshots.
    pub cadence: f64,
    pub flux: FluxScheme,
    /// Rescaled-frame transport stencil of the spectral solver.
    pub transport: Transport,
    pub init: InitKind,
    pub init_variance: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            chi: 0.5,
            dimension: 1,
            frame: Frame::Free,
            solver: Solver::Physical,
            half_width: 10.0,
            cells: 512,
            freq_max: 8.0,
            modes: 256,
            dt: 1e-3,
            t_final: 1.0,
            cadence: 0.01,
            flux: FluxScheme::ScharfetterGummel,
            transport: Transport::Characteristic,
            init: InitKind::Gaussian,
            init_variance: 1.0,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
}

impl FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Frame::Free),
            "rescaled" => Ok(Frame::Rescaled),
            _ => Err(Error::config("frame", format!("expected free or rescaled, got `{s}`"))),
        }
    }
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Solver::Spectral),
            "physical" => Ok(Solver::Physical),
            _ => Err(Error::config(
                "solver",
                format!("expected spectral or physical, got `{s}`"),
            )),
        }
    }
}

impl FromStr for FluxScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(FluxScheme::Upwind),
            "sg" | "scharfetter_gummel" => Ok(FluxScheme::ScharfetterGummel),
            _ => Err(Error::config("flux", format!("expected upwind or sg, got `{s}`"))),
        }
    }
}

impl FromStr for Transport {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(Transport::Upwind),
            "characteristic" => Ok(Transport::Characteristic),
            _ => Err(Error::config(
                "transport",
                format!("expected upwind or characteristic, got `{s}`"),
            )),
        }
    }
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InitKind::Gaussian),
            "mixture" => Ok(InitKind::Mixture),
            "critical" => Ok(InitKind::Critical),
            _ => Err(Error::config(
                "init",
                format!("expected gaussian, mixture or critical, got `{s}`"),
            )),
        }
    }
}

impl SimConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "chi" => self.chi = parse(key, value)?,
            "dimension" => self.dimension = parse(key, value)?,
            "frame" => self.frame = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "half_width" | "radius" => self.half_width = parse(key, value)?,
            "cells" => self.cells = parse(key, value)?,
            "freq_max" => self.freq_max = parse(key, value)?,
            "modes" => self.modes = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "t_final" => self.t_final = parse(key, value)?,
            "cadence" => self.cadence = parse(key, value)?,
            "flux" => self.flux = value.parse()?,
            "transport" => self.transport = value.parse()?,
            "init" => self.init = value.parse()?,
            "init_variance" => self.init_variance = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse_str(&text)
    }

    /// `chi = 0` is accepted: it is the heat-equation limit used as an oracle.
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::config("chi", format!("must be nonnegative, got {}", self.chi)));
        }
        if !matches!(self.dimension, 1 | 2) {
            return Err(Error::config(
                "dimension",
                format!("must be 1 or 2, got {}", self.dimension),
            ));
        }
        finite_pos("dt", self.dt)?;
        finite_pos("t_final", self.t_final)?;
        finite_pos("cadence", self.cadence)?;
        finite_pos("half_width", self.half_width)?;
        finite_pos("freq_max", self.freq_max)?;
        finite_pos("init_variance", self.init_variance)?;
        if self.cells < 16 {
            return Err(Error::config(
                "cells",
                format!("must be at least 16, got {}", self.cells),
            ));
        }
        if self.modes < 16 {
            return Err(Error::config(
                "modes",
                format!("must be at least 16, got {}", self.modes),
            ));
        }
        if self.solver == Solver::Spectral && self.dimension != 1 {
            return Err(Error::config("solver", "the spectral solver is one-dimensional"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        match self.dimension {
            1 => Grid::Line {
                half_width: self.half_width,
                cells: self.cells,
            },
            _ => Grid::Radial {
                radius: self.half_width,
                cells: self.cells,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = SimConfig::parse_str("chi = 1.5 # supercritical\nsolver=spectral\n\nmodes = 64\n").unwrap();
        assert_eq!(cfg.chi, 1.5);
        assert_eq!(cfg.solver, Solver::Spectral);
        assert_eq!(cfg.modes, 64);
        assert_eq!(cfg.cells, SimConfig::default().cells);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |text: &str| match SimConfig::parse_str(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field("dt = 0"), "dt");
        assert_eq!(field("cells = 8"), "cells");
        assert_eq!(field("modes = 15"), "modes");
        assert_eq!(field("chi = -1"), "chi");
        assert_eq!(field("chi = abc"), "chi");
        assert_eq!(field("colour = red"), "colour");
        assert_eq!(field("dimension = 2\nsolver = spectral"), "solver");
    }
}
