//! Simulation configuration, scenario files, and validation.
//!
//! Scenario files are JSON documents whose keys mirror [`SimConfig`] field
//! names exactly; unknown keys are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current smoothing along x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    None,
    Binomial,
    Compensated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default = "one")]
    pub n_passes: u32,
}

fn one() -> u32 {
    1
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { kind: FilterKind::None, n_passes: 1 }
    }
}

/// One plasma species: uniform density, regular in-cell lattice, and a
/// drifting thermal momentum distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    /// Mass-to-charge ratio, signed and normalized: -1 electrons, +1 positrons.
    pub m_q: f32,
    pub ppc_x: u32,
    pub ppc_y: u32,
    /// Fluid (drift) momentum, units of c.
    #[serde(default)]
    pub u_fl: [f32; 3],
    /// Thermal momentum spread, units of c.
    #[serde(default)]
    pub u_th: [f32; 3],
    /// Uniform density relative to the reference plasma density.
    #[serde(default = "one_f32")]
    pub density: f32,
}

fn one_f32() -> f32 {
    1.0
}

impl SpeciesSpec {
    /// Charge carried by each macro-particle (sign follows m_q).
    pub fn particle_charge(&self) -> f32 {
        let ppc = (self.ppc_x * self.ppc_y) as f32;
        (self.density / ppc).copysign(self.m_q)
    }

    /// Mass carried by each macro-particle.
    pub fn particle_mass(&self) -> f32 {
        (self.particle_charge() * self.m_q).abs()
    }
}

/// A linearly polarized plane-wave pulse entering along +x.
///
/// The longitudinal envelope is sin²-shaped over `rise`/`flat`/`fall`
/// lengths; `fwhm` is shorthand for rise = fall = fwhm, flat = 0. The leading
/// edge sits at `start_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSpec {
    /// Peak normalized vector potential.
    pub a0: f32,
    /// Frequency in units of ωp.
    pub omega0: f32,
    #[serde(default)]
    pub fwhm: Option<f32>,
    #[serde(default)]
    pub rise: Option<f32>,
    #[serde(default)]
    pub flat: Option<f32>,
    #[serde(default)]
    pub fall: Option<f32>,
    /// Polarization angle in radians; 0 puts E along y.
    #[serde(default)]
    pub polarization: f32,
    /// Leading-edge position, units of c/ωp.
    pub start_x: f32,
}

impl LaserSpec {
    /// Effective (rise, flat, fall) lengths.
    pub fn envelope_lengths(&self) -> (f32, f32, f32) {
        match self.fwhm {
            Some(w) => (w, 0.0, w),
            None => (
                self.rise.unwrap_or(0.0),
                self.flat.unwrap_or(0.0),
                self.fall.unwrap_or(0.0),
            ),
        }
    }
}

/// Full scenario description; the unit of configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub nx: usize,
    pub ny: usize,
    /// Physical box size, units of c/ωp.
    pub box_x: f32,
    pub box_y: f32,
    /// Time step, units of 1/ωp.
    pub dt: f32,
    pub n_steps: u32,
    #[serde(default = "one_usize")]
    pub n_regions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub moving_window: bool,
    pub species: Vec<SpeciesSpec>,
    #[serde(default)]
    pub laser: Option<LaserSpec>,
}

fn one_usize() -> usize {
    1
}

impl SimConfig {
    pub fn dx(&self) -> f32 {
        self.box_x / self.nx as f32
    }

    pub fn dy(&self) -> f32 {
        self.box_y / self.ny as f32
    }

    /// Largest stable time step: 1/sqrt(1/dx² + 1/dy²), c = 1.
    pub fn cfl_limit(&self) -> f64 {
        let dx = self.box_x as f64 / self.nx as f64;
        let dy = self.box_y as f64 / self.ny as f64;
        1.0 / (1.0 / (dx * dx) + 1.0 / (dy * dy)).sqrt()
    }

    pub fn from_json(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        validate_config(cfg)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ConfigError::Io(path.as_ref().display().to_string(), e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("grid is empty: {field} must be >= 1")]
    EmptyGrid { field: &'static str },
    #[error("dt must be > 0 (got {dt})")]
    InvalidTimeStep { dt: f32 },
    #[error("CFL violation: dt = {dt} exceeds the stability bound {limit:.6}")]
    CflViolation { dt: f32, limit: f64 },
    #[error("n_regions = {n_regions} exceeds ny = {ny} grid rows")]
    RegionCountExceedsRows { n_regions: usize, ny: usize },
    #[error("species `{name}`: invalid {field}")]
    InvalidSpecies { name: String, field: &'static str },
    #[error("filter: n_passes must be >= 1 when kind is not `none`")]
    InvalidFilter,
    #[error("laser: {field} must be > 0")]
    InvalidLaser { field: &'static str },
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read scenario `{0}`: {1}")]
    Io(String, std::io::Error),
}

/// Check every configuration invariant; returns the config unchanged.
pub fn validate_config(cfg: SimConfig) -> Result<SimConfig, ConfigError> {
    if cfg.nx < 1 {
        return Err(ConfigError::EmptyGrid { field: "nx" });
    }
    if cfg.ny < 1 {
        return Err(ConfigError::EmptyGrid { field: "ny" });
    }
    let positive = |v: f32| v.is_finite() && v > 0.0;
    if !positive(cfg.dt) || !positive(cfg.box_x) || !positive(cfg.box_y) {
        return Err(ConfigError::InvalidTimeStep { dt: cfg.dt });
    }
    let limit = cfg.cfl_limit();
    if cfg.dt as f64 >= limit {
        return Err(ConfigError::CflViolation { dt: cfg.dt, limit });
    }
    if cfg.n_regions < 1 || cfg.n_regions > cfg.ny {
        return Err(ConfigError::RegionCountExceedsRows {
            n_regions: cfg.n_regions,
            ny: cfg.ny,
        });
    }
    for s in &cfg.species {
        if s.ppc_x * s.ppc_y < 1 {
            return Err(ConfigError::InvalidSpecies {
                name: s.name.clone(),
                field: "ppc_x*ppc_y",
            });
        }
        if s.u_th.iter().any(|u| *u < 0.0) {
            return Err(ConfigError::InvalidSpecies {
                name: s.name.clone(),
                field: "u_th",
            });
        }
        if s.m_q == 0.0 {
            return Err(ConfigError::InvalidSpecies {
                name: s.name.clone(),
                field: "m_q",
            });
        }
    }
    if cfg.filter.kind != FilterKind::None && cfg.filter.n_passes < 1 {
        return Err(ConfigError::InvalidFilter);
    }
    if let Some(laser) = &cfg.laser {
        if !positive(laser.a0) {
            return Err(ConfigError::InvalidLaser { field: "a0" });
        }
        if !positive(laser.omega0) {
            return Err(ConfigError::InvalidLaser { field: "omega0" });
        }
    }
    Ok(cfg)
}
