//! Scenario configuration: a JSON document describing one parameter sweep.
//!
//! All frequencies and rates are in units of |Δ|; the optional `physical`
//! block only adds a T1 column in microseconds.

use std::path::{Path, PathBuf};

use purcell_core::liouvillian::TermToggles;
use purcell_core::model::SystemParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Signed detuning ω_a - ω_c; the cavity sits at zero frequency.
    pub delta: f64,
    pub g: f64,
    pub u: f64,
    pub kappa_a: f64,
    pub kappa_c: f64,
    #[serde(default)]
    pub nbar_a0: f64,
    #[serde(default)]
    pub nbar_c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalUnits {
    /// |Δ|/2π in GHz.
    pub delta_ghz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NbarC0,
    /// Coherent cavity photon number |α_c|².
    DrivePhotons,
    /// Grid values are the signed detuning in units of |Δ| (±1).
    DetuningSign,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::NbarC0 => "nbar_c0",
            SweepVariable::DrivePhotons => "drive_photons",
            SweepVariable::DetuningSign => "detuning_sign",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Drive frequency relative to the bare cavity.
    pub omega_d: f64,
    /// Cavity bath strength at the qubit frequency, for a structured bath.
    #[serde(default)]
    pub kappa_c_at_qubit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub cavity: usize,
    pub qubit: usize,
    /// Re-run every point at cutoffs +2 and flag shifts above 0.1%.
    pub convergence_check: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { cavity: 8, qubit: 6, convergence_check: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Diag,
    Fit,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub method: Method,
    /// Fit horizon in units of 1/|Δ|; defaults to 20/κ̃_a.
    pub horizon: Option<f64>,
    /// Start of the fit window as a fraction of the horizon.
    pub window: f64,
    /// Also run the perturbation engine on every point.
    pub perturbation: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { method: Method::Diag, horizon: None, window: purcell_core::spectral::DEFAULT_WINDOW, perturbation: false }
    }
}

impl ProtocolConfig {
    pub fn wants_fit(&self) -> bool {
        matches!(self.method, Method::Fit | Method::Both)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub physical: Option<PhysicalUnits>,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub drive: Option<DriveConfig>,
    /// Use the two-level (Jaynes-Cummings) generator instead of the transmon.
    #[serde(default)]
    pub jc: bool,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub toggles: TermToggles,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Which generator a scenario runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Thermal,
    Drive,
    Jc,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> Kind {
        if self.jc {
            Kind::Jc
        } else if self.sweep.variable == SweepVariable::DrivePhotons {
            Kind::Drive
        } else {
            Kind::Thermal
        }
    }

    /// Model parameters at one grid value.
    pub fn params_at(&self, x: f64) -> SystemParams {
        let m = &self.model;
        let mut delta = m.delta;
        let (mut na, mut nc) = (m.nbar_a0, m.nbar_c0);
        match self.sweep.variable {
            SweepVariable::NbarC0 => nc = x,
            SweepVariable::DetuningSign => delta = m.delta.abs() * x.signum(),
            SweepVariable::DrivePhotons => {
                na = 0.0;
                nc = 0.0;
            }
        }
        SystemParams::from_detuning(delta, m.g, m.u, m.kappa_a, m.kappa_c).with_thermal(na, nc)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return invalid(format!("name {:?} must be non-empty and use [A-Za-z0-9_-]", self.name));
        }
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            return invalid("sweep grid is empty");
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return invalid("sweep grid has non-finite values");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("sweep grid must be strictly increasing");
        }
        match self.sweep.variable {
            SweepVariable::NbarC0 | SweepVariable::DrivePhotons => {
                if grid[0] < 0.0 {
                    return invalid(format!("{} cannot be negative", self.sweep.variable.name()));
                }
            }
            SweepVariable::DetuningSign => {
                if grid.iter().any(|x| x.abs() != 1.0) {
                    return invalid("detuning_sign grid values must be -1 or 1");
                }
            }
        }
        let m = &self.model;
        if m.delta == 0.0 {
            return invalid("model.delta must be nonzero");
        }
        match self.kind() {
            Kind::Drive => {
                if self.drive.is_none() {
                    return invalid("a drive_photons sweep needs a drive block");
                }
                if m.nbar_a0 != 0.0 || m.nbar_c0 != 0.0 {
                    return invalid("coherent-drive scenarios are zero-temperature only");
                }
            }
            Kind::Jc => {
                if self.sweep.variable == SweepVariable::DrivePhotons {
                    return invalid("the two-level model has no drive scenario");
                }
                if m.kappa_a != 0.0 {
                    return invalid("the two-level model needs kappa_a = 0");
                }
            }
            Kind::Thermal => {}
        }
        let t = &self.truncation;
        if t.cavity < 2 || t.qubit < 2 {
            return invalid("cutoffs must be at least 2");
        }
        let p = &self.protocol;
        if !(p.window > 0.0 && p.window < 1.0) {
            return invalid("protocol.window must lie in (0, 1)");
        }
        if let Some(h) = p.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return invalid("protocol.horizon must be positive");
            }
        }
        if let Some(ph) = &self.physical {
            if !(ph.delta_ghz > 0.0 && ph.delta_ghz.is_finite()) {
                return invalid("physical.delta_ghz must be positive");
            }
        }
        for &x in grid {
            self.params_at(x).validate().map_err(|e| ConfigError::Invalid(format!("at {x}: {e}")))?;
        }
        Ok(())
    }
}
