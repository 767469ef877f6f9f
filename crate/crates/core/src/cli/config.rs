//! TOML run configuration.
//!
//! Every physical default is the reference device; a config file only needs
//! to list deviations from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::Format;
use super::CliError;
use crate::model::DeviceParams;
use crate::oracle::OracleConfig;
use crate::response::DEFAULT_PHASES;
use crate::sweep::{dbm_to_rabi, Axis, GridSpec, PumpContext, PumpFrequency, YKind};
use crate::Error;

const EXCLUSIVE_RULE: &str = "specify exactly one of `rabi` or (`power_dbm`, `k`)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub pump: PumpConfig,
    /// Probe frequency grid, GHz.
    pub probe: Axis,
    /// y axis of `sweep2d`.
    pub sweep: Option<SweepAxis>,
    pub output: OutputConfig,
    pub engine: EngineConfig,
    pub calibrate: CalibrateConfig,
    pub oracle: OracleConfig,
    /// Sample for `oracle-check`; a built-in sample is used when empty.
    pub oracle_points: Vec<OraclePoint>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            pump: PumpConfig::default(),
            probe: Axis::new(4.2, 5.0, 201),
            sweep: None,
            output: OutputConfig::default(),
            engine: EngineConfig::default(),
            calibrate: CalibrateConfig::default(),
            oracle: OracleConfig::default(),
            oracle_points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    /// GHz, or "resonant" for ω₁₀ of the configured device.
    pub omega_pump: PumpFrequency,
    /// Ω/2π in MHz.
    pub rabi: Option<f64>,
    pub power_dbm: Option<f64>,
    /// MHz/√W
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub y: YKind,
    pub start: f64,
    pub stop: f64,
    #[serde(default = "default_y_points")]
    pub points: usize,
}

fn default_y_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
    pub include_complex: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Pump phases in the average.
    pub n_phases: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { n_phases: DEFAULT_PHASES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Scan range of Ω/2π, MHz.
    pub rabi_min: f64,
    pub rabi_max: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { rabi_min: 10.0, rabi_max: 400.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OraclePoint {
    /// Ω/2π, MHz
    pub rabi: f64,
    /// (ω_p − ω_pump)/2π, MHz
    pub detuning: f64,
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), message: message.into() }
}

/// Maps validation errors of the library onto the config field they refer to.
fn device_err(e: Error) -> CliError {
    match e {
        Error::InvalidParams { field, reason } => config_err(format!("device.{field}"), reason),
        Error::TransmonRegime { .. } => config_err("device.flux_ratio", e.to_string()),
        other => config_err("device", other.to_string()),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.device.validate().map_err(device_err)?;
        self.device.omega10().map_err(device_err)?;
        if self.pump.rabi.is_some() && self.pump.power_dbm.is_some() {
            return Err(config_err("pump", format!("`rabi` and `power_dbm` are mutually exclusive: {EXCLUSIVE_RULE}")));
        }
        if let Some(r) = self.pump.rabi {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(config_err("pump.rabi", "must be finite and non-negative"));
            }
        }
        if let Some(k) = self.pump.k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(config_err("pump.k", "must be positive"));
            }
        }
        if let PumpFrequency::Fixed(f) = self.pump.omega_pump {
            if !(f > 0.0 && f.is_finite()) {
                return Err(config_err("pump.omega_pump", "must be a positive frequency in GHz or \"resonant\""));
            }
        }
        if self.probe.points < 2 || !(self.probe.stop > self.probe.start) {
            return Err(config_err("probe", "needs start < stop and at least 2 points"));
        }
        if self.engine.n_phases == 0 {
            return Err(config_err("engine.n_phases", "must be at least 1"));
        }
        Ok(())
    }

    pub fn omega_pump(&self) -> Result<f64, CliError> {
        self.pump.omega_pump.resolve(&self.device).map_err(device_err)
    }

    /// Rabi frequency for commands with a fixed pump.
    pub fn fixed_rabi(&self) -> Result<f64, CliError> {
        match (self.pump.rabi, self.pump.power_dbm) {
            (Some(r), None) => Ok(r),
            (None, Some(p)) => match self.pump.k {
                Some(k) => Ok(dbm_to_rabi(p, k)),
                None => Err(config_err("pump.k", format!("`power_dbm` needs `k`: {EXCLUSIVE_RULE}"))),
            },
            (None, None) => Err(config_err("pump.rabi", format!("no pump amplitude given: {EXCLUSIVE_RULE}"))),
            (Some(_), Some(_)) => Err(config_err("pump", format!("`rabi` and `power_dbm` are mutually exclusive: {EXCLUSIVE_RULE}"))),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let sweep = self.sweep.ok_or_else(|| config_err("sweep", "sweep2d needs a [sweep] block"))?;
        let amplitude_axis = matches!(sweep.y, YKind::PumpPowerDbm | YKind::PumpRabi);
        let rabi = if amplitude_axis {
            if self.pump.rabi.is_some() || self.pump.power_dbm.is_some() {
                return Err(config_err("pump", format!("the pump amplitude is set by the sweep axis `{}`", sweep.y)));
            }
            if sweep.y == YKind::PumpPowerDbm && self.pump.k.is_none() {
                return Err(config_err("pump.k", "a pump_power_dbm axis needs `k`"));
            }
            0.0
        } else {
            self.fixed_rabi()?
        };
        let spec = GridSpec {
            x: self.probe,
            y_kind: sweep.y,
            y: Axis::new(sweep.start, sweep.stop, sweep.points),
            device: self.device.clone(),
            pump: PumpContext { omega_pump: self.pump.omega_pump, rabi, k: self.pump.k },
            n_phases: self.engine.n_phases,
        };
        spec.validate().map_err(|e| match e {
            Error::InvalidParams { field: "y", reason } => config_err("sweep", reason),
            Error::TransmonRegime { .. } => config_err("sweep", e.to_string()),
            other => device_err(other),
        })?;
        Ok(spec)
    }

    /// Output format: command line, then config, then the path extension.
    pub fn format(&self, flag: Option<Format>, path: &Path) -> Format {
        flag.or(self.output.format).unwrap_or_else(|| Format::from_path(path))
    }
}
