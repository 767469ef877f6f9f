//! Parameter grids, power calibration and analytic overlays.
//!
//! A grid always has the probe frequency on its x axis and one pump or device
//! parameter on its y axis. Rows are independent tasks; they are evaluated on
//! a worker pool and assembled in index order, so the result does not depend
//! on the number of workers.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{DeviceParams, MIN_EJ_OVER_EC};
use crate::response::{averaged_reflection, linspace, phase_states, DEFAULT_PHASES};

/// Pump power used to translate the calibrated Rabi frequency into k.
pub const REFERENCE_POWER_DBM: f64 = -114.0;

/// Ω/2π = k√P with P in watts; `k` in MHz/√W.
pub fn dbm_to_rabi(p_dbm: f64, k: f64) -> f64 {
    k * 10f64.powf((p_dbm - 30.0) / 10.0).sqrt()
}

/// Inverse of [`dbm_to_rabi`] for k.
pub fn k_from_rabi(rabi: f64, p_dbm: f64) -> f64 {
    rabi / 10f64.powf((p_dbm - 30.0) / 10.0).sqrt()
}

/// Pump frequency: fixed, or locked to ω₁₀ of the device at its flux.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PumpFrequency {
    #[default]
    Resonant,
    Fixed(f64),
}

impl PumpFrequency {
    pub fn resolve(&self, params: &DeviceParams) -> Result<f64> {
        match *self {
            Self::Resonant => params.omega10(),
            Self::Fixed(f) => Ok(f),
        }
    }
}

impl Serialize for PumpFrequency {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Resonant => s.serialize_str("resonant"),
            Self::Fixed(f) => s.serialize_f64(*f),
        }
    }
}

impl<'de> Deserialize<'de> for PumpFrequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(f) => Ok(Self::Fixed(f)),
            Raw::Text(t) if t == "resonant" => Ok(Self::Resonant),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a frequency in GHz or \"resonant\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YKind {
    PumpPowerDbm,
    PumpRabi,
    PumpFreq,
    FluxRatio,
}

impl YKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PumpPowerDbm => "pump_power_dbm",
            Self::PumpRabi => "pump_rabi_mhz",
            Self::PumpFreq => "pump_freq_ghz",
            Self::FluxRatio => "flux_ratio",
        }
    }
}

impl fmt::Display for YKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points.max(2) - 1) as f64
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if self.points < 2 || !(self.stop > self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidParams {
                field: name,
                reason: "axis needs at least 2 points and start < stop".into(),
            });
        }
        Ok(())
    }
}

/// Pump settings that stay fixed across a grid (except for the quantity on
/// the y axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpContext {
    pub omega_pump: PumpFrequency,
    /// Ω/2π in MHz when the y axis does not set it.
    pub rabi: f64,
    /// MHz/√W, needed for a power axis.
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Probe frequency, GHz.
    pub x: Axis,
    pub y_kind: YKind,
    pub y: Axis,
    pub device: DeviceParams,
    pub pump: PumpContext,
    pub n_phases: usize,
}

impl GridSpec {
    /// Probe on x, pump power on y, with default resolution (201 × 101).
    pub fn power_sweep(device: DeviceParams, k: f64, probe: (f64, f64), power: (f64, f64)) -> Self {
        Self {
            x: Axis::new(probe.0, probe.1, 201),
            y_kind: YKind::PumpPowerDbm,
            y: Axis::new(power.0, power.1, 101),
            device,
            pump: PumpContext { omega_pump: PumpFrequency::Resonant, rabi: 0.0, k: Some(k) },
            n_phases: DEFAULT_PHASES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.x.validate("x")?;
        self.y.validate("y")?;
        if self.n_phases == 0 {
            return Err(Error::InvalidParams { field: "n_phases", reason: "must be at least 1".into() });
        }
        if self.y_kind == YKind::PumpPowerDbm && !matches!(self.pump.k, Some(k) if k > 0.0) {
            return Err(Error::InvalidParams { field: "k", reason: "a power axis needs k > 0".into() });
        }
        if self.y_kind == YKind::FluxRatio {
            for f in self.y.values() {
                let p = DeviceParams { flux_ratio: f, ..self.device.clone() };
                let ratio = p.e_j() / p.e_c;
                if ratio < MIN_EJ_OVER_EC {
                    return Err(Error::TransmonRegime { ratio, min: MIN_EJ_OVER_EC });
                }
            }
        }
        Ok(())
    }

    /// Device, pump frequency and Rabi frequency for row value `y`.
    pub fn row_setup(&self, y: f64) -> Result<(DeviceParams, f64, f64)> {
        let mut device = self.device.clone();
        let mut omega_pump = self.pump.omega_pump;
        let mut rabi = self.pump.rabi;
        match self.y_kind {
            YKind::PumpPowerDbm => rabi = dbm_to_rabi(y, self.pump.k.unwrap_or(0.0)),
            YKind::PumpRabi => rabi = y,
            YKind::PumpFreq => omega_pump = PumpFrequency::Fixed(y),
            YKind::FluxRatio => device.flux_ratio = y,
        }
        let w = omega_pump.resolve(&device)?;
        Ok((device, w, rabi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub y_index: usize,
    pub x_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spec: GridSpec,
    /// |r|, row-major (y then x). Failed points are NaN.
    pub values: Vec<f64>,
    /// Complex r in the same layout.
    pub complex: Vec<C64>,
    pub errors: Vec<PointError>,
    pub version: String,
}

impl SweepGrid {
    pub fn nx(&self) -> usize {
        self.spec.x.points
    }

    pub fn ny(&self) -> usize {
        self.spec.y.points
    }

    pub fn at(&self, iy: usize, ix: usize) -> f64 {
        self.values[iy * self.nx() + ix]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        &self.values[iy * self.nx()..(iy + 1) * self.nx()]
    }

    pub fn complex_row(&self, iy: usize) -> &[C64] {
        &self.complex[iy * self.nx()..(iy + 1) * self.nx()]
    }
}

type Row = (Vec<C64>, Vec<PointError>);

fn evaluate_row(spec: &GridSpec, iy: usize, y: f64, xs: &[f64]) -> Row {
    let nan = C64::new(f64::NAN, f64::NAN);
    let fail_all = |e: Error| {
        let errors = (0..xs.len())
            .map(|ix| PointError { y_index: iy, x_index: ix, message: e.to_string() })
            .collect();
        (vec![nan; xs.len()], errors)
    };
    let (device, omega_pump, rabi) = match spec.row_setup(y) {
        Ok(v) => v,
        Err(e) => return fail_all(e),
    };
    let states = match phase_states(&device, omega_pump, rabi, spec.n_phases) {
        Ok(s) => s,
        Err(e) => return fail_all(e),
    };
    let mut values = Vec::with_capacity(xs.len());
    let mut errors = Vec::new();
    for (ix, &wp) in xs.iter().enumerate() {
        match averaged_reflection(&states, device.gamma1, omega_pump, wp) {
            Ok(r) if r.re.is_finite() && r.im.is_finite() => values.push(r),
            Ok(r) => {
                errors.push(PointError { y_index: iy, x_index: ix, message: format!("non-finite r = {r}") });
                values.push(nan);
            }
            Err(e) => {
                errors.push(PointError { y_index: iy, x_index: ix, message: e.to_string() });
                values.push(nan);
            }
        }
    }
    (values, errors)
}

/// Evaluates every grid point with `workers` threads (0 means available
/// parallelism). Point failures become NaN entries plus an error record.
pub fn run_grid(spec: &GridSpec, workers: usize) -> Result<SweepGrid> {
    use rayon::prelude::*;

    spec.validate()?;
    let xs = spec.x.values();
    let ys = spec.y.values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams { field: "workers", reason: e.to_string() })?;
    let rows: Vec<Row> = pool.install(|| {
        ys.par_iter()
            .enumerate()
            .map(|(iy, &y)| evaluate_row(spec, iy, y, &xs))
            .collect()
    });

    let mut complex = Vec::with_capacity(xs.len() * ys.len());
    let mut errors = Vec::new();
    for (vals, errs) in rows {
        complex.extend(vals);
        errors.extend(errs);
    }
    for e in &errors {
        log::warn!("grid point (y={}, x={}) failed: {}", e.y_index, e.x_index, e.message);
    }
    Ok(SweepGrid {
        spec: spec.clone(),
        values: complex.iter().map(|r| r.norm()).collect(),
        complex,
        errors,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Analytic guide lines for one pump setting. All frequencies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlays {
    pub omega_pump: f64,
    /// ω_pump − Ω, ω_pump, ω_pump + Ω
    pub triplet: [f64; 3],
    /// ω_pump ∓ √(2Γ₁γ³)/Ω; `None` without pump.
    pub inner_boundaries: Option<[f64; 2]>,
    /// ω₂₁ ∓ Ω/2
    pub autler_townes: [f64; 2],
}

impl Overlays {
    /// Frequency of the photon scattered by the four-photon process,
    /// ω_s = 2ω_pump − ω_p.
    pub fn sideband(&self, omega_p: f64) -> f64 {
        2.0 * self.omega_pump - omega_p
    }
}

/// √(2Γ₁γ³)/Ω in MHz (rates and Ω in MHz).
pub fn inner_boundary_offset(params: &DeviceParams, rabi: f64) -> f64 {
    (2.0 * params.gamma1 * params.gamma().powi(3)).sqrt() / rabi
}

pub fn overlays_for(params: &DeviceParams, omega_pump: f64, rabi: f64) -> Result<Overlays> {
    let half_width = rabi * 1e-3;
    let inner = (rabi > 0.0).then(|| {
        let b = inner_boundary_offset(params, rabi) * 1e-3;
        [omega_pump - b, omega_pump + b]
    });
    let w21 = params.omega21()?;
    Ok(Overlays {
        omega_pump,
        triplet: [omega_pump - half_width, omega_pump, omega_pump + half_width],
        inner_boundaries: inner,
        autler_townes: [w21 - half_width / 2.0, w21 + half_width / 2.0],
    })
}

/// Overlays for every row of a grid.
pub fn grid_overlays(spec: &GridSpec) -> Result<Vec<(f64, Overlays)>> {
    spec.y
        .values()
        .into_iter()
        .map(|y| {
            let (device, w, rabi) = spec.row_setup(y)?;
            Ok((y, overlays_for(&device, w, rabi)?))
        })
        .collect()
}

/// Result of the power calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Ω*/2π in MHz maximising the gain between the triplet lines.
    pub rabi_star: f64,
    /// MHz/√W such that Ω* is reached at the reference power.
    pub k: f64,
    pub reference_power_dbm: f64,
    /// Largest |r| found.
    pub max_gain: f64,
    /// Probe frequency of the largest |r|, GHz.
    pub probe_at_max: f64,
}

/// Largest |r| over probe frequencies within ω_pump ± 1.1Ω for one Ω, as
/// (|r|, ω_p). A grid search is refined by golden-section search around the
/// best grid point.
pub fn max_gain_at(params: &DeviceParams, omega_pump: f64, rabi: f64, n_phases: usize, points: usize) -> Result<(f64, f64)> {
    let states = phase_states(params, omega_pump, rabi, n_phases)?;
    let span = 1.1 * rabi.max(1.0) * 1e-3;
    let grid = linspace(omega_pump - span, omega_pump + span, points);
    let eval = |wp: f64| averaged_reflection(&states, params.gamma1, omega_pump, wp).map(|r| r.norm());
    let mut best = (f64::NEG_INFINITY, omega_pump);
    for &wp in &grid {
        let a = eval(wp)?;
        if a > best.0 {
            best = (a, wp);
        }
    }
    let step = grid[1] - grid[0];
    let (f, x) = golden_max(|x| eval(x).unwrap_or(f64::NEG_INFINITY), best.1 - step, best.1 + step, 1e-7);
    Ok(if f > best.0 { (f, x) } else { best })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (f(x), x)
}

/// Scans Ω over `range` (MHz), finds the Ω* with the largest gain and solves
/// k from Ω* = k√P at [`REFERENCE_POWER_DBM`].
pub fn calibrate(params: &DeviceParams, omega_pump: f64, range: (f64, f64), n_phases: usize) -> Result<Calibration> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams { field: "rabi_range", reason: "need 0 < lo < hi".into() });
    }
    let coarse = linspace(lo, hi, ((hi - lo) / 5.0).ceil() as usize + 1);
    let mut best = (f64::NEG_INFINITY, lo, omega_pump);
    for &rabi in &coarse {
        let (g, wp) = max_gain_at(params, omega_pump, rabi, n_phases, 441)?;
        if g > best.0 {
            best = (g, rabi, wp);
        }
    }
    let step = coarse[1] - coarse[0];
    let a = (best.1 - step).max(lo);
    let b = (best.1 + step).min(hi);
    let (g, rabi) = golden_max(
        |x| max_gain_at(params, omega_pump, x, n_phases, 441).map(|v| v.0).unwrap_or(f64::NEG_INFINITY),
        a,
        b,
        0.05,
    );
    if g > best.0 {
        let (g, wp) = max_gain_at(params, omega_pump, rabi, n_phases, 441)?;
        best = (g, rabi, wp);
    }
    Ok(Calibration {
        rabi_star: best.1,
        k: k_from_rabi(best.1, REFERENCE_POWER_DBM),
        reference_power_dbm: REFERENCE_POWER_DBM,
        max_gain: best.0,
        probe_at_max: best.2,
    })
}
