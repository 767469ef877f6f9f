//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 oracle mismatch.

pub mod config;
pub mod format;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::oracle::{two_tone_reflection, LINEARITY_TOL};
use crate::response::{phase_averaged_reflection, spectrum, ReflectionSpectrum};
use crate::sweep::{calibrate, grid_overlays, run_grid, Calibration, SweepGrid};
use crate::Error;

pub use config::RunConfig;
pub use format::{Format, FormatError, ResultTable};

/// Largest |r_response − r_oracle| accepted by `oracle-check`.
pub const ORACLE_TOL: f64 = LINEARITY_TOL;

#[derive(Debug, Parser)]
#[command(name = "mollow", version, about = "Probe reflection from a pumped transmon at the end of a waveguide")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; omitted fields take the reference-device defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for grid evaluation (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (overrides output.path).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (overrides output.format and the file extension).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Reflection spectrum at a fixed pump.
    Spectrum,
    /// Probe frequency against one pump or device parameter.
    Sweep2d,
    /// Find the pump amplitude with the largest gain and the matching k.
    Calibrate,
    /// Compare linear response with the time-domain two-tone simulation.
    OracleCheck,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("cannot write `{path}`: {source}")]
    Output { path: PathBuf, source: FormatError },
    #[error("oracle mismatch: max |Δr| = {max:.3e} is not below {tol:.0e}")]
    OracleMismatch { max: f64, tol: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Output { .. } => 2,
            Self::Numerical(_) => 3,
            Self::OracleMismatch { .. } => 4,
        }
    }
}

/// Parses arguments and runs one command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.output.path.clone());
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match cli.command {
        Command::Spectrum => {
            let path = out.ok_or_else(missing_output)?;
            let s = cmd_spectrum(&cfg, &path, cfg.format(cli.format, &path))?;
            print_spectrum_summary(&mut stdout, &s);
        }
        Command::Sweep2d => {
            let path = out.ok_or_else(missing_output)?;
            let workers = cli.workers.unwrap_or_else(default_workers);
            let g = cmd_sweep2d(&cfg, &path, cfg.format(cli.format, &path), workers)?;
            let _ = writeln!(
                stdout,
                "grid {} x {} written to {} ({} failed points)",
                g.ny(),
                g.nx(),
                path.display(),
                g.errors.len()
            );
        }
        Command::Calibrate => {
            let fmt = out.as_deref().map(|p| cfg.format(cli.format, p));
            let c = cmd_calibrate(&cfg, out.as_deref().zip(fmt))?;
            let _ = writeln!(
                stdout,
                "rabi_star = {:.3} MHz\nk = {:.6e} MHz/sqrt(W) at {} dBm\nmax |r| = {:.6} at {:.6} GHz",
                c.rabi_star, c.k, c.reference_power_dbm, c.max_gain, c.probe_at_max
            );
        }
        Command::OracleCheck => {
            let fmt = out.as_deref().map(|p| cfg.format(cli.format, p));
            let rows = oracle_rows(&cfg)?;
            if let Some((p, f)) = out.as_deref().zip(fmt) {
                write_oracle_table(p, f, &rows).map_err(|source| CliError::Output { path: p.into(), source })?;
            }
            let _ = writeln!(stdout, "point  rabi_mhz  omega_p_ghz  |r_response - r_oracle|");
            for r in &rows {
                let _ = writeln!(stdout, "{:>5}  {:>8.3}  {:>11.6}  {:.3e}", r.point, r.rabi_mhz, r.omega_p_ghz, r.abs_diff);
            }
            let max = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
            if !(max < ORACLE_TOL) {
                return Err(CliError::OracleMismatch { max, tol: ORACLE_TOL });
            }
        }
    }
    Ok(())
}

fn missing_output() -> CliError {
    CliError::Config { field: "output.path".into(), message: "no output file; set output.path or pass --out".into() }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Run parameters written alongside every result.
fn base_metadata(cfg: &RunConfig, command: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("command".into(), command.into());
    if let Ok(serde_json::Value::Object(device)) = serde_json::to_value(&cfg.device) {
        for (k, v) in device {
            let v = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
            m.insert(format!("device.{k}"), v);
        }
    }
    m.insert("engine.n_phases".into(), cfg.engine.n_phases.to_string());
    m
}

fn write_table(table: &ResultTable, path: &Path, fmt: Format) -> Result<(), CliError> {
    table.write(path, fmt).map_err(|source| CliError::Output { path: path.into(), source })
}

pub fn cmd_spectrum(cfg: &RunConfig, path: &Path, fmt: Format) -> Result<ReflectionSpectrum, CliError> {
    let omega_pump = cfg.omega_pump()?;
    let rabi = cfg.fixed_rabi()?;
    let s = spectrum(&cfg.device, omega_pump, rabi, &cfg.probe.values(), cfg.engine.n_phases)?;
    let mut metadata = base_metadata(cfg, "spectrum");
    metadata.insert("pump.omega_pump_ghz".into(), omega_pump.to_string());
    let table = ResultTable {
        version: env!("CARGO_PKG_VERSION").into(),
        x: format::AxisData { name: "probe_freq_ghz".into(), values: s.probe_freqs.clone() },
        y: format::AxisData { name: "pump_rabi_mhz".into(), values: vec![rabi] },
        metadata,
        abs_r: s.abs(),
        complex: cfg.output.include_complex.then(|| s.r_values.clone()),
    };
    write_table(&table, path, fmt)?;
    Ok(s)
}

fn print_spectrum_summary(w: &mut impl Write, s: &ReflectionSpectrum) {
    let (min, at_min) = s.min_abs();
    let (max, at_max) = s.max_abs();
    let _ = writeln!(w, "min |r| = {min:.6} at {at_min:.6} GHz");
    let _ = writeln!(w, "max |r| = {max:.6} at {at_max:.6} GHz");
    let bands = s.gain_bands();
    if bands.is_empty() {
        let _ = writeln!(w, "gain bands: none");
    }
    for (lo, hi) in bands {
        let _ = writeln!(w, "gain band: {lo:.6} - {hi:.6} GHz");
    }
}

/// Path of the overlay file next to a grid file.
pub fn overlay_path(path: &Path, fmt: Format) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("grid");
    path.with_file_name(format!("{stem}_overlays.{}", fmt.extension()))
}

pub fn grid_table(g: &SweepGrid, include_complex: bool, mut metadata: BTreeMap<String, String>) -> ResultTable {
    use crate::sweep::{PumpFrequency, YKind};
    let pump = &g.spec.pump;
    // Only pump quantities that do not vary along y.
    match (g.spec.y_kind, pump.omega_pump) {
        (YKind::PumpFreq, _) | (YKind::FluxRatio, PumpFrequency::Resonant) => {}
        (_, f) => {
            if let Ok(w) = f.resolve(&g.spec.device) {
                metadata.insert("pump.omega_pump_ghz".into(), w.to_string());
            }
        }
    }
    if !matches!(g.spec.y_kind, YKind::PumpPowerDbm | YKind::PumpRabi) {
        metadata.insert("pump.rabi_mhz".into(), pump.rabi.to_string());
    }
    if let Some(k) = pump.k {
        metadata.insert("pump.k".into(), k.to_string());
    }
    for e in &g.errors {
        metadata.insert(format!("error.{}.{}", e.y_index, e.x_index), e.message.clone());
    }
    ResultTable {
        version: g.version.clone(),
        x: format::AxisData { name: "probe_freq_ghz".into(), values: g.spec.x.values() },
        y: format::AxisData { name: g.spec.y_kind.label().into(), values: g.spec.y.values() },
        metadata,
        abs_r: g.values.clone(),
        complex: include_complex.then(|| g.complex.clone()),
    }
}

pub fn cmd_sweep2d(cfg: &RunConfig, path: &Path, fmt: Format, workers: usize) -> Result<SweepGrid, CliError> {
    let spec = cfg.grid_spec()?;
    if workers == 0 {
        return Err(CliError::Config { field: "--workers".into(), message: "must be at least 1".into() });
    }
    let g = run_grid(&spec, workers)?;
    let table = grid_table(&g, cfg.output.include_complex, base_metadata(cfg, "sweep2d"));
    write_table(&table, path, fmt)?;
    let overlays = grid_overlays(&spec)?;
    let opath = overlay_path(path, fmt);
    format::write_overlays(&opath, fmt, spec.y_kind.label(), &overlays)
        .map_err(|source| CliError::Output { path: opath, source })?;
    Ok(g)
}

pub fn cmd_calibrate(cfg: &RunConfig, out: Option<(&Path, Format)>) -> Result<Calibration, CliError> {
    let (lo, hi) = (cfg.calibrate.rabi_min, cfg.calibrate.rabi_max);
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Config { field: "calibrate".into(), message: "need 0 < rabi_min < rabi_max".into() });
    }
    let c = calibrate(&cfg.device, cfg.omega_pump()?, (lo, hi), cfg.engine.n_phases)?;
    if let Some((path, fmt)) = out {
        write_record(path, fmt, &c).map_err(|source| CliError::Output { path: path.into(), source })?;
    }
    Ok(c)
}

/// One serialisable record: a CSV header plus one line, or a JSON object.
fn write_record<T: Serialize>(path: &Path, fmt: Format, value: &T) -> Result<(), FormatError> {
    write_records(path, fmt, std::slice::from_ref(value), false)
}

fn write_records<T: Serialize>(path: &Path, fmt: Format, values: &[T], as_list: bool) -> Result<(), FormatError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match fmt {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut file);
            for v in values {
                w.serialize(v)?;
            }
            w.flush()?;
        }
        Format::Json if as_list => serde_json::to_writer_pretty(&mut file, values)?,
        Format::Json => serde_json::to_writer_pretty(&mut file, &values[0])?,
    }
    if fmt == Format::Json {
        writeln!(file)?;
    }
    file.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub point: usize,
    pub rabi_mhz: f64,
    pub omega_p_ghz: f64,
    pub re_response: f64,
    pub im_response: f64,
    pub re_oracle: f64,
    pub im_oracle: f64,
    pub abs_diff: f64,
}

/// Sample used when the config lists no points: (Ω/2π, δ/2π) in MHz.
pub const DEFAULT_ORACLE_POINTS: [(f64, f64); 3] = [(60.0, -45.0), (120.0, -100.0), (200.0, 150.0)];

pub fn oracle_rows(cfg: &RunConfig) -> Result<Vec<OracleRow>, CliError> {
    cfg.oracle
        .validate(&cfg.device)
        .map_err(|e| CliError::Config { field: "oracle".into(), message: e.to_string() })?;
    let omega_pump = cfg.omega_pump()?;
    let points: Vec<(f64, f64)> = if cfg.oracle_points.is_empty() {
        DEFAULT_ORACLE_POINTS.to_vec()
    } else {
        cfg.oracle_points.iter().map(|p| (p.rabi, p.detuning)).collect()
    };
    points
        .into_iter()
        .enumerate()
        .map(|(i, (rabi, det))| {
            let wp = omega_pump + det * 1e-3;
            let a = phase_averaged_reflection(&cfg.device, omega_pump, rabi, wp, cfg.engine.n_phases)?;
            let b: C64 = two_tone_reflection(&cfg.device, omega_pump, rabi, wp, &cfg.oracle)?;
            Ok(OracleRow {
                point: i,
                rabi_mhz: rabi,
                omega_p_ghz: wp,
                re_response: a.re,
                im_response: a.im,
                re_oracle: b.re,
                im_oracle: b.im,
                abs_diff: (a - b).norm(),
            })
        })
        .collect()
}

fn write_oracle_table(path: &Path, fmt: Format, rows: &[OracleRow]) -> Result<(), FormatError> {
    write_records(path, fmt, rows, true)
}
