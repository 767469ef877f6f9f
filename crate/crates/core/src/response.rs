//! Linear response of the driven steady state to a weak probe and the
//! resulting reflection coefficient.
//!
//! The susceptibility is the Kubo integral
//!
//! ```text
//! χ(δ) ∝ i ∫₀^∞ dt e^{iδt} Tr{Σ₋ e^{Lt} [Σ_p, ρ_ss]}
//! ```
//!
//! evaluated exactly through the resolvent of L. `δ` is the probe detuning
//! from the pump. The overall sign is pinned by the unpumped two-level atom,
//! whose reflection must be `r = 1 − Γ₁/(γ − iΔ)` (`r = −1` on resonance
//! without dephasing); see [`KUBO_SIGN`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, steady_state, vec_of, DensityMatrix, Liouvillian};
use crate::model::{build_pump_frame_model, ghz_to_angular, mhz_to_angular, DeviceParams, PumpFrameModel};

/// Sign relating `r − 1` to the literal Kubo integral. With the rotating
/// frame and vectorization used here the literal integral gives `r = 3` for
/// a resonant unpumped atom without dephasing; the physical mirror response
/// is `r = −1`, hence the minus sign.
pub const KUBO_SIGN: f64 = -1.0;

/// Relative detuning offset (in units of γ) applied when the resolvent
/// cannot be factorized.
pub const SINGULAR_OFFSET: f64 = 1e-6;

/// Default number of pump phases in the phase average.
pub const DEFAULT_PHASES: usize = 4;

/// Reflection of a two-level atom without pump, `1 − Γ₁/(γ − iΔ)` with Δ the
/// angular probe detuning from ω₁₀ and rates in the same units.
pub fn two_level_reflection(gamma1: f64, gamma: f64, delta: f64) -> C64 {
    C64::new(1.0, 0.0) - C64::new(gamma1, 0.0) / C64::new(gamma, -delta)
}

/// Stationary state of a pumped model together with everything needed to
/// evaluate its susceptibility at many probe frequencies.
#[derive(Debug, Clone)]
pub struct DrivenState {
    pub model: PumpFrameModel,
    pub liouvillian: Liouvillian,
    pub rho_ss: DensityMatrix,
    /// vec([Σ_p, ρ_ss])
    source: DVector<C64>,
    /// Row picking Tr(Σ₋ ·) out of a vectorized operator.
    readout: DVector<C64>,
    /// L − γ |ρ_ss⟩⟩⟨⟨1|: the zero mode of L moved to −γ. Acting on traceless
    /// vectors it agrees with L, but stays invertible at δ = 0.
    deflated: DMatrix<C64>,
    gamma: f64,
}

impl DrivenState {
    pub fn new(params: &DeviceParams, model: PumpFrameModel) -> Result<Self> {
        let liouvillian = build_liouvillian(&model, params)?;
        let rho_ss = steady_state(&liouvillian)?;
        Ok(Self::from_parts(model, liouvillian, rho_ss, mhz_to_angular(params.gamma())))
    }

    pub fn from_parts(
        model: PumpFrameModel,
        liouvillian: Liouvillian,
        rho_ss: DensityMatrix,
        gamma: f64,
    ) -> Self {
        let n = model.n_levels();
        let sp = model.sigma_p.matrix();
        let rho = rho_ss.matrix();
        let source = vec_of(&(sp * rho - rho * sp));
        // Tr(A X) = Σ_ij A_ji X_ij = vec(Aᵀ)·vec(X)
        let readout = vec_of(&model.sigma_minus.matrix().transpose());
        let trace = Liouvillian::trace_row(n);
        let deflated = liouvillian.matrix() - rho_ss.to_vec() * trace.transpose() * C64::new(gamma, 0.0);
        Self { model, liouvillian, rho_ss, source, readout, deflated, gamma }
    }

    /// χ at angular probe detuning `delta` from the pump, in seconds
    /// (so that `Γ₁χ` is dimensionless with Γ₁ in rad/s).
    pub fn susceptibility_at(&self, delta: f64) -> Result<C64> {
        match self.resolvent_trace(delta) {
            Some(z) => Ok(z),
            None => {
                let shifted = delta + SINGULAR_OFFSET * self.gamma;
                log::warn!(
                    "resolvent singular at delta = {delta:.6e} rad/s; retrying at {shifted:.6e}"
                );
                self.resolvent_trace(shifted).ok_or(Error::ResolventSingular { delta })
            }
        }
    }

    fn resolvent_trace(&self, delta: f64) -> Option<C64> {
        let d = self.deflated.nrows();
        let mut a = self.deflated.clone();
        for k in 0..d {
            a[(k, k)] += C64::new(0.0, delta);
        }
        let lu = a.lu();
        if lu_is_singular(lu.u().diagonal().as_slice()) {
            return None;
        }
        let x = lu.solve(&self.source)?;
        // ∫₀^∞ e^{iδt} e^{Lt} dt = −(L + iδ)^{-1} on traceless input
        let literal = C64::new(0.0, 1.0) * -self.readout.dot(&x);
        Some(literal * KUBO_SIGN)
    }
}

fn lu_is_singular(pivots: &[C64]) -> bool {
    let max = pivots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min = pivots.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    !(max > 0.0) || !min.is_finite() || min <= 1e-14 * max
}

/// χ(ω_p) for a prepared steady state; `omega_p` in cyclic GHz.
pub fn susceptibility(
    l: &Liouvillian,
    rho_ss: &DensityMatrix,
    model: &PumpFrameModel,
    omega_p: f64,
    gamma: f64,
) -> Result<C64> {
    let state = DrivenState::from_parts(model.clone(), l.clone(), rho_ss.clone(), gamma);
    state.susceptibility_at(ghz_to_angular(omega_p - model.omega_pump))
}

/// Pump phases 2πj/M.
pub fn pump_phases(m_phases: usize) -> Vec<f64> {
    (0..m_phases).map(|j| 2.0 * PI * j as f64 / m_phases as f64).collect()
}

/// Steady states for every pump phase of the average.
pub fn phase_states(
    params: &DeviceParams,
    omega_pump: f64,
    rabi: f64,
    m_phases: usize,
) -> Result<Vec<DrivenState>> {
    if m_phases == 0 {
        return Err(Error::InvalidParams { field: "n_phases", reason: "must be at least 1".into() });
    }
    pump_phases(m_phases)
        .into_iter()
        .map(|phi| DrivenState::new(params, build_pump_frame_model(params, omega_pump, rabi, phi)?))
        .collect()
}

/// Mean of 1 + Γ₁χ_j over the prepared pump phases.
pub fn averaged_reflection(states: &[DrivenState], gamma1: f64, omega_pump: f64, omega_p: f64) -> Result<C64> {
    let delta = ghz_to_angular(omega_p - omega_pump);
    let g1 = mhz_to_angular(gamma1);
    let mut sum = C64::new(0.0, 0.0);
    for s in states {
        sum += C64::new(1.0, 0.0) + s.susceptibility_at(delta)? * g1;
    }
    Ok(sum / states.len() as f64)
}

/// r(ω_p) averaged over `m_phases` equally spaced pump phases.
///
/// The average removes the part of the response driven by the Σ₋ component
/// of Σ_p; that part carries a factor e^{2iφ}, so any M ≥ 3 cancels it exactly.
pub fn phase_averaged_reflection(
    params: &DeviceParams,
    omega_pump: f64,
    rabi: f64,
    omega_p: f64,
    m_phases: usize,
) -> Result<C64> {
    let states = phase_states(params, omega_pump, rabi, m_phases)?;
    averaged_reflection(&states, params.gamma1, omega_pump, omega_p)
}

/// Pump settings recorded with a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSettings {
    /// GHz
    pub omega_pump: f64,
    /// Ω_pump/2π, MHz
    pub rabi: f64,
    pub n_phases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSpectrum {
    /// GHz, strictly increasing.
    pub probe_freqs: Vec<f64>,
    pub r_values: Vec<C64>,
    pub pump: PumpSettings,
    pub device: DeviceParams,
}

impl ReflectionSpectrum {
    pub fn abs(&self) -> Vec<f64> {
        self.r_values.iter().map(|r| r.norm()).collect()
    }

    /// (frequency, |r|) of the largest |r|.
    pub fn max_abs(&self) -> (f64, f64) {
        self.extreme(|a, b| a > b)
    }

    /// (frequency, |r|) of the smallest |r|.
    pub fn min_abs(&self) -> (f64, f64) {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> (f64, f64) {
        let mut best = (self.probe_freqs[0], self.r_values[0].norm());
        for (f, r) in self.probe_freqs.iter().zip(&self.r_values) {
            if better(r.norm(), best.1) {
                best = (*f, r.norm());
            }
        }
        best
    }

    /// Contiguous frequency intervals where |r| > 1, as (first, last) grid
    /// frequencies inside each interval.
    pub fn gain_bands(&self) -> Vec<(f64, f64)> {
        let mut bands = Vec::new();
        let mut start = None;
        for (i, r) in self.r_values.iter().enumerate() {
            match (r.norm() > 1.0, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    bands.push((self.probe_freqs[s], self.probe_freqs[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            bands.push((self.probe_freqs[s], *self.probe_freqs.last().unwrap()));
        }
        bands
    }

    /// Indices of strict local minima of |r| (interior points only).
    pub fn local_minima(&self) -> Vec<usize> {
        local_minima(&self.abs())
    }
}

/// Indices of strict interior local minima.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// Evenly spaced grid including both end points.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Phase-averaged reflection over a probe grid. The steady state for each
/// pump phase is computed once; every probe point costs one LU factorization
/// per phase.
pub fn spectrum(
    params: &DeviceParams,
    omega_pump: f64,
    rabi: f64,
    probe_grid: &[f64],
    m_phases: usize,
) -> Result<ReflectionSpectrum> {
    if probe_grid.is_empty() || probe_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid);
    }
    let states = phase_states(params, omega_pump, rabi, m_phases)?;
    let r_values = probe_grid
        .iter()
        .map(|&wp| averaged_reflection(&states, params.gamma1, omega_pump, wp))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReflectionSpectrum {
        probe_freqs: probe_grid.to_vec(),
        r_values,
        pump: PumpSettings { omega_pump, rabi, n_phases: m_phases },
        device: params.clone(),
    })
}
