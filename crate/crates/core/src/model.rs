//! Transmon device physics: flux-tuned Josephson energy, transition
//! frequencies, the anharmonic ladder seen from the pump rotating frame, and
//! the ladder operators.
//!
//! User-facing frequencies are cyclic (GHz for transition frequencies, MHz for
//! rates and Rabi frequencies). Everything stored on [`PumpFrameModel`] is
//! angular, in rad/s. [`build_pump_frame_model`] is the only place where the
//! conversion happens.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::Operator;

/// Smallest E_J/E_C for which the transmon asymptotic formula is accepted.
pub const MIN_EJ_OVER_EC: f64 = 10.0;
/// Largest supported number of levels.
pub const MAX_LEVELS: usize = 12;

/// Cyclic GHz to rad/s.
pub fn ghz_to_angular(f: f64) -> f64 {
    2.0 * PI * f * 1e9
}

/// Cyclic MHz to rad/s.
pub fn mhz_to_angular(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Static description of the device.
///
/// Defaults are the extracted device parameters of the reference sample
/// (E_J/h = 7.97 GHz, E_C/h = 0.39 GHz, Γ₁/2π = 45 MHz, Γ_φ/2π = 2.7 MHz) at
/// zero flux, simulated with five levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// E_J/h at zero flux, GHz.
    pub e_j_max: f64,
    /// E_C/h, GHz.
    pub e_c: f64,
    pub n_levels: usize,
    /// Γ₁/2π, MHz.
    pub gamma1: f64,
    /// Γ_φ/2π, MHz.
    pub gamma_phi: f64,
    /// Φ/Φ₀.
    pub flux_ratio: f64,
    /// ω₂₁ − ω₁₀ in GHz. `None` means −E_C.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anharmonicity: Option<f64>,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            e_j_max: 7.97,
            e_c: 0.39,
            n_levels: 5,
            gamma1: 45.0,
            gamma_phi: 2.7,
            flux_ratio: 0.0,
            anharmonicity: None,
        }
    }
}

impl DeviceParams {
    /// Reference device with a chosen number of levels.
    pub fn with_levels(n_levels: usize) -> Self {
        Self { n_levels, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParams { field, reason: reason.into() }
        }
        let finite = [
            ("e_j_max", self.e_j_max),
            ("e_c", self.e_c),
            ("gamma1", self.gamma1),
            ("gamma_phi", self.gamma_phi),
            ("flux_ratio", self.flux_ratio),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(bad(field, "must be finite"));
            }
        }
        if self.e_j_max <= 0.0 {
            return Err(bad("e_j_max", "must be positive"));
        }
        if self.e_c <= 0.0 {
            return Err(bad("e_c", "must be positive"));
        }
        if self.gamma1 <= 0.0 {
            return Err(bad("gamma1", "must be positive"));
        }
        if self.gamma_phi < 0.0 {
            return Err(bad("gamma_phi", "must be non-negative"));
        }
        if !(2..=MAX_LEVELS).contains(&self.n_levels) {
            return Err(bad("n_levels", format!("must lie in 2..={MAX_LEVELS}")));
        }
        if let Some(a) = self.anharmonicity {
            if !a.is_finite() {
                return Err(bad("anharmonicity", "must be finite"));
            }
        }
        let ratio = self.e_j_max / self.e_c;
        if ratio < MIN_EJ_OVER_EC {
            return Err(Error::TransmonRegime { ratio, min: MIN_EJ_OVER_EC });
        }
        Ok(())
    }

    /// Total decoherence rate γ/2π = Γ₁/2 + Γ_φ, MHz.
    pub fn gamma(&self) -> f64 {
        self.gamma1 / 2.0 + self.gamma_phi
    }

    /// Flux-tuned E_J/h, GHz.
    pub fn e_j(&self) -> f64 {
        ej_of_flux(self.e_j_max, self.flux_ratio)
    }

    /// ω₁₀/2π at the configured flux, GHz.
    pub fn omega10(&self) -> Result<f64> {
        omega10(self.e_j(), self.e_c)
    }

    /// ω₂₁ − ω₁₀, GHz.
    pub fn anharmonicity(&self) -> f64 {
        self.anharmonicity.unwrap_or(-self.e_c)
    }

    /// ω₂₁/2π at the configured flux, GHz.
    pub fn omega21(&self) -> Result<f64> {
        Ok(self.omega10()? + self.anharmonicity())
    }
}

/// E_J(Φ) = E_J |cos(πΦ/Φ₀)|.
pub fn ej_of_flux(e_j_max: f64, flux_ratio: f64) -> f64 {
    e_j_max * (PI * flux_ratio).cos().abs()
}

/// ω₁₀/2π ≈ √(8 E_J E_C) − E_C, all in GHz.
pub fn omega10(e_j: f64, e_c: f64) -> Result<f64> {
    let ratio = e_j / e_c;
    if !(ratio >= MIN_EJ_OVER_EC) {
        return Err(Error::TransmonRegime { ratio, min: MIN_EJ_OVER_EC });
    }
    Ok((8.0 * e_j * e_c).sqrt() - e_c)
}

/// Rotating-frame level energies Δ_m in rad/s for a Duffing ladder,
/// Δ_m = 2π [m(ω₁₀ − ω_pump) + α m(m−1)/2], inputs in GHz.
pub fn ladder(omega10: f64, alpha: f64, n_levels: usize, omega_pump: f64) -> Vec<f64> {
    (0..n_levels)
        .map(|m| {
            let m = m as f64;
            ghz_to_angular(m * (omega10 - omega_pump) + alpha * m * (m - 1.0) / 2.0)
        })
        .collect()
}

/// Everything the master equation needs, in the rotating frame of the pump.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpFrameModel {
    /// Δ_m, rad/s.
    pub detunings: Vec<f64>,
    pub sigma_minus: Operator,
    pub sigma_plus: Operator,
    /// Σ_p = −i(Σ₊ − Σ₋).
    pub sigma_p: Operator,
    /// Pump frequency, cyclic GHz.
    pub omega_pump: f64,
    /// Ω_pump/2π, MHz.
    pub omega_pump_rabi: f64,
    /// Pump phase, radians.
    pub pump_phase: f64,
}

impl PumpFrameModel {
    pub fn n_levels(&self) -> usize {
        self.detunings.len()
    }

    /// Ω_pump in rad/s.
    pub fn rabi_angular(&self) -> f64 {
        mhz_to_angular(self.omega_pump_rabi)
    }
}

pub fn build_pump_frame_model(
    params: &DeviceParams,
    omega_pump: f64,
    rabi: f64,
    phase: f64,
) -> Result<PumpFrameModel> {
    params.validate()?;
    if !omega_pump.is_finite() || omega_pump <= 0.0 {
        return Err(Error::InvalidParams {
            field: "omega_pump",
            reason: "must be a positive frequency".into(),
        });
    }
    if !rabi.is_finite() || rabi < 0.0 {
        return Err(Error::InvalidParams { field: "rabi", reason: "must be non-negative".into() });
    }
    let w10 = params.omega10()?;
    let n = params.n_levels;
    let detunings = ladder(w10, params.anharmonicity(), n, omega_pump);
    let sigma_minus = Operator::lowering(n);
    let sigma_plus = sigma_minus.dagger();
    let sigma_p = sigma_plus.sub(&sigma_minus).scale(num_complex::Complex64::new(0.0, -1.0));
    Ok(PumpFrameModel {
        detunings,
        sigma_minus,
        sigma_plus,
        sigma_p,
        omega_pump,
        omega_pump_rabi: rabi,
        pump_phase: phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    #[test]
    fn ej_examples() {
        assert_eq!(ej_of_flux(7.97, 0.0), 7.97);
        assert!(ej_of_flux(7.97, 0.5).abs() < 1e-15);
        assert!((ej_of_flux(7.97, 1.0) - 7.97).abs() < 1e-14);
    }

    #[test]
    fn omega10_examples() {
        let w = omega10(7.97, 0.39).unwrap();
        assert!((w - 4.597).abs() < 5e-4, "{w}");
        assert!((w - 4.59).abs() < 0.01);
        let tuned = omega10(7.97 * (0.3 * PI).cos().abs(), 0.39).unwrap();
        assert!(tuned < w);
        assert!(matches!(omega10(2.0, 0.39), Err(Error::TransmonRegime { .. })));
        assert!(omega10(ej_of_flux(7.97, 0.5), 0.39).is_err());
    }

    #[test]
    fn ladder_examples() {
        let d = ladder(4.59, -0.39, 3, 4.59);
        assert_eq!(d[0], 0.0);
        assert!(d[1].abs() < 1e-6);
        assert!((d[2] - ghz_to_angular(-0.39)).abs() < 1e-3);
        // ω₂₁ = (Δ₂ − Δ₁)/2π + ω_pump
        let w21 = (d[2] - d[1]) / (2.0 * PI * 1e9) + 4.59;
        assert!((w21 - 4.20).abs() < 1e-12);

        assert!(ladder(4.59, 0.0, 6, 4.59).iter().all(|&x| x == 0.0));

        // second evaluation path: level energies in the lab frame minus m photons
        let d = ladder(4.59, -0.39, 5, 4.50);
        let mut lab = 0.0;
        for (m, &dm) in d.iter().enumerate() {
            if m > 0 {
                lab += 4.59 + (m as f64 - 1.0) * -0.39; // ω_{m,m−1}
            }
            let expect = 2.0 * PI * 1e9 * (lab - m as f64 * 4.50);
            assert!((dm - expect).abs() < 1e-6 * (1.0 + expect.abs()), "m={m}");
        }
    }

    #[test]
    fn reference_device_gamma_and_frequencies() {
        let p = DeviceParams::default();
        assert_eq!(p.gamma(), 25.2);
        assert!((p.e_j_max / p.e_c - 20.4).abs() < 0.05);
        assert!((p.omega10().unwrap() - 4.59).abs() < 0.01);
        assert!((p.omega21().unwrap() - 4.2).abs() < 0.01);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let cases = [
            DeviceParams { e_j_max: -1.0, ..Default::default() },
            DeviceParams { e_c: 0.0, ..Default::default() },
            DeviceParams { gamma1: 0.0, ..Default::default() },
            DeviceParams { gamma_phi: -0.1, ..Default::default() },
            DeviceParams { n_levels: 1, ..Default::default() },
            DeviceParams { n_levels: 13, ..Default::default() },
            DeviceParams { e_j_max: 2.0, ..Default::default() },
        ];
        for p in cases {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(DeviceParams::default().validate().is_ok());
    }

    #[test]
    fn flux_near_half_quantum_is_rejected() {
        let p = DeviceParams { flux_ratio: 0.45, ..Default::default() };
        assert!(matches!(p.omega10(), Err(Error::TransmonRegime { .. })));
        assert!(build_pump_frame_model(&p, 4.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn model_examples() {
        let p = DeviceParams::default();
        let w10 = p.omega10().unwrap();
        let m = build_pump_frame_model(&p, w10, 100.0, 0.0).unwrap();
        assert_eq!(m.detunings[0], 0.0);
        assert!(m.detunings[1].abs() < 1e-3);

        let m2 = build_pump_frame_model(&DeviceParams::with_levels(2), w10, 1.0, 0.0).unwrap();
        let s = m2.sigma_minus.matrix();
        assert_eq!(s[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(s[(1, 0)], C64::new(0.0, 0.0));
        assert_eq!(s[(0, 0)], C64::new(0.0, 0.0));

        let s = m.sigma_minus.matrix();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if j == i + 1 { (j as f64).sqrt() } else { 0.0 };
                assert_eq!(s[(i, j)], C64::new(expect, 0.0));
            }
        }
        assert_eq!(m.sigma_plus, m.sigma_minus.dagger());
        assert!(m.sigma_p.is_hermitian(1e-15));
    }

    #[test]
    fn number_operator_from_ladder() {
        for n in 2..=MAX_LEVELS {
            let sm = Operator::lowering(n);
            let num = sm.dagger().mul(&sm);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { i as f64 } else { 0.0 };
                    assert!((num.matrix()[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ej_symmetry(x in -5.0f64..5.0) {
            let f = |y| ej_of_flux(7.97, y);
            prop_assert!((f(x) - f(-x)).abs() < 1e-12);
            prop_assert!((f(x) - f(x + 1.0)).abs() < 1e-9);
        }

        #[test]
        fn omega10_increasing(a in 3.9f64..50.0, b in 3.9f64..50.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(omega10(lo, 0.39).unwrap() < omega10(hi, 0.39).unwrap());
        }
    }
}
