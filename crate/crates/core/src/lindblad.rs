//! Dense operator algebra and the master-equation generator.
//!
//! Density matrices are vectorized by stacking columns: `vec(ρ)[i + j·n] =
//! ρ[i, j]`. This is also nalgebra's storage order, so [`DensityMatrix::to_vec`]
//! is a plain copy. With this convention `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{mhz_to_angular, DeviceParams, PumpFrameModel};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Hermiticity and trace tolerance for [`DensityMatrix::new`].
pub const STATE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Relative size of the second smallest singular value of L below which the
/// steady state is considered degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// A dense square operator on the atom's Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: m.nrows() });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("operator has non-finite entries".into()));
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// |i⟩⟨j|
    pub fn transition(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        Self(m)
    }

    /// Σ₋ = Σ_m √m |m−1⟩⟨m|.
    pub fn lowering(n: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for k in 1..n {
            m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        Self(m)
    }

    /// Σ_m m |m⟩⟨m|.
    pub fn number(n: usize) -> Self {
        Self::diagonal(&(0..n).map(|k| k as f64).collect::<Vec<_>>())
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest entrywise deviation from Hermiticity, max|A − A†|.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (all to the tolerances above).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let op = Operator::from_matrix(m)?;
        let herm = op.hermiticity_error();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (max|ρ−ρ†| = {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let rho = Self(op.into_matrix());
        let min = rho.min_eigenvalue();
        if min < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    /// |k⟩⟨k|
    pub fn basis(n: usize, k: usize) -> Self {
        Self(Operator::transition(n, k, k).into_matrix())
    }

    /// Rebuilds a matrix from its column-stacked vector without validation.
    pub fn from_vec_unchecked(v: &DVector<C64>) -> Self {
        Self(unvec(v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn to_vec(&self) -> DVector<C64> {
        vec_of(&self.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Population of level `k`.
    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }

    /// Tr(A ρ)
    pub fn expect(&self, a: &Operator) -> C64 {
        (a.matrix() * &self.0).trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Column-stacking vectorization.
pub fn vec_of(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`]. Panics if the length is not a perfect square.
pub fn unvec(v: &DVector<C64>) -> DMatrix<C64> {
    let n = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, v.len(), "vector length {} is not a square", v.len());
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Generator of the master equation acting on column-stacked density
/// matrices, dimension N² × N².
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    n: usize,
    matrix: DMatrix<C64>,
}

impl Liouvillian {
    pub fn zeros(n: usize) -> Self {
        Self { n, matrix: DMatrix::zeros(n * n, n * n) }
    }

    pub fn from_matrix(n: usize, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != n * n || matrix.ncols() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: matrix.nrows() });
        }
        Ok(Self { n, matrix })
    }

    /// −i[H, ·]
    pub fn commutator(h: &Operator) -> Self {
        let n = h.dim();
        let id = DMatrix::<C64>::identity(n, n);
        let m = (id.kronecker(h.matrix()) - h.matrix().transpose().kronecker(&id)) * (-I);
        Self { n, matrix: m }
    }

    /// Hilbert-space dimension N.
    pub fn hilbert_dim(&self) -> usize {
        self.n
    }

    /// Superoperator dimension N².
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(Self { n: self.n, matrix: &self.matrix + &other.matrix })
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        unvec(&(&self.matrix * vec_of(rho)))
    }

    /// Largest |entry|, used to scale tolerances.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Row vector ⟨⟨1| with ⟨⟨1|vec(ρ)⟩⟩ = Tr ρ.
    pub fn trace_row(n: usize) -> DVector<C64> {
        let mut t = DVector::zeros(n * n);
        for k in 0..n {
            t[k + k * n] = ONE;
        }
        t
    }
}

/// H = Σ Δ_m|m⟩⟨m| − i(Ω/2)(Σ₊e^{iφ} − Σ₋e^{−iφ}), rad/s.
pub fn hamiltonian(model: &PumpFrameModel) -> Operator {
    let half = model.rabi_angular() / 2.0;
    let phase = C64::from_polar(1.0, model.pump_phase);
    let drive = model
        .sigma_plus
        .scale(phase)
        .sub(&model.sigma_minus.scale(phase.conj()))
        .scale(C64::new(0.0, -half));
    Operator::diagonal(&model.detunings).add(&drive)
}

/// rate · D[X], D[X]ρ = XρX† − ½{X†X, ρ}.
pub fn dissipator(op: &Operator, rate: f64) -> Liouvillian {
    let n = op.dim();
    if rate == 0.0 {
        return Liouvillian::zeros(n);
    }
    let x = op.matrix();
    let xdx = x.adjoint() * x;
    let id = DMatrix::<C64>::identity(n, n);
    let half = C64::new(0.5, 0.0);
    let m = x.conjugate().kronecker(x)
        - id.kronecker(&xdx) * half
        - xdx.transpose().kronecker(&id) * half;
    Liouvillian { n, matrix: m * C64::new(rate, 0.0) }
}

/// The full generator: coherent part plus level-by-level relaxation with
/// rates mΓ₁ and dephasing through the number operator.
///
/// The dephasing channel carries rate 2Γ_φ so that an off-diagonal element
/// ρ_{m,m+1} of a two-level system decays at γ = Γ₁/2 + Γ_φ, the decoherence
/// rate quoted alongside Γ₁ and Γ_φ.
pub fn build_liouvillian(model: &PumpFrameModel, params: &DeviceParams) -> Result<Liouvillian> {
    let n = model.n_levels();
    if n != params.n_levels {
        return Err(Error::DimensionMismatch { expected: params.n_levels, got: n });
    }
    let gamma1 = mhz_to_angular(params.gamma1);
    let gamma_phi = mhz_to_angular(params.gamma_phi);

    let mut l = Liouvillian::commutator(&hamiltonian(model));
    for m in 1..n {
        let jump = Operator::transition(n, m - 1, m);
        l = l.add(&dissipator(&jump, m as f64 * gamma1))?;
    }
    l = l.add(&dissipator(&Operator::number(n), 2.0 * gamma_phi))?;
    Ok(l)
}

/// Unique stationary state of `l`.
///
/// The first row of L (the equation for ρ₀₀, redundant because L preserves
/// the trace) is replaced by the trace constraint and the resulting system is
/// solved by LU with partial pivoting.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let n = l.hilbert_dim();
    let d = l.dim();

    let sv = l.matrix().clone().svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    let largest = s[d - 1];
    if largest > 0.0 && s[1] < DEGENERACY_TOL * largest {
        return Err(Error::DegenerateSteadyState { sigma: s[1] / largest });
    }

    let scale = l.max_abs().max(1.0);
    let mut a = l.matrix().clone();
    let trace = Liouvillian::trace_row(n);
    for k in 0..d {
        a[(0, k)] = trace[k] * scale;
    }
    let mut b = DVector::zeros(d);
    b[0] = C64::new(scale, 0.0);
    let x = a.lu().solve(&b).ok_or(Error::Singular)?;

    let rho = unvec(&x);
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = rho.trace();
    DensityMatrix::new(rho / tr)
}

/// exp(L t) ρ₀ with t in seconds.
pub fn propagate(l: &Liouvillian, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    assert!(t >= 0.0, "negative propagation time");
    if t == 0.0 {
        return rho0.clone();
    }
    let u = (l.matrix() * C64::new(t, 0.0)).exp();
    DensityMatrix::from_vec_unchecked(&(u * rho0.to_vec()))
}

/// Relative residual ‖L vec(ρ)‖ / (max|L| · ‖vec(ρ)‖).
pub fn residual(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    let v = rho.to_vec();
    (l.matrix() * &v).norm() / (l.max_abs() * v.norm())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{build_pump_frame_model, DeviceParams};
    use nalgebra::Schur;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;
    use std::f64::consts::PI;

    pub(crate) fn random_op(rng: &mut StdRng, n: usize) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// Random density matrix AA†/Tr(AA†).
    pub(crate) fn random_state(rng: &mut StdRng, n: usize) -> DMatrix<C64> {
        let a = random_op(rng, n);
        let r = &a * a.adjoint();
        let t = r.trace();
        r / t
    }

    fn model(n: usize, rabi: f64, detune_ghz: f64, phase: f64) -> (DeviceParams, PumpFrameModel) {
        let p = DeviceParams::with_levels(n);
        let w = p.omega10().unwrap() + detune_ghz;
        let m = build_pump_frame_model(&p, w, rabi, phase).unwrap();
        (p, m)
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn vectorization_round_trip_and_kron_rule() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_op(&mut rng, 4);
        let b = random_op(&mut rng, 4);
        let r = random_op(&mut rng, 4);
        assert_eq!(unvec(&vec_of(&r)), r);
        assert_eq!(vec_of(&r)[1 + 2 * 4], r[(1, 2)]);
        let lhs = vec_of(&(&a * &r * &b));
        let rhs = b.transpose().kronecker(&a) * vec_of(&r);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_examples() {
        let (_, m) = model(2, 0.0, 0.0, 0.0);
        assert!(hamiltonian(&m).matrix().iter().all(|z| z.norm() < 1e-3));

        let (_, m) = model(2, 10.0, 0.0, 0.0);
        let h = hamiltonian(&m);
        let half = 2.0 * PI * 10e6 / 2.0;
        // −i(Ω/2)(|1⟩⟨0| − |0⟩⟨1|)
        assert!((h.matrix()[(1, 0)] - C64::new(0.0, -half)).norm() < 1e-6);
        assert!((h.matrix()[(0, 1)] - C64::new(0.0, half)).norm() < 1e-6);
        assert!(h.hermiticity_error() < 1e-12);

        for n in 2..=8 {
            let (_, m) = model(n, 77.0, 0.03, 1.234);
            let h = hamiltonian(&m);
            let scale = h.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(h.hermiticity_error() < 1e-15 * scale);
        }
    }

    #[test]
    fn dissipator_examples() {
        let sm = Operator::lowering(2);
        assert!(dissipator(&sm, 0.0).matrix().iter().all(|z| *z == C64::new(0.0, 0.0)));

        let g1 = mhz_to_angular(45.0);
        let d = dissipator(&sm, g1);
        let out = d.apply(DensityMatrix::basis(2, 1).matrix());
        assert!((out[(0, 0)].re - g1).abs() < 1e-6);
        assert!((out[(1, 1)].re + g1).abs() < 1e-6);

        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..7);
            let x = random_op(&mut rng, n);
            let rho = random_state(&mut rng, n);
            let rate = rng.gen_range(0.0..3.0);
            let direct = (&x * &rho * x.adjoint()
                - (x.adjoint() * &x * &rho + &rho * x.adjoint() * &x) * C64::new(0.5, 0.0))
                * C64::new(rate, 0.0);
            let sup = dissipator(&Operator::from_matrix(x).unwrap(), rate).apply(&rho);
            assert!(max_diff(&sup, &direct) < 1e-12);
            assert!(sup.trace().norm() < 1e-12);
        }
    }

    /// Right-hand side of the master equation evaluated directly on matrices.
    fn direct_rhs(m: &PumpFrameModel, p: &DeviceParams, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = m.n_levels();
        let h = hamiltonian(m).into_matrix();
        let mut out = (&h * rho - rho * &h) * (-I);
        let mut d = |x: &DMatrix<C64>, rate: f64| {
            let xd = x.adjoint();
            out += (x * rho * &xd - (&xd * x * rho + rho * &xd * x) * C64::new(0.5, 0.0))
                * C64::new(rate, 0.0);
        };
        for k in 1..n {
            d(Operator::transition(n, k - 1, k).matrix(), k as f64 * mhz_to_angular(p.gamma1));
        }
        d(Operator::number(n).matrix(), 2.0 * mhz_to_angular(p.gamma_phi));
        out
    }

    #[test]
    fn superoperator_matches_direct_evaluation() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(2..7);
            let (p, m) = model(n, rng.gen_range(0.0..300.0), rng.gen_range(-0.5..0.5), rng.gen_range(0.0..6.3));
            let rho = random_state(&mut rng, n);
            let l = build_liouvillian(&m, &p).unwrap();
            let a = l.apply(&rho);
            let b = direct_rhs(&m, &p, &rho);
            let scale = l.max_abs();
            assert!(max_diff(&a, &b) < 1e-12 * scale, "{}", max_diff(&a, &b) / scale);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (_, m) = model(3, 10.0, 0.0, 0.0);
        let p = DeviceParams::with_levels(4);
        assert!(matches!(build_liouvillian(&m, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn two_level_rates_from_spectrum() {
        let (p, m) = model(2, 0.0, 0.0, 0.0);
        let l = build_liouvillian(&m, &p).unwrap();
        let g1 = mhz_to_angular(p.gamma1);
        let gamma = mhz_to_angular(p.gamma());

        let out = l.apply(DensityMatrix::basis(2, 1).matrix());
        assert!((out[(1, 1)].re + g1).abs() < 1e-6 * g1);

        let mut coh = DMatrix::zeros(2, 2);
        coh[(0, 1)] = ONE;
        let out = l.apply(&coh);
        // resonant pump frame: pure decay at γ
        assert!((out[(0, 1)] + C64::new(gamma, 0.0)).norm() < 1e-6 * gamma);

        let ev = Schur::new(l.matrix().clone()).eigenvalues().unwrap();
        let mut re: Vec<f64> = ev.iter().map(|z| -z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!(re[0].abs() < 1e-6);
        assert!((re[1] - gamma).abs() < 1e-6 * gamma);
        assert!((re[2] - gamma).abs() < 1e-6 * gamma);
        assert!((re[3] - g1).abs() < 1e-6 * g1);
    }

    #[test]
    fn unpumped_steady_state_is_ground() {
        for n in [2, 5] {
            let (p, m) = model(n, 0.0, 0.0, 0.0);
            let l = build_liouvillian(&m, &p).unwrap();
            let rho = steady_state(&l).unwrap();
            assert!(max_diff(rho.matrix(), DensityMatrix::basis(n, 0).matrix()) < 1e-12);
        }
    }

    #[test]
    fn saturation_limit() {
        let (p, m) = model(2, 2000.0, 0.0, 0.0);
        let rho = steady_state(&build_liouvillian(&m, &p).unwrap()).unwrap();
        assert!((rho.population(1) - 0.5).abs() < 0.01);
    }

    /// Optical Bloch steady state of a resonantly driven two-level atom,
    /// ρ₁₁ = s/(2(1 + s)) with saturation parameter s = Ω²/(Γ₁γ).
    fn bloch_excited_population(rabi: f64, g1: f64, gamma: f64) -> f64 {
        let s = rabi * rabi / (g1 * gamma);
        s * (gamma * gamma / (gamma * gamma + rabi * rabi * gamma / g1)) / 2.0
    }

    #[test]
    fn bloch_steady_state_oracle() {
        let p = DeviceParams::with_levels(2);
        let g1 = mhz_to_angular(p.gamma1);
        let gamma = mhz_to_angular(p.gamma());
        for rabi in [1.0, 10.0, 33.0, 100.0, 450.0] {
            let (_, m) = model(2, rabi, 0.0, 0.3);
            let l = build_liouvillian(&m, &p).unwrap();
            let rho = steady_state(&l).unwrap();
            let expect = bloch_excited_population(mhz_to_angular(rabi), g1, gamma);
            assert!((rho.population(1) - expect).abs() < 1e-10, "rabi {rabi}: {} vs {expect}", rho.population(1));
            assert!(residual(&l, &rho) < 1e-10);
        }
    }

    #[test]
    fn degenerate_generator_is_flagged() {
        // Purely coherent dynamics: every diagonal state is stationary.
        let (_, m) = model(3, 0.0, 0.1, 0.0);
        let l = Liouvillian::commutator(&hamiltonian(&m));
        assert!(matches!(steady_state(&l), Err(Error::DegenerateSteadyState { .. })));
    }

    #[test]
    fn propagate_examples() {
        let (p, m) = model(2, 0.0, 0.0, 0.0);
        let l = build_liouvillian(&m, &p).unwrap();
        let rho0 = DensityMatrix::basis(2, 1);
        assert_eq!(propagate(&l, &rho0, 0.0), rho0);
        let t = 1.0 / mhz_to_angular(p.gamma1);
        let rho = propagate(&l, &rho0, t);
        assert!((rho.population(1) - (-1.0f64).exp()).abs() < 1e-6);

        let (p, m) = model(5, 120.0, 0.0, 0.0);
        let l = build_liouvillian(&m, &p).unwrap();
        let ss = steady_state(&l).unwrap();
        // The slowest transient of the pumped ladder decays at about Γ₁·0.86,
        // so 10/Γ₁ only reaches ~2e-4; 20/Γ₁ is needed for 1e-6.
        let rho = propagate(&l, &DensityMatrix::basis(5, 0), 20.0 / mhz_to_angular(p.gamma1));
        assert!(max_diff(rho.matrix(), ss.matrix()) < 1e-6, "{}", max_diff(rho.matrix(), ss.matrix()));
        let later = propagate(&l, &ss, 5.0 / mhz_to_angular(p.gamma1));
        assert!((later.to_vec() - ss.to_vec()).norm() < 1e-7);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.9, 0.0);
        m[(1, 0)] = C64::new(0.9, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn generator_invariants(
            n in 2usize..6,
            rabi in 0.0f64..400.0,
            detune in -0.3f64..0.3,
            phase in 0.0f64..6.3,
            seed in 0u64..1000,
        ) {
            let (p, m) = model(n, rabi, detune, phase);
            let l = build_liouvillian(&m, &p).unwrap();
            let scale = l.max_abs();

            // trace preservation
            let tr = Liouvillian::trace_row(n).transpose() * l.matrix();
            prop_assert!(tr.iter().all(|z| z.norm() < 1e-12 * scale));

            // contractivity
            let ev = Schur::new(l.matrix().clone()).eigenvalues().unwrap();
            prop_assert!(ev.iter().all(|z| z.re <= 1e-9 * scale));
            prop_assert!(ev.iter().any(|z| z.norm() <= 1e-9 * scale));

            // trace along a trajectory
            let mut rng = StdRng::seed_from_u64(seed);
            let rho0 = DensityMatrix::new(random_state(&mut rng, n)).unwrap();
            let t_max = 10.0 / mhz_to_angular(p.gamma1);
            for frac in [0.0, 0.1, 0.5, 1.0] {
                let rho = propagate(&l, &rho0, frac * t_max);
                prop_assert!((rho.trace() - ONE).norm() < 1e-8);
                prop_assert!(rho.hermiticity_error() < 1e-8);
            }

            // steady state is a fixed point
            let ss = steady_state(&l).unwrap();
            prop_assert!(residual(&l, &ss) < 1e-10);
            let later = propagate(&l, &ss, 5.0 / mhz_to_angular(p.gamma1));
            prop_assert!((later.to_vec() - ss.to_vec()).norm() < 1e-7);
        }
    }
}
