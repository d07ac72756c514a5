//! Dense state vectors over `n` qubits and the gate kernels everything else
//! is built on.
//!
//! Basis labels are little-endian: qubit `j` weights bit `2^j` of the label.
//! Unitary evolution never renormalizes; only measurement collapse does.

use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude type used throughout the crate.
pub type C64 = Complex64;

/// Row-major 2x2 complex matrix.
pub type Matrix2 = [[C64; 2]; 2];

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 30;

const NORM_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-12;
const DEGENERATE_BRANCH: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("register size {0} is outside 1..={MAX_QUBITS}")]
    InvalidSize(usize),
    #[error("basis label {label} out of range for {n_qubits} qubits")]
    LabelOutOfRange { label: usize, n_qubits: usize },
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("control and target are the same qubit {0}")]
    SameQubit(usize),
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("amplitude vector has length {len}, expected a power of two")]
    BadLength { len: usize },
    #[error("state norm {norm_sqr} deviates from 1")]
    NotNormalized { norm_sqr: f64 },
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },
    #[error("measurement selected a branch with probability {probability:e}")]
    DegenerateCollapse { probability: f64 },
}

/// A qubit position inside a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitIndex(pub usize);

impl QubitIndex {
    #[inline]
    pub fn mask(self) -> usize {
        1 << self.0
    }
}

impl From<usize> for QubitIndex {
    fn from(value: usize) -> Self {
        Self(value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// Computational basis state `|label⟩`.
    pub fn new_basis_state(n_qubits: usize, label: usize) -> Result<Self, StateError> {
        check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if label >= dim {
            return Err(StateError::LabelOutOfRange { label, n_qubits });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[label] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps a normalized amplitude vector.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self, StateError> {
        let state = Self::from_raw(amps)?;
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    /// Wraps an amplitude vector without checking its norm. Used for
    /// linearity checks on unnormalized superpositions.
    pub fn from_raw(amps: Vec<C64>) -> Result<Self, StateError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(StateError::BadLength { len });
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_size(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Asserts the normalization invariant at the default tolerance.
    pub fn check_normalized(&self) -> Result<(), StateError> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized { norm_sqr });
        }
        Ok(())
    }

    fn check_qubit(&self, q: QubitIndex) -> Result<(), StateError> {
        if q.0 >= self.n_qubits {
            return Err(StateError::QubitOutOfRange {
                qubit: q.0,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies a 2x2 unitary to qubit `q`, rejecting non-unitary matrices.
    pub fn apply_1q(&mut self, q: QubitIndex, m: &Matrix2) -> Result<(), StateError> {
        self.check_qubit(q)?;
        let deviation = unitarity_deviation(m);
        if deviation > UNITARY_TOLERANCE {
            return Err(StateError::NonUnitary { deviation });
        }
        self.apply_1q_unchecked(q.0, m);
        Ok(())
    }

    /// Hot-path variant of [`apply_1q`](Self::apply_1q). The caller
    /// guarantees `q` is in range and `m` is unitary.
    pub fn apply_1q_unchecked(&mut self, q: usize, m: &Matrix2) {
        let stride = 1usize << q;
        let [[m00, m01], [m10, m11]] = *m;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let x0 = *a0;
                let x1 = *a1;
                *a0 = m00 * x0 + m01 * x1;
                *a1 = m10 * x0 + m11 * x1;
            }
        }
    }

    /// `R_φ = diag(1, e^{iφ})` on qubit `q`.
    pub fn apply_phase(&mut self, q: QubitIndex, phi: f64) -> Result<(), StateError> {
        self.check_qubit(q)?;
        self.apply_phase_unchecked(q.0, phi);
        Ok(())
    }

    pub fn apply_phase_unchecked(&mut self, q: usize, phi: f64) {
        let w = C64::from_polar(1.0, phi);
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            for a in &mut block[stride..] {
                *a *= w;
            }
        }
    }

    /// `CR_φ = diag(1, 1, 1, e^{iφ})` on the pair `(control, target)`.
    pub fn apply_2q_controlled_phase(
        &mut self,
        control: QubitIndex,
        target: QubitIndex,
        phi: f64,
    ) -> Result<(), StateError> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(StateError::SameQubit(control.0));
        }
        self.apply_controlled_phase_unchecked(control.0, target.0, phi);
        Ok(())
    }

    pub fn apply_controlled_phase_unchecked(&mut self, q1: usize, q2: usize, phi: f64) {
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        let w = C64::from_polar(1.0, phi);
        let hi_stride = 1usize << hi;
        let lo_stride = 1usize << lo;
        for outer in self.amps.chunks_exact_mut(hi_stride << 1) {
            for inner in outer[hi_stride..].chunks_exact_mut(lo_stride << 1) {
                for a in &mut inner[lo_stride..] {
                    *a *= w;
                }
            }
        }
    }

    /// Bit flip on qubit `q`.
    pub fn apply_x_unchecked(&mut self, q: usize) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            lo.swap_with_slice(hi);
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64, StateError> {
        if self.n_qubits != other.n_qubits {
            return Err(StateError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(inner_unchecked(&self.amps, &other.amps))
    }

    /// Probability of reading 1 on qubit `q`.
    pub fn probability_one(&self, q: QubitIndex) -> Result<f64, StateError> {
        self.check_qubit(q)?;
        let stride = q.mask();
        Ok(self
            .amps
            .chunks_exact(stride << 1)
            .flat_map(|b| b[stride..].iter())
            .map(|a| a.norm_sqr())
            .sum())
    }

    /// Projective measurement of `q` in the computational basis. Outcome 0 is
    /// selected when `u < p0`. The surviving branch is renormalized.
    pub fn measure_qubit(&mut self, q: QubitIndex, u: f64) -> Result<u8, StateError> {
        self.check_qubit(q)?;
        let stride = q.mask();
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        for block in self.amps.chunks_exact(stride << 1) {
            p0 += block[..stride].iter().map(|a| a.norm_sqr()).sum::<f64>();
            p1 += block[stride..].iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        let total = p0 + p1;
        let outcome = if u * total < p0 { 0u8 } else { 1u8 };
        let p = if outcome == 0 { p0 } else { p1 };
        if p < DEGENERATE_BRANCH {
            return Err(StateError::DegenerateCollapse { probability: p });
        }
        let scale = 1.0 / p.sqrt();
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            let (keep, drop) = if outcome == 0 { (lo, hi) } else { (hi, lo) };
            keep.iter_mut().for_each(|a| *a *= scale);
            drop.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        }
        Ok(outcome)
    }

    /// Measures `q` and flips it back to `|0⟩` on outcome 1. Returns whether
    /// the outcome was 1.
    pub fn reset_qubit_to_zero(&mut self, q: QubitIndex, u: f64) -> Result<bool, StateError> {
        let outcome = self.measure_qubit(q, u)?;
        if outcome == 1 {
            self.apply_x_unchecked(q.0);
        }
        Ok(outcome == 1)
    }
}

fn check_size(n_qubits: usize) -> Result<(), StateError> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(StateError::InvalidSize(n_qubits));
    }
    Ok(())
}

#[inline]
pub(crate) fn inner_unchecked(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, StateError> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Max-element deviation of `m† m` from the identity.
pub fn unitarity_deviation(m: &Matrix2) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let acc: C64 = m.iter().map(|row| row[i].conj() * row[j]).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc - expected).norm());
        }
    }
    worst
}

pub fn matmul2(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hadamard() -> Matrix2 {
        let h = FRAC_1_SQRT_2;
        [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
    }

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let mut amps: Vec<C64> = (0..1 << n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn max_dev(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_states() {
        let s = StateVector::new_basis_state(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let s = StateVector::new_basis_state(2, 3).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 1);
        let s = StateVector::new_basis_state(3, 5).unwrap();
        assert_eq!(s.amplitudes()[5], c(1.0, 0.0));
        assert!(matches!(
            StateVector::new_basis_state(2, 4),
            Err(StateError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        let id = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        s.apply_1q(QubitIndex(0), &id).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        s.apply_1q(QubitIndex(0), &hadamard()).unwrap();
        assert!((s.amplitudes()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hadamard_squared_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s0 = random_state(3, &mut rng);
        let mut s = s0.clone();
        s.apply_1q(QubitIndex(1), &hadamard()).unwrap();
        s.apply_1q(QubitIndex(1), &hadamard()).unwrap();
        assert!(max_dev(s.amplitudes(), s0.amplitudes()) < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        let m = [[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(
            s.apply_1q(QubitIndex(0), &m),
            Err(StateError::NonUnitary { .. })
        ));
        assert!(s.apply_1q(QubitIndex(1), &hadamard()).is_err());
    }

    #[test]
    fn controlled_phase_cases() {
        let mut s = StateVector::new_basis_state(2, 3).unwrap();
        s.apply_2q_controlled_phase(QubitIndex(0), QubitIndex(1), PI).unwrap();
        assert!((s.amplitudes()[3] - c(-1.0, 0.0)).norm() < 1e-15);

        // |10⟩ in ket order is label 2: only one bit set.
        let mut s = StateVector::new_basis_state(2, 2).unwrap();
        s.apply_2q_controlled_phase(QubitIndex(0), QubitIndex(1), 1.234).unwrap();
        assert_eq!(s.amplitudes()[2], c(1.0, 0.0));

        let h = FRAC_1_SQRT_2;
        let mut s = StateVector::from_amplitudes(vec![
            c(h, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(h, 0.0),
        ])
        .unwrap();
        s.apply_2q_controlled_phase(QubitIndex(0), QubitIndex(1), PI / 2.0).unwrap();
        assert!((s.amplitudes()[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[3] - c(0.0, h)).norm() < 1e-15);

        assert_eq!(
            s.apply_2q_controlled_phase(QubitIndex(1), QubitIndex(1), 0.1),
            Err(StateError::SameQubit(1))
        );
    }

    #[test]
    fn controlled_phase_touches_exactly_both_bits_set() {
        let n = 4;
        let amps: Vec<C64> = (0..16).map(|i| c(0.25, 0.0) * (i as f64 + 1.0).sqrt()).collect();
        let mut s = StateVector::from_raw(amps.clone()).unwrap();
        s.apply_controlled_phase_unchecked(3, 1, 0.7);
        for (i, (a, b)) in s.amplitudes().iter().zip(&amps).enumerate() {
            let expected = if i & 0b1010 == 0b1010 { b * C64::from_polar(1.0, 0.7) } else { *b };
            assert!((a - expected).norm() < 1e-15, "index {i} of {n}-qubit state");
        }
    }

    #[test]
    fn fidelity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_state(3, &mut rng);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-14);
        let zero = StateVector::new_basis_state(1, 0).unwrap();
        let one = StateVector::new_basis_state(1, 1).unwrap();
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        let mut plus = zero.clone();
        plus.apply_1q(QubitIndex(0), &hadamard()).unwrap();
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        let other = StateVector::new_basis_state(2, 0).unwrap();
        assert!(matches!(
            fidelity(&zero, &other),
            Err(StateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fidelity_symmetric_and_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_state(3, &mut rng);
            let b = random_state(3, &mut rng);
            let phase = C64::from_polar(1.0, rng.random::<f64>() * 6.0);
            let b_rot =
                StateVector::from_raw(b.amplitudes().iter().map(|x| x * phase).collect()).unwrap();
            let f_ab = fidelity(&a, &b).unwrap();
            assert!((f_ab - fidelity(&b, &a).unwrap()).abs() < 1e-14);
            assert!((f_ab - fidelity(&a, &b_rot).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn measurement_cases() {
        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        assert_eq!(s.measure_qubit(QubitIndex(0), 0.999).unwrap(), 0);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));

        let h = FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        let mut s = plus.clone();
        assert_eq!(s.measure_qubit(QubitIndex(0), 0.3).unwrap(), 0);
        assert!((s.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
        let mut s = plus.clone();
        assert_eq!(s.measure_qubit(QubitIndex(0), 0.7).unwrap(), 1);
        assert!((s.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.amplitudes()[0], c(0.0, 0.0));

        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        assert!(matches!(
            s.measure_qubit(QubitIndex(0), 1.0),
            Err(StateError::DegenerateCollapse { .. })
        ));
    }

    #[test]
    fn reset_cases() {
        let mut s = StateVector::new_basis_state(2, 0b01).unwrap();
        assert!(!s.reset_qubit_to_zero(QubitIndex(1), 0.5).unwrap());
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));
        let mut s = StateVector::new_basis_state(2, 0b11).unwrap();
        assert!(s.reset_qubit_to_zero(QubitIndex(1), 0.5).unwrap());
        assert_eq!(s.amplitudes()[1], c(1.0, 0.0));
    }

    #[test]
    fn reset_wrong_outcome_rate_matches_leak() {
        // ancilla sqrt(1-δ)|0⟩ + sqrt(δ)|1⟩ with δ of order ε²
        let delta: f64 = 0.02;
        let base =
            StateVector::from_amplitudes(vec![c((1.0 - delta).sqrt(), 0.0), c(delta.sqrt(), 0.0)])
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut wrong = 0usize;
        for _ in 0..n {
            let mut s = base.clone();
            if s.reset_qubit_to_zero(QubitIndex(0), rng.random()).unwrap() {
                wrong += 1;
            }
            assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        }
        let rate = wrong as f64 / n as f64;
        let se = (delta * (1.0 - delta) / n as f64).sqrt();
        assert!((rate - delta).abs() < 3.0 * se, "rate {rate} vs {delta}");
    }

    #[test]
    fn measurement_frequencies_match_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let psi = random_state(3, &mut rng);
        let p1 = psi.probability_one(QubitIndex(2)).unwrap();
        let p0 = 1.0 - p1;
        let n = 20_000;
        let zeros = (0..n)
            .filter(|_| psi.clone().measure_qubit(QubitIndex(2), rng.random()).unwrap() == 0)
            .count();
        let freq = zeros as f64 / n as f64;
        let se = (p0 * p1 / n as f64).sqrt();
        assert!((freq - p0).abs() < 3.0 * se, "freq {freq} vs p0 {p0}");
    }

    fn arb_unitary() -> impl Strategy<Value = Matrix2> {
        // Generic SU(2) times a phase from Euler angles.
        (0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64).prop_map(|(a, b, g, d)| {
            let e = |x: f64| C64::from_polar(1.0, x);
            let (s, co) = (g / 2.0).sin_cos();
            [
                [e(d - a / 2.0 - b / 2.0) * co, -e(d - a / 2.0 + b / 2.0) * s],
                [e(d + a / 2.0 - b / 2.0) * s, e(d + a / 2.0 + b / 2.0) * co],
            ]
        })
    }

    fn arb_amps(n: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n)
            .prop_map(|v| v.into_iter().map(|(r, i)| c(r, i)).collect())
    }

    proptest! {
        #[test]
        fn norm_preserved_over_gate_sequences(
            amps in arb_amps(4),
            gates in prop::collection::vec((0usize..4, 0usize..4, arb_unitary(), -4.0..4.0f64), 1..40),
        ) {
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let mut s = StateVector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
            for (q1, q2, m, phi) in &gates {
                s.apply_1q(QubitIndex(*q1), m).unwrap();
                if q1 != q2 {
                    s.apply_2q_controlled_phase(QubitIndex(*q1), QubitIndex(*q2), *phi).unwrap();
                } else {
                    s.apply_phase(QubitIndex(*q1), *phi).unwrap();
                }
            }
            let k = 2 * gates.len();
            prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12 * k as f64);
        }

        #[test]
        fn apply_1q_is_linear(
            psi in arb_amps(3),
            chi in arb_amps(3),
            m in arb_unitary(),
            q in 0usize..3,
            (ar, ai, br, bi) in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64),
        ) {
            let (alpha, beta) = (c(ar, ai), c(br, bi));
            let combo: Vec<C64> = psi.iter().zip(&chi).map(|(x, y)| alpha * x + beta * y).collect();
            let mut lhs = StateVector::from_raw(combo).unwrap();
            lhs.apply_1q(QubitIndex(q), &m).unwrap();
            let mut p = StateVector::from_raw(psi.clone()).unwrap();
            let mut x = StateVector::from_raw(chi.clone()).unwrap();
            p.apply_1q(QubitIndex(q), &m).unwrap();
            x.apply_1q(QubitIndex(q), &m).unwrap();
            let rhs: Vec<C64> = p.amplitudes().iter().zip(x.amplitudes())
                .map(|(a, b)| alpha * a + beta * b).collect();
            prop_assert!(max_dev(lhs.amplitudes(), &rhs) < 1e-12);
        }
    }
}
