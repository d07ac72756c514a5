//! Unbiased noisy-gate error model.
//!
//! Every unitary gate `G` is executed as `E·G` with a random error operator
//! `E` close to the identity, parametrized by one variate `ξ` uniform in
//! `[−ε/2, ε/2]`:
//!
//! * `R_φ  → R_ξ R_φ`
//! * `CR_φ → CR_ξ CR_φ`
//! * `H    → R_μ̂(ξ) H`, with `μ̂ = cos γ ŷ + sin γ (x̂ − ẑ)/√2` orthogonal to
//!   the Hadamard axis `(x̂ + ẑ)/√2` and `γ` uniform on the circle.
//!
//! Draws are counter-based: `(master_seed, realization, gate index)` fully
//! determines them, so results do not depend on scheduling.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gateset::{hadamard_matrix, BlochRotation, Gate};
use crate::statevector::{matmul2, Matrix2, StateVector, C64};

/// 32-bit words reserved in the keystream per gate index.
const WORDS_PER_DRAW: u128 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("error intensity must be finite and non-negative, got {0}")]
    BadEpsilon(f64),
    #[error("atomic phase must be positive, got {0}")]
    BadAtomicPhase(f64),
    #[error("ancilla resets are noiseless and cannot be perturbed")]
    ResetNotPerturbable,
    #[error("eigenphases do not fit in a half circle (arc {arc})")]
    OutsideSmallErrorRegime { arc: f64 },
    #[error("empty spectrum")]
    EmptySpectrum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    epsilon: f64,
    master_seed: u64,
    atomic_phase: Option<f64>,
}

impl NoiseConfig {
    pub fn new(epsilon: f64, master_seed: u64) -> Result<Self, NoiseError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(NoiseError::BadEpsilon(epsilon));
        }
        Ok(Self {
            epsilon,
            master_seed,
            atomic_phase: None,
        })
    }

    /// Quantizes ideal gate phases of the noisy machine to multiples of
    /// `delta` radians.
    pub fn with_atomic_phase(mut self, delta: f64) -> Result<Self, NoiseError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(NoiseError::BadAtomicPhase(delta));
        }
        self.atomic_phase = Some(delta);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn atomic_phase(&self) -> Option<f64> {
        self.atomic_phase
    }

    /// Same config with a different seed.
    pub fn reseeded(&self, master_seed: u64) -> Self {
        Self { master_seed, ..*self }
    }

    /// Control phase actually programmed on the noisy machine.
    #[inline]
    pub fn programmed_phase(&self, phi: f64) -> f64 {
        match self.atomic_phase {
            Some(delta) => (phi / delta).round() * delta,
            None => phi,
        }
    }
}

/// One error variate set for one gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorDraw {
    /// `ξ ∈ [−ε/2, ε/2]`.
    pub xi: f64,
    /// Tilt direction for Hadamard errors, `γ ∈ [0, 2π)`.
    pub gamma: f64,
    /// Uniform `[0, 1)` variate consumed by measurement resets.
    pub u: f64,
}

impl ErrorDraw {
    pub const NONE: Self = Self {
        xi: 0.0,
        gamma: 0.0,
        u: 0.0,
    };
}

/// Keystream for one realization.
pub struct NoiseStream {
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(cfg: &NoiseConfig, realization: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(realization);
        Self {
            epsilon: cfg.epsilon,
            rng,
        }
    }

    /// Draw for gate `gate_seq_index`. Random access; the value never depends
    /// on which indices were queried before.
    pub fn draw(&mut self, gate_seq_index: u64) -> ErrorDraw {
        let pos = gate_seq_index as u128 * WORDS_PER_DRAW;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        let a = unit_f64(self.rng.next_u64());
        let b = unit_f64(self.rng.next_u64());
        let c = unit_f64(self.rng.next_u64());
        // the fourth word pair is reserved, consumed to keep draws contiguous
        let _ = self.rng.next_u64();
        ErrorDraw {
            xi: self.epsilon * (a - 0.5),
            gamma: TAU * b,
            u: c,
        }
    }
}

#[inline]
fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stateless draw keyed by `(seed, realization, gate index)`.
pub fn draw_errors(cfg: &NoiseConfig, realization: u64, gate_seq_index: u64) -> ErrorDraw {
    NoiseStream::new(cfg, realization).draw(gate_seq_index)
}

/// Axis of the Hadamard error rotation.
pub fn hadamard_error_axis(gamma: f64) -> [f64; 3] {
    let (s, c) = gamma.sin_cos();
    [s * FRAC_1_SQRT_2, c, -s * FRAC_1_SQRT_2]
}

/// The error operator that follows a gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorOperator {
    /// `R_ξ` on one wire.
    Phase { wire: usize, xi: f64 },
    /// `CR_ξ` on two wires.
    ControlledPhase { wires: (usize, usize), xi: f64 },
    /// `R_μ̂(ξ)` on one wire.
    Rotation { wire: usize, matrix: Matrix2 },
}

impl ErrorOperator {
    /// Dense matrix (2x2 or 4x4).
    pub fn matrix(&self) -> Vec<Vec<C64>> {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        match *self {
            ErrorOperator::Phase { xi, .. } => vec![vec![one, z], vec![z, C64::from_polar(1.0, xi)]],
            ErrorOperator::ControlledPhase { xi, .. } => {
                let mut m = vec![vec![z; 4]; 4];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = one;
                }
                m[3][3] = C64::from_polar(1.0, xi);
                m
            }
            ErrorOperator::Rotation { matrix, .. } => matrix.iter().map(|r| r.to_vec()).collect(),
        }
    }

    /// Eigenphases, expanded to the operator's dimension.
    pub fn spectrum(&self) -> ErrorSpectrum {
        match *self {
            ErrorOperator::Phase { xi, .. } => ErrorSpectrum::new(vec![0.0, xi]),
            ErrorOperator::ControlledPhase { xi, .. } => ErrorSpectrum::new(vec![0.0, 0.0, 0.0, xi]),
            ErrorOperator::Rotation { matrix, .. } => {
                // eigenvalues cos(ξ/2) ± i sin(ξ/2) of an SU(2) rotation
                let half = matrix[0][0].re.clamp(-1.0, 1.0).acos();
                ErrorSpectrum::new(vec![half, -half])
            }
        }
        .expect("fixed-size spectra are nonempty")
    }

    pub fn apply(&self, state: &mut StateVector) {
        match *self {
            ErrorOperator::Phase { wire, xi } => state.apply_phase_unchecked(wire, xi),
            ErrorOperator::ControlledPhase { wires, xi } => {
                state.apply_controlled_phase_unchecked(wires.0, wires.1, xi)
            }
            ErrorOperator::Rotation { wire, matrix } => state.apply_1q_unchecked(wire, &matrix),
        }
    }
}

/// A gate together with the error that follows it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyGate {
    pub ideal: Gate,
    pub error: ErrorOperator,
}

impl NoisyGate {
    /// Applies `G` then `E` as two separate kernels.
    pub fn apply(&self, state: &mut StateVector) {
        apply_ideal(state, &self.ideal, None);
        self.error.apply(state);
    }
}

pub fn perturb(g: &Gate, d: &ErrorDraw) -> Result<NoisyGate, NoiseError> {
    let error = match *g {
        Gate::Phase(q, _) => ErrorOperator::Phase { wire: q, xi: d.xi },
        Gate::ControlledPhase(a, b, _) => ErrorOperator::ControlledPhase {
            wires: (a, b),
            xi: d.xi,
        },
        Gate::Hadamard(q) => {
            let rot = BlochRotation::new(hadamard_error_axis(d.gamma), d.xi)
                .expect("axis is unit by construction");
            ErrorOperator::Rotation {
                wire: q,
                matrix: rot.matrix(),
            }
        }
        Gate::AncillaMeasureReset(_) => return Err(NoiseError::ResetNotPerturbable),
    };
    Ok(NoisyGate { ideal: *g, error })
}

/// Applies a unitary gate exactly. `atomic` (when set) quantizes the phase.
pub(crate) fn apply_ideal(state: &mut StateVector, g: &Gate, atomic: Option<&NoiseConfig>) {
    let quant = |phi: f64| atomic.map_or(phi, |cfg| cfg.programmed_phase(phi));
    match *g {
        Gate::Hadamard(q) => state.apply_1q_unchecked(q, &hadamard_matrix()),
        Gate::Phase(q, p) => state.apply_phase_unchecked(q, quant(p.to_radians())),
        Gate::ControlledPhase(a, b, p) => {
            state.apply_controlled_phase_unchecked(a, b, quant(p.to_radians()))
        }
        Gate::AncillaMeasureReset(_) => {}
    }
}

/// Fused noisy application: `R_ξ R_φ = R_{φ+ξ}`, likewise for `CR`, and
/// `R_μ̂(ξ) H` as one 2x2 kernel.
pub(crate) fn apply_noisy_fused(state: &mut StateVector, g: &Gate, d: &ErrorDraw, cfg: &NoiseConfig) {
    match *g {
        Gate::Hadamard(q) => {
            let rot = BlochRotation::new(hadamard_error_axis(d.gamma), d.xi)
                .expect("axis is unit by construction");
            let m = matmul2(&rot.matrix(), &hadamard_matrix());
            state.apply_1q_unchecked(q, &m);
        }
        Gate::Phase(q, p) => state.apply_phase_unchecked(q, cfg.programmed_phase(p.to_radians()) + d.xi),
        Gate::ControlledPhase(a, b, p) => {
            state.apply_controlled_phase_unchecked(a, b, cfg.programmed_phase(p.to_radians()) + d.xi)
        }
        Gate::AncillaMeasureReset(_) => {}
    }
}

/// Eigenphases of an error operator, each reduced to `(−π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSpectrum {
    eigenphases: Vec<f64>,
}

impl ErrorSpectrum {
    pub fn new(phases: Vec<f64>) -> Result<Self, NoiseError> {
        if phases.is_empty() {
            return Err(NoiseError::EmptySpectrum);
        }
        Ok(Self {
            eigenphases: phases.into_iter().map(reduce_angle).collect(),
        })
    }

    pub fn eigenphases(&self) -> &[f64] {
        &self.eigenphases
    }

    /// Smallest arc containing every phase: `(arc length, arc start)`.
    fn minimal_arc(&self) -> (f64, f64) {
        let mut sorted: Vec<f64> = self.eigenphases.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut best_gap = TAU - (sorted[n - 1] - sorted[0]);
        let mut start = sorted[0];
        for i in 1..n {
            let gap = sorted[i] - sorted[i - 1];
            if gap > best_gap {
                best_gap = gap;
                start = sorted[i];
            }
        }
        (TAU - best_gap, start)
    }

    /// Phases unwrapped onto their minimal arc, so that a spectrum straddling
    /// `±π` is treated as contiguous.
    fn unwrapped(&self) -> Vec<f64> {
        let (_, start) = self.minimal_arc();
        self.eigenphases
            .iter()
            .map(|&l| start + (l - start).rem_euclid(TAU))
            .collect()
    }
}

/// Reduces an angle to `(−π, π]`.
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Population variance of the eigenphases.
pub fn sigma_lambda_sq(s: &ErrorSpectrum) -> f64 {
    let phases = s.unwrapped();
    let n = phases.len() as f64;
    let mean = phases.iter().sum::<f64>() / n;
    phases.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n
}

/// `min_χ ‖I − e^{iχ} E‖ = 2 sin(r/2)`, with `r` the half-width of the
/// smallest arc holding the spectrum.
pub fn varsigma(s: &ErrorSpectrum) -> Result<f64, NoiseError> {
    let (arc, _) = s.minimal_arc();
    if arc > PI {
        return Err(NoiseError::OutsideSmallErrorRegime { arc });
    }
    Ok(2.0 * (arc / 4.0).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::FixedPointPhase;
    use crate::statevector::unitarity_deviation;

    fn max_dev(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn identity(n: usize) -> Vec<Vec<C64>> {
        (0..n)
            .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect()
    }

    #[test]
    fn zero_error_is_identity() {
        let d = ErrorDraw { xi: 0.0, gamma: 1.3, u: 0.0 };
        for g in [
            Gate::Hadamard(0),
            Gate::Phase(0, FixedPointPhase::from_turns(0.2)),
            Gate::ControlledPhase(0, 1, FixedPointPhase::from_turns(0.2)),
        ] {
            let e = perturb(&g, &d).unwrap().error.matrix();
            assert!(max_dev(&e, &identity(e.len())) < 1e-15);
        }
        assert_eq!(
            perturb(&Gate::AncillaMeasureReset(0), &d),
            Err(NoiseError::ResetNotPerturbable)
        );
    }

    #[test]
    fn error_spectra() {
        let xi = 0.013;
        let h = perturb(&Gate::Hadamard(0), &ErrorDraw { xi, gamma: 2.2, u: 0.0 }).unwrap();
        let mut ph = h.error.spectrum().eigenphases().to_vec();
        ph.sort_by(f64::total_cmp);
        assert!((ph[0] + xi / 2.0).abs() < 1e-12 && (ph[1] - xi / 2.0).abs() < 1e-12);

        let cp = perturb(
            &Gate::ControlledPhase(0, 1, FixedPointPhase::HALF),
            &ErrorDraw { xi, gamma: 0.0, u: 0.0 },
        )
        .unwrap();
        assert_eq!(cp.error.spectrum().eigenphases(), &[0.0, 0.0, 0.0, xi]);
        let m = cp.error.matrix();
        assert!((m[3][3] - C64::from_polar(1.0, xi)).norm() < 1e-15);
    }

    #[test]
    fn sigma_lambda_cases() {
        let xi: f64 = 0.02;
        let s = ErrorSpectrum::new(vec![xi / 2.0, -xi / 2.0]).unwrap();
        assert!((sigma_lambda_sq(&s) / (xi * xi / 4.0) - 1.0).abs() < 1e-12);
        let s = ErrorSpectrum::new(vec![0.0, 0.0, 0.0, xi]).unwrap();
        assert!((sigma_lambda_sq(&s) / (3.0 * xi * xi / 16.0) - 1.0).abs() < 1e-12);
        let s = ErrorSpectrum::new(vec![0.4; 5]).unwrap();
        assert_eq!(sigma_lambda_sq(&s), 0.0);
        // straddling ±π behaves like the same spread around 0
        let s = ErrorSpectrum::new(vec![PI - 0.01, -PI + 0.01]).unwrap();
        assert!((sigma_lambda_sq(&s) - 1e-4).abs() < 1e-12);
    }

    /// `min_χ max_j 2|sin((χ + λ_j)/2)|` by grid search and golden-section
    /// refinement.
    fn varsigma_brute(phases: &[f64]) -> f64 {
        let objective =
            |chi: f64| phases.iter().map(|l| 2.0 * ((chi + l) / 2.0).sin().abs()).fold(0.0, f64::max);
        let grid = 20_000;
        let (mut best, mut best_chi) = (f64::INFINITY, 0.0);
        for k in 0..grid {
            let chi = -PI + TAU * k as f64 / grid as f64;
            let v = objective(chi);
            if v < best {
                best = v;
                best_chi = chi;
            }
        }
        let step = TAU / grid as f64;
        let (mut a, mut b) = (best_chi - step, best_chi + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if objective(c) < objective(d) {
                b = d;
            } else {
                a = c;
            }
        }
        objective((a + b) / 2.0)
    }

    #[test]
    fn varsigma_cases() {
        let xi = 0.03f64;
        let s = ErrorSpectrum::new(vec![xi / 2.0, -xi / 2.0]).unwrap();
        let v = varsigma(&s).unwrap();
        assert!((v - 2.0 * (xi / 4.0).sin()).abs() < 1e-15);
        assert!((v - xi / 2.0).abs() < 1e-5);
        assert_eq!(varsigma(&ErrorSpectrum::new(vec![0.0; 4]).unwrap()).unwrap(), 0.0);

        let phases = [0.0, 0.0, 0.0, xi];
        let v = varsigma(&ErrorSpectrum::new(phases.to_vec()).unwrap()).unwrap();
        assert!((v - 2.0 * (xi / 4.0).sin()).abs() < 1e-14);
        assert!((v - varsigma_brute(&phases)).abs() < 1e-10);

        let wide = ErrorSpectrum::new(vec![0.0, 2.0, 4.0]).unwrap();
        assert!(matches!(varsigma(&wide), Err(NoiseError::OutsideSmallErrorRegime { .. })));
    }

    #[test]
    fn varsigma_matches_brute_force_on_random_spectra() {
        let cfg = NoiseConfig::new(1.0, 17).unwrap();
        let mut stream = NoiseStream::new(&cfg, 0);
        for k in 0..20 {
            let phases: Vec<f64> = (0..5).map(|j| stream.draw(k * 5 + j).xi + 2.0).collect();
            let v = varsigma(&ErrorSpectrum::new(phases.clone()).unwrap()).unwrap();
            assert!((v - varsigma_brute(&phases)).abs() < 1e-9, "{phases:?}");
        }
    }

    #[test]
    fn draws_are_deterministic_and_bounded() {
        let cfg = NoiseConfig::new(0.01, 42).unwrap();
        assert_eq!(draw_errors(&cfg, 3, 77), draw_errors(&cfg, 3, 77));
        assert_ne!(draw_errors(&cfg, 3, 77), draw_errors(&cfg, 4, 77));
        assert_ne!(draw_errors(&cfg, 3, 77), draw_errors(&cfg, 3, 78));
        let mut stream = NoiseStream::new(&cfg, 3);
        let later = stream.draw(500);
        assert_eq!(stream.draw(77), draw_errors(&cfg, 3, 77));
        assert_eq!(later, draw_errors(&cfg, 3, 500));
        for k in 0..1000 {
            let d = stream.draw(k);
            assert!(d.xi.abs() <= 0.005 && (0.0..TAU).contains(&d.gamma) && (0.0..1.0).contains(&d.u));
        }
        let silent = NoiseConfig::new(0.0, 42).unwrap();
        assert!((0..100).all(|k| draw_errors(&silent, 0, k).xi == 0.0));
        assert!(NoiseConfig::new(-0.1, 0).is_err());
        assert!(NoiseConfig::new(0.1, 0).unwrap().with_atomic_phase(0.0).is_err());
    }

    #[test]
    fn xi_moments_match_uniform() {
        let eps = 0.02;
        let cfg = NoiseConfig::new(eps, 7).unwrap();
        let mut stream = NoiseStream::new(&cfg, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|k| stream.draw(k).xi).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var_true = eps * eps / 12.0;
        assert!(mean.abs() < 3.0 * (var_true / n as f64).sqrt());
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Var(ξ²) for uniform on [−a, a]: a⁴/5 − a⁴/9
        let a = eps / 2.0;
        let se = ((a.powi(4) / 5.0 - a.powi(4) / 9.0) / n as f64).sqrt();
        assert!((m2 - var_true).abs() < 3.0 * se, "{m2} vs {var_true}");
    }

    #[test]
    fn one_qubit_errors_are_unbiased() {
        let eps = 0.1;
        let cfg = NoiseConfig::new(eps, 9).unwrap();
        let mut stream = NoiseStream::new(&cfg, 1);
        let n = 100_000;
        let mut acc_h = [[C64::new(0.0, 0.0); 2]; 2];
        let mut acc_p = [[C64::new(0.0, 0.0); 2]; 2];
        for k in 0..n {
            let d = stream.draw(k);
            let eh = perturb(&Gate::Hadamard(0), &d).unwrap().error.matrix();
            let ep = perturb(&Gate::Phase(0, FixedPointPhase::ZERO), &d).unwrap().error.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    acc_h[i][j] += eh[i][j] / n as f64;
                    acc_p[i][j] += ep[i][j] / n as f64;
                }
            }
        }
        let to_vec = |m: [[C64; 2]; 2]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        assert!(max_dev(&to_vec(acc_h), &identity(2)) <= eps * eps);
        assert!(max_dev(&to_vec(acc_p), &identity(2)) <= eps * eps);
    }

    #[test]
    fn hadamard_axis_orthogonal_and_errors_unitary() {
        let cfg = NoiseConfig::new(0.5, 3).unwrap();
        let mut stream = NoiseStream::new(&cfg, 0);
        for k in 0..500 {
            let d = stream.draw(k);
            let mu = hadamard_error_axis(d.gamma);
            let dot = (mu[0] + mu[2]) * FRAC_1_SQRT_2;
            assert!(dot.abs() < 1e-12);
            let norm = mu.iter().map(|x| x * x).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            let e = perturb(&Gate::Hadamard(0), &d).unwrap().error;
            if let ErrorOperator::Rotation { matrix, .. } = e {
                assert!(unitarity_deviation(&matrix) < 1e-12);
            }
        }
    }

    #[test]
    fn fused_matches_sequential() {
        let cfg = NoiseConfig::new(0.3, 5).unwrap();
        let mut stream = NoiseStream::new(&cfg, 0);
        let amps: Vec<C64> = (0..8).map(|i| C64::new(1.0 + i as f64, 0.5 * i as f64)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let base = StateVector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
        let gates = [
            Gate::Hadamard(1),
            Gate::Phase(2, FixedPointPhase::from_turns(0.31)),
            Gate::ControlledPhase(0, 2, FixedPointPhase::from_turns(-0.12)),
        ];
        for (k, g) in gates.iter().enumerate() {
            let d = stream.draw(k as u64);
            let mut a = base.clone();
            let mut b = base.clone();
            perturb(g, &d).unwrap().apply(&mut a);
            apply_noisy_fused(&mut b, g, &d, &cfg);
            let dev = a
                .amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-14, "{g:?}");
        }
    }

    #[test]
    fn atomic_phase_quantizes_programmed_phase() {
        let delta = TAU / 2f64.powi(8);
        let cfg = NoiseConfig::new(0.0, 0).unwrap().with_atomic_phase(delta).unwrap();
        let q = cfg.programmed_phase(0.1234);
        assert!(((q / delta) - (q / delta).round()).abs() < 1e-12);
        assert!((q - 0.1234).abs() <= delta / 2.0);
        assert_eq!(NoiseConfig::new(0.0, 0).unwrap().programmed_phase(0.1234), 0.1234);
    }
}
