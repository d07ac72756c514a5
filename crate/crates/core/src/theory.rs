//! Closed-form fidelity predictions and bounds for the noisy-gate model.
//!
//! Per gate, the error eigenphase variance averages to `C·ε²/12` with
//! `C₁ = 1/4` for one-qubit gates and `C₂ = 3/16` for controlled phases, so
//! `σ*² = (n₁C₁ + n₂C₂)ε²/12` and `1 − ⟨f⟩ ≈ A·N_g·σ*²` with `A = N/(1+N)`.

use log::warn;
use thiserror::Error;

use crate::mapcircuits::CompiledCircuit;

/// Eigenphase-variance weight of a one-qubit gate error.
pub const C1: f64 = 0.25;
/// Eigenphase-variance weight of a controlled-phase error.
pub const C2: f64 = 3.0 / 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("gate fractions must lie in [0, 1] and sum to 1, got {0} + {1}")]
    BadFractions(f64, f64),
    #[error("circuit has no unitary gates")]
    EmptyCircuit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryPrediction {
    pub sigma_star_sq: f64,
    pub a: f64,
    /// Per-step decay `Γ_th = A·n_g·σ*²`.
    pub gamma_th: f64,
    /// Average spectral spread `ς* = ε/8`.
    pub varsigma_star: f64,
    /// `ς*²`, the per-gate coefficient of the quadratic bound.
    pub bound_coeff: f64,
    pub n1_frac: f64,
    pub n2_frac: f64,
}

/// `A = N/(1+N)` for `N = 2^{n_q}`.
pub fn dimension_factor(n_q: u32) -> f64 {
    let n = 2f64.powi(n_q as i32);
    n / (1.0 + n)
}

pub fn sigma_star_sq(n1_frac: f64, n2_frac: f64, epsilon: f64) -> Result<f64, TheoryError> {
    let in_range = |x: f64| (0.0..=1.0).contains(&x);
    if !in_range(n1_frac) || !in_range(n2_frac) || (n1_frac + n2_frac - 1.0).abs() > 1e-12 {
        return Err(TheoryError::BadFractions(n1_frac, n2_frac));
    }
    Ok((n1_frac * C1 + n2_frac * C2) * epsilon * epsilon / 12.0)
}

/// `1 − A·N_g·σ*²`. Logs a warning outside the perturbative window.
pub fn mean_fidelity(n_gates: u64, sigma_star_sq: f64, n_q: u32) -> f64 {
    let decay = dimension_factor(n_q) * n_gates as f64 * sigma_star_sq;
    if decay > 0.5 {
        warn!("predicted decay {decay:.3} is outside the perturbative regime");
    }
    1.0 - decay
}

/// `σ(f)/(1 − ⟨f⟩) = N^{-1/2}`.
pub fn fidelity_std_ratio(n_q: u32) -> f64 {
    2f64.powf(-(n_q as f64) / 2.0)
}

/// Quadratic bound `1 − f ≤ min(1, N_g²ε²/64)`, i.e. `(N_g ς*)²` with the
/// mean spread `ς* = ε/8`. A single realization obeys `(Σ_k ς_k)²` exactly;
/// this averaged form applies once the spreads average out.
pub fn fidelity_bound(n_gates: u64, epsilon: f64) -> f64 {
    let g = n_gates as f64;
    (g * g * epsilon * epsilon / 64.0).min(1.0)
}

/// Incoherent estimate `1 − f ≈ N_g ε²/48`, a model rather than a bound.
pub fn incoherent_estimate(n_gates: u64, epsilon: f64) -> f64 {
    n_gates as f64 * epsilon * epsilon / 48.0
}

/// Prediction from explicit per-step gate counts.
pub fn predict(n1: usize, n2: usize, epsilon: f64, n_q: u32) -> Result<TheoryPrediction, TheoryError> {
    let n_g = n1 + n2;
    if n_g == 0 {
        return Err(TheoryError::EmptyCircuit);
    }
    let n1_frac = n1 as f64 / n_g as f64;
    let n2_frac = n2 as f64 / n_g as f64;
    let s2 = sigma_star_sq(n1_frac, 1.0 - n1_frac, epsilon)?;
    let a = dimension_factor(n_q);
    let varsigma_star = epsilon / 8.0;
    Ok(TheoryPrediction {
        sigma_star_sq: s2,
        a,
        gamma_th: a * n_g as f64 * s2,
        varsigma_star,
        bound_coeff: varsigma_star * varsigma_star,
        n1_frac,
        n2_frac,
    })
}

/// `Γ_th` from the circuit's measured counts.
pub fn gamma_th(circuit: &CompiledCircuit, epsilon: f64, n_q: u32) -> Result<f64, TheoryError> {
    Ok(predict(circuit.n1, circuit.n2, epsilon, n_q)?.gamma_th)
}
