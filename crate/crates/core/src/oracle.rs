//! Dense reference evaluations used to check compiled circuits.
//!
//! Everything here is written directly from the defining formulas and shares
//! no code with the circuit builders beyond the state-vector kernels.

use std::f64::consts::TAU;

use crate::gateset::{hadamard_matrix, Decomposition, Gate};
use crate::mapcircuits::{exponentiation_circuit, lower_diagonal, map_step_circuit, MapConfig, MapError, MapKind};
use crate::phase::FixedPointPhase;
use crate::statevector::{StateVector, C64};

/// Probability mass allowed on an ancilla at a reset before the column is
/// rejected.
const LEAK_TOLERANCE: f64 = 1e-10;

/// Applies `gates` to the basis state `col` on `n_wires` wires. Resets are
/// treated as checks: `None` if any reset finds its wire away from `|0⟩`.
pub fn apply_gates_dense(gates: &[Gate], n_wires: usize, col: usize) -> Option<Vec<C64>> {
    let mut s = StateVector::new_basis_state(n_wires, col).ok()?;
    let h = hadamard_matrix();
    for g in gates {
        match *g {
            Gate::Hadamard(q) => s.apply_1q_unchecked(q, &h),
            Gate::Phase(q, p) => s.apply_phase_unchecked(q, p.to_radians()),
            Gate::ControlledPhase(a, b, p) => s.apply_controlled_phase_unchecked(a, b, p.to_radians()),
            Gate::AncillaMeasureReset(q) => {
                let leak: f64 = s
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i & (1 << q) != 0)
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                if leak > LEAK_TOLERANCE {
                    return None;
                }
            }
        }
    }
    Some(s.into_amplitudes())
}

/// Matrix of a circuit restricted to the first `n_system` wires, with every
/// wire above them starting and ending in `|0⟩`. Row-major, `m[row][col]`.
pub fn circuit_matrix(gates: &[Gate], n_wires: usize, n_system: usize) -> Option<Vec<Vec<C64>>> {
    let dim = 1usize << n_system;
    let mut m = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let out = apply_gates_dense(gates, n_wires, col)?;
        let leak: f64 = out[dim..].iter().map(|a| a.norm_sqr()).sum();
        if leak > LEAK_TOLERANCE {
            return None;
        }
        for (row, r) in m.iter_mut().enumerate() {
            r[col] = out[row];
        }
    }
    Some(m)
}

pub fn max_abs_deviation(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_deviation_matrix(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| max_abs_deviation(x, y))
        .fold(0.0, f64::max)
}

/// Max element deviation after removing the best global phase, estimated
/// from the largest entry of `b`.
pub fn deviation_up_to_phase(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    let (mut best, mut pos) = (0.0, (0, 0));
    for (i, row) in b.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if x.norm() > best {
                best = x.norm();
                pos = (i, j);
            }
        }
    }
    let ref_a = a[pos.0][pos.1];
    if ref_a.norm() < 1e-300 {
        return f64::INFINITY;
    }
    let phase = b[pos.0][pos.1] / ref_a;
    let phase = phase / phase.norm();
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(move |(u, v)| (u * phase - v).norm()))
        .fold(0.0, f64::max)
}

pub fn matmul(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let mut out = vec![vec![C64::new(0.0, 0.0); m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            for j in 0..m {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

pub fn dagger(a: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = a.len();
    let m = a[0].len();
    (0..m).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

/// Max deviation of `a† a` from the identity.
pub fn unitarity_error(a: &[Vec<C64>]) -> f64 {
    let p = matmul(&dagger(a), a);
    let mut worst: f64 = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((x - target).norm());
        }
    }
    worst
}

/// `F[m][j] = e^{2πi jm/N}/√N`.
pub fn dft_matrix(n_q: usize) -> Vec<Vec<C64>> {
    let n = 1usize << n_q;
    let norm = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|m| {
            (0..n)
                .map(|j| C64::from_polar(norm, TAU * ((j * m) % n) as f64 / n as f64))
                .collect()
        })
        .collect()
}

pub fn bit_reverse(x: usize, bits: usize) -> usize {
    (0..bits).fold(0, |acc, b| acc | (((x >> b) & 1) << (bits - 1 - b)))
}

/// Permutation matrix `|x⟩ → |rev(x)⟩`.
pub fn bit_reversal_matrix(n_q: usize) -> Vec<Vec<C64>> {
    let n = 1usize << n_q;
    let mut p = vec![vec![C64::new(0.0, 0.0); n]; n];
    for x in 0..n {
        p[bit_reverse(x, n_q)][x] = C64::new(1.0, 0.0);
    }
    p
}

fn diag(d: &[C64]) -> Vec<Vec<C64>> {
    let n = d.len();
    let mut m = vec![vec![C64::new(0.0, 0.0); n]; n];
    for (i, x) in d.iter().enumerate() {
        m[i][i] = *x;
    }
    m
}

/// Kick potential evaluated on the coordinate grid `θ_j = 2π(j + δ)/N`.
pub fn potential(cfg: &MapConfig, theta: f64) -> f64 {
    match cfg.kind {
        MapKind::Sawtooth => -theta * theta / 2.0,
        MapKind::DoubleWell => {
            let c = TAU * cfg.a / cfg.dim() as f64;
            (theta * theta - c * c).powi(2)
        }
    }
}

/// One Floquet period `U_F = e^{−iTη²/2ħ} e^{−ikV(θ)/ħ}` in the coordinate
/// basis, with `Tħ = 2πL/N` and `k/ħ = KN/(2πL)`.
pub fn floquet_matrix(cfg: &MapConfig) -> Vec<Vec<C64>> {
    let n = cfg.dim();
    let nf = n as f64;
    let l = cfg.cells as f64;
    let delta = cfg.delta_theta();
    let kick: Vec<C64> = (0..n)
        .map(|j| {
            let theta = TAU * (j as f64 + delta) / nf;
            C64::from_polar(1.0, -cfg.k * nf * potential(cfg, theta) / (TAU * l))
        })
        .collect();
    let free: Vec<C64> = (0..n)
        .map(|j| {
            // phase −πLj²/N, reduced exactly before conversion
            let num = (cfg.cells as u128 * (j * j) as u128) % (2 * n as u128);
            C64::from_polar(1.0, -std::f64::consts::PI * num as f64 / nf)
        })
        .collect();
    let f = dft_matrix(cfg.n_q);
    let u = matmul(&matmul(&f, &diag(&free)), &dagger(&f));
    matmul(&u, &diag(&kick))
}

/// Diagonal of `∏_{j_1..j_p} C_{{j_1..j_p}}(2πβ·2^{j_1+…+j_p})` over every
/// ordered `p`-tuple of wires, evaluated tuple by tuple. `beta` is in turns
/// and should be dyadic so the per-tuple products are exact.
pub fn plain_exponentiation_diagonal(beta: f64, p: usize, n_q: usize) -> Vec<C64> {
    let n = 1usize << n_q;
    let mut turns = vec![0.0f64; n];
    let mut tuple = vec![0usize; p];
    loop {
        let mask = tuple.iter().fold(0usize, |m, j| m | (1 << j));
        let exponent: usize = tuple.iter().sum();
        let w = (beta * 2f64.powi(exponent as i32)).rem_euclid(1.0);
        for (x, t) in turns.iter_mut().enumerate() {
            if x & mask == mask {
                *t = (*t + w).rem_euclid(1.0);
            }
        }
        // odometer over n_q^p tuples
        let mut i = 0;
        loop {
            if i == p {
                return turns.iter().map(|t| C64::from_polar(1.0, TAU * t)).collect();
            }
            tuple[i] += 1;
            if tuple[i] < n_q {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

/// Number of ordered tuples in the plain product, `n_q^p`.
pub fn plain_gate_count(n_q: usize, p: usize) -> usize {
    n_q.pow(p as u32)
}

/// Deviation, up to global phase, between the compiled noiseless step and
/// the analytic Floquet matrix. Infinite if the compiled circuit leaks onto
/// the ancilla.
pub fn floquet_deviation(cfg: &MapConfig, strategy: Decomposition) -> Result<f64, MapError> {
    let c = map_step_circuit(cfg, strategy)?;
    Ok(match circuit_matrix(&c.gates, c.n_wires(), cfg.n_q) {
        Some(m) => deviation_up_to_phase(&m, &floquet_matrix(cfg)),
        None => f64::INFINITY,
    })
}

/// Deviation between the collected `Ξ_β^p` circuit and the plain product
/// for the dyadic `β = numerator/2^bits` turns (`bits ≤ 52`).
pub fn collection_deviation(
    n_q: usize,
    p: usize,
    numerator: i64,
    bits: u32,
    strategy: Decomposition,
) -> Result<f64, MapError> {
    let beta = FixedPointPhase::from_dyadic(numerator as i128, bits);
    let register: Vec<usize> = (0..n_q).collect();
    let c = lower_diagonal(&exponentiation_circuit(beta, p, &register), n_q, strategy)?;
    let Some(m) = circuit_matrix(&c.gates, c.n_wires(), n_q) else {
        return Ok(f64::INFINITY);
    };
    let plain = plain_exponentiation_diagonal(numerator as f64 / 2f64.powi(bits as i32), p, n_q);
    let mut worst: f64 = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let target = if i == j { plain[i] } else { C64::new(0.0, 0.0) };
            worst = worst.max((x - target).norm());
        }
    }
    Ok(worst)
}

/// Noise-averaged `1 − ⟨f⟩` after each of `0..=t_max` steps, to second
/// order in `ε`: the sum over gates of `E[ξ²]` times the variance of the
/// error generator in the ideal state right after the gate. Resets are
/// treated as identities, so any projection effect is excluded.
pub fn perturbative_decay(gates: &[Gate], initial: &StateVector, epsilon: f64, t_max: usize) -> Vec<f64> {
    let xi2 = epsilon * epsilon / 12.0;
    let h = hadamard_matrix();
    let mut s = initial.clone();
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for _ in 0..t_max {
        for g in gates {
            match *g {
                Gate::Hadamard(q) => {
                    s.apply_1q_unchecked(q, &h);
                    // generator μ·σ/2 with μ = (sin γ/√2, cos γ, −sin γ/√2),
                    // γ uniform: E[(μ·r)²] = (r_x − r_z)²/4 + r_y²/2
                    let (rx, ry, rz) = bloch_vector(s.amplitudes(), q);
                    let m2 = (rx - rz).powi(2) / 4.0 + ry * ry / 2.0;
                    acc += xi2 * (1.0 - m2) / 4.0;
                }
                Gate::Phase(q, p) => {
                    s.apply_phase_unchecked(q, p.to_radians());
                    let pr = projector_weight(s.amplitudes(), 1 << q);
                    acc += xi2 * pr * (1.0 - pr);
                }
                Gate::ControlledPhase(a, b, p) => {
                    s.apply_controlled_phase_unchecked(a, b, p.to_radians());
                    let pr = projector_weight(s.amplitudes(), (1 << a) | (1 << b));
                    acc += xi2 * pr * (1.0 - pr);
                }
                Gate::AncillaMeasureReset(_) => {}
            }
        }
        out.push(acc);
    }
    out
}

fn projector_weight(amps: &[C64], mask: usize) -> f64 {
    amps.iter()
        .enumerate()
        .filter(|(i, _)| i & mask == mask)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Bloch vector of the reduced state of wire `q`.
fn bloch_vector(amps: &[C64], q: usize) -> (f64, f64, f64) {
    let bit = 1 << q;
    let (mut rho10, mut p0, mut p1) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for (i, a) in amps.iter().enumerate() {
        if i & bit == 0 {
            let b = amps[i | bit];
            rho10 += a.conj() * b;
            p0 += a.norm_sqr();
            p1 += b.norm_sqr();
        }
    }
    (2.0 * rho10.re, 2.0 * rho10.im, p0 - p1)
}
