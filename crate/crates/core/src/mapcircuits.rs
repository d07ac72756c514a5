//! Circuits for quantized kicked maps: the swap-free QFT, the diagonal
//! exponentiation circuit `Ξ_β^p : |x⟩ → e^{2πiβx^p}|x⟩` with gate
//! collection, and one Floquet step `Q = F Q_η F† Q_θ`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use thiserror::Error;

use crate::gateset::{compile_multi_controlled, count_gates, Decomposition, Gate, GateError, MultiControlledPhase};
use crate::phase::FixedPointPhase;
use crate::statevector::{StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("n_q must be at least 2, got {0}")]
    TooFewQubits(usize),
    #[error("n_q = {0} exceeds the simulator limit")]
    TooManyQubits(usize),
    #[error("cell count L must be at least 1")]
    NoCells,
    #[error("parameter {0} must be finite")]
    NotFinite(&'static str),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("circuit dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    Sawtooth,
    DoubleWell,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Sawtooth => "sawtooth",
            MapKind::DoubleWell => "double-well",
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sawtooth" => Ok(MapKind::Sawtooth),
            "double-well" | "double_well" | "doublewell" => Ok(MapKind::DoubleWell),
            other => Err(format!("unknown map '{other}' (expected sawtooth or double-well)")),
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Map parameters. `cells` is `L`, `k` is the classical parameter `K = kT`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapConfig {
    pub kind: MapKind,
    pub n_q: usize,
    pub cells: u32,
    pub k: f64,
    pub a: f64,
    /// Coordinate offset; `None` means `(1 − N)/2`.
    pub delta_theta: Option<f64>,
}

impl MapConfig {
    pub const DEFAULT_CELLS: u32 = 2;
    pub const DEFAULT_K: f64 = 0.04;
    pub const DEFAULT_A: f64 = 1.6;

    pub fn new(kind: MapKind, n_q: usize) -> Self {
        Self {
            kind,
            n_q,
            cells: Self::DEFAULT_CELLS,
            k: Self::DEFAULT_K,
            a: Self::DEFAULT_A,
            delta_theta: None,
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if self.n_q < 2 {
            return Err(MapError::TooFewQubits(self.n_q));
        }
        if self.n_q >= crate::statevector::MAX_QUBITS {
            return Err(MapError::TooManyQubits(self.n_q));
        }
        if self.cells == 0 {
            return Err(MapError::NoCells);
        }
        if !self.k.is_finite() {
            return Err(MapError::NotFinite("K"));
        }
        if !self.a.is_finite() {
            return Err(MapError::NotFinite("a"));
        }
        if self.delta_theta.is_some_and(|d| !d.is_finite()) {
            return Err(MapError::NotFinite("delta_theta"));
        }
        Ok(())
    }

    /// `N = 2^{n_q}`.
    pub fn dim(&self) -> usize {
        1 << self.n_q
    }

    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
            .unwrap_or((1.0 - self.dim() as f64) / 2.0)
    }

    pub fn degree(&self) -> usize {
        match self.kind {
            MapKind::Sawtooth => 2,
            MapKind::DoubleWell => 4,
        }
    }

    /// Whether a step circuit allocates the ancilla wire.
    pub fn uses_ancilla(&self) -> bool {
        self.degree().min(self.n_q) >= 4
    }
}

/// `P(x + δ) = Σ_{m=1}^{p} f_m x^m`, constant term dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialPotential {
    /// `coeffs[m - 1] = f_m`.
    coeffs: Vec<f64>,
}

impl PolynomialPotential {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `f_m`, zero outside `1..=p`.
    pub fn coefficient(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.coeffs.get(m - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, f| (acc + f) * x)
    }
}

pub fn potential_coefficients(cfg: &MapConfig) -> PolynomialPotential {
    let d = cfg.delta_theta();
    match cfg.kind {
        MapKind::Sawtooth => PolynomialPotential::new(vec![-d, -0.5]),
        MapKind::DoubleWell => {
            let a2 = cfg.a * cfg.a;
            PolynomialPotential::new(vec![
                4.0 * d * (d * d - a2),
                6.0 * d * d - 2.0 * a2,
                4.0 * d,
                1.0,
            ])
        }
    }
}

/// An ordered gate list with bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledCircuit {
    pub gates: Vec<Gate>,
    /// Width of the system register.
    pub n_system: usize,
    /// Ancilla wire, always `n_system` when present.
    pub ancilla: Option<usize>,
    pub n1: usize,
    pub n2: usize,
    /// Gate indices where map steps begin, plus the final length.
    pub step_boundaries: Vec<usize>,
}

impl CompiledCircuit {
    pub fn new(gates: Vec<Gate>, n_system: usize, ancilla: Option<usize>) -> Self {
        let (n1, n2) = count_gates(&gates);
        let len = gates.len();
        Self {
            gates,
            n_system,
            ancilla,
            n1,
            n2,
            step_boundaries: vec![0, len],
        }
    }

    /// Total wires including the ancilla.
    pub fn n_wires(&self) -> usize {
        self.n_system + usize::from(self.ancilla.is_some())
    }

    pub fn uses_ancilla(&self) -> bool {
        self.ancilla.is_some()
    }

    /// `n_g = n1 + n2`.
    pub fn n_gates(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn measurement_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.is_unitary()).count()
    }

    pub fn is_unitary(&self) -> bool {
        self.gates.iter().all(Gate::is_unitary)
    }

    /// `t` copies back to back.
    pub fn repeated(&self, t: usize) -> Self {
        let len = self.gates.len();
        let mut gates = Vec::with_capacity(len * t);
        for _ in 0..t {
            gates.extend_from_slice(&self.gates);
        }
        Self {
            gates,
            n_system: self.n_system,
            ancilla: self.ancilla,
            n1: self.n1 * t,
            n2: self.n2 * t,
            step_boundaries: (0..=t).map(|k| k * len).collect(),
        }
    }

    /// Gates in reverse order, each replaced by its inverse. Fails on
    /// circuits with resets.
    pub fn adjoint(&self) -> Option<Self> {
        if !self.is_unitary() {
            return None;
        }
        let gates = self.gates.iter().rev().map(Gate::adjoint).collect();
        Some(Self::new(gates, self.n_system, self.ancilla))
    }

    /// One gate per line, `KIND wires phase`, after a `#` header.
    pub fn dump(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(
            out,
            "# n_system={} ancilla={} n1={} n2={}",
            self.n_system,
            self.ancilla.map_or("none".to_string(), |a| a.to_string()),
            self.n1,
            self.n2
        );
        for g in &self.gates {
            let _ = match *g {
                Gate::Hadamard(q) => writeln!(out, "H {q} -"),
                Gate::Phase(q, p) => writeln!(out, "P {q} {p}"),
                Gate::ControlledPhase(a, b, p) => writeln!(out, "CP {a},{b} {p}"),
                Gate::AncillaMeasureReset(q) => writeln!(out, "MR {q} -"),
            };
        }
        out
    }
}

/// Parses the gate lines of [`CompiledCircuit::dump`]; comments are skipped.
pub fn parse_dump(text: &str) -> Result<Vec<Gate>, MapError> {
    let mut gates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| MapError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err("expected three fields"));
        }
        let wires: Vec<usize> = fields[1]
            .split(',')
            .map(|w| w.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err("bad wire list"))?;
        let phase = || FixedPointPhase::from_hex(fields[2]).ok_or_else(|| err("bad phase"));
        let g = match (fields[0], wires.as_slice()) {
            ("H", [q]) => Gate::Hadamard(*q),
            ("MR", [q]) => Gate::AncillaMeasureReset(*q),
            ("P", [q]) => Gate::Phase(*q, phase()?),
            ("CP", [a, b]) => Gate::controlled_phase(*a, *b, phase()?)?,
            _ => return Err(err("unknown gate or wrong wire count")),
        };
        gates.push(g);
    }
    Ok(gates)
}

/// Swap-free QFT. Its matrix is `F·P`, with `P` the bit reversal
/// `|x⟩ → |rev(x)⟩` and `F|j⟩ = N^{-1/2} Σ_m e^{2πijm/N}|m⟩`.
pub fn qft_circuit(n_q: usize) -> CompiledCircuit {
    let mut gates = Vec::with_capacity(n_q * (n_q + 1) / 2);
    for l in 0..n_q {
        gates.push(Gate::Hadamard(l));
        for r in l + 1..n_q {
            // phase 2π·2^{l−r−1}
            let phi = FixedPointPhase::from_dyadic(1, (r - l + 1) as u32);
            gates.push(Gate::ControlledPhase(l, r, phi));
        }
    }
    CompiledCircuit::new(gates, n_q, None)
}

/// `G_k(n)`: multisets of `k` positive integers summing to `n`, each as a
/// non-increasing sequence.
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            if n == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        // remaining k − 1 parts need at least one each
        let hi = max.min(n.saturating_sub(k - 1));
        for part in (1..=hi).rev() {
            if part * k < n {
                break;
            }
            prefix.push(part);
            rec(n - part, k - 1, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k >= 1 && k <= n {
        rec(n, k, n, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Lexicographic successor of a sequence, `false` once it was the largest.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Phase (turns, mod 1) of the single gate on wire set `J` that collects
/// every `p`-tuple whose index set is `J`:
/// `β Σ_{g ∈ G_|J|(p)} Σ_{assignments} p!/∏g_i! · 2^{Σ g_i J_i}`.
///
/// `j_weights` are bit positions, not physical wires.
pub fn collected_phase(j_weights: &[usize], p: usize, beta: FixedPointPhase) -> FixedPointPhase {
    let k = j_weights.len();
    let pf = factorial(p);
    let mut total = FixedPointPhase::ZERO;
    for g in partitions(p, k) {
        let weight = pf / g.iter().map(|&x| factorial(x)).product::<u128>();
        let mut parts = g.clone();
        parts.sort_unstable();
        loop {
            let exponent: usize = parts.iter().zip(j_weights).map(|(gi, ji)| gi * ji).sum();
            total += beta.shifted(exponent as u32).mul_int(weight);
            if !next_permutation(&mut parts) {
                break;
            }
        }
    }
    total
}

/// Nonempty subsets of `0..n` with at most `max` elements, in
/// lexicographic order.
pub fn index_sets(n: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for j in start..n {
            cur.push(j);
            out.push(cur.clone());
            if cur.len() < max {
                rec(j + 1, n, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, max, &mut Vec::new(), &mut out);
    out
}

/// `Σ_{k=1}^{min(n,p)} C(n, k)`.
pub fn collected_gate_count(n_q: usize, p: usize) -> usize {
    let mut c = 1usize;
    let mut total = 0;
    for k in 1..=n_q.min(p) {
        c = c * (n_q - k + 1) / k;
        total += c;
    }
    total
}

/// Collected form of `Ξ_β^p`. `register[i]` is the wire carrying bit
/// weight `2^i`.
pub fn exponentiation_circuit(beta: FixedPointPhase, p: usize, register: &[usize]) -> Vec<MultiControlledPhase> {
    exponentiation_sum(&[(p, beta)], register)
}

/// `∏_m Ξ_{β_m}^m` as one multi-controlled gate per index set; terms on the
/// same set are merged.
pub fn exponentiation_sum(terms: &[(usize, FixedPointPhase)], register: &[usize]) -> Vec<MultiControlledPhase> {
    let max_p = terms.iter().map(|t| t.0).max().unwrap_or(0);
    index_sets(register.len(), max_p)
        .into_iter()
        .map(|j| {
            let phase = terms
                .iter()
                .filter(|(m, _)| j.len() <= *m)
                .map(|&(m, beta)| collected_phase(&j, m, beta))
                .sum();
            let wires = j.iter().map(|&i| register[i]).collect();
            MultiControlledPhase::new(wires, phase).expect("index sets are nonempty and distinct")
        })
        .collect()
}

/// Kick coefficients `β_m = −K f_m (2π)^{p−2}/(L N^{p−1})`, with the power
/// of two in `N^{p−1}` applied exactly.
pub fn kick_betas(cfg: &MapConfig) -> Vec<(usize, FixedPointPhase)> {
    let pot = potential_coefficients(cfg);
    let p = pot.degree();
    let shift = (cfg.n_q * (p - 1)) as u32;
    (1..=p)
        .map(|m| {
            let c = -cfg.k * pot.coefficient(m) * TAU.powi(p as i32 - 2) / cfg.cells as f64;
            (m, FixedPointPhase::from_turns_scaled(c, shift))
        })
        .collect()
}

/// Free-evolution coefficient `−L/(2N)`, exact.
pub fn free_beta(cfg: &MapConfig) -> FixedPointPhase {
    FixedPointPhase::from_dyadic(-(cfg.cells as i128), cfg.n_q as u32 + 1)
}

fn lower(
    out: &mut Vec<Gate>,
    gates: &[MultiControlledPhase],
    strategy: Decomposition,
    ancilla: Option<usize>,
) -> Result<(), MapError> {
    // without an ancilla wire, three-wire gates use the ancilla-free form
    let strategy = if ancilla.is_none() { Decomposition::AncillaMin } else { strategy };
    for mc in gates {
        out.extend(compile_multi_controlled(mc, strategy, ancilla)?);
    }
    Ok(())
}

/// Lowers a diagonal product on wires `0..n_q` to native gates. An ancilla
/// on wire `n_q` is allocated when some gate acts on four or more wires.
pub fn lower_diagonal(
    gates: &[MultiControlledPhase],
    n_q: usize,
    strategy: Decomposition,
) -> Result<CompiledCircuit, MapError> {
    let ancilla = gates.iter().any(|g| g.degree() >= 4).then_some(n_q);
    let mut out = Vec::new();
    lower(&mut out, gates, strategy, ancilla)?;
    Ok(CompiledCircuit::new(out, n_q, ancilla))
}

/// One Floquet step, in time order: `Q_θ`, `F†`, `Q_η`, `F`.
///
/// The QFT block realizes `F·P`, so `F Q_η F† = U (P Q_η P) U†` and `Q_η`
/// is emitted with its bit weights reversed.
pub fn map_step_circuit(cfg: &MapConfig, strategy: Decomposition) -> Result<CompiledCircuit, MapError> {
    cfg.validate()?;
    let n = cfg.n_q;
    let ancilla = cfg.uses_ancilla().then_some(n);
    let natural: Vec<usize> = (0..n).collect();
    let reversed: Vec<usize> = (0..n).rev().collect();
    let qft = qft_circuit(n);
    let iqft = qft.adjoint().expect("QFT is unitary");

    let mut gates = Vec::new();
    lower(&mut gates, &exponentiation_sum(&kick_betas(cfg), &natural), strategy, ancilla)?;
    gates.extend_from_slice(&iqft.gates);
    lower(&mut gates, &exponentiation_circuit(free_beta(cfg), 2, &reversed), strategy, ancilla)?;
    gates.extend_from_slice(&qft.gates);
    Ok(CompiledCircuit::new(gates, n, ancilla))
}

/// Header used for circuit dumps.
pub fn describe(cfg: &MapConfig, strategy: Decomposition) -> String {
    format!(
        "map={} n_q={} L={} K={} a={} delta_theta={} decomposition={}",
        cfg.kind,
        cfg.n_q,
        cfg.cells,
        cfg.k,
        cfg.a,
        cfg.delta_theta(),
        strategy.name()
    )
}

/// `H ⊗ I ⊗ H^{⊗(n_q−2)} |0⟩`, leftmost factor on the highest wire; the
/// ancilla (if any) starts in `|0⟩`.
pub fn initial_state(cfg: &MapConfig) -> Result<StateVector, MapError> {
    cfg.validate()?;
    let n = cfg.n_q;
    let n_wires = n + usize::from(cfg.uses_ancilla());
    let mut on: Vec<usize> = (0..n - 2).collect();
    on.push(n - 1);
    let amp = (0.5f64).powf(on.len() as f64 / 2.0);
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n_wires];
    // every subset of the Hadamard wires, with equal weight
    let m = on.len();
    for bits in 0..(1usize << m) {
        let label = (0..m).filter(|b| bits & (1 << b) != 0).fold(0, |acc, b| acc | (1 << on[b]));
        amps[label] = C64::new(amp, 0.0);
    }
    StateVector::from_amplitudes(amps).map_err(|_| MapError::TooManyQubits(n))
}

/// Multiplicity of each index-set size in a gate list, keyed by size.
pub fn degree_histogram(gates: &[MultiControlledPhase]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for g in gates {
        *h.entry(g.degree()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{
        bit_reversal_matrix, circuit_matrix, dft_matrix, deviation_up_to_phase, floquet_matrix,
        matmul, max_abs_deviation, max_abs_deviation_matrix, plain_exponentiation_diagonal,
        plain_gate_count, unitarity_error,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dyadic_beta(rng: &mut ChaCha8Rng) -> (f64, FixedPointPhase) {
        let num: i64 = rng.random_range(-(1 << 23)..(1 << 23));
        (num as f64 / 2f64.powi(24), FixedPointPhase::from_dyadic(num as i128, 24))
    }

    fn diagonal_of(gates: &[MultiControlledPhase], n_q: usize) -> Vec<C64> {
        let mut out = Vec::new();
        let c = lower_diagonal(gates, n_q, Decomposition::AncillaEager).unwrap();
        let m = circuit_matrix(&c.gates, c.n_wires(), n_q).unwrap();
        for (i, row) in m.iter().enumerate() {
            out.push(row[i]);
        }
        out
    }

    #[test]
    fn qft_small_cases() {
        let q1 = qft_circuit(1);
        assert_eq!(q1.gates, vec![Gate::Hadamard(0)]);
        let q3 = qft_circuit(3);
        assert_eq!((q3.n1, q3.n2), (3, 3));
        let u = circuit_matrix(&q3.gates, 3, 3).unwrap();
        let expected = matmul(&dft_matrix(3), &bit_reversal_matrix(3));
        assert!(max_abs_deviation_matrix(&u, &expected) < 1e-12);

        let out = crate::oracle::apply_gates_dense(&qft_circuit(2).gates, 2, 0).unwrap();
        assert!(max_abs_deviation(&out, &[C64::new(0.5, 0.0); 4]) < 1e-15);
    }

    #[test]
    fn qft_matches_dft_times_reversal() {
        for n in 1..=6 {
            let u = circuit_matrix(&qft_circuit(n).gates, n, n).unwrap();
            let expected = matmul(&dft_matrix(n), &bit_reversal_matrix(n));
            assert!(max_abs_deviation_matrix(&u, &expected) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn partition_enumeration() {
        assert_eq!(partitions(4, 1), vec![vec![4]]);
        assert_eq!(partitions(4, 2), vec![vec![3, 1], vec![2, 2]]);
        assert_eq!(partitions(4, 3), vec![vec![2, 1, 1]]);
        assert_eq!(partitions(4, 4), vec![vec![1, 1, 1, 1]]);
        assert!(partitions(2, 3).is_empty());
        assert_eq!(partitions(7, 3).len(), 4);
    }

    #[test]
    fn collected_phase_low_orders() {
        let beta = FixedPointPhase::from_turns(0.1234567);
        for j in 0..6 {
            assert_eq!(collected_phase(&[j], 1, beta), beta.shifted(j as u32));
            assert_eq!(collected_phase(&[j], 2, beta), beta.shifted(2 * j as u32));
            for k in j + 1..6 {
                assert_eq!(collected_phase(&[j, k], 2, beta), beta.shifted((j + k) as u32).mul_int(2));
            }
        }
    }

    /// Direct sum over the tuples whose index set is `J`.
    fn brute_collected(j_set: &[usize], p: usize, beta: FixedPointPhase) -> FixedPointPhase {
        let k = j_set.len();
        let mut total = FixedPointPhase::ZERO;
        let mut idx = vec![0usize; p];
        loop {
            let tuple: Vec<usize> = idx.iter().map(|&i| j_set[i]).collect();
            let mut seen = tuple.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() == k {
                total += beta.shifted(tuple.iter().sum::<usize>() as u32);
            }
            let mut i = 0;
            loop {
                if i == p {
                    return total;
                }
                idx[i] += 1;
                if idx[i] < k {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn collected_phase_matches_tuple_sum() {
        let beta = FixedPointPhase::from_turns(-0.377);
        for p in 1..=4 {
            for j in index_sets(6, p) {
                assert_eq!(collected_phase(&j, p, beta), brute_collected(&j, p, beta), "{j:?} p={p}");
            }
        }
    }

    #[test]
    fn gate_count_formula() {
        for n in 1..=12 {
            for p in 1..=4 {
                let gates = exponentiation_circuit(FixedPointPhase::ZERO, p, &(0..n).collect::<Vec<_>>());
                assert_eq!(gates.len(), collected_gate_count(n, p), "n={n} p={p}");
            }
        }
        assert_eq!(collected_gate_count(5, 4), 30);
        assert_eq!(plain_gate_count(5, 4), 625);
        assert_eq!(collected_gate_count(3, 2), 6);
        assert_eq!(collected_gate_count(3, 4), 7);
    }

    #[test]
    fn collected_diagonal_matches_plain_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=5 {
            for p in 1..=4 {
                for _ in 0..3 {
                    let (bf, bx) = dyadic_beta(&mut rng);
                    let gates = exponentiation_circuit(bx, p, &(0..n).collect::<Vec<_>>());
                    let d = diagonal_of(&gates, n);
                    let plain = plain_exponentiation_diagonal(bf, p, n);
                    assert!(max_abs_deviation(&d, &plain) < 1e-10, "n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn zero_beta_is_identity() {
        let gates = exponentiation_circuit(FixedPointPhase::ZERO, 3, &[0, 1, 2]);
        assert!(gates.iter().all(|g| g.phase().is_zero()));
    }

    #[test]
    fn coefficients() {
        let mut cfg = MapConfig::new(MapKind::Sawtooth, 2);
        cfg.delta_theta = Some(-1.5);
        let c = potential_coefficients(&cfg);
        assert_eq!((c.coefficient(2), c.coefficient(1)), (-0.5, 1.5));

        let mut cfg = MapConfig::new(MapKind::DoubleWell, 4);
        cfg.delta_theta = Some(0.0);
        let c = potential_coefficients(&cfg);
        assert_eq!(c.degree(), 4);
        assert_eq!(c.coefficient(4), 1.0);
        assert_eq!(c.coefficient(3), 0.0);
        assert!((c.coefficient(2) + 5.12).abs() < 1e-12);
        assert_eq!(c.coefficient(1), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        cfg.delta_theta = Some(-2.7);
        let c = potential_coefficients(&cfg);
        for _ in 0..100 {
            let y: f64 = rng.random_range(-5.0..5.0);
            let shifted = y + cfg.delta_theta();
            let exact = (shifted * shifted - cfg.a * cfg.a).powi(2) - (cfg.delta_theta().powi(2) - cfg.a * cfg.a).powi(2);
            assert!((c.evaluate(y) - exact).abs() < 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn step_matches_floquet_operator() {
        for kind in [MapKind::Sawtooth, MapKind::DoubleWell] {
            for n in 3..=5 {
                let cfg = MapConfig::new(kind, n);
                for strategy in [Decomposition::AncillaEager, Decomposition::AncillaMin] {
                    let c = map_step_circuit(&cfg, strategy).unwrap();
                    let m = circuit_matrix(&c.gates, c.n_wires(), n).unwrap();
                    let dev = deviation_up_to_phase(&m, &floquet_matrix(&cfg));
                    assert!(dev < 1e-9, "{kind:?} n={n} {strategy:?}: {dev:e}");
                }
            }
        }
    }

    #[test]
    fn step_is_unitary() {
        for kind in [MapKind::Sawtooth, MapKind::DoubleWell] {
            for n in 2..=6 {
                let cfg = MapConfig::new(kind, n);
                let c = map_step_circuit(&cfg, Decomposition::AncillaEager).unwrap();
                let m = circuit_matrix(&c.gates, c.n_wires(), n).unwrap();
                assert!(unitarity_error(&m) < 1e-9);
            }
        }
    }

    #[test]
    fn zero_kick_is_free_rotation() {
        let mut cfg = MapConfig::new(MapKind::Sawtooth, 4);
        cfg.k = 0.0;
        let c = map_step_circuit(&cfg, Decomposition::AncillaEager).unwrap();
        assert!(c.gates.iter().take(collected_gate_count(4, 2)).all(|g| g.phase_radians() == 0.0));
        let n = cfg.dim();
        let f = dft_matrix(4);
        for j in 0..n {
            // momentum eigenstate in the coordinate basis
            let col: Vec<C64> = f.iter().map(|row| row[j]).collect();
            let mut s = StateVector::from_amplitudes(col.clone()).unwrap();
            crate::harness::apply_circuit_ideal(&mut s, &c.gates);
            let turns = (cfg.cells as usize * j * j % (2 * n)) as f64 / (2 * n) as f64;
            let w = C64::from_polar(1.0, -TAU * turns);
            let expected: Vec<C64> = col.iter().map(|a| a * w).collect();
            assert!(max_abs_deviation(s.amplitudes(), &expected) < 1e-10, "j={j}");
        }
    }

    #[test]
    fn sawtooth_ten_qubit_counts() {
        let c = map_step_circuit(&MapConfig::new(MapKind::Sawtooth, 10), Decomposition::AncillaEager).unwrap();
        assert_eq!((c.n1, c.n2, c.n_gates()), (40, 180, 220));
        assert!(!c.uses_ancilla());
    }

    #[test]
    fn ancilla_allocation() {
        let dw3 = map_step_circuit(&MapConfig::new(MapKind::DoubleWell, 3), Decomposition::AncillaEager).unwrap();
        assert!(!dw3.uses_ancilla() && dw3.is_unitary());
        let dw4 = map_step_circuit(&MapConfig::new(MapKind::DoubleWell, 4), Decomposition::AncillaEager).unwrap();
        assert_eq!(dw4.ancilla, Some(4));
        assert!(dw4
            .gates
            .iter()
            .all(|g| !matches!(g, Gate::AncillaMeasureReset(q) if *q != 4)));
        // Q_θ at n_q = 4: four 3-wire gates and one 4-wire gate, each reset once
        assert_eq!(dw4.measurement_count(), 5);
        let min = map_step_circuit(&MapConfig::new(MapKind::DoubleWell, 4), Decomposition::AncillaMin).unwrap();
        assert_eq!(min.measurement_count(), 1);
    }

    #[test]
    fn initial_states() {
        let s = initial_state(&MapConfig::new(MapKind::Sawtooth, 2)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_abs_deviation(s.amplitudes(), &[C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(r, 0.0), C64::new(0.0, 0.0)]) < 1e-15);
        let s = initial_state(&MapConfig::new(MapKind::Sawtooth, 3)).unwrap();
        let nonzero: Vec<usize> = (0..8).filter(|&i| s.amplitudes()[i].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![0, 1, 4, 5]);
        assert!(nonzero.iter().all(|&i| (s.amplitudes()[i].re - 0.5).abs() < 1e-15));
        for n in 2..8 {
            let s = initial_state(&MapConfig::new(MapKind::DoubleWell, n)).unwrap();
            assert!(s.is_normalized(1e-12));
        }
        assert_eq!(initial_state(&MapConfig::new(MapKind::DoubleWell, 4)).unwrap().n_qubits(), 5);
    }

    #[test]
    fn dump_roundtrip() {
        let cfg = MapConfig::new(MapKind::DoubleWell, 4);
        let c = map_step_circuit(&cfg, Decomposition::AncillaEager).unwrap();
        let text = c.dump(&describe(&cfg, Decomposition::AncillaEager));
        assert!(text.starts_with("# map=double-well n_q=4"));
        assert_eq!(parse_dump(&text).unwrap(), c.gates);
        assert!(parse_dump("CP 1 0x0").is_err());
        assert!(parse_dump("X 1 -").is_err());
    }

    #[test]
    fn repeated_bookkeeping() {
        let c = map_step_circuit(&MapConfig::new(MapKind::Sawtooth, 3), Decomposition::AncillaEager).unwrap();
        let r = c.repeated(3);
        assert_eq!(r.gates.len(), 3 * c.gates.len());
        assert_eq!(r.step_boundaries, vec![0, c.gates.len(), 2 * c.gates.len(), 3 * c.gates.len()]);
        assert_eq!(r.n_gates(), 3 * c.n_gates());
    }

    #[test]
    fn invalid_configs() {
        assert_eq!(MapConfig::new(MapKind::Sawtooth, 1).validate(), Err(MapError::TooFewQubits(1)));
        let mut cfg = MapConfig::new(MapKind::Sawtooth, 3);
        cfg.cells = 0;
        assert_eq!(cfg.validate(), Err(MapError::NoCells));
        cfg.cells = 1;
        cfg.k = f64::NAN;
        assert!(cfg.validate().is_err());
    }
}
