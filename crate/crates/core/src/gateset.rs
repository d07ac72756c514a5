//! Hardware gate alphabet `{H, R_φ, CR_φ}` plus the ancilla reset marker,
//! Bloch-sphere rotations, and the lowering of multi-controlled phase gates
//! onto that alphabet.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::phase::FixedPointPhase;
use crate::statevector::{Matrix2, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("controlled phase needs two distinct wires, got {0} twice")]
    SameWire(usize),
    #[error("multi-controlled phase needs at least one wire")]
    EmptyWireSet,
    #[error("wire {0} listed twice")]
    DuplicateWire(usize),
    #[error("{0}-controlled phase gates are not supported (max 4 wires)")]
    UnsupportedDegree(usize),
    #[error("{0} wires need an ancilla but none was provided")]
    MissingAncilla(usize),
    #[error("ancilla {0} overlaps the gate's wires")]
    AncillaOverlap(usize),
    #[error("rotation axis has norm {0}, expected 1")]
    AxisNotUnit(f64),
}

/// One element of a compiled circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Hadamard(usize),
    /// `diag(1, e^{iφ})`.
    Phase(usize, FixedPointPhase),
    /// `diag(1, 1, 1, e^{iφ})`; wires stored with `q1 < q2`.
    ControlledPhase(usize, usize, FixedPointPhase),
    /// Measure the wire and flip it back to `|0⟩` if it read 1. Not unitary.
    AncillaMeasureReset(usize),
}

impl Gate {
    pub fn phase(q: usize, phi: FixedPointPhase) -> Self {
        Gate::Phase(q, phi)
    }

    /// Canonicalizes wire order; `CR_φ` is symmetric in its two wires.
    pub fn controlled_phase(q1: usize, q2: usize, phi: FixedPointPhase) -> Result<Self, GateError> {
        match q1.cmp(&q2) {
            std::cmp::Ordering::Less => Ok(Gate::ControlledPhase(q1, q2, phi)),
            std::cmp::Ordering::Greater => Ok(Gate::ControlledPhase(q2, q1, phi)),
            std::cmp::Ordering::Equal => Err(GateError::SameWire(q1)),
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Gate::AncillaMeasureReset(_))
    }

    /// Phase in radians, `(-π, π]`; zero for `H` and resets.
    pub fn phase_radians(&self) -> f64 {
        match self {
            Gate::Phase(_, p) | Gate::ControlledPhase(_, _, p) => p.to_radians(),
            _ => 0.0,
        }
    }

    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::Hadamard(q) | Gate::Phase(q, _) | Gate::AncillaMeasureReset(q) => vec![q],
            Gate::ControlledPhase(a, b, _) => vec![a, b],
        }
    }

    /// The inverse gate. Resets have no inverse and are returned unchanged.
    pub fn adjoint(&self) -> Self {
        match *self {
            Gate::Phase(q, p) => Gate::Phase(q, -p),
            Gate::ControlledPhase(a, b, p) => Gate::ControlledPhase(a, b, -p),
            g => g,
        }
    }

    /// Same gate with wires renamed through `map`.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Self {
        match *self {
            Gate::Hadamard(q) => Gate::Hadamard(map(q)),
            Gate::Phase(q, p) => Gate::Phase(map(q), p),
            Gate::AncillaMeasureReset(q) => Gate::AncillaMeasureReset(map(q)),
            Gate::ControlledPhase(a, b, p) => {
                let (a, b) = (map(a), map(b));
                Gate::ControlledPhase(a.min(b), a.max(b), p)
            }
        }
    }
}

/// Dense matrix of a gate: 2x2 for one wire, 4x4 for `CR_φ` (basis order
/// `|q2 q1⟩ = 00, 01, 10, 11`). `None` for resets.
pub fn matrix_of(g: &Gate) -> Option<Vec<Vec<C64>>> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    match g {
        Gate::Hadamard(_) => {
            let m = hadamard_matrix();
            Some(m.iter().map(|r| r.to_vec()).collect())
        }
        Gate::Phase(_, p) => Some(vec![vec![one, z], vec![z, C64::from_polar(1.0, p.to_radians())]]),
        Gate::ControlledPhase(_, _, p) => {
            let mut m = vec![vec![z; 4]; 4];
            for (i, row) in m.iter_mut().enumerate().take(3) {
                row[i] = one;
            }
            m[3][3] = C64::from_polar(1.0, p.to_radians());
            Some(m)
        }
        Gate::AncillaMeasureReset(_) => None,
    }
}

pub fn hadamard_matrix() -> Matrix2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Rotation `R_η̂(α) = cos(α/2) I − i sin(α/2) η̂·σ⃗`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochRotation {
    axis: [f64; 3],
    angle: f64,
}

impl BlochRotation {
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self, GateError> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(GateError::AxisNotUnit(norm));
        }
        Ok(Self { axis, angle })
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn matrix(&self) -> Matrix2 {
        let (s, c) = (self.angle / 2.0).sin_cos();
        let [x, y, z] = self.axis;
        // −i s (x σx + y σy + z σz) = s·[[−iz, −y − ix], [y − ix, iz]]
        [
            [C64::new(c, -s * z), C64::new(-s * y, -s * x)],
            [C64::new(s * y, -s * x), C64::new(c, s * z)],
        ]
    }
}

/// `C_W(φ)`: phase `e^{iφ}` on basis states where every wire in `W` is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiControlledPhase {
    wires: Vec<usize>,
    phase: FixedPointPhase,
}

impl MultiControlledPhase {
    pub fn new(mut wires: Vec<usize>, phase: FixedPointPhase) -> Result<Self, GateError> {
        if wires.is_empty() {
            return Err(GateError::EmptyWireSet);
        }
        wires.sort_unstable();
        if let Some(w) = wires.windows(2).find(|w| w[0] == w[1]) {
            return Err(GateError::DuplicateWire(w[0]));
        }
        Ok(Self { wires, phase })
    }

    pub fn wires(&self) -> &[usize] {
        &self.wires
    }

    pub fn phase(&self) -> FixedPointPhase {
        self.phase
    }

    pub fn degree(&self) -> usize {
        self.wires.len()
    }

    /// Wire mask used when evaluating the ideal diagonal.
    pub fn mask(&self) -> usize {
        self.wires.iter().fold(0, |m, w| m | (1 << w))
    }
}

/// How multi-controlled phases with three or four wires are lowered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Decomposition {
    /// Use the ancilla for every gate with three or four wires.
    #[default]
    AncillaEager,
    /// Use the ancilla only where it is unavoidable (four wires).
    AncillaMin,
}

impl Decomposition {
    pub fn name(self) -> &'static str {
        match self {
            Decomposition::AncillaEager => "ancilla-eager",
            Decomposition::AncillaMin => "ancilla-min",
        }
    }

    /// Whether a gate on `degree` wires uses the ancilla under this strategy.
    pub fn needs_ancilla(self, degree: usize) -> bool {
        match self {
            Decomposition::AncillaEager => degree >= 3,
            Decomposition::AncillaMin => degree >= 4,
        }
    }
}

impl std::str::FromStr for Decomposition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ancilla-eager" | "eager" => Ok(Decomposition::AncillaEager),
            "ancilla-min" | "min" => Ok(Decomposition::AncillaMin),
            other => Err(format!("unknown decomposition '{other}'")),
        }
    }
}

/// Lowers `C_W(φ)` onto `{H, R_φ, CR_φ}`. When the strategy calls for an
/// ancilla, the ancilla must start in `|0⟩`; it is returned to `|0⟩` and a
/// reset marker follows each uncompute.
pub fn compile_multi_controlled(
    mc: &MultiControlledPhase,
    strategy: Decomposition,
    ancilla: Option<usize>,
) -> Result<Vec<Gate>, GateError> {
    let w = mc.wires();
    let phi = mc.phase();
    let degree = w.len();
    if degree > 4 {
        return Err(GateError::UnsupportedDegree(degree));
    }
    let ancilla = if strategy.needs_ancilla(degree) {
        let a = ancilla.ok_or(GateError::MissingAncilla(degree))?;
        if w.contains(&a) {
            return Err(GateError::AncillaOverlap(a));
        }
        Some(a)
    } else {
        None
    };
    let mut out = Vec::new();
    match (degree, ancilla) {
        (1, _) => out.push(Gate::Phase(w[0], phi)),
        (2, _) => out.push(Gate::controlled_phase(w[0], w[1], phi)?),
        (3, None) => emit_three_wire(&mut out, w[0], w[1], w[2], phi)?,
        (3, Some(anc)) => {
            emit_toffoli(&mut out, w[0], w[1], anc)?;
            out.push(Gate::controlled_phase(anc, w[2], phi)?);
            emit_toffoli(&mut out, w[0], w[1], anc)?;
            out.push(Gate::AncillaMeasureReset(anc));
        }
        (4, Some(anc)) => {
            emit_toffoli(&mut out, w[0], w[1], anc)?;
            emit_three_wire(&mut out, anc, w[2], w[3], phi)?;
            emit_toffoli(&mut out, w[0], w[1], anc)?;
            out.push(Gate::AncillaMeasureReset(anc));
        }
        _ => unreachable!("degree checked above"),
    }
    Ok(out)
}

/// `CNOT(control → target)` as `H(t) · CR_π · H(t)`.
fn emit_cnot(out: &mut Vec<Gate>, control: usize, target: usize) -> Result<(), GateError> {
    out.push(Gate::Hadamard(target));
    out.push(Gate::controlled_phase(control, target, FixedPointPhase::HALF)?);
    out.push(Gate::Hadamard(target));
    Ok(())
}

/// Ancilla-free `C_{a,b,c}(φ)` from `φ·abc = (φ/2)(bc + ac − (a⊕b)c)`.
fn emit_three_wire(
    out: &mut Vec<Gate>,
    a: usize,
    b: usize,
    c: usize,
    phi: FixedPointPhase,
) -> Result<(), GateError> {
    let half = phi.half();
    out.push(Gate::controlled_phase(b, c, half)?);
    out.push(Gate::controlled_phase(a, c, half)?);
    emit_cnot(out, a, b)?;
    out.push(Gate::controlled_phase(b, c, -half)?);
    emit_cnot(out, a, b)?;
    Ok(())
}

/// Toffoli `(a, b → target)` as `H(t) · CCZ · H(t)`.
fn emit_toffoli(out: &mut Vec<Gate>, a: usize, b: usize, target: usize) -> Result<(), GateError> {
    out.push(Gate::Hadamard(target));
    emit_three_wire(out, a, b, target, FixedPointPhase::HALF)?;
    out.push(Gate::Hadamard(target));
    Ok(())
}

/// `(n1, n2)`: one-qubit and two-qubit unitary gate counts; resets excluded.
pub fn count_gates(circuit: &[Gate]) -> (usize, usize) {
    circuit.iter().fold((0, 0), |(n1, n2), g| match g {
        Gate::Hadamard(_) | Gate::Phase(..) => (n1 + 1, n2),
        Gate::ControlledPhase(..) => (n1, n2 + 1),
        Gate::AncillaMeasureReset(_) => (n1, n2),
    })
}
