//! Noisy-gate state-vector simulation of quantized kicked maps.
//!
//! Gates carry independent uniform phase errors of width `ε`; the harness
//! evolves noisy and ideal states side by side and tracks their fidelity.

pub mod gateset;
pub mod haar;
pub mod harness;
pub mod mapcircuits;
pub mod noise;
pub mod oracle;
pub mod phase;
pub mod statevector;
pub mod theory;

pub use gateset::{Decomposition, Gate};
pub use harness::{FidelityTrace, SweepConfig, SweepPoint};
pub use mapcircuits::{map_step_circuit, CompiledCircuit, MapConfig, MapKind};
pub use noise::NoiseConfig;
pub use phase::FixedPointPhase;
pub use statevector::{StateVector, C64};
