//! Statevector simulation of `{H, RY, RZ, CZ}` circuits with Pauli-Z readout.
//!
//! Rotations follow `RY(θ) = exp(−iθY/2)` and `RZ(θ) = exp(−iθZ/2)`.
//! Qubit `q` is bit `q` of the amplitude index (little-endian).

mod backend;
mod gradient;
mod remote;
mod statevector;
mod text;

pub use backend::{sample_shots, Backend, BackendMode, Execution, DEFAULT_NOISY_SHOTS};
pub use gradient::{
    adjoint_vjp, gradient_adjoint, gradient_finite_difference, gradient_parameter_shift,
    parameter_shift_vjp, Jacobian, FINITE_DIFFERENCE_STEP,
};
pub use remote::{Job, LoopbackBackend, RemoteBackend};
pub use statevector::{apply_gate, Statevector, MAX_QUBITS};
pub use text::CIRCUIT_TEXT_VERSION;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("CZ needs two distinct qubits, got ({0}, {0})")]
    DuplicateTargets(usize),
    #[error("non-finite rotation angle {0}")]
    NonFiniteAngle(f64),
    #[error("a register needs at least one qubit")]
    EmptyRegister,
    #[error("{0} qubits exceeds the simulator limit")]
    RegisterTooLarge(usize),
    #[error("{0} amplitudes is not a power of two >= 2")]
    BadAmplitudeCount(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("adjoint differentiation needs the exact state, backend mode is {0}")]
    AdjointRequiresExact(&'static str),
    #[error("{0} gate cannot carry a trainable angle (no shift rule)")]
    NoShiftRule(&'static str),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("circuit text line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unrecognised backend mode '{0}'")]
    BadMode(String),
}

pub type Result<T> = std::result::Result<T, QuantumError>;

/// Single-qubit Paulis, used for noise insertion and gate generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    Cz(usize, usize),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::Ry(..) => "ry",
            Gate::Rz(..) => "rz",
            Gate::Cz(..) => "cz",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry(_, a) | Gate::Rz(_, a) => Some(a),
            _ => None,
        }
    }

    /// Same gate with its rotation angle replaced; non-rotations are returned unchanged.
    pub fn with_angle(self, angle: f64) -> Gate {
        match self {
            Gate::Ry(q, _) => Gate::Ry(q, angle),
            Gate::Rz(q, _) => Gate::Rz(q, angle),
            other => other,
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Ry(q, a) => Gate::Ry(q, -a),
            Gate::Rz(q, a) => Gate::Rz(q, -a),
            other => other,
        }
    }

    /// Primary target and, for CZ, the second qubit.
    pub fn targets(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Ry(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cz(a, b) => (a, Some(b)),
        }
    }

    /// Generator `P` with `G(θ) = exp(−iθP/2)`, for rotations.
    pub(crate) fn generator(&self) -> Option<(usize, Pauli)> {
        match *self {
            Gate::Ry(q, _) => Some((q, Pauli::Y)),
            Gate::Rz(q, _) => Some((q, Pauli::Z)),
            _ => None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q >= n_qubits {
                Err(QuantumError::QubitOutOfRange { index: q, n_qubits })
            } else {
                Ok(())
            }
        };
        match *self {
            Gate::H(q) => check(q),
            Gate::Ry(q, a) | Gate::Rz(q, a) => {
                check(q)?;
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(QuantumError::NonFiniteAngle(a))
                }
            }
            Gate::Cz(a, b) => {
                check(a)?;
                check(b)?;
                if a == b {
                    Err(QuantumError::DuplicateTargets(a))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// A gate in a circuit, optionally bound to trainable parameter `param`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Op {
    pub gate: Gate,
    pub param: Option<usize>,
}

/// Gate sequence on a fixed register with marked trainable angles.
///
/// A trainable op's angle is the current value of its parameter; several ops
/// may share one parameter, in which case gradients sum over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Op>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(QuantumError::EmptyRegister);
        }
        if n_qubits > MAX_QUBITS {
            return Err(QuantumError::RegisterTooLarge(n_qubits));
        }
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
            n_params: 0,
        })
    }

    pub fn with_capacity(n_qubits: usize, ops: usize) -> Result<Self> {
        let mut c = Self::new(n_qubits)?;
        c.ops.reserve(ops);
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.ops.push(Op { gate, param: None });
        Ok(())
    }

    /// Appends a rotation whose angle is trainable parameter `param`.
    pub fn push_trainable(&mut self, gate: Gate, param: usize) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if gate.generator().is_none() {
            return Err(QuantumError::NoShiftRule(gate.name()));
        }
        self.n_params = self.n_params.max(param + 1);
        self.ops.push(Op {
            gate,
            param: Some(param),
        });
        Ok(())
    }

    /// Current parameter values, read from the first op bound to each parameter.
    pub fn params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params];
        let mut seen = vec![false; self.n_params];
        for op in &self.ops {
            if let (Some(p), Some(a)) = (op.param, op.gate.angle()) {
                if !seen[p] {
                    out[p] = a;
                    seen[p] = true;
                }
            }
        }
        out
    }

    /// Copy of the circuit with every trainable angle set from `params`.
    pub fn with_params(&self, params: &[f64]) -> Result<Circuit> {
        if params.len() != self.n_params {
            return Err(QuantumError::LengthMismatch {
                expected: self.n_params,
                got: params.len(),
            });
        }
        let mut out = self.clone();
        for op in &mut out.ops {
            if let Some(p) = op.param {
                op.gate = op.gate.with_angle(params[p]);
                op.gate.validate(self.n_qubits)?;
            }
        }
        Ok(out)
    }

    pub(crate) fn with_op_angle(&self, index: usize, angle: f64) -> Circuit {
        let mut out = self.clone();
        out.ops[index].gate = out.ops[index].gate.with_angle(angle);
        out
    }

    /// Runs the circuit on `|0…0⟩`.
    pub fn simulate(&self) -> Result<Statevector> {
        let mut state = Statevector::zero(self.n_qubits)?;
        for op in &self.ops {
            state.apply_unchecked(&op.gate);
        }
        Ok(state)
    }
}
