//! Hardware-efficient ansatz with data re-uploading.
//!
//! Layout for `n` qubits and `L` layers:
//!
//! ```text
//! H^⊗n
//! repeat L times:
//!     variational block   RY(φ) RZ(φ) on every qubit
//!     entangling block    CZ(0,1) CZ(1,2) … CZ(n−2,n−1) [+ CZ(n−1,0) when n ≥ 3]
//!     encoding block      RY(a) RZ(a) on every qubit, a = tanh(λ·f_q)
//! variational block       RY(φ) RZ(φ) on every qubit
//! measure Z on every qubit
//! ```
//!
//! The trainable quantum parameters are `2n(L+1)` angles `φ` and `2nL`
//! scalings `λ`, i.e. `2n(2L+1)` in total.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write;
use thiserror::Error;

use crate::quantum::{Circuit, Gate, QuantumError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("ansatz needs at least one qubit and one layer (got {n_qubits} qubits, {n_layers} layers)")]
    InvalidSpec { n_qubits: usize, n_layers: usize },
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("ansatz text line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub type Result<T> = std::result::Result<T, AnsatzError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, n_layers: usize) -> Result<Self> {
        let spec = Self { n_qubits, n_layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_layers == 0 || self.n_qubits > crate::quantum::MAX_QUBITS {
            return Err(AnsatzError::InvalidSpec {
                n_qubits: self.n_qubits,
                n_layers: self.n_layers,
            });
        }
        Ok(())
    }

    /// Number of variational angles: two per qubit per block, `L + 1` blocks.
    pub fn n_variational(&self) -> usize {
        2 * self.n_qubits * (self.n_layers + 1)
    }

    /// Number of encoding slots, equal to the number of scalings `λ`.
    pub fn n_encoding(&self) -> usize {
        2 * self.n_qubits * self.n_layers
    }

    pub fn quantum_param_count(&self) -> usize {
        self.n_variational() + self.n_encoding()
    }
}

/// How the variational angles and scalings start out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumInit {
    /// `φ ~ U[−range, range]`.
    pub phi_range: f64,
    /// Constant initial `λ`.
    pub lambda: f64,
}

impl Default for QuantumInit {
    fn default() -> Self {
        Self {
            phi_range: PI,
            lambda: 1.0,
        }
    }
}

/// Variational angles `φ` and encoding scalings `λ`.
///
/// `phi[(b·n + q)·2 + r]` is rotation `r` (0 = RY, 1 = RZ) on qubit `q` in
/// variational block `b ∈ 0..=L`; `lambda[(l·n + q)·2 + r]` likewise for
/// encoding block `l ∈ 0..L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParameters {
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AnsatzParameters {
    pub fn zeros(spec: &AnsatzSpec) -> Self {
        Self {
            phi: vec![0.0; spec.n_variational()],
            lambda: vec![0.0; spec.n_encoding()],
        }
    }

    pub fn init<R: Rng + ?Sized>(spec: &AnsatzSpec, init: &QuantumInit, rng: &mut R) -> Self {
        let phi = (0..spec.n_variational())
            .map(|_| {
                if init.phi_range > 0.0 {
                    rng.random_range(-init.phi_range..=init.phi_range)
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            phi,
            lambda: vec![init.lambda; spec.n_encoding()],
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len() + self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, spec: &AnsatzSpec) -> Result<()> {
        if self.phi.len() != spec.n_variational() {
            return Err(AnsatzError::DimensionMismatch {
                what: "variational angles",
                expected: spec.n_variational(),
                got: self.phi.len(),
            });
        }
        if self.lambda.len() != spec.n_encoding() {
            return Err(AnsatzError::DimensionMismatch {
                what: "encoding scalings",
                expected: spec.n_encoding(),
                got: self.lambda.len(),
            });
        }
        if let Some(i) = self.phi.iter().position(|v| !v.is_finite()) {
            return Err(AnsatzError::NonFinite { what: "phi", index: i });
        }
        if let Some(i) = self.lambda.iter().position(|v| !v.is_finite()) {
            return Err(AnsatzError::NonFinite { what: "lambda", index: i });
        }
        Ok(())
    }
}

/// Where a template gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Fixed,
    Variational(usize),
    Encoding(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateOp {
    pub gate: Gate,
    pub slot: Slot,
}

/// Immutable gate list with symbolic angle slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzTemplate {
    spec: AnsatzSpec,
    ops: Vec<TemplateOp>,
    /// Multiplier on `tanh(λ·f)`; 1 by default, π when full-range encoding is requested.
    angle_scale: f64,
}

/// Circuit with every angle bound. Trainable parameter `j < n_variational`
/// is `φ_j`; parameter `n_variational + e` is encoding slot `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundAnsatz {
    pub circuit: Circuit,
    /// Bound encoding angle per slot.
    pub encoding_angles: Vec<f64>,
}

/// Chain-rule factors per encoding slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingFactors {
    /// `∂a/∂λ` per slot.
    pub d_lambda: Vec<f64>,
    /// `∂a/∂f_q` per slot, where `q` is the slot's qubit.
    pub d_feature: Vec<f64>,
}

/// `(layer, qubit, rotation)` of encoding slot `e`.
fn encoding_coords(n_qubits: usize, e: usize) -> (usize, usize, usize) {
    (e / (2 * n_qubits), (e / 2) % n_qubits, e % 2)
}

fn rotation(q: usize, r: usize) -> Gate {
    if r == 0 {
        Gate::Ry(q, 0.0)
    } else {
        Gate::Rz(q, 0.0)
    }
}

/// Adjacent CZ pairs on a closed chain; the closing pair only exists for `n ≥ 3`.
pub fn entangling_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n_qubits.saturating_sub(1)).map(|q| (q, q + 1)).collect();
    if n_qubits >= 3 {
        pairs.push((n_qubits - 1, 0));
    }
    pairs
}

pub fn build(spec: AnsatzSpec) -> Result<AnsatzTemplate> {
    spec.validate()?;
    let n = spec.n_qubits;
    let mut ops = Vec::new();
    let fixed = |gate| TemplateOp { gate, slot: Slot::Fixed };
    for q in 0..n {
        ops.push(fixed(Gate::H(q)));
    }
    let variational_block = |ops: &mut Vec<TemplateOp>, block: usize| {
        for q in 0..n {
            for r in 0..2 {
                ops.push(TemplateOp {
                    gate: rotation(q, r),
                    slot: Slot::Variational((block * n + q) * 2 + r),
                });
            }
        }
    };
    for layer in 0..spec.n_layers {
        variational_block(&mut ops, layer);
        for (a, b) in entangling_pairs(n) {
            ops.push(fixed(Gate::Cz(a, b)));
        }
        for q in 0..n {
            for r in 0..2 {
                ops.push(TemplateOp {
                    gate: rotation(q, r),
                    slot: Slot::Encoding((layer * n + q) * 2 + r),
                });
            }
        }
    }
    variational_block(&mut ops, spec.n_layers);
    Ok(AnsatzTemplate {
        spec,
        ops,
        angle_scale: 1.0,
    })
}

impl AnsatzTemplate {
    pub fn spec(&self) -> AnsatzSpec {
        self.spec
    }

    pub fn ops(&self) -> &[TemplateOp] {
        &self.ops
    }

    pub fn angle_scale(&self) -> f64 {
        self.angle_scale
    }

    /// Multiplies encoding angles by π, mapping `tanh` onto `(−π, π)`.
    pub fn with_pi_scaling(mut self, enabled: bool) -> Self {
        self.angle_scale = if enabled { PI } else { 1.0 };
        self
    }

    fn check_inputs(&self, params: &AnsatzParameters, features: &[f64]) -> Result<()> {
        params.validate(&self.spec)?;
        if features.len() != self.spec.n_qubits {
            return Err(AnsatzError::DimensionMismatch {
                what: "feature vector",
                expected: self.spec.n_qubits,
                got: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(AnsatzError::NonFinite {
                what: "feature",
                index: i,
            });
        }
        Ok(())
    }

    /// Encoding angle for every slot: `scale · tanh(λ_slot · f_q)`.
    pub fn encoding_angles(&self, params: &AnsatzParameters, features: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(params, features)?;
        let n = self.spec.n_qubits;
        Ok(params
            .lambda
            .iter()
            .enumerate()
            .map(|(e, lam)| {
                let (_, q, _) = encoding_coords(n, e);
                self.angle_scale * (lam * features[q]).tanh()
            })
            .collect())
    }

    pub fn bind_inputs(&self, params: &AnsatzParameters, features: &[f64]) -> Result<BoundAnsatz> {
        let encoding_angles = self.encoding_angles(params, features)?;
        let n_var = self.spec.n_variational();
        let mut circuit = Circuit::with_capacity(self.spec.n_qubits, self.ops.len())?;
        for op in &self.ops {
            match op.slot {
                Slot::Fixed => circuit.push(op.gate)?,
                Slot::Variational(v) => circuit.push_trainable(op.gate.with_angle(params.phi[v]), v)?,
                Slot::Encoding(e) => {
                    circuit.push_trainable(op.gate.with_angle(encoding_angles[e]), n_var + e)?
                }
            }
        }
        Ok(BoundAnsatz {
            circuit,
            encoding_angles,
        })
    }

    pub fn input_gradient_factors(&self, params: &AnsatzParameters, features: &[f64]) -> Result<EncodingFactors> {
        self.check_inputs(params, features)?;
        let n = self.spec.n_qubits;
        let mut d_lambda = Vec::with_capacity(params.lambda.len());
        let mut d_feature = Vec::with_capacity(params.lambda.len());
        for (e, lam) in params.lambda.iter().enumerate() {
            let (_, q, _) = encoding_coords(n, e);
            let f = features[q];
            let t = (lam * f).tanh();
            let sech2 = self.angle_scale * (1.0 - t * t);
            d_lambda.push(f * sech2);
            d_feature.push(lam * sech2);
        }
        Ok(EncodingFactors { d_lambda, d_feature })
    }

    /// Qubit that encoding slot `e` reads its feature from.
    pub fn encoding_qubit(&self, e: usize) -> usize {
        encoding_coords(self.spec.n_qubits, e).1
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "hqrl-ansatz 1\nqubits {}\nlayers {}\nangle-scale {:?}\n",
            self.spec.n_qubits, self.spec.n_layers, self.angle_scale
        );
        for op in &self.ops {
            let (a, b) = op.gate.targets();
            match (op.gate, op.slot) {
                (Gate::Cz(..), _) => writeln!(out, "cz {a} {}", b.unwrap_or(a)),
                (Gate::H(_), _) => writeln!(out, "h {a}"),
                (g, Slot::Variational(v)) => writeln!(out, "{} {a} phi:{v}", g.name()),
                (g, Slot::Encoding(e)) => writeln!(out, "{} {a} enc:{e}", g.name()),
                (g, Slot::Fixed) => writeln!(out, "{} {a} {:?}", g.name(), g.angle().unwrap_or(0.0)),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, reason: String| AnsatzError::Parse { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing '{key}' line")))?;
            let v = l
                .strip_prefix(key)
                .ok_or_else(|| err(ln, format!("expected '{key}'")))?;
            Ok((ln, v.trim().to_string()))
        };
        let (ln, version) = header("hqrl-ansatz")?;
        if version != "1" {
            return Err(err(ln, format!("unsupported version {version}")));
        }
        let num = |(ln, v): (usize, String)| v.parse::<usize>().map_err(|_| err(ln, format!("bad number '{v}'")));
        let n_qubits = num(header("qubits")?)?;
        let n_layers = num(header("layers")?)?;
        let (ln, scale) = header("angle-scale")?;
        let angle_scale: f64 = scale.parse().map_err(|_| err(ln, format!("bad scale '{scale}'")))?;
        let spec = AnsatzSpec::new(n_qubits, n_layers)?;
        let mut ops = Vec::new();
        for (ln, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let q = |i: usize| -> Result<usize> {
                tok.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(ln, format!("bad qubit in '{line}'")))
            };
            let op = match (tok[0], tok.len()) {
                ("h", 2) => TemplateOp {
                    gate: Gate::H(q(1)?),
                    slot: Slot::Fixed,
                },
                ("cz", 3) => TemplateOp {
                    gate: Gate::Cz(q(1)?, q(2)?),
                    slot: Slot::Fixed,
                },
                (name @ ("ry" | "rz"), 3) => {
                    let gate = rotation(q(1)?, usize::from(name == "rz"));
                    let arg = tok[2];
                    let slot_index = |prefix: &str, limit: usize| -> Result<Option<usize>> {
                        match arg.strip_prefix(prefix) {
                            None => Ok(None),
                            Some(i) => {
                                let i: usize = i.parse().map_err(|_| err(ln, format!("bad slot '{arg}'")))?;
                                if i >= limit {
                                    return Err(err(ln, format!("slot '{arg}' out of range")));
                                }
                                Ok(Some(i))
                            }
                        }
                    };
                    if let Some(v) = slot_index("phi:", spec.n_variational())? {
                        TemplateOp {
                            gate,
                            slot: Slot::Variational(v),
                        }
                    } else if let Some(e) = slot_index("enc:", spec.n_encoding())? {
                        TemplateOp {
                            gate,
                            slot: Slot::Encoding(e),
                        }
                    } else {
                        let a: f64 = arg.parse().map_err(|_| err(ln, format!("bad angle '{arg}'")))?;
                        TemplateOp {
                            gate: gate.with_angle(a),
                            slot: Slot::Fixed,
                        }
                    }
                }
                _ => return Err(err(ln, format!("unrecognised line '{line}'"))),
            };
            op.gate.validate(n_qubits)?;
            ops.push(op);
        }
        Ok(Self {
            spec,
            ops,
            angle_scale,
        })
    }
}
