//! Hybrid networks: optional linear pre-encoder, data re-uploading ansatz,
//! and either a linear post-processor or a weighted-observable softmax.
//!
//! Forward passes return a [`Tape`]; gradients are computed from that tape,
//! so a backward pass always refers to an explicit prior forward pass.

pub mod head;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{self, AnsatzError, AnsatzParameters, AnsatzSpec, AnsatzTemplate, QuantumInit};
use crate::dense::{Activation, DenseError, InitStrategy, LinearLayer, DEFAULT_CONSTANT_INIT};
use crate::quantum::{adjoint_vjp, parameter_shift_vjp, Backend, BackendMode, Circuit, QuantumError, Statevector};

pub use head::{
    apply_head, entropy, greedy_action, log_prob, policy_terms, sample_and_logprob, softmax, softplus, Action,
    ActionBounds, OutputSpec, PolicyOutput, PolicyTerms,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("value head has no action distribution")]
    NotAPolicy,
    #[error("action does not belong to the policy's action space")]
    InvalidAction,
    #[error("action bounds must be finite with low < high in every dimension")]
    DegenerateBounds,
    #[error("{actions} actions need {actions} observables but only {qubits} qubits are measured")]
    TooManyActions { actions: usize, qubits: usize },
    #[error("backward called without a forward pass")]
    NoForwardPass,
    #[error("tape was recorded against different parameters")]
    StaleTape,
    #[error("unknown parameter group `{0}`")]
    UnknownParameter(String),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub type Result<T> = std::result::Result<T, HybridError>;

/// How measured `⟨Z⟩` values become raw head inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyMode {
    /// Bias-free linear map `n_qubits → raw width`.
    PostProcessing,
    /// Logit `a` is `β·ω_a·⟨Z_a⟩`; discrete heads only.
    WeightedObservables {
        beta: f64,
        train_beta: bool,
        omega_init: f64,
    },
}

impl PolicyMode {
    pub fn weighted_default() -> Self {
        PolicyMode::WeightedObservables {
            beta: 1.0,
            train_beta: false,
            omega_init: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridNetConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub state_dim: usize,
    pub output: OutputSpec,
    pub use_pre_encoding: bool,
    pub pre_init: InitStrategy,
    pub post_init: InitStrategy,
    pub policy_mode: PolicyMode,
    #[serde(default)]
    pub quantum_init: QuantumInit,
    #[serde(default)]
    pub pi_scaled_encoding: bool,
    #[serde(default)]
    pub backend: BackendMode,
}

impl HybridNetConfig {
    /// Post-processing config with constant initialisers and exact execution.
    pub fn new(n_qubits: usize, n_layers: usize, state_dim: usize, output: OutputSpec) -> Self {
        let constant = InitStrategy::Constant {
            value: DEFAULT_CONSTANT_INIT,
        };
        Self {
            n_qubits,
            n_layers,
            state_dim,
            output,
            use_pre_encoding: state_dim != n_qubits,
            pre_init: constant,
            post_init: constant,
            policy_mode: PolicyMode::PostProcessing,
            quantum_init: QuantumInit::default(),
            pi_scaled_encoding: false,
            backend: BackendMode::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        AnsatzSpec::new(self.n_qubits, self.n_layers)?;
        if self.state_dim == 0 {
            return Err(HybridError::Config("state_dim must be positive".into()));
        }
        if !self.use_pre_encoding && self.state_dim != self.n_qubits {
            return Err(HybridError::Config(format!(
                "without pre-encoding the state width ({}) must equal the qubit count ({})",
                self.state_dim, self.n_qubits
            )));
        }
        if self.output.raw_width() == 0 {
            return Err(HybridError::Config("output width must be positive".into()));
        }
        self.pre_init.validate()?;
        self.post_init.validate()?;
        self.backend.validate()?;
        if let PolicyMode::WeightedObservables { beta, omega_init, .. } = self.policy_mode {
            let OutputSpec::Discrete(k) = self.output else {
                return Err(HybridError::Config("weighted observables need a discrete output".into()));
            };
            if k > self.n_qubits {
                return Err(HybridError::TooManyActions {
                    actions: k,
                    qubits: self.n_qubits,
                });
            }
            if !beta.is_finite() || !omega_init.is_finite() {
                return Err(HybridError::NonFinite("weighted-observable settings"));
            }
        }
        Ok(())
    }

    pub fn ansatz_spec(&self) -> AnsatzSpec {
        AnsatzSpec {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Readout {
    Linear(LinearLayer),
    Weighted { omega: Vec<f64>, beta: f64, train_beta: bool },
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
struct TapeRow {
    state: Vec<f64>,
    features: Vec<f64>,
    circuit: Circuit,
    final_state: Option<Statevector>,
    z: Vec<f64>,
    raw: Vec<f64>,
}

/// Intermediate values of one forward pass, tied to the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tape {
    owner: Option<(u64, u64)>,
    rows: Vec<TapeRow>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn raw(&self, row: usize) -> &[f64] {
        &self.rows[row].raw
    }

    /// Measured `⟨Z⟩` for `row`.
    pub fn expectations(&self, row: usize) -> &[f64] {
        &self.rows[row].z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridNet {
    config: HybridNetConfig,
    template: AnsatzTemplate,
    pre: Option<LinearLayer>,
    quantum: AnsatzParameters,
    readout: Readout,
    #[serde(skip, default = "fresh_id")]
    id: u64,
    #[serde(skip)]
    version: u64,
}

impl HybridNet {
    pub fn new<R: Rng + ?Sized>(config: HybridNetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let spec = config.ansatz_spec();
        let template = ansatz::build(spec)?.with_pi_scaling(config.pi_scaled_encoding);
        let pre = if config.use_pre_encoding {
            Some(LinearLayer::init(
                config.state_dim,
                config.n_qubits,
                false,
                Activation::Identity,
                config.pre_init,
                rng,
            )?)
        } else {
            None
        };
        let quantum = AnsatzParameters::init(&spec, &config.quantum_init, rng);
        let readout = match config.policy_mode {
            PolicyMode::PostProcessing => Readout::Linear(LinearLayer::init(
                config.n_qubits,
                config.output.raw_width(),
                false,
                Activation::Identity,
                config.post_init,
                rng,
            )?),
            PolicyMode::WeightedObservables {
                beta,
                train_beta,
                omega_init,
            } => Readout::Weighted {
                omega: vec![omega_init; config.output.raw_width()],
                beta,
                train_beta,
            },
        };
        Ok(Self {
            config,
            template,
            pre,
            quantum,
            readout,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn config(&self) -> &HybridNetConfig {
        &self.config
    }

    pub fn output_spec(&self) -> OutputSpec {
        self.config.output
    }

    pub fn template(&self) -> &AnsatzTemplate {
        &self.template
    }

    pub fn quantum_params(&self) -> &AnsatzParameters {
        &self.quantum
    }

    /// `(quantum, total)` trainable scalar counts.
    pub fn count_parameters(&self) -> (usize, usize) {
        let quantum = self.quantum.len();
        (quantum, self.num_params())
    }

    pub fn num_params(&self) -> usize {
        let pre = self.pre.as_ref().map_or(0, LinearLayer::num_params);
        let readout = match &self.readout {
            Readout::Linear(l) => l.num_params(),
            Readout::Weighted { omega, train_beta, .. } => omega.len() + usize::from(*train_beta),
        };
        pre + self.quantum.len() + readout
    }

    fn features(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.config.state_dim {
            return Err(HybridError::DimensionMismatch {
                what: "state",
                expected: self.config.state_dim,
                got: state.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(HybridError::NonFinite("state"));
        }
        match &self.pre {
            Some(layer) => Ok(layer.forward(state)?),
            None => Ok(state.to_vec()),
        }
    }

    fn readout(&self, z: &[f64]) -> Result<Vec<f64>> {
        let raw = match &self.readout {
            Readout::Linear(layer) => layer.forward(z)?,
            Readout::Weighted { omega, beta, .. } => omega.iter().zip(z).map(|(w, z)| beta * w * z).collect(),
        };
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(HybridError::NonFinite("network output"));
        }
        Ok(raw)
    }

    fn forward_row(&self, state: &[f64], backend: &mut Backend) -> Result<TapeRow> {
        let features = self.features(state)?;
        let bound = self.template.bind_inputs(&self.quantum, &features)?;
        let exec = backend.execute(&bound.circuit)?;
        let raw = self.readout(&exec.z)?;
        Ok(TapeRow {
            state: state.to_vec(),
            features,
            circuit: bound.circuit,
            final_state: exec.state,
            z: exec.z,
            raw,
        })
    }

    /// Raw head inputs for each state, with a tape for [`HybridNet::backward`].
    pub fn forward_raw(&self, states: &[Vec<f64>], backend: &mut Backend) -> Result<(Vec<Vec<f64>>, Tape)> {
        let rows = states
            .iter()
            .map(|s| self.forward_row(s, backend))
            .collect::<Result<Vec<_>>>()?;
        let raw = rows.iter().map(|r| r.raw.clone()).collect();
        Ok((
            raw,
            Tape {
                owner: Some((self.id, self.version)),
                rows,
            },
        ))
    }

    pub fn forward(&self, states: &[Vec<f64>], backend: &mut Backend) -> Result<(Vec<PolicyOutput>, Tape)> {
        let (raw, tape) = self.forward_raw(states, backend)?;
        let out = raw
            .iter()
            .map(|r| apply_head(self.config.output, r))
            .collect::<Result<Vec<_>>>()?;
        Ok((out, tape))
    }

    /// Forward pass for a single state without keeping a tape.
    pub fn forward_one(&self, state: &[f64], backend: &mut Backend) -> Result<PolicyOutput> {
        let row = self.forward_row(state, backend)?;
        apply_head(self.config.output, &row.raw)
    }

    /// Action probabilities in weighted-observable mode.
    pub fn forward_weighted_observables(&self, state: &[f64], backend: &mut Backend) -> Result<Vec<f64>> {
        if !matches!(self.readout, Readout::Weighted { .. }) {
            return Err(HybridError::Config("network is not in weighted-observable mode".into()));
        }
        let row = self.forward_row(state, backend)?;
        Ok(softmax(&row.raw))
    }

    fn check_tape(&self, tape: &Tape, d_raw: &[Vec<f64>]) -> Result<()> {
        match tape.owner {
            None => return Err(HybridError::NoForwardPass),
            Some(owner) if owner != (self.id, self.version) => return Err(HybridError::StaleTape),
            Some(_) => {}
        }
        if d_raw.len() != tape.rows.len() {
            return Err(HybridError::DimensionMismatch {
                what: "upstream gradient rows",
                expected: tape.rows.len(),
                got: d_raw.len(),
            });
        }
        let width = self.config.output.raw_width();
        if let Some(bad) = d_raw.iter().find(|d| d.len() != width) {
            return Err(HybridError::DimensionMismatch {
                what: "upstream gradient",
                expected: width,
                got: bad.len(),
            });
        }
        Ok(())
    }

    /// Gradient of `Σ_rows d_raw·raw` with respect to every parameter, in
    /// [`HybridNet::params`] order.
    ///
    /// Exact backends use the adjoint method on the recorded state; sampled
    /// backends use the shift rule and consume their RNG.
    pub fn backward(&self, tape: &Tape, d_raw: &[Vec<f64>], backend: &mut Backend) -> Result<Vec<f64>> {
        self.check_tape(tape, d_raw)?;
        let mut grad = vec![0.0; self.num_params()];
        for (row, d) in tape.rows.iter().zip(d_raw) {
            self.backward_row(row, d, backend, &mut grad)?;
        }
        Ok(grad)
    }

    /// Per-row gradients; `backward` is their sum.
    pub fn backward_rows(&self, tape: &Tape, d_raw: &[Vec<f64>], backend: &mut Backend) -> Result<Vec<Vec<f64>>> {
        self.check_tape(tape, d_raw)?;
        tape.rows
            .iter()
            .zip(d_raw)
            .map(|(row, d)| {
                let mut grad = vec![0.0; self.num_params()];
                self.backward_row(row, d, backend, &mut grad)?;
                Ok(grad)
            })
            .collect()
    }

    fn backward_row(&self, row: &TapeRow, d_raw: &[f64], backend: &mut Backend, grad: &mut [f64]) -> Result<()> {
        let n = self.config.n_qubits;
        let n_pre = self.pre.as_ref().map_or(0, LinearLayer::num_params);
        let n_phi = self.quantum.phi.len();
        let n_q = self.quantum.len();
        let (g_pre, rest) = grad.split_at_mut(n_pre);
        let (g_quantum, g_readout) = rest.split_at_mut(n_q);

        let d_z = match &self.readout {
            Readout::Linear(layer) => layer.backward(&row.z, &row.raw, d_raw, g_readout),
            Readout::Weighted {
                omega,
                beta,
                train_beta,
            } => {
                let mut d_z = vec![0.0; n];
                for a in 0..omega.len() {
                    g_readout[a] += d_raw[a] * beta * row.z[a];
                    d_z[a] = d_raw[a] * beta * omega[a];
                }
                if *train_beta {
                    g_readout[omega.len()] += (0..omega.len()).map(|a| d_raw[a] * omega[a] * row.z[a]).sum::<f64>();
                }
                d_z
            }
        };

        let g_circuit = if backend.mode().is_exact() {
            match &row.final_state {
                Some(state) => adjoint_vjp(&row.circuit, state, &d_z)?,
                None => adjoint_vjp(&row.circuit, &row.circuit.simulate()?, &d_z)?,
            }
        } else {
            parameter_shift_vjp(&row.circuit, backend, &d_z)?
        };

        let (g_phi, g_enc) = g_circuit.split_at(n_phi);
        for (g, v) in g_quantum[..n_phi].iter_mut().zip(g_phi) {
            *g += v;
        }
        let factors = self.template.input_gradient_factors(&self.quantum, &row.features)?;
        let mut d_features = vec![0.0; n];
        for (e, g_a) in g_enc.iter().enumerate() {
            g_quantum[n_phi + e] += g_a * factors.d_lambda[e];
            d_features[self.template.encoding_qubit(e)] += g_a * factors.d_feature[e];
        }
        if let Some(layer) = &self.pre {
            layer.backward(&row.state, &row.features, &d_features, g_pre);
        }
        Ok(())
    }

    /// Flat parameters: pre-encoder weights, `φ`, `λ`, then readout.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        if let Some(layer) = &self.pre {
            layer.write_params(&mut out);
        }
        out.extend_from_slice(&self.quantum.phi);
        out.extend_from_slice(&self.quantum.lambda);
        match &self.readout {
            Readout::Linear(layer) => layer.write_params(&mut out),
            Readout::Weighted {
                omega,
                beta,
                train_beta,
            } => {
                out.extend_from_slice(omega);
                if *train_beta {
                    out.push(*beta);
                }
            }
        }
        out
    }

    /// Replaces every parameter; invalidates outstanding tapes.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(HybridError::DimensionMismatch {
                what: "flat parameters",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(HybridError::NonFinite("parameters"));
        }
        let mut at = 0;
        if let Some(layer) = &mut self.pre {
            at += layer.read_params(flat)?;
        }
        let n_phi = self.quantum.phi.len();
        self.quantum.phi.copy_from_slice(&flat[at..at + n_phi]);
        at += n_phi;
        let n_lambda = self.quantum.lambda.len();
        self.quantum.lambda.copy_from_slice(&flat[at..at + n_lambda]);
        at += n_lambda;
        match &mut self.readout {
            Readout::Linear(layer) => {
                layer.read_params(&flat[at..])?;
            }
            Readout::Weighted {
                omega,
                beta,
                train_beta,
            } => {
                let k = omega.len();
                omega.copy_from_slice(&flat[at..at + k]);
                if *train_beta {
                    *beta = flat[at + k];
                }
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Parameter groups by name, in flat order.
    pub fn named_params(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        if let Some(layer) = &self.pre {
            out.push(("pre.weight".to_string(), layer.weights().to_vec()));
        }
        out.push(("ansatz.phi".to_string(), self.quantum.phi.clone()));
        out.push(("ansatz.lambda".to_string(), self.quantum.lambda.clone()));
        match &self.readout {
            Readout::Linear(layer) => out.push(("post.weight".to_string(), layer.weights().to_vec())),
            Readout::Weighted {
                omega,
                beta,
                train_beta,
            } => {
                out.push(("obs.omega".to_string(), omega.clone()));
                if *train_beta {
                    out.push(("obs.beta".to_string(), vec![*beta]));
                }
            }
        }
        out
    }

    /// Inverse of [`HybridNet::named_params`]; every group must be present.
    pub fn set_named_params(&mut self, named: &[(String, Vec<f64>)]) -> Result<()> {
        let current = self.named_params();
        for (name, _) in named {
            if !current.iter().any(|(n, _)| n == name) {
                return Err(HybridError::UnknownParameter(name.clone()));
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (name, values) in &current {
            let (_, src) = named
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| HybridError::UnknownParameter(name.clone()))?;
            if src.len() != values.len() {
                return Err(HybridError::DimensionMismatch {
                    what: "named parameter group",
                    expected: values.len(),
                    got: src.len(),
                });
            }
            flat.extend_from_slice(src);
        }
        self.set_params(&flat)
    }
}
