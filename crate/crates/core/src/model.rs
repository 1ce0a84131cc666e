//! Actor/critic function approximators: dense MLPs or hybrid networks behind
//! one forward/backward interface, plus a versioned JSON checkpoint.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{DenseError, Mlp, MlpCache};
use crate::hybrid::{HybridError, HybridNet, HybridNetConfig, Tape};
use crate::quantum::Backend;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error("tape does not belong to this kind of model")]
    TapeMismatch,
    #[error("unknown parameter group `{0}`")]
    UnknownParameter(String),
    #[error("checkpoint format `{format}` version {version} is not supported")]
    UnsupportedCheckpoint { format: String, version: u32 },
    #[error("checkpoint JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub n_in: usize,
    pub hidden: Vec<usize>,
    pub n_out: usize,
    /// Orthogonal gain of the output layer.
    pub output_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Mlp(MlpConfig),
    Hybrid(HybridNetConfig),
}

impl ModelConfig {
    pub fn n_in(&self) -> usize {
        match self {
            ModelConfig::Mlp(c) => c.n_in,
            ModelConfig::Hybrid(c) => c.state_dim,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            ModelConfig::Mlp(c) => c.n_out,
            ModelConfig::Hybrid(c) => c.output.raw_width(),
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, ModelConfig::Hybrid(_))
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Mlp(Mlp),
    Hybrid(HybridNet),
}

/// Forward-pass record consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub enum ModelTape {
    Mlp(Vec<MlpCache>),
    Hybrid(Tape),
}

impl Model {
    pub fn build<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(match config {
            ModelConfig::Mlp(c) => Model::Mlp(Mlp::tanh_mlp(c.n_in, &c.hidden, c.n_out, c.output_gain, rng)?),
            ModelConfig::Hybrid(c) => Model::Hybrid(HybridNet::new(c.clone(), rng)?),
        })
    }

    pub fn n_out(&self) -> usize {
        match self {
            Model::Mlp(m) => m.n_out(),
            Model::Hybrid(h) => h.output_spec().raw_width(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Model::Mlp(m) => m.num_params(),
            Model::Hybrid(h) => h.num_params(),
        }
    }

    /// Raw outputs for one input. `backend` is only used by hybrid models.
    pub fn forward_one(&self, x: &[f64], backend: &mut Backend) -> Result<Vec<f64>> {
        match self {
            Model::Mlp(m) => Ok(m.forward(x)?),
            Model::Hybrid(h) => {
                let (mut raw, _) = h.forward_raw(std::slice::from_ref(&x.to_vec()), backend)?;
                Ok(raw.pop().expect("one row"))
            }
        }
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>], backend: &mut Backend) -> Result<(Vec<Vec<f64>>, ModelTape)> {
        match self {
            Model::Mlp(m) => {
                let mut outs = Vec::with_capacity(xs.len());
                let mut caches = Vec::with_capacity(xs.len());
                for x in xs {
                    let (y, c) = m.forward_cached(x)?;
                    outs.push(y);
                    caches.push(c);
                }
                Ok((outs, ModelTape::Mlp(caches)))
            }
            Model::Hybrid(h) => {
                let (raw, tape) = h.forward_raw(xs, backend)?;
                Ok((raw, ModelTape::Hybrid(tape)))
            }
        }
    }

    /// Gradient of `Σ_rows d_out·out` with respect to [`Model::params`].
    pub fn backward(&self, tape: &ModelTape, d_out: &[Vec<f64>], backend: &mut Backend) -> Result<Vec<f64>> {
        match (self, tape) {
            (Model::Mlp(m), ModelTape::Mlp(caches)) => {
                if caches.len() != d_out.len() {
                    return Err(DenseError::DimensionMismatch {
                        what: "upstream gradient rows",
                        expected: caches.len(),
                        got: d_out.len(),
                    }
                    .into());
                }
                let mut grad = vec![0.0; m.num_params()];
                for (c, d) in caches.iter().zip(d_out) {
                    m.backward(c, d, &mut grad)?;
                }
                Ok(grad)
            }
            (Model::Hybrid(h), ModelTape::Hybrid(t)) => Ok(h.backward(t, d_out, backend)?),
            _ => Err(ModelError::TapeMismatch),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Model::Mlp(m) => m.params(),
            Model::Hybrid(h) => h.params(),
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            Model::Mlp(m) => Ok(m.set_params(flat)?),
            Model::Hybrid(h) => Ok(h.set_params(flat)?),
        }
    }

    pub fn named_params(&self) -> Vec<(String, Vec<f64>)> {
        match self {
            Model::Mlp(m) => m.named_params(),
            Model::Hybrid(h) => h.named_params(),
        }
    }

    pub fn set_named_params(&mut self, named: &[(String, Vec<f64>)]) -> Result<()> {
        let current = self.named_params();
        if let Some((extra, _)) = named.iter().find(|(n, _)| !current.iter().any(|(c, _)| c == n)) {
            return Err(ModelError::UnknownParameter(extra.clone()));
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (name, values) in &current {
            let (_, src) = named
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| ModelError::UnknownParameter(name.clone()))?;
            if src.len() != values.len() {
                return Err(DenseError::DimensionMismatch {
                    what: "named parameter group",
                    expected: values.len(),
                    got: src.len(),
                }
                .into());
            }
            flat.extend_from_slice(src);
        }
        self.set_params(&flat)
    }

    pub fn as_hybrid(&self) -> Option<&HybridNet> {
        match self {
            Model::Hybrid(h) => Some(h),
            Model::Mlp(_) => None,
        }
    }
}

pub const CHECKPOINT_FORMAT: &str = "hqrl-network";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Config echo plus named flat parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<(String, Vec<f64>)>,
}

impl NetworkCheckpoint {
    pub fn capture(config: &ModelConfig, model: &Model) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            params: model.named_params(),
        }
    }

    pub fn restore(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(ModelError::UnsupportedCheckpoint {
                format: self.format.clone(),
                version: self.version,
            });
        }
        // initial values are overwritten, so any seed will do
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut model = Model::build(&self.config, &mut rng)?;
        model.set_named_params(&self.params)?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint is always serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))
    }
}
