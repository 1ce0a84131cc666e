//! Proximal policy optimization with hybrid or classical actors and critics.

pub mod adam;
pub mod advantage;
mod agent;
mod reward_scale;
mod rollout;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use advantage::{
    approx_kl, clipped_objective, clipped_objective_grad, discounted_returns, gae, normalize_advantages,
};
pub use agent::{evaluate_policy, Agent, AgentConfig, EvalStats};
pub use reward_scale::RewardScaler;
pub use rollout::{collect, RolloutBuffer};
pub use trainer::{
    read_curve_csv, write_curve_csv, CurveRow, EarlyStop, TrainOutcome, Trainer, TrainerCheckpoint, UpdateStats,
    TRAINER_CHECKPOINT_FORMAT,
};

use crate::envs::EnvError;
use crate::hybrid::HybridError;
use crate::model::ModelError;
use crate::quantum::QuantumError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid PPO configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("training aborted: non-finite {what}\n{diagnostics}")]
    NonFinite { what: &'static str, diagnostics: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PpoError>;

/// Which side(s) of the actor-critic pair are hybrid quantum networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    HybridQuantumActor,
    HybridQuantumCritic,
    FullQuantumActorCritic,
    ClassicalBaseline,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::HybridQuantumActor,
        Scheme::HybridQuantumCritic,
        Scheme::FullQuantumActorCritic,
        Scheme::ClassicalBaseline,
    ];

    pub fn quantum_actor(self) -> bool {
        matches!(self, Scheme::HybridQuantumActor | Scheme::FullQuantumActorCritic)
    }

    pub fn quantum_critic(self) -> bool {
        matches!(self, Scheme::HybridQuantumCritic | Scheme::FullQuantumActorCritic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::HybridQuantumActor => "hybrid-quantum-actor",
            Scheme::HybridQuantumCritic => "hybrid-quantum-critic",
            Scheme::FullQuantumActorCritic => "full-quantum-actor-critic",
            Scheme::ClassicalBaseline => "classical-baseline",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regression target for the critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueTarget {
    /// Bootstrapped discounted returns `R_t`.
    #[default]
    Returns,
    /// `Â_t + V(s_t)` (the λ-return).
    AdvantagePlusValue,
}

fn default_clip() -> f64 {
    0.2
}
fn default_entropy() -> f64 {
    0.01
}
fn default_value_coef() -> f64 {
    0.5
}
fn default_grad_norm() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    /// Total environment interactions across all actors.
    pub max_steps: usize,
    /// Steps per iteration across all actors.
    pub buffer_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub n_actors: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    #[serde(default = "default_clip")]
    pub clip_eps: f64,
    /// Entropy bonus coefficient.
    #[serde(default = "default_entropy")]
    pub entropy_coef: f64,
    /// Value loss coefficient.
    #[serde(default = "default_value_coef")]
    pub value_coef: f64,
    /// Global gradient-norm bound; non-positive disables clipping.
    #[serde(default = "default_grad_norm")]
    pub max_grad_norm: f64,
    #[serde(default)]
    pub anneal_lr: bool,
    #[serde(default)]
    pub value_target: ValueTarget,
    /// Divide rewards by a running std of the discounted return.
    #[serde(default)]
    pub reward_scaling: bool,
}

/// Sizes actually used after rounding and clamping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectiveSizes {
    pub steps_per_actor: usize,
    pub buffer_size: usize,
    pub minibatch_size: usize,
    pub iterations: usize,
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PpoError::Config(msg.to_string()));
        if self.n_actors == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return bad("n_actors, epochs and minibatch_size must be positive");
        }
        if self.buffer_size < self.n_actors {
            return bad("buffer_size must be at least n_actors");
        }
        if self.max_steps < self.buffer_size {
            return bad("max_steps must cover at least one buffer");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.clip_eps.is_nan() || self.clip_eps <= 0.0 {
            return bad("clip_eps must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !self.max_grad_norm.is_finite() {
            return bad("max_grad_norm must be finite");
        }
        Ok(())
    }

    /// Rounds the buffer down to a multiple of `n_actors` and clamps the
    /// minibatch to the buffer, warning when either adjustment happens.
    pub fn effective(&self) -> EffectiveSizes {
        let steps_per_actor = self.buffer_size / self.n_actors;
        let buffer_size = steps_per_actor * self.n_actors;
        if buffer_size != self.buffer_size {
            log::warn!(
                "buffer size {} is not a multiple of {} actors; using {} ({} steps per actor)",
                self.buffer_size,
                self.n_actors,
                buffer_size,
                steps_per_actor
            );
        }
        let minibatch_size = self.minibatch_size.min(buffer_size);
        if minibatch_size != self.minibatch_size {
            log::warn!(
                "minibatch size {} exceeds the buffer; clamped to {}",
                self.minibatch_size,
                minibatch_size
            );
        }
        EffectiveSizes {
            steps_per_actor,
            buffer_size,
            minibatch_size,
            iterations: self.max_steps / self.buffer_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cartpole_ppo() -> PpoConfig {
        PpoConfig {
            max_steps: 1024,
            buffer_size: 256,
            minibatch_size: 256,
            epochs: 20,
            n_actors: 8,
            gamma: 0.98,
            gae_lambda: 0.8,
            actor_lr: 1e-2,
            critic_lr: 1e-3,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            anneal_lr: false,
            value_target: ValueTarget::Returns,
            reward_scaling: false,
        }
    }

    #[test]
    fn sizes() {
        let e = cartpole_ppo().effective();
        assert_eq!(e.steps_per_actor, 32);
        assert_eq!(e.iterations, 4);
        let mut c = cartpole_ppo();
        c.buffer_size = 16348;
        c.n_actors = 16;
        c.max_steps = 16348 * 3;
        let e = c.effective();
        assert_eq!((e.steps_per_actor, e.buffer_size), (1021, 16336));
        let mut c = cartpole_ppo();
        c.buffer_size = 8;
        c.n_actors = 1;
        assert_eq!(c.effective().minibatch_size, 8);
    }

    #[test]
    fn validation() {
        assert!(cartpole_ppo().validate().is_ok());
        let mut c = cartpole_ppo();
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        let mut c = cartpole_ppo();
        c.buffer_size = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let toml_text = r#"
            max_steps = 1024
            buffer_size = 256
            minibatch_size = 256
            epochs = 20
            n_actors = 8
            gamma = 0.98
            gae_lambda = 0.8
            actor_lr = 1e-2
            critic_lr = 1e-3
        "#;
        let c: PpoConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(c, cartpole_ppo());
    }
}
