use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PpoError, Result, Scheme};
use crate::envs::{Action, ActionSpace, Env, EnvId, EnvSpec};
use crate::hybrid::{apply_head, greedy_action, sample_and_logprob, ActionBounds, HybridNetConfig, OutputSpec};
use crate::model::{MlpConfig, Model, ModelConfig};
use crate::quantum::Backend;

/// Output-layer gains for classical networks: near-uniform initial policy,
/// unit-scale initial value.
const ACTOR_OUTPUT_GAIN: f64 = 0.01;
const CRITIC_OUTPUT_GAIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub actor: ModelConfig,
    pub critic: ModelConfig,
    pub output: OutputSpec,
    pub bounds: Option<ActionBounds>,
}

impl AgentConfig {
    /// Wires networks for `scheme`. Hybrid sides use `quantum` (its state
    /// width and head are taken from `env`); classical sides are tanh MLPs
    /// with `hidden` layers.
    pub fn for_scheme(env: &EnvSpec, scheme: Scheme, quantum: &HybridNetConfig, hidden: &[usize]) -> Result<Self> {
        let (output, bounds) = match &env.action_space {
            ActionSpace::Discrete(k) => (OutputSpec::Discrete(*k), None),
            ActionSpace::Box { low, high } => (
                OutputSpec::ContinuousBeta(low.len()),
                Some(ActionBounds::new(low.clone(), high.clone())?),
            ),
        };
        if quantum.state_dim != env.state_dim {
            return Err(PpoError::Config(format!(
                "network expects {} state components but {} has {}",
                quantum.state_dim, env.id, env.state_dim
            )));
        }
        let mlp = |n_out, output_gain| {
            ModelConfig::Mlp(MlpConfig {
                n_in: env.state_dim,
                hidden: hidden.to_vec(),
                n_out,
                output_gain,
            })
        };
        let actor = if scheme.quantum_actor() {
            ModelConfig::Hybrid(HybridNetConfig {
                output,
                ..quantum.clone()
            })
        } else {
            mlp(output.raw_width(), ACTOR_OUTPUT_GAIN)
        };
        let critic = if scheme.quantum_critic() {
            ModelConfig::Hybrid(HybridNetConfig {
                output: OutputSpec::Value,
                policy_mode: crate::hybrid::PolicyMode::PostProcessing,
                ..quantum.clone()
            })
        } else {
            mlp(1, CRITIC_OUTPUT_GAIN)
        };
        let config = Self {
            actor,
            critic,
            output,
            bounds,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.actor.n_out() != self.output.raw_width() {
            return Err(PpoError::Config("actor width does not match its head".into()));
        }
        if self.critic.n_out() != 1 {
            return Err(PpoError::Config("critic must have a single output".into()));
        }
        if self.actor.n_in() != self.critic.n_in() {
            return Err(PpoError::Config("actor and critic disagree on the state width".into()));
        }
        match (self.output, &self.bounds) {
            (OutputSpec::ContinuousBeta(d), Some(b)) if b.dims() == d => Ok(()),
            (OutputSpec::Discrete(_), None) => Ok(()),
            _ => Err(PpoError::Config("action bounds do not match the head".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub config: AgentConfig,
    pub actor: Model,
    pub critic: Model,
}

impl Agent {
    pub fn build<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = Model::build(&config.actor, rng)?;
        let critic = Model::build(&config.critic, rng)?;
        Ok(Self { config, actor, critic })
    }

    /// Samples (or, when `deterministic`, picks the most likely) action.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        backend: &mut Backend,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<(Action, f64)> {
        let raw = self.actor.forward_one(state, backend)?;
        let out = apply_head(self.config.output, &raw)?;
        if deterministic {
            Ok((greedy_action(&out, self.config.bounds.as_ref())?, 0.0))
        } else {
            Ok(sample_and_logprob(&out, self.config.bounds.as_ref(), rng)?)
        }
    }

    pub fn value(&self, state: &[f64], backend: &mut Backend) -> Result<f64> {
        Ok(self.critic.forward_one(state, backend)?[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self {
            episodes: returns.len(),
            mean,
            std,
            min: returns.iter().cloned().fold(f64::INFINITY, f64::min),
            max: returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            returns,
        }
    }
}

/// Runs `episodes` full episodes; episode `k` resets with seed `seed + k`.
pub fn evaluate_policy(
    agent: &Agent,
    env_id: EnvId,
    episodes: usize,
    backend: &mut Backend,
    seed: u64,
    deterministic: bool,
) -> Result<EvalStats> {
    let mut env = Env::new(env_id)?;
    if agent.config.actor.n_in() != env.spec().state_dim {
        return Err(PpoError::Config(format!(
            "agent expects {} state components but {} has {}",
            agent.config.actor.n_in(),
            env_id,
            env.spec().state_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let mut state = env.reset(Some(seed.wrapping_add(k as u64)));
        let mut total = 0.0;
        loop {
            let (action, _) = agent.act(&state, backend, &mut rng, deterministic)?;
            let step = env.step(&action)?;
            total += step.reward;
            if step.done() {
                break;
            }
            state = step.next_state;
        }
        returns.push(total);
    }
    Ok(EvalStats::from_returns(returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_wiring() {
        let env = EnvId::PendulumV1.spec();
        let q = HybridNetConfig::new(3, 2, 3, OutputSpec::Value);
        let c = AgentConfig::for_scheme(&env, Scheme::HybridQuantumActor, &q, &[64, 64]).unwrap();
        assert!(c.actor.is_quantum() && !c.critic.is_quantum());
        assert_eq!(c.actor.n_out(), 2);
        let c = AgentConfig::for_scheme(&env, Scheme::HybridQuantumCritic, &q, &[64, 64]).unwrap();
        assert!(!c.actor.is_quantum() && c.critic.is_quantum());
        let c = AgentConfig::for_scheme(&env, Scheme::FullQuantumActorCritic, &q, &[64, 64]).unwrap();
        assert!(c.actor.is_quantum() && c.critic.is_quantum());
        let c = AgentConfig::for_scheme(&env, Scheme::ClassicalBaseline, &q, &[64, 64]).unwrap();
        assert!(!c.actor.is_quantum() && !c.critic.is_quantum());
        let wrong = HybridNetConfig::new(4, 1, 4, OutputSpec::Value);
        assert!(AgentConfig::for_scheme(&env, Scheme::HybridQuantumActor, &wrong, &[64]).is_err());
    }

    #[test]
    fn untrained_cartpole_policy_is_weak() {
        let env = EnvId::CartPoleV1.spec();
        let q = HybridNetConfig::new(4, 1, 4, OutputSpec::Discrete(2));
        let cfg = AgentConfig::for_scheme(&env, Scheme::HybridQuantumActor, &q, &[64, 64]).unwrap();
        let agent = Agent::build(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let stats = evaluate_policy(&agent, EnvId::CartPoleV1, 100, &mut Backend::exact(), 1, false).unwrap();
        assert_eq!(stats.episodes, 100);
        assert!(stats.mean < 100.0, "{}", stats.mean);
        assert!(stats.min <= stats.mean && stats.mean <= stats.max);
    }
}
