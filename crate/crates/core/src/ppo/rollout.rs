use rand::Rng;

use super::advantage::{discounted_returns, gae};
use super::{Agent, PpoError, Result};
use crate::envs::{Action, VecEnv};
use crate::quantum::Backend;

/// One iteration's transitions, stored actor-major: step `t` of actor `i`
/// lives at index `i·steps_per_actor + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_actors: usize,
    pub steps_per_actor: usize,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Real successor state (the final observation when the episode ended).
    pub next_states: Vec<Vec<f64>>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Bootstrap value past each step: 0 after termination, `V(s_{t+1})` otherwise.
    pub next_values: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    /// `(return, length)` of episodes that ended during collection.
    pub finished_episodes: Vec<(f64, usize)>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Where the return/advantage recursions must stop: episode boundaries
    /// and the last collected step of each actor.
    pub fn episode_ends(&self) -> Vec<bool> {
        (0..self.len())
            .map(|k| self.terminated[k] || self.truncated[k] || (k + 1) % self.steps_per_actor == 0)
            .collect()
    }

    /// Fills `returns` and `advantages`.
    pub fn process(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let ends = self.episode_ends();
        self.returns = discounted_returns(&self.rewards, &self.next_values, &ends, gamma);
        self.advantages = gae(&self.rewards, &self.values, &self.next_values, &ends, gamma, lambda);
        if let Some(k) = self.advantages.iter().position(|a| !a.is_finite()) {
            return Err(PpoError::NonFinite {
                what: "advantage",
                diagnostics: format!(
                    "index {k}: reward {} value {} next value {}",
                    self.rewards[k], self.values[k], self.next_values[k]
                ),
            });
        }
        Ok(())
    }
}

/// Steps every actor `steps_per_actor` times under the current policy,
/// recording behavior log-probabilities and value estimates.
pub fn collect<R: Rng + ?Sized>(
    agent: &Agent,
    venv: &mut VecEnv,
    steps_per_actor: usize,
    backend: &mut Backend,
    rng: &mut R,
) -> Result<RolloutBuffer> {
    let n = venv.n_actors();
    let total = n * steps_per_actor;
    let mut buf = RolloutBuffer {
        n_actors: n,
        steps_per_actor,
        states: vec![Vec::new(); total],
        actions: vec![Action::Discrete(0); total],
        rewards: vec![0.0; total],
        next_states: vec![Vec::new(); total],
        terminated: vec![false; total],
        truncated: vec![false; total],
        log_probs: vec![0.0; total],
        values: vec![0.0; total],
        next_values: vec![0.0; total],
        returns: Vec::new(),
        advantages: Vec::new(),
        finished_episodes: Vec::new(),
    };
    for t in 0..steps_per_actor {
        let obs = venv.observations().to_vec();
        let mut actions = Vec::with_capacity(n);
        for (i, s) in obs.iter().enumerate() {
            let k = i * steps_per_actor + t;
            let (a, lp) = agent.act(s, backend, rng, false)?;
            buf.values[k] = agent.value(s, backend)?;
            buf.log_probs[k] = lp;
            buf.states[k] = s.clone();
            buf.actions[k] = a.clone();
            actions.push(a);
        }
        let step = venv.step(&actions)?;
        for i in 0..n {
            let k = i * steps_per_actor + t;
            buf.rewards[k] = step.rewards[i];
            buf.terminated[k] = step.terminated[i];
            buf.truncated[k] = step.truncated[i];
            buf.next_states[k] = step.final_observations[i]
                .clone()
                .unwrap_or_else(|| step.observations[i].clone());
        }
        buf.finished_episodes
            .extend(step.finished_episodes.iter().map(|&(_, ret, len)| (ret, len)));
    }
    // successor values: reuse the next step's estimate inside an episode,
    // evaluate the final observation after truncation and at the segment end
    for i in 0..n {
        for t in 0..steps_per_actor {
            let k = i * steps_per_actor + t;
            buf.next_values[k] = if buf.terminated[k] {
                0.0
            } else if buf.truncated[k] || t + 1 == steps_per_actor {
                agent.value(&buf.next_states[k], backend)?
            } else {
                buf.values[k + 1]
            };
        }
    }
    if let Some(k) = buf.values.iter().position(|v| !v.is_finite()) {
        return Err(PpoError::NonFinite {
            what: "value estimate",
            diagnostics: format!("state {:?}", buf.states[k]),
        });
    }
    Ok(buf)
}
