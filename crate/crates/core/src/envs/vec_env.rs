use serde::{Deserialize, Serialize};

use super::{Action, Env, EnvError, EnvId, EnvSpec, Result};

/// Outcome of one synchronized step across all actors.
///
/// `observations[i]` is already the fresh initial state when actor `i`
/// finished; its last real observation is kept in `final_observations[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VecStep {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub final_observations: Vec<Option<Vec<f64>>>,
    /// `(actor, return, length)` for every episode that ended on this step.
    pub finished_episodes: Vec<(usize, f64, usize)>,
}

/// Independent environments stepped in lockstep with per-actor auto-reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecEnv {
    envs: Vec<Env>,
    observations: Vec<Vec<f64>>,
    running_returns: Vec<f64>,
}

impl VecEnv {
    pub fn new(id: EnvId, n_actors: usize) -> Result<Self> {
        if n_actors == 0 {
            return Err(EnvError::NoActors);
        }
        let envs = (0..n_actors).map(|_| Env::new(id)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            envs,
            observations: Vec::new(),
            running_returns: vec![0.0; n_actors],
        })
    }

    pub fn n_actors(&self) -> usize {
        self.envs.len()
    }

    pub fn spec(&self) -> &EnvSpec {
        self.envs[0].spec()
    }

    /// Reseeds every actor; `seeds[i]` goes to actor `i`.
    pub fn reset(&mut self, seeds: &[u64]) -> Result<Vec<Vec<f64>>> {
        if seeds.len() != self.envs.len() {
            return Err(EnvError::CountMismatch {
                what: "seeds",
                expected: self.envs.len(),
                got: seeds.len(),
            });
        }
        self.observations = self
            .envs
            .iter_mut()
            .zip(seeds)
            .map(|(env, &seed)| env.reset(Some(seed)))
            .collect();
        self.running_returns.iter_mut().for_each(|r| *r = 0.0);
        Ok(self.observations.clone())
    }

    /// Current observation per actor (empty before the first reset).
    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<VecStep> {
        if actions.len() != self.envs.len() {
            return Err(EnvError::CountMismatch {
                what: "actions",
                expected: self.envs.len(),
                got: actions.len(),
            });
        }
        let n = self.envs.len();
        let mut out = VecStep {
            observations: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            terminated: Vec::with_capacity(n),
            truncated: Vec::with_capacity(n),
            final_observations: Vec::with_capacity(n),
            finished_episodes: Vec::new(),
        };
        for (i, (env, action)) in self.envs.iter_mut().zip(actions).enumerate() {
            let r = env.step(action)?;
            self.running_returns[i] += r.reward;
            out.rewards.push(r.reward);
            out.terminated.push(r.terminated);
            out.truncated.push(r.truncated);
            if r.done() {
                out.finished_episodes
                    .push((i, self.running_returns[i], env.elapsed_steps()));
                self.running_returns[i] = 0.0;
                out.final_observations.push(Some(r.next_state));
                out.observations.push(env.reset(None));
            } else {
                out.final_observations.push(None);
                out.observations.push(r.next_state);
            }
        }
        self.observations = out.observations.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted(t: usize, actor: usize) -> Action {
        Action::Discrete((t * 7 + actor * 3) % 7 % 2)
    }

    #[test]
    fn matches_independent_scalar_envs() {
        let seeds: Vec<u64> = (0..8).map(|i| 1000 + i).collect();
        let mut venv = VecEnv::new(EnvId::CartPoleV1, 8).unwrap();
        let first = venv.reset(&seeds).unwrap();
        let mut scalars: Vec<Env> = (0..8).map(|_| Env::new(EnvId::CartPoleV1).unwrap()).collect();
        for (i, env) in scalars.iter_mut().enumerate() {
            assert_eq!(env.reset(Some(seeds[i])), first[i]);
        }
        for t in 0..300 {
            let actions: Vec<Action> = (0..8).map(|i| scripted(t, i)).collect();
            let step = venv.step(&actions).unwrap();
            for (i, env) in scalars.iter_mut().enumerate() {
                let r = env.step(&actions[i]).unwrap();
                assert_eq!(step.rewards[i], r.reward);
                assert_eq!(step.terminated[i], r.terminated);
                if r.done() {
                    assert_eq!(step.final_observations[i].as_ref(), Some(&r.next_state));
                    assert_eq!(step.observations[i], env.reset(None));
                } else {
                    assert_eq!(step.observations[i], r.next_state);
                }
            }
        }
    }

    #[test]
    fn auto_reset_returns_initial_state() {
        let mut venv = VecEnv::new(EnvId::CartPoleV1, 1).unwrap();
        venv.reset(&[3]).unwrap();
        loop {
            let s = venv.step(&[Action::Discrete(1)]).unwrap();
            if s.terminated[0] {
                assert!(s.observations[0].iter().all(|v| v.abs() <= 0.05));
                assert_eq!(s.finished_episodes.len(), 1);
                break;
            }
        }
    }

    #[test]
    fn seed_count_mismatch() {
        let mut venv = VecEnv::new(EnvId::MountainCarV0, 2).unwrap();
        assert!(matches!(venv.reset(&[1]), Err(EnvError::CountMismatch { .. })));
        assert_eq!(VecEnv::new(EnvId::MountainCarV0, 0).unwrap_err(), EnvError::NoActors);
    }
}
