//! Seeded classic-control environments and a synchronized multi-actor wrapper.
//!
//! Dynamics, constants and time limits follow the Gym reference
//! implementations. Termination (a terminal state was reached) and truncation
//! (the time limit was hit) are reported separately.

mod acrobot;
mod cartpole;
mod mountain_car;
mod pendulum;
pub mod trajectory;
mod vec_env;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::hybrid::Action;
pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use mountain_car::{MountainCar, MountainCarContinuous};
pub use pendulum::Pendulum;
pub use vec_env::{VecEnv, VecStep};

/// Reference dynamics constants, exposed for fixture checks.
pub mod constants {
    pub use super::acrobot::consts as acrobot;
    pub use super::cartpole::consts as cartpole;
    pub use super::mountain_car::consts as mountain_car;
    pub use super::pendulum::consts as pendulum;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment id `{0}`")]
    UnknownId(String),
    #[error("{0} needs a rigid-body physics engine and is not simulated")]
    NotSimulated(EnvId),
    #[error("action {action:?} is outside the action space of {env}")]
    InvalidAction { env: EnvId, action: Action },
    #[error("step called on a finished episode; call reset first")]
    NeedsReset,
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("vector env needs at least one actor")]
    NoActors,
}

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EnvId {
    #[serde(rename = "CartPole-v1")]
    CartPoleV1,
    #[serde(rename = "CartPole-v0")]
    CartPoleV0,
    #[serde(rename = "MountainCar-v0")]
    MountainCarV0,
    #[serde(rename = "MountainCarContinuous-v0")]
    MountainCarContinuousV0,
    #[serde(rename = "Acrobot-v1")]
    AcrobotV1,
    #[serde(rename = "Pendulum-v1")]
    PendulumV1,
    #[serde(rename = "LunarLander-v2")]
    LunarLanderV2,
    #[serde(rename = "LunarLanderContinuous-v2")]
    LunarLanderContinuousV2,
    #[serde(rename = "BipedalWalker-v3")]
    BipedalWalkerV3,
}

impl EnvId {
    pub const ALL: [EnvId; 9] = [
        EnvId::CartPoleV1,
        EnvId::CartPoleV0,
        EnvId::MountainCarV0,
        EnvId::MountainCarContinuousV0,
        EnvId::AcrobotV1,
        EnvId::PendulumV1,
        EnvId::LunarLanderV2,
        EnvId::LunarLanderContinuousV2,
        EnvId::BipedalWalkerV3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::CartPoleV1 => "CartPole-v1",
            EnvId::CartPoleV0 => "CartPole-v0",
            EnvId::MountainCarV0 => "MountainCar-v0",
            EnvId::MountainCarContinuousV0 => "MountainCarContinuous-v0",
            EnvId::AcrobotV1 => "Acrobot-v1",
            EnvId::PendulumV1 => "Pendulum-v1",
            EnvId::LunarLanderV2 => "LunarLander-v2",
            EnvId::LunarLanderContinuousV2 => "LunarLanderContinuous-v2",
            EnvId::BipedalWalkerV3 => "BipedalWalker-v3",
        }
    }

    pub fn is_simulated(self) -> bool {
        !matches!(
            self,
            EnvId::LunarLanderV2 | EnvId::LunarLanderContinuousV2 | EnvId::BipedalWalkerV3
        )
    }

    pub fn spec(self) -> EnvSpec {
        let discrete = |state_dim, k, max_episode_steps| EnvSpec {
            id: self,
            state_dim,
            action_space: ActionSpace::Discrete(k),
            max_episode_steps,
        };
        let boxed = |state_dim, low: f64, high: f64, d, max_episode_steps| EnvSpec {
            id: self,
            state_dim,
            action_space: ActionSpace::Box {
                low: vec![low; d],
                high: vec![high; d],
            },
            max_episode_steps,
        };
        match self {
            EnvId::CartPoleV1 => discrete(4, 2, 500),
            EnvId::CartPoleV0 => discrete(4, 2, 200),
            EnvId::MountainCarV0 => discrete(2, 3, 200),
            EnvId::MountainCarContinuousV0 => boxed(2, -1.0, 1.0, 1, 999),
            EnvId::AcrobotV1 => discrete(6, 3, 500),
            EnvId::PendulumV1 => boxed(3, -2.0, 2.0, 1, 200),
            EnvId::LunarLanderV2 => discrete(8, 4, 1000),
            EnvId::LunarLanderContinuousV2 => boxed(8, -1.0, 1.0, 2, 1000),
            EnvId::BipedalWalkerV3 => boxed(24, -1.0, 1.0, 4, 1600),
        }
    }

    /// Conventional "solved" return threshold.
    pub fn solved_threshold(self) -> f64 {
        match self {
            EnvId::CartPoleV1 => 475.0,
            EnvId::CartPoleV0 => 195.0,
            EnvId::MountainCarV0 => -110.0,
            EnvId::MountainCarContinuousV0 => 90.0,
            EnvId::AcrobotV1 => -100.0,
            EnvId::PendulumV1 => -200.0,
            EnvId::LunarLanderV2 | EnvId::LunarLanderContinuousV2 => 200.0,
            EnvId::BipedalWalkerV3 => 300.0,
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| EnvError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn dims(&self) -> usize {
        match self {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Box { low, .. } => low.len(),
        }
    }

    /// Discrete actions must index a valid choice; continuous actions must
    /// have the right width and be finite (magnitudes are clipped by the dynamics).
    pub fn contains(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionSpace::Discrete(k), Action::Discrete(a)) => a < k,
            (ActionSpace::Box { low, .. }, Action::Continuous(v)) => {
                v.len() == low.len() && v.iter().all(|x| x.is_finite())
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: EnvId,
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Dynamics {
    CartPole(CartPole),
    MountainCar(MountainCar),
    MountainCarContinuous(MountainCarContinuous),
    Acrobot(Acrobot),
    Pendulum(Pendulum),
}

/// One environment instance: dynamics, RNG stream and time-limit bookkeeping.
///
/// Serialisable so a checkpoint can resume mid-episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Env {
    spec: EnvSpec,
    dynamics: Dynamics,
    rng: ChaCha8Rng,
    elapsed: usize,
    needs_reset: bool,
}

impl Env {
    pub fn new(id: EnvId) -> Result<Self> {
        let dynamics = match id {
            EnvId::CartPoleV1 | EnvId::CartPoleV0 => Dynamics::CartPole(CartPole::default()),
            EnvId::MountainCarV0 => Dynamics::MountainCar(MountainCar::default()),
            EnvId::MountainCarContinuousV0 => Dynamics::MountainCarContinuous(MountainCarContinuous::default()),
            EnvId::AcrobotV1 => Dynamics::Acrobot(Acrobot::default()),
            EnvId::PendulumV1 => Dynamics::Pendulum(Pendulum::default()),
            other => return Err(EnvError::NotSimulated(other)),
        };
        Ok(Self {
            spec: id.spec(),
            dynamics,
            rng: ChaCha8Rng::seed_from_u64(0),
            elapsed: 0,
            needs_reset: true,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn id(&self) -> EnvId {
        self.spec.id
    }

    /// Starts a new episode. `Some(seed)` reseeds the stream; `None` continues it.
    pub fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.elapsed = 0;
        self.needs_reset = false;
        let rng = &mut self.rng;
        match &mut self.dynamics {
            Dynamics::CartPole(d) => d.reset(rng),
            Dynamics::MountainCar(d) => d.reset(rng),
            Dynamics::MountainCarContinuous(d) => d.reset(rng),
            Dynamics::Acrobot(d) => d.reset(rng),
            Dynamics::Pendulum(d) => d.reset(rng),
        }
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::CartPole(d) => d.observation(),
            Dynamics::MountainCar(d) => d.observation(),
            Dynamics::MountainCarContinuous(d) => d.observation(),
            Dynamics::Acrobot(d) => d.observation(),
            Dynamics::Pendulum(d) => d.observation(),
        }
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.needs_reset {
            return Err(EnvError::NeedsReset);
        }
        if !self.spec.action_space.contains(action) {
            return Err(EnvError::InvalidAction {
                env: self.spec.id,
                action: action.clone(),
            });
        }
        let (reward, terminated) = match (&mut self.dynamics, action) {
            (Dynamics::CartPole(d), Action::Discrete(a)) => d.step(*a),
            (Dynamics::MountainCar(d), Action::Discrete(a)) => d.step(*a),
            (Dynamics::Acrobot(d), Action::Discrete(a)) => d.step(*a),
            (Dynamics::MountainCarContinuous(d), Action::Continuous(v)) => d.step(v[0]),
            (Dynamics::Pendulum(d), Action::Continuous(v)) => d.step(v[0]),
            _ => unreachable!("action space checked above"),
        };
        self.elapsed += 1;
        let truncated = !terminated && self.elapsed >= self.spec.max_episode_steps;
        self.needs_reset = terminated || truncated;
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            terminated,
            truncated,
        })
    }

    pub fn elapsed_steps(&self) -> usize {
        self.elapsed
    }

    /// Overwrites the internal physical state (used by fixtures and tests).
    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        let expected = match &self.dynamics {
            Dynamics::CartPole(_) => 4,
            Dynamics::Acrobot(_) => 4,
            _ => 2,
        };
        if state.len() != expected {
            return Err(EnvError::CountMismatch {
                what: "state components",
                expected,
                got: state.len(),
            });
        }
        match &mut self.dynamics {
            Dynamics::CartPole(d) => d.state.copy_from_slice(state),
            Dynamics::MountainCar(d) => d.state.copy_from_slice(state),
            Dynamics::MountainCarContinuous(d) => d.state.copy_from_slice(state),
            Dynamics::Acrobot(d) => d.state.copy_from_slice(state),
            Dynamics::Pendulum(d) => d.state.copy_from_slice(state),
        }
        self.needs_reset = false;
        Ok(())
    }

    /// Internal physical state, e.g. angles rather than their cos/sin.
    pub fn state(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::CartPole(d) => d.state.to_vec(),
            Dynamics::MountainCar(d) => d.state.to_vec(),
            Dynamics::MountainCarContinuous(d) => d.state.to_vec(),
            Dynamics::Acrobot(d) => d.state.to_vec(),
            Dynamics::Pendulum(d) => d.state.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in EnvId::ALL {
            assert_eq!(id.as_str().parse::<EnvId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.as_str()));
        }
        assert!("Pong-v0".parse::<EnvId>().is_err());
    }

    #[test]
    fn dimensions() {
        let dims = |id: EnvId| {
            let s = id.spec();
            let a = match s.action_space {
                ActionSpace::Discrete(k) => k,
                ActionSpace::Box { low, .. } => low.len(),
            };
            (s.state_dim, a)
        };
        assert_eq!(dims(EnvId::CartPoleV1), (4, 2));
        assert_eq!(dims(EnvId::MountainCarV0), (2, 3));
        assert_eq!(dims(EnvId::AcrobotV1), (6, 3));
        assert_eq!(dims(EnvId::MountainCarContinuousV0), (2, 1));
        assert_eq!(dims(EnvId::PendulumV1), (3, 1));
        assert_eq!(dims(EnvId::LunarLanderV2), (8, 4));
        assert_eq!(dims(EnvId::BipedalWalkerV3), (24, 4));
        assert_eq!(dims(EnvId::LunarLanderContinuousV2), (8, 2));
    }

    #[test]
    fn box2d_ids_are_not_simulated() {
        assert_eq!(
            Env::new(EnvId::BipedalWalkerV3).unwrap_err(),
            EnvError::NotSimulated(EnvId::BipedalWalkerV3)
        );
    }

    #[test]
    fn step_protocol_errors() {
        let mut env = Env::new(EnvId::CartPoleV1).unwrap();
        assert_eq!(env.step(&Action::Discrete(0)), Err(EnvError::NeedsReset));
        env.reset(Some(0));
        assert!(matches!(env.step(&Action::Discrete(2)), Err(EnvError::InvalidAction { .. })));
        assert!(matches!(
            env.step(&Action::Continuous(vec![0.0])),
            Err(EnvError::InvalidAction { .. })
        ));
        let mut p = Env::new(EnvId::PendulumV1).unwrap();
        p.reset(Some(0));
        assert!(p.step(&Action::Continuous(vec![f64::NAN])).is_err());
        assert!(p.step(&Action::Continuous(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn truncation_at_time_limit() {
        let mut env = Env::new(EnvId::PendulumV1).unwrap();
        env.reset(Some(3));
        for t in 1..=200 {
            let r = env.step(&Action::Continuous(vec![0.0])).unwrap();
            assert!(!r.terminated);
            assert_eq!(r.truncated, t == 200);
        }
        assert_eq!(env.step(&Action::Continuous(vec![0.0])), Err(EnvError::NeedsReset));
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        for id in EnvId::ALL.into_iter().filter(|id| id.is_simulated()) {
            let mut a = Env::new(id).unwrap();
            let mut b = Env::new(id).unwrap();
            assert_eq!(a.reset(Some(42)), b.reset(Some(42)));
            assert_ne!(a.reset(Some(1)), b.reset(Some(2)));
        }
    }
}
