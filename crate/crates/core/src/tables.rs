//! The eight reference hybrid-actor configurations and their published
//! parameter counts.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{InitStrategy, DEFAULT_CONSTANT_INIT};
use crate::envs::{ActionSpace, EnvId};
use crate::hybrid::{HybridError, HybridNet, HybridNetConfig, OutputSpec};

const CONSTANT: InitStrategy = InitStrategy::Constant {
    value: DEFAULT_CONSTANT_INIT,
};
const ORTHOGONAL: InitStrategy = InitStrategy::Orthogonal { gain: 1.0 };

/// One reference actor: environment, circuit size, initialisers and the
/// expected `(quantum, total)` parameter counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceActor {
    pub label: String,
    pub env: EnvId,
    pub config: HybridNetConfig,
    pub expected_quantum: usize,
    pub expected_total: usize,
}

fn actor(
    label: &str,
    env: EnvId,
    n_qubits: usize,
    n_layers: usize,
    pre_init: Option<InitStrategy>,
    post_init: InitStrategy,
    expected: (usize, usize),
) -> ReferenceActor {
    let spec = env.spec();
    let output = match spec.action_space {
        ActionSpace::Discrete(k) => OutputSpec::Discrete(k),
        ActionSpace::Box { low, .. } => OutputSpec::ContinuousBeta(low.len()),
    };
    let mut config = HybridNetConfig::new(n_qubits, n_layers, spec.state_dim, output);
    config.use_pre_encoding = pre_init.is_some();
    config.pre_init = pre_init.unwrap_or(CONSTANT);
    config.post_init = post_init;
    ReferenceActor {
        label: label.to_string(),
        env,
        config,
        expected_quantum: expected.0,
        expected_total: expected.1,
    }
}

/// The reference actors in table order.
pub fn reference_actors() -> Vec<ReferenceActor> {
    use EnvId::*;
    vec![
        actor("CartPole", CartPoleV1, 4, 1, None, CONSTANT, (24, 32)),
        actor("MountainCar", MountainCarV0, 2, 3, None, CONSTANT, (28, 34)),
        actor("Acrobot", AcrobotV1, 4, 1, Some(CONSTANT), InitStrategy::Xavier, (24, 60)),
        actor("LunarLander", LunarLanderV2, 4, 1, Some(InitStrategy::Xavier), CONSTANT, (24, 72)),
        actor("Pendulum", PendulumV1, 3, 2, None, InitStrategy::Xavier, (30, 36)),
        actor("MountainCar(C)", MountainCarContinuousV0, 2, 3, None, InitStrategy::Xavier, (28, 32)),
        actor("BipedalWalker", BipedalWalkerV3, 4, 1, Some(ORTHOGONAL), ORTHOGONAL, (24, 152)),
        actor("LunarLander(C)", LunarLanderContinuousV2, 4, 1, Some(CONSTANT), ORTHOGONAL, (24, 72)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCheck {
    pub label: String,
    pub expected_quantum: usize,
    pub expected_total: usize,
    /// Counts of the built network; `None` when the config failed to build.
    pub quantum: Option<usize>,
    pub total: Option<usize>,
    pub error: Option<String>,
}

impl TableCheck {
    pub fn passed(&self) -> bool {
        self.quantum == Some(self.expected_quantum) && self.total == Some(self.expected_total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: Vec<TableCheck>,
}

impl TableReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(TableCheck::passed)
    }
}

fn count(config: &HybridNetConfig) -> Result<(usize, usize), HybridError> {
    let net = HybridNet::new(config.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(net.count_parameters())
}

/// Builds every actor and compares its counts with the expected ones.
pub fn verify_tables(actors: &[ReferenceActor]) -> TableReport {
    let rows = actors
        .iter()
        .map(|a| {
            let (counts, error) = match count(&a.config) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TableCheck {
                label: a.label.clone(),
                expected_quantum: a.expected_quantum,
                expected_total: a.expected_total,
                quantum: counts.map(|c| c.0),
                total: counts.map(|c| c.1),
                error,
            }
        })
        .collect();
    TableReport { rows }
}

impl fmt::Display for TableReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        writeln!(f, "{:<16} {:>9} {:>9} {:>9} {:>9}  result", "actor", "quantum", "expected", "total", "expected")?;
        for r in &self.rows {
            write!(
                f,
                "{:<16} {:>9} {:>9} {:>9} {:>9}  {}",
                r.label,
                show(r.quantum),
                r.expected_quantum,
                show(r.total),
                r.expected_total,
                if r.passed() { "pass" } else { "FAIL" }
            )?;
            if let Some(e) = &r.error {
                write!(f, " ({e})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts_match() {
        let report = verify_tables(&reference_actors());
        assert!(report.all_passed(), "{report}");
        let q: Vec<_> = report.rows.iter().map(|r| r.quantum.unwrap()).collect();
        let t: Vec<_> = report.rows.iter().map(|r| r.total.unwrap()).collect();
        assert_eq!(q, [24, 28, 24, 24, 30, 28, 24, 24]);
        assert_eq!(t, [32, 34, 60, 72, 36, 32, 152, 72]);
    }

    #[test]
    fn extra_layer_is_flagged() {
        let mut actors = reference_actors();
        actors[4].config.n_layers += 1;
        let report = verify_tables(&actors);
        assert!(!report.all_passed());
        assert!(!report.rows[4].passed());
        assert_eq!(report.rows.iter().filter(|r| r.passed()).count(), 7);
        assert!(report.to_string().contains("FAIL"));
    }

    #[test]
    fn build_failure_is_a_failed_row() {
        let mut actors = reference_actors();
        actors[0].config.n_qubits = 0;
        let report = verify_tables(&actors);
        assert!(report.rows[0].error.is_some() && !report.rows[0].passed());
    }
}
