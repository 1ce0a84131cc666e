//! Config-driven multi-seed experiments: presets, run directories, aggregate
//! curves, checkpoint evaluation and learning-curve plots.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use plot::{plot_runs, PlotSeries};

use crate::envs::{ActionSpace, EnvId};
use crate::hybrid::{HybridNetConfig, OutputSpec};
use crate::ppo::{
    evaluate_policy, read_curve_csv, write_curve_csv, AgentConfig, CurveRow, EarlyStop, EvalStats, PpoConfig,
    PpoError, Scheme, Trainer, TrainerCheckpoint,
};
use crate::quantum::{Backend, BackendMode};
use crate::tables::{verify_tables, ReferenceActor, TableReport};

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "HQRL_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
pub const RUN_RECORD_FORMAT: &str = "hqrl-run";
const RUN_RECORD_VERSION: u32 = 1;
/// Offset between a training seed and the seed of its final evaluation.
const EVAL_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Invalid(String),
    #[error("{dir} already holds a run (config hash {hash}); pass --force to overwrite")]
    Exists { dir: PathBuf, hash: String },
    #[error("seed {seed}: {source}")]
    Training { seed: u64, source: PpoError },
    #[error("checkpoint does not fit {env}: {reason}")]
    Mismatch { env: EnvId, reason: String },
    #[error("nothing to plot")]
    EmptyRecordSet,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Ppo(#[from] PpoError),
}

impl ExperimentError {
    /// Process exit status for the command line: 2 for unusable input, 3 for
    /// aborted training, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Invalid(_)
            | ExperimentError::Exists { .. }
            | ExperimentError::Mismatch { .. }
            | ExperimentError::EmptyRecordSet
            | ExperimentError::Format { .. } => 2,
            ExperimentError::Training { .. } => 3,
            ExperimentError::Io { .. } | ExperimentError::Ppo(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub episodes: usize,
    /// Greedy actions instead of sampling.
    #[serde(default)]
    pub deterministic: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvId,
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    /// Run directory relative to the output root; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Hidden widths of every classical (tanh MLP) network.
    #[serde(default = "default_hidden")]
    pub classical_hidden: Vec<usize>,
    /// Hybrid network; its `backend` is the execution mode of the run.
    pub network: HybridNetConfig,
    pub ppo: PpoConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Stop a seed once an evaluation reaches the target; curves are then
    /// shorter than the iteration budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<EarlyStop>,
}

/// Shipped presets as `(name, TOML text)`.
pub const PRESETS: [(&str, &str); 11] = [
    ("cartpole", include_str!("../../presets/cartpole.toml")),
    ("cartpole-v0", include_str!("../../presets/cartpole-v0.toml")),
    ("mountain-car", include_str!("../../presets/mountain-car.toml")),
    ("acrobot", include_str!("../../presets/acrobot.toml")),
    ("lunar-lander", include_str!("../../presets/lunar-lander.toml")),
    ("pendulum", include_str!("../../presets/pendulum.toml")),
    ("mountain-car-continuous", include_str!("../../presets/mountain-car-continuous.toml")),
    ("bipedal-walker", include_str!("../../presets/bipedal-walker.toml")),
    ("lunar-lander-continuous", include_str!("../../presets/lunar-lander-continuous.toml")),
    ("cartpole-quantum-critic", include_str!("../../presets/cartpole-quantum-critic.toml")),
    ("cartpole-full-quantum", include_str!("../../presets/cartpole-full-quantum.toml")),
];

/// Presets whose networks are the eight reference actors, in reference order.
pub const TABLE_PRESETS: [&str; 8] = [
    "cartpole",
    "mountain-car",
    "acrobot",
    "lunar-lander",
    "pendulum",
    "mountain-car-continuous",
    "bipedal-walker",
    "lunar-lander-continuous",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExperimentConfig::from_toml(text).expect("shipped presets parse"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExperimentError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always serialisable")
    }

    /// Reads a config file, falling back to a preset name when no such file exists.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        let path = Path::new(path_or_preset);
        if !path.exists() {
            if let Some(p) = preset(path_or_preset) {
                return Ok(p);
            }
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    /// Checks that the network can be built for this environment without
    /// requiring the environment to be simulated.
    pub fn validate_network(&self) -> Result<()> {
        let invalid = |m: String| Err(ExperimentError::Invalid(m));
        let spec = self.env.spec();
        if self.network.state_dim != spec.state_dim {
            return invalid(format!(
                "network.state_dim is {} but {} observations have {} components",
                self.network.state_dim, self.env, spec.state_dim
            ));
        }
        let expected = match &spec.action_space {
            ActionSpace::Discrete(k) => OutputSpec::Discrete(*k),
            ActionSpace::Box { low, .. } => OutputSpec::ContinuousBeta(low.len()),
        };
        if self.network.output != expected {
            return invalid(format!("network.output must be {expected:?} for {}", self.env));
        }
        self.network
            .validate()
            .map_err(|e| ExperimentError::Invalid(format!("network: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(ExperimentError::Invalid(m));
        if !self.env.is_simulated() {
            return invalid(format!("{} is not simulated by this crate", self.env));
        }
        if self.seeds.is_empty() {
            return invalid("seed list is empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return invalid("seed list has duplicates".into());
        }
        if self.classical_hidden.contains(&0) {
            return invalid("classical_hidden widths must be positive".into());
        }
        if self.evaluation.episodes == 0 {
            return invalid("evaluation.episodes must be positive".into());
        }
        if let Some(es) = &self.early_stop {
            if es.eval_episodes == 0 || !es.target.is_finite() {
                return invalid("early_stop needs a finite target and at least one episode".into());
            }
        }
        self.validate_network()?;
        self.ppo.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.agent_config().map(|_| ())
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        AgentConfig::for_scheme(&self.env.spec(), self.scheme, &self.network, &self.classical_hidden)
            .map_err(|e| ExperimentError::Invalid(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form (object keys sorted), so the hash
    /// ignores field order and formatting of the source file.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("experiment config is always serialisable");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(self.output_dir.clone().unwrap_or_else(|| PathBuf::from(&self.name)))
    }

    pub fn trainer(&self, seed: u64) -> Result<Trainer> {
        let trainer = Trainer::new(self.env, self.agent_config()?, self.ppo.clone(), seed)
            .map_err(|source| ExperimentError::Training { seed, source })?;
        Ok(trainer.with_early_stop(self.early_stop.clone()))
    }
}

/// Output root from the environment, or the default.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub iterations: usize,
    pub env_steps: usize,
    /// Steps at which the early-stop evaluation passed.
    pub solved_at: Option<usize>,
    pub final_eval: EvalStats,
    pub wall_seconds: f64,
    /// Paths relative to the run directory.
    pub curve_file: PathBuf,
    pub checkpoint_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub crate_version: String,
    pub name: String,
    pub env: EnvId,
    pub scheme: Scheme,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub seeds: Vec<SeedRecord>,
}

impl RunRecord {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("record.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let record: RunRecord = serde_json::from_str(&text).map_err(|e| ExperimentError::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if record.format != RUN_RECORD_FORMAT || record.version != RUN_RECORD_VERSION {
            return Err(ExperimentError::Format {
                path,
                reason: format!("unsupported record {} v{}", record.format, record.version),
            });
        }
        Ok(record)
    }

    pub fn curves(&self, run_dir: &Path) -> Result<Vec<Vec<CurveRow>>> {
        self.seeds
            .iter()
            .map(|s| {
                let path = run_dir.join(&s.curve_file);
                let file = fs::File::open(&path).map_err(io_err(&path))?;
                read_curve_csv(file).map_err(|e| ExperimentError::Format {
                    path,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub env_steps: usize,
    /// Mean over seeds with a finite return at this iteration.
    pub return_mean: f64,
    /// Population standard deviation over the same seeds.
    pub return_std: f64,
    pub seeds: usize,
}

/// Per-iteration mean and spread of `return_mean` across seed curves.
pub fn aggregate(curves: &[Vec<CurveRow>]) -> Vec<AggregateRow> {
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let rows: Vec<&CurveRow> = curves.iter().filter_map(|c| c.get(i)).collect();
            let finite: Vec<f64> = rows.iter().map(|r| r.return_mean).filter(|v| v.is_finite()).collect();
            let n = finite.len() as f64;
            let mean = finite.iter().sum::<f64>() / n;
            let std = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            AggregateRow {
                iteration: rows[0].iteration,
                env_steps: rows[0].env_steps,
                return_mean: if finite.is_empty() { f64::NAN } else { mean },
                return_std: if finite.is_empty() { f64::NAN } else { std },
                seeds: finite.len(),
            }
        })
        .collect()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let fail = |e: csv::Error| ExperimentError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let fail = |e: csv::Error| ExperimentError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(fail)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(fail)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub root: PathBuf,
    pub force: bool,
    /// Seeds trained concurrently.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            root: default_output_root(),
            force: false,
            jobs: 1,
        }
    }
}

fn train_seed(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<SeedRecord> {
    let started = Instant::now();
    let training = |source| ExperimentError::Training { seed, source };
    let mut trainer = config.trainer(seed)?;
    trainer.train().map_err(training)?;

    let seed_dir = PathBuf::from(format!("seed-{seed}"));
    fs::create_dir_all(dir.join(&seed_dir)).map_err(io_err(dir))?;
    let curve_file = seed_dir.join("curve.csv");
    let path = dir.join(&curve_file);
    write_curve_csv(fs::File::create(&path).map_err(io_err(&path))?, trainer.curve()).map_err(training)?;
    let checkpoint_file = seed_dir.join("checkpoint.json");
    let path = dir.join(&checkpoint_file);
    fs::write(&path, trainer.checkpoint().to_json()).map_err(io_err(&path))?;

    let mode = config.network.backend.reseeded(seed.wrapping_add(EVAL_SEED_OFFSET));
    let mut backend = Backend::new(mode).map_err(|e| training(e.into()))?;
    let final_eval = evaluate_policy(
        trainer.agent(),
        config.env,
        config.evaluation.episodes,
        &mut backend,
        seed.wrapping_add(EVAL_SEED_OFFSET),
        config.evaluation.deterministic,
    )
    .map_err(training)?;
    log::info!(
        "{} seed {seed}: {} steps, evaluation mean {:.2} ± {:.2}",
        config.name,
        trainer.env_steps(),
        final_eval.mean,
        final_eval.std
    );
    Ok(SeedRecord {
        seed,
        iterations: trainer.iteration(),
        env_steps: trainer.env_steps(),
        solved_at: trainer.solved_at(),
        final_eval,
        wall_seconds: started.elapsed().as_secs_f64(),
        curve_file,
        checkpoint_file,
    })
}

/// Trains every seed and writes `config.toml`, per-seed curves and
/// checkpoints, `aggregate.csv` and `record.json` into the run directory.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let dir = config.run_dir(&options.root);
    let hash = config.hash();
    if dir.join("record.json").exists() && !options.force {
        return Err(ExperimentError::Exists { dir, hash });
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, config.to_toml()).map_err(io_err(&config_path))?;

    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let started = Instant::now();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SeedRecord>>>> = Mutex::new((0..config.seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..options.jobs.clamp(1, config.seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = config.seeds.get(i) else { break };
                let outcome = train_seed(config, seed, &dir);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    let seeds = results
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every seed was claimed"))
        .collect::<Result<Vec<_>>>()?;

    let record = RunRecord {
        format: RUN_RECORD_FORMAT.to_string(),
        version: RUN_RECORD_VERSION,
        config_hash: hash,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        name: config.name.clone(),
        env: config.env,
        scheme: config.scheme,
        started_unix,
        wall_seconds: started.elapsed().as_secs_f64(),
        seeds,
    };
    write_aggregate_csv(&dir.join("aggregate.csv"), &aggregate(&record.curves(&dir)?))?;
    let path = dir.join("record.json");
    let json = serde_json::to_string_pretty(&record).expect("run record is always serialisable");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(record)
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let format = |reason: String| ExperimentError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let ck = TrainerCheckpoint::from_json(&text).map_err(|e| format(e.to_string()))?;
    Trainer::from_checkpoint(ck).map_err(|e| format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    /// Defaults to the environment the checkpoint was trained on.
    pub env: Option<EnvId>,
    pub episodes: usize,
    /// Defaults to the training backend.
    pub backend: Option<BackendMode>,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            env: None,
            episodes: 100,
            backend: None,
            seed: 0,
            deterministic: false,
        }
    }
}

/// Runs the agent stored in a trainer checkpoint.
pub fn evaluate(trainer: &Trainer, options: &EvaluateOptions) -> Result<EvalStats> {
    let env = options.env.unwrap_or(trainer.env_id());
    let trained = trainer.env_id().spec();
    let target = env.spec();
    if trained.state_dim != target.state_dim || trained.action_space != target.action_space {
        return Err(ExperimentError::Mismatch {
            env,
            reason: format!("agent was trained on {}", trainer.env_id()),
        });
    }
    if !env.is_simulated() {
        return Err(ExperimentError::Invalid(format!("{env} is not simulated by this crate")));
    }
    let mode = match &options.backend {
        Some(m) => m.reseeded(options.seed),
        None => trainer
            .agent()
            .actor
            .as_hybrid()
            .or(trainer.agent().critic.as_hybrid())
            .map_or(BackendMode::Exact, |h| h.config().backend.reseeded(options.seed)),
    };
    let mut backend = Backend::new(mode).map_err(|e| ExperimentError::Ppo(e.into()))?;
    Ok(evaluate_policy(
        trainer.agent(),
        env,
        options.episodes,
        &mut backend,
        options.seed,
        options.deterministic,
    )?)
}

/// Table check over the networks of the given configs, paired with the
/// reference actors by environment.
pub fn verify_config_tables(configs: &[ExperimentConfig], reference: &[ReferenceActor]) -> TableReport {
    let actors: Vec<ReferenceActor> = reference
        .iter()
        .map(|r| match configs.iter().find(|c| c.env == r.env) {
            Some(c) => ReferenceActor {
                config: c.network.clone(),
                ..r.clone()
            },
            None => r.clone(),
        })
        .collect();
    verify_tables(&actors)
}

pub fn table_presets() -> Vec<ExperimentConfig> {
    TABLE_PRESETS
        .iter()
        .map(|n| preset(n).expect("listed preset"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::reference_actors;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, text) in PRESETS {
            let c = ExperimentConfig::from_toml(text).unwrap();
            assert_eq!(c.name, name);
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
            c.validate_network().unwrap();
            if c.env.is_simulated() {
                c.validate().unwrap();
            } else {
                assert!(matches!(c.validate(), Err(ExperimentError::Invalid(_))));
            }
        }
    }

    #[test]
    fn presets_match_the_reference_actors() {
        for (p, r) in table_presets().iter().zip(reference_actors()) {
            assert_eq!(p.env, r.env);
            assert_eq!(p.network, r.config, "{}", p.name);
        }
        assert!(verify_config_tables(&table_presets(), &reference_actors()).all_passed());
    }

    #[test]
    fn hash_ignores_field_order() {
        let a = preset("cartpole").unwrap();
        let text = PRESETS[0].1;
        // move the [ppo] table in front of [network]
        let (head, rest) = text.split_at(text.find("[network]").unwrap());
        let (network, tail) = rest.split_at(rest.find("[ppo]").unwrap());
        let (ppo, evaluation) = tail.split_at(tail.find("[evaluation]").unwrap());
        let reordered = format!("{head}{ppo}{network}{evaluation}");
        let b = ExperimentConfig::from_toml(&reordered).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.ppo.epochs += 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn aggregate_of_one_curve_is_that_curve() {
        let curve: Vec<CurveRow> = (1..=3)
            .map(|i| CurveRow {
                iteration: i,
                env_steps: 256 * i,
                return_mean: 10.0 * i as f64,
                return_std: 1.0,
                episodes: 2,
                policy_loss: 0.0,
                value_loss: 0.0,
                entropy: 0.0,
                approx_kl: 0.0,
                steps_per_second: 1.0,
            })
            .collect();
        let agg = aggregate(std::slice::from_ref(&curve));
        assert_eq!(agg.len(), 3);
        for (a, c) in agg.iter().zip(&curve) {
            assert_eq!((a.iteration, a.env_steps, a.return_mean, a.return_std, a.seeds), (c.iteration, c.env_steps, c.return_mean, 0.0, 1));
        }
        let mut other = curve.clone();
        other[0].return_mean = f64::NAN;
        other[1].return_mean = 40.0;
        let agg = aggregate(&[curve, other]);
        assert_eq!((agg[0].return_mean, agg[0].seeds), (10.0, 1));
        assert_eq!((agg[1].return_mean, agg[1].return_std), (30.0, 10.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = preset("cartpole").unwrap();
        c.seeds = vec![1, 1];
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = preset("cartpole").unwrap();
        c.network.state_dim = 5;
        assert!(c.validate().is_err());
        let mut c = preset("pendulum").unwrap();
        c.network.output = OutputSpec::Discrete(2);
        assert!(c.validate().is_err());
    }
}
