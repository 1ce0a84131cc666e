use std::collections::VecDeque;
use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::advantage::{approx_kl, clipped_objective, clipped_objective_grad, normalize_advantages};
use super::{
    collect, evaluate_policy, Adam, Agent, AgentConfig, EvalStats, PpoConfig, PpoError, Result, RewardScaler, RolloutBuffer,
    ValueTarget,
};
use crate::envs::{EnvId, VecEnv};
use crate::hybrid::policy_terms;
use crate::model::ModelConfig;
use crate::quantum::{Backend, BackendMode};

/// One learning-curve row; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub env_steps: usize,
    /// Mean return of episodes finished this iteration (carried forward when none
    /// finished, NaN until the first episode ends).
    #[serde(deserialize_with = "nan_from_null")]
    pub return_mean: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub return_std: f64,
    pub episodes: usize,
    #[serde(deserialize_with = "nan_from_null")]
    pub policy_loss: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub value_loss: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub entropy: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub approx_kl: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub steps_per_second: f64,
}

// JSON has no NaN: serde_json writes it as null, so read null (or an empty CSV cell) back as NaN.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn write_curve_csv<W: Write>(writer: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(reader: R) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<CurveRow>, _>>()?)
}

/// Minibatch-averaged diagnostics of one update phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Stops training once an evaluation reaches `target`. Evaluations are
/// triggered when the mean of the last `window` training episodes reaches
/// `target`, at most once every `min_interval_steps` environment steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub target: f64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub min_interval_steps: usize,
}

fn default_eval_episodes() -> usize {
    100
}

fn default_window() -> usize {
    10
}

impl EarlyStop {
    pub fn new(target: f64) -> Self {
        Self {
            target,
            eval_episodes: default_eval_episodes(),
            deterministic: false,
            window: default_window(),
            min_interval_steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub curve: Vec<CurveRow>,
    /// Environment steps at which an evaluation first reached the target.
    pub solved_at: Option<usize>,
    pub last_eval: Option<EvalStats>,
    pub evaluations: usize,
}

pub const TRAINER_CHECKPOINT_FORMAT: &str = "hqrl-trainer";
const TRAINER_CHECKPOINT_VERSION: u32 = 1;

/// Complete trainer state: resuming from it reproduces the uninterrupted run bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerCheckpoint {
    pub format: String,
    pub version: u32,
    pub trainer: Trainer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    env_id: EnvId,
    ppo: PpoConfig,
    seed: u64,
    agent: Agent,
    actor_opt: Adam,
    critic_opt: Adam,
    reward_scaler: Option<RewardScaler>,
    venv: VecEnv,
    rng: ChaCha8Rng,
    backend: Backend,
    iteration: usize,
    env_steps: usize,
    curve: Vec<CurveRow>,
    recent_returns: VecDeque<f64>,
    early_stop: Option<EarlyStop>,
    last_eval_step: Option<usize>,
    evaluations: usize,
    solved_at: Option<usize>,
    last_eval: Option<EvalStats>,
}

fn backend_mode(config: &AgentConfig) -> BackendMode {
    [&config.actor, &config.critic]
        .into_iter()
        .find_map(|m| match m {
            ModelConfig::Hybrid(h) => Some(h.backend.clone()),
            ModelConfig::Mlp(_) => None,
        })
        .unwrap_or_default()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, std)
}

fn global_norm(parts: &[&[f64]]) -> f64 {
    parts.iter().flat_map(|p| p.iter()).map(|g| g * g).sum::<f64>().sqrt()
}

impl Trainer {
    pub fn new(env_id: EnvId, agent_config: AgentConfig, ppo: PpoConfig, seed: u64) -> Result<Self> {
        ppo.validate()?;
        let sizes = ppo.effective();
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::build(agent_config, &mut master)?;
        let mut venv = VecEnv::new(env_id, ppo.n_actors)?;
        if venv.spec().state_dim != agent.config.actor.n_in() {
            return Err(PpoError::Config(format!(
                "networks expect {} state components but {env_id} has {}",
                agent.config.actor.n_in(),
                venv.spec().state_dim
            )));
        }
        let env_seeds: Vec<u64> = (0..ppo.n_actors).map(|_| master.next_u64()).collect();
        venv.reset(&env_seeds)?;
        let mode = backend_mode(&agent.config);
        let backend_seed = master.next_u64();
        let backend = Backend::new(if mode.is_exact() { mode } else { mode.reseeded(backend_seed) })?;
        let rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        log::debug!(
            "{env_id}: {} iterations of {} steps ({} per actor), minibatch {}",
            sizes.iterations,
            sizes.buffer_size,
            sizes.steps_per_actor,
            sizes.minibatch_size
        );
        Ok(Self {
            env_id,
            actor_opt: Adam::new(agent.actor.num_params(), ppo.actor_lr),
            critic_opt: Adam::new(agent.critic.num_params(), ppo.critic_lr),
            reward_scaler: ppo.reward_scaling.then(|| RewardScaler::new(ppo.n_actors, ppo.gamma)),
            ppo,
            seed,
            agent,
            venv,
            rng,
            backend,
            iteration: 0,
            env_steps: 0,
            curve: Vec::new(),
            recent_returns: VecDeque::new(),
            early_stop: None,
            last_eval_step: None,
            evaluations: 0,
            solved_at: None,
            last_eval: None,
        })
    }

    pub fn with_early_stop(mut self, early_stop: Option<EarlyStop>) -> Self {
        self.early_stop = early_stop;
        self
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn env_id(&self) -> EnvId {
        self.env_id
    }

    pub fn ppo(&self) -> &PpoConfig {
        &self.ppo
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn curve(&self) -> &[CurveRow] {
        &self.curve
    }

    pub fn solved_at(&self) -> Option<usize> {
        self.solved_at
    }

    pub fn is_finished(&self) -> bool {
        self.solved_at.is_some() || self.iteration >= self.ppo.effective().iterations
    }

    /// Runs to the iteration budget or until the early-stop evaluation passes.
    pub fn train(&mut self) -> Result<TrainOutcome> {
        while !self.is_finished() {
            self.run_iteration()?;
        }
        Ok(self.outcome())
    }

    /// Runs at most `n` further iterations.
    pub fn train_iterations(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.is_finished() {
                break;
            }
            self.run_iteration()?;
        }
        Ok(())
    }

    pub fn outcome(&self) -> TrainOutcome {
        TrainOutcome {
            curve: self.curve.clone(),
            solved_at: self.solved_at,
            last_eval: self.last_eval.clone(),
            evaluations: self.evaluations,
        }
    }

    pub fn run_iteration(&mut self) -> Result<CurveRow> {
        let started = Instant::now();
        let sizes = self.ppo.effective();
        if self.ppo.anneal_lr {
            let frac = 1.0 - self.iteration as f64 / sizes.iterations as f64;
            self.actor_opt.lr = self.ppo.actor_lr * frac;
            self.critic_opt.lr = self.ppo.critic_lr * frac;
        }
        let mut buf = collect(
            &self.agent,
            &mut self.venv,
            sizes.steps_per_actor,
            &mut self.backend,
            &mut self.rng,
        )?;
        if let Some(scaler) = &mut self.reward_scaler {
            scaler.scale(&mut buf);
        }
        buf.process(self.ppo.gamma, self.ppo.gae_lambda)?;
        let stats = self.update(&buf, sizes.minibatch_size)?;
        self.iteration += 1;
        self.env_steps += buf.len();

        let finished: Vec<f64> = buf.finished_episodes.iter().map(|(r, _)| *r).collect();
        let (return_mean, return_std) = if finished.is_empty() {
            self.curve
                .last()
                .map_or((f64::NAN, f64::NAN), |r| (r.return_mean, r.return_std))
        } else {
            mean_std(&finished)
        };
        let window = self.early_stop.as_ref().map_or(10, |e| e.window.max(1));
        for r in &finished {
            self.recent_returns.push_back(*r);
            while self.recent_returns.len() > window {
                self.recent_returns.pop_front();
            }
        }
        let row = CurveRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            return_mean,
            return_std,
            episodes: finished.len(),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            steps_per_second: buf.len() as f64 / started.elapsed().as_secs_f64().max(1e-9),
        };
        log::info!(
            "{} seed {} iter {} steps {} return {:.2} kl {:.4}",
            self.env_id,
            self.seed,
            row.iteration,
            row.env_steps,
            row.return_mean,
            row.approx_kl
        );
        self.curve.push(row.clone());
        self.maybe_evaluate()?;
        Ok(row)
    }

    fn maybe_evaluate(&mut self) -> Result<()> {
        let Some(es) = self.early_stop.clone() else { return Ok(()) };
        if self.recent_returns.len() < es.window.max(1) {
            return Ok(());
        }
        let recent: Vec<f64> = self.recent_returns.iter().copied().collect();
        if mean_std(&recent).0 < es.target {
            return Ok(());
        }
        if let Some(last) = self.last_eval_step {
            if self.env_steps - last < es.min_interval_steps {
                return Ok(());
            }
        }
        self.last_eval_step = Some(self.env_steps);
        let eval_seed = self.seed.wrapping_mul(1_000_003).wrapping_add(10_000_000 + 1_000 * self.evaluations as u64);
        let mode = self.backend.mode().clone();
        let mut backend = Backend::new(if mode.is_exact() { mode } else { mode.reseeded(eval_seed) })?;
        let stats = evaluate_policy(
            &self.agent,
            self.env_id,
            es.eval_episodes,
            &mut backend,
            eval_seed,
            es.deterministic,
        )?;
        self.evaluations += 1;
        log::info!(
            "{} seed {} evaluation at {} steps: mean {:.2} over {} episodes",
            self.env_id,
            self.seed,
            self.env_steps,
            stats.mean,
            stats.episodes
        );
        if stats.mean >= es.target {
            self.solved_at = Some(self.env_steps);
        }
        self.last_eval = Some(stats);
        Ok(())
    }

    fn update(&mut self, buf: &RolloutBuffer, minibatch_size: usize) -> Result<UpdateStats> {
        let ppo = self.ppo.clone();
        let targets: Vec<f64> = match ppo.value_target {
            ValueTarget::Returns => buf.returns.clone(),
            ValueTarget::AdvantagePlusValue => buf.advantages.iter().zip(&buf.values).map(|(a, v)| a + v).collect(),
        };
        let output = self.agent.config.output;
        let bounds = self.agent.config.bounds.clone();
        let mut order: Vec<usize> = (0..buf.len()).collect();
        let mut totals = UpdateStats::default();
        let mut batches = 0usize;
        for epoch in 0..ppo.epochs {
            order.shuffle(&mut self.rng);
            for (mb_index, chunk) in order.chunks(minibatch_size).enumerate() {
                let b = chunk.len() as f64;
                let states: Vec<Vec<f64>> = chunk.iter().map(|&k| buf.states[k].clone()).collect();
                let adv = normalize_advantages(&chunk.iter().map(|&k| buf.advantages[k]).collect::<Vec<_>>());

                let (raw, actor_tape) = self.agent.actor.forward_batch(&states, &mut self.backend)?;
                let mut d_raw = Vec::with_capacity(chunk.len());
                let mut log_ratios = Vec::with_capacity(chunk.len());
                let (mut surrogate, mut entropy, mut clipped) = (0.0, 0.0, 0usize);
                for (j, &k) in chunk.iter().enumerate() {
                    let terms = policy_terms(output, &raw[j], &buf.actions[k], bounds.as_ref())?;
                    let log_ratio = terms.log_prob - buf.log_probs[k];
                    let ratio = log_ratio.exp();
                    log_ratios.push(log_ratio);
                    surrogate += clipped_objective(ratio, adv[j], ppo.clip_eps);
                    entropy += terms.entropy;
                    if (ratio - 1.0).abs() > ppo.clip_eps {
                        clipped += 1;
                    }
                    let g = clipped_objective_grad(ratio, adv[j], ppo.clip_eps);
                    d_raw.push(
                        terms
                            .d_log_prob
                            .iter()
                            .zip(&terms.d_entropy)
                            .map(|(dl, dh)| -(g * dl + ppo.entropy_coef * dh) / b)
                            .collect::<Vec<f64>>(),
                    );
                }

                let (values, critic_tape) = self.agent.critic.forward_batch(&states, &mut self.backend)?;
                let mut value_loss = 0.0;
                let d_value: Vec<Vec<f64>> = chunk
                    .iter()
                    .zip(&values)
                    .map(|(&k, v)| {
                        let err = v[0] - targets[k];
                        value_loss += err * err;
                        vec![ppo.value_coef * 2.0 * err / b]
                    })
                    .collect();

                let policy_loss = -surrogate / b;
                let value_loss = value_loss / b;
                let entropy = entropy / b;
                let kl = approx_kl(&log_ratios);
                let mut grad_actor = self.agent.actor.backward(&actor_tape, &d_raw, &mut self.backend)?;
                let mut grad_critic = self.agent.critic.backward(&critic_tape, &d_value, &mut self.backend)?;
                let norm = global_norm(&[&grad_actor, &grad_critic]);
                if !(policy_loss.is_finite() && value_loss.is_finite() && entropy.is_finite() && norm.is_finite()) {
                    return Err(PpoError::NonFinite {
                        what: "loss or gradient",
                        diagnostics: format!(
                            "iteration {} epoch {epoch} minibatch {mb_index}: policy loss {policy_loss}, value loss \
                             {value_loss}, entropy {entropy}, grad norm {norm}, approx kl {kl}",
                            self.iteration + 1
                        ),
                    });
                }
                if ppo.max_grad_norm > 0.0 {
                    for g in [&mut grad_actor, &mut grad_critic] {
                        let n = global_norm(&[g]);
                        if n > ppo.max_grad_norm {
                            let scale = ppo.max_grad_norm / (n + 1e-6);
                            g.iter_mut().for_each(|v| *v *= scale);
                        }
                    }
                }
                let mut p = self.agent.actor.params();
                self.actor_opt.step(&mut p, &grad_actor);
                self.agent.actor.set_params(&p)?;
                let mut p = self.agent.critic.params();
                self.critic_opt.step(&mut p, &grad_critic);
                self.agent.critic.set_params(&p)?;

                totals.policy_loss += policy_loss;
                totals.value_loss += value_loss;
                totals.entropy += entropy;
                totals.approx_kl += kl;
                totals.clip_fraction += clipped as f64 / b;
                totals.grad_norm += norm;
                batches += 1;
            }
        }
        let n = batches.max(1) as f64;
        Ok(UpdateStats {
            policy_loss: totals.policy_loss / n,
            value_loss: totals.value_loss / n,
            entropy: totals.entropy / n,
            approx_kl: totals.approx_kl / n,
            clip_fraction: totals.clip_fraction / n,
            grad_norm: totals.grad_norm / n,
        })
    }

    pub fn checkpoint(&self) -> TrainerCheckpoint {
        TrainerCheckpoint {
            format: TRAINER_CHECKPOINT_FORMAT.to_string(),
            version: TRAINER_CHECKPOINT_VERSION,
            trainer: self.clone(),
        }
    }

    pub fn from_checkpoint(ck: TrainerCheckpoint) -> Result<Self> {
        if ck.format != TRAINER_CHECKPOINT_FORMAT || ck.version != TRAINER_CHECKPOINT_VERSION {
            return Err(PpoError::Checkpoint(format!(
                "unsupported format `{}` version {}",
                ck.format, ck.version
            )));
        }
        Ok(ck.trainer)
    }
}

impl TrainerCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trainer state is always serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PpoError::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{HybridNetConfig, OutputSpec};
    use crate::ppo::Scheme;

    fn small_cartpole(seed: u64, scheme: Scheme) -> Trainer {
        let env = EnvId::CartPoleV1;
        let q = HybridNetConfig::new(4, 1, 4, OutputSpec::Discrete(2));
        let cfg = AgentConfig::for_scheme(&env.spec(), scheme, &q, &[16]).unwrap();
        let ppo = PpoConfig {
            max_steps: 1024,
            buffer_size: 256,
            minibatch_size: 64,
            epochs: 2,
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
        };
        Trainer::new(env, cfg, ppo, seed).unwrap()
    }

    fn strip_timing(curve: &[CurveRow]) -> Vec<CurveRow> {
        curve
            .iter()
            .cloned()
            .map(|mut r| {
                r.steps_per_second = 0.0;
                r
            })
            .collect()
    }

    #[test]
    fn iteration_budget() {
        let mut t = small_cartpole(0, Scheme::HybridQuantumActor);
        let out = t.train().unwrap();
        assert_eq!(out.curve.len(), 4);
        assert_eq!(t.env_steps(), 1024);
    }

    #[test]
    fn resume_is_bit_exact() {
        let mut straight = small_cartpole(3, Scheme::FullQuantumActorCritic);
        straight.train_iterations(4).unwrap();

        let mut first = small_cartpole(3, Scheme::FullQuantumActorCritic);
        first.train_iterations(2).unwrap();
        let json = first.checkpoint().to_json();
        drop(first);
        let mut resumed = Trainer::from_checkpoint(TrainerCheckpoint::from_json(&json).unwrap()).unwrap();
        resumed.train_iterations(2).unwrap();

        assert_eq!(strip_timing(straight.curve()), strip_timing(resumed.curve()));
        let bits = |t: &Trainer| {
            let mut p = t.agent().actor.params();
            p.extend(t.agent().critic.params());
            p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&straight), bits(&resumed));
    }

    #[test]
    fn checkpoint_round_trips_rows_without_episodes() {
        // 64 steps per actor: no Acrobot episode can end, so the row holds NaN returns.
        let env = EnvId::AcrobotV1;
        let q = HybridNetConfig::new(6, 1, 6, OutputSpec::Discrete(3));
        let cfg = AgentConfig::for_scheme(&env.spec(), Scheme::ClassicalBaseline, &q, &[16]).unwrap();
        let ppo = PpoConfig {
            max_steps: 256,
            buffer_size: 128,
            minibatch_size: 64,
            epochs: 1,
            n_actors: 2,
            ..small_cartpole(0, Scheme::ClassicalBaseline).ppo().clone()
        };
        let mut t = Trainer::new(env, cfg, ppo, 5).unwrap();
        t.train_iterations(1).unwrap();
        assert_eq!(t.curve()[0].episodes, 0);
        assert!(t.curve()[0].return_mean.is_nan());

        let back = TrainerCheckpoint::from_json(&t.checkpoint().to_json()).unwrap();
        let mut resumed = Trainer::from_checkpoint(back).unwrap();
        assert!(resumed.curve()[0].return_mean.is_nan());
        resumed.train_iterations(1).unwrap();
        t.train_iterations(1).unwrap();
        assert_eq!(format!("{:?}", strip_timing(t.curve())), format!("{:?}", strip_timing(resumed.curve())));

        let mut buf = Vec::new();
        write_curve_csv(&mut buf, t.curve()).unwrap();
        assert!(read_curve_csv(buf.as_slice()).unwrap()[0].return_std.is_nan());
    }

    #[test]
    fn curve_csv_round_trip() {
        let mut t = small_cartpole(1, Scheme::ClassicalBaseline);
        t.train_iterations(2).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, t.curve()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "iteration,env_steps,return_mean,return_std,episodes,policy_loss,value_loss,entropy,approx_kl,steps_per_second\n"
        ));
        let back = read_curve_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].env_steps, 512);
    }
}
