//! Randomised properties of the PPO estimators and a seeded training run.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hqrl::envs::{EnvId, VecEnv};
use hqrl::hybrid::head::{apply_head, log_prob};
use hqrl::hybrid::{HybridNetConfig, OutputSpec};
use hqrl::ppo::{
    clipped_objective, clipped_objective_grad, collect, discounted_returns, gae, normalize_advantages, Agent,
    AgentConfig, CurveRow, PpoConfig, Scheme, Trainer, ValueTarget,
};
use hqrl::quantum::Backend;

/// Rewards, values, next values and episode ends; the final step always ends
/// and inside an episode the bootstrap value is the successor's value.
fn segment() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..64).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(-50.0f64..50.0, n),
            proptest::collection::vec(-50.0f64..50.0, n),
            proptest::collection::vec(proptest::bool::weighted(0.1), n),
        )
            .prop_map(|(r, v, mut nv, mut ends)| {
                *ends.last_mut().unwrap() = true;
                for t in 0..r.len() {
                    if !ends[t] {
                        nv[t] = v[t + 1];
                    }
                }
                (r, v, nv, ends)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gae_with_unit_lambda_telescopes((r, v, nv, ends) in segment(), gamma in 0.0f64..1.0) {
        let adv = gae(&r, &v, &nv, &ends, gamma, 1.0);
        let ret = discounted_returns(&r, &nv, &ends, gamma);
        for t in 0..r.len() {
            prop_assert!((adv[t] - (ret[t] - v[t])).abs() <= 1e-10, "t={}: {} vs {}", t, adv[t], ret[t] - v[t]);
        }
    }

    #[test]
    fn clipping_is_pessimistic(ratio in 0.0f64..3.0, adv in -5.0f64..5.0, eps in 0.01f64..0.5) {
        let obj = clipped_objective(ratio, adv, eps);
        prop_assert!(obj <= ratio * adv);
        if (1.0 - eps..=1.0 + eps).contains(&ratio) {
            prop_assert_eq!(obj, ratio * adv);
            prop_assert_eq!(clipped_objective_grad(ratio, adv, eps), ratio * adv);
        }
    }

    #[test]
    fn unbounded_clip_is_the_vanilla_gradient(ratio in 0.0f64..3.0, adv in -5.0f64..5.0) {
        prop_assert_eq!(clipped_objective_grad(ratio, adv, f64::INFINITY), ratio * adv);
    }

    #[test]
    fn normalized_advantages_have_unit_moments(adv in proptest::collection::vec(-100.0f64..100.0, 2..256)) {
        let spread = adv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - adv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let z = normalize_advantages(&adv);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let std = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!(mean.abs() <= 1e-8);
        prop_assert!((std - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn constant_advantages_carry_no_policy_gradient(c in -10.0f64..10.0, n in 2usize..64, ratio in 0.5f64..1.5) {
        for a in normalize_advantages(&vec![c; n]) {
            prop_assert_eq!(clipped_objective_grad(ratio, a, 0.2), 0.0);
        }
    }
}

#[test]
fn zero_rewards_and_values_give_zero_targets() {
    let n = 50;
    let ends: Vec<bool> = (0..n).map(|t| t % 7 == 6 || t == n - 1).collect();
    let zeros = vec![0.0; n];
    assert!(discounted_returns(&zeros, &zeros, &ends, 0.99).iter().all(|r| *r == 0.0));
    assert!(gae(&zeros, &zeros, &zeros, &ends, 0.99, 0.95).iter().all(|a| *a == 0.0));
}

#[test]
fn first_epoch_ratios_are_one() {
    let env = EnvId::AcrobotV1;
    let q = HybridNetConfig::new(4, 1, 6, OutputSpec::Discrete(3));
    let config = AgentConfig::for_scheme(&env.spec(), Scheme::HybridQuantumActor, &q, &[16]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let agent = Agent::build(config, &mut rng).unwrap();
    let mut venv = VecEnv::new(env, 3).unwrap();
    venv.reset(&[1, 2, 3]).unwrap();
    let mut backend = Backend::exact();
    let buf = collect(&agent, &mut venv, 20, &mut backend, &mut rng).unwrap();
    let (raw, _) = agent.actor.forward_batch(&buf.states, &mut backend).unwrap();
    for (k, raw) in raw.iter().enumerate() {
        let out = apply_head(agent.config.output, raw).unwrap();
        let lp = log_prob(&out, &buf.actions[k], None).unwrap();
        assert_eq!((lp - buf.log_probs[k]).exp(), 1.0, "step {k}");
    }
}

fn two_iteration_curve(seed: u64) -> (Vec<CurveRow>, Vec<u64>) {
    let env = EnvId::CartPoleV1;
    let q = HybridNetConfig::new(4, 1, 4, OutputSpec::Discrete(2));
    let config = AgentConfig::for_scheme(&env.spec(), Scheme::HybridQuantumActor, &q, &[16]).unwrap();
    let ppo = PpoConfig {
        max_steps: 512,
        buffer_size: 256,
        minibatch_size: 64,
        epochs: 3,
        n_actors: 4,
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
    let mut trainer = Trainer::new(env, config, ppo, seed).unwrap();
    let outcome = trainer.train().unwrap();
    let curve = outcome
        .curve
        .into_iter()
        .map(|mut r| {
            r.steps_per_second = 0.0;
            r
        })
        .collect();
    let params = trainer.agent().actor.params().iter().map(|p| p.to_bits()).collect();
    (curve, params)
}

#[test]
fn seeded_training_is_bit_exact() {
    let (curve_a, params_a) = two_iteration_curve(17);
    let (curve_b, params_b) = two_iteration_curve(17);
    assert_eq!(curve_a.len(), 2);
    for (a, b) in curve_a.iter().zip(&curve_b) {
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
    assert_eq!(params_a, params_b);
    let (_, params_c) = two_iteration_curve(18);
    assert_ne!(params_a, params_c);
}
