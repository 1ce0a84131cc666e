//! Returns, generalized advantage estimates and the clipped surrogate.
//!
//! Trajectories are described per step by `next_values[t]`, the value used to
//! bootstrap past step `t` (zero after termination, `V(final obs)` after
//! truncation, `V(s_{t+1})` otherwise), and `episode_ends[t]`, set when the
//! recursion must not look at step `t + 1` (termination, truncation, or the
//! end of the collected segment).

/// `R_t = r_t + γ·(episode_ends[t] ? next_values[t] : R_{t+1})`.
pub fn discounted_returns(rewards: &[f64], next_values: &[f64], episode_ends: &[bool], gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), next_values.len());
    assert_eq!(rewards.len(), episode_ends.len());
    let mut out = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let tail = if episode_ends[t] { next_values[t] } else { running };
        running = rewards[t] + gamma * tail;
        out[t] = running;
    }
    out
}

/// `Â_t = δ_t + γλ̂·Â_{t+1}` with `δ_t = r_t + γ·next_values[t] − values[t]`,
/// the recursion cut wherever `episode_ends[t]` is set.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    episode_ends: &[bool],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), next_values.len());
    assert_eq!(rewards.len(), episode_ends.len());
    let mut out = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        let carry = if episode_ends[t] { 0.0 } else { running };
        running = delta + gamma * lambda * carry;
        out[t] = running;
    }
    out
}

/// Zero mean, unit (sample) standard deviation. Constant input maps to exact
/// zeros; spreads below `1e-8` are divided by `1e-8` instead.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.iter().all(|a| *a == adv[0]) {
        return vec![0.0; adv.len()];
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = if adv.len() > 1 {
        adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / std.max(1e-8)).collect()
}

/// `min(r·A, clip(r, 1−ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    unclipped.min(clipped)
}

/// `∂/∂ log π` of [`clipped_objective`]: `r·A` where the unclipped term is
/// active, zero where the clip binds.
pub fn clipped_objective_grad(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        unclipped
    } else {
        0.0
    }
}

/// `mean((r − 1) − ln r)`, a non-negative estimator of `KL(old ‖ new)`.
pub fn approx_kl(log_ratios: &[f64]) -> f64 {
    log_ratios.iter().map(|lr| lr.exp_m1() - lr).sum::<f64>() / log_ratios.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_recursion() {
        let r = discounted_returns(&[1.0, 1.0, 1.0], &[0.0; 3], &[false, false, true], 0.5);
        assert_eq!(r, vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn gamma_zero_returns_rewards() {
        let rewards = [0.3, -1.0, 2.0];
        assert_eq!(discounted_returns(&rewards, &[5.0; 3], &[false, true, true], 0.0), rewards.to_vec());
    }

    #[test]
    fn truncated_tail_bootstraps() {
        let r = discounted_returns(&[2.0], &[10.0], &[true], 0.9);
        assert_eq!(r, vec![2.0 + 0.9 * 10.0]);
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let rewards = [1.0, 0.5, -0.2, 0.0];
        let values = [0.3, 0.1, 0.7, -0.4];
        let next = [0.1, 0.7, 0.0, 0.9];
        let ends = [false, false, true, true];
        let a = gae(&rewards, &values, &next, &ends, 0.9, 0.0);
        for t in 0..4 {
            assert_eq!(a[t], rewards[t] + 0.9 * next[t] - values[t]);
        }
    }

    #[test]
    fn three_step_brute_force() {
        let (g, l) = (0.95, 0.8);
        let r = [1.0, -0.5, 2.0];
        let v = [0.2, 0.4, -0.1];
        let next = [0.4, -0.1, 0.6];
        let ends = [false, false, true];
        let d: Vec<f64> = (0..3).map(|t| r[t] + g * next[t] - v[t]).collect();
        let gl = g * l;
        let expect = [d[0] + gl * d[1] + gl * gl * d[2], d[1] + gl * d[2], d[2]];
        let a = gae(&r, &v, &next, &ends, g, l);
        for t in 0..3 {
            assert!((a[t] - expect[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_truth_table() {
        assert_eq!(clipped_objective(1.0, 2.0, 0.2), 2.0);
        assert!((clipped_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        assert_eq!(clipped_objective_grad(1.5, 1.0, 0.2), 0.0);
        assert_eq!(clipped_objective_grad(0.5, -1.0, 0.2), 0.0);
        assert_eq!(clipped_objective_grad(0.5, 1.0, 0.2), 0.5);
        assert_eq!(clipped_objective_grad(1.5, -1.0, 0.2), -1.5);
    }

    #[test]
    fn normalization_moments() {
        let a = normalize_advantages(&[1.0, 2.0, 3.0, 10.0]);
        let mean = a.iter().sum::<f64>() / 4.0;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-6);
        assert!(normalize_advantages(&[4.0, 4.0]).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn kl_of_identical_policies_is_zero() {
        assert_eq!(approx_kl(&[0.0, 0.0]), 0.0);
        assert!(approx_kl(&[0.3, -0.2]) > 0.0);
    }
}
