use serde::{Deserialize, Serialize};

use super::RolloutBuffer;

/// Divides rewards by a running standard deviation of each actor's
/// discounted return, keeping value targets near unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardScaler {
    gamma: f64,
    returns: Vec<f64>,
    mean: f64,
    var: f64,
    count: f64,
}

impl RewardScaler {
    pub fn new(n_actors: usize, gamma: f64) -> Self {
        Self {
            gamma,
            returns: vec![0.0; n_actors],
            mean: 0.0,
            var: 1.0,
            count: 1e-4,
        }
    }

    pub fn std(&self) -> f64 {
        (self.var + 1e-8).sqrt()
    }

    /// Merges one sample set into the running moments (Chan et al. update).
    fn update(&mut self, xs: &[f64]) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let total = self.count + n;
        let delta = mean - self.mean;
        self.mean += delta * n / total;
        self.var = (self.var * self.count + var * n + delta * delta * self.count * n / total) / total;
        self.count = total;
    }

    /// Scales `buf.rewards` in collection order: at each time step every
    /// actor's discounted return is advanced, the moments are updated with
    /// them, and that step's rewards are divided by the new std.
    pub fn scale(&mut self, buf: &mut RolloutBuffer) {
        let spa = buf.steps_per_actor;
        for t in 0..spa {
            let ks: Vec<usize> = (0..buf.n_actors).map(|i| i * spa + t).collect();
            for (i, &k) in ks.iter().enumerate() {
                self.returns[i] = self.returns[i] * self.gamma + buf.rewards[k];
            }
            let returns = self.returns.clone();
            self.update(&returns);
            let std = self.std();
            for (i, &k) in ks.iter().enumerate() {
                buf.rewards[k] /= std;
                if buf.terminated[k] || buf.truncated[k] {
                    self.returns[i] = 0.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_moments_match_batch_moments() {
        let mut s = RewardScaler::new(1, 0.9);
        s.count = 0.0;
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        for chunk in xs.chunks(7) {
            s.update(chunk);
        }
        let mean = xs.iter().sum::<f64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 50.0;
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.var - var).abs() < 1e-12);
    }
}
