use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub mod consts {
    pub const DT: f64 = 0.05;
    pub const G: f64 = 10.0;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f64 = 2.0;
    pub const RESET_THETA: f64 = std::f64::consts::PI;
    pub const RESET_THETA_DOT: f64 = 1.0;
}

use consts::*;

/// Wraps into `[−π, π)` with a floored modulus.
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// State `(θ, θ̇)`, with θ = 0 upright; observed as `(cos θ, sin θ, θ̇)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    pub(super) state: [f64; 2],
}

impl Pendulum {
    pub(super) fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = [
            rng.random_range(-RESET_THETA..RESET_THETA),
            rng.random_range(-RESET_THETA_DOT..RESET_THETA_DOT),
        ];
    }

    pub(super) fn observation(&self) -> Vec<f64> {
        let [th, thdot] = self.state;
        vec![th.cos(), th.sin(), thdot]
    }

    pub(super) fn step(&mut self, torque: f64) -> (f64, bool) {
        let [th, thdot] = self.state;
        let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
        let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;
        let new_thdot = (thdot + (3.0 * G / (2.0 * LENGTH) * th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u) * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        self.state = [th + new_thdot * DT, new_thdot];
        (-cost, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn upright_rest_is_free() {
        let mut p = Pendulum::default();
        assert_eq!(p.step(0.0), (-0.0, false));
    }

    #[test]
    fn reward_bounds() {
        let floor = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = Pendulum::default();
        p.reset(&mut rng);
        for i in 0..5000 {
            if i % 200 == 0 {
                p.reset(&mut rng);
            }
            let (r, _) = p.step(rng.random_range(-5.0..5.0));
            assert!((floor..=0.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn observation_on_unit_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = Pendulum::default();
        for _ in 0..100 {
            p.reset(&mut rng);
            let o = p.observation();
            assert!((o[0] * o[0] + o[1] * o[1] - 1.0).abs() < 1e-12);
            assert!(o[2].abs() <= 1.0);
        }
    }

    #[test]
    fn normalization() {
        assert!((angle_normalize(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(angle_normalize(0.0), 0.0);
        assert!((angle_normalize(-PI) + PI).abs() < 1e-12);
    }
}
