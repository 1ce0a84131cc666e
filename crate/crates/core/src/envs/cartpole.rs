use rand::Rng;
use serde::{Deserialize, Serialize};

pub mod consts {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    /// Half the pole length.
    pub const HALF_LENGTH: f64 = 0.5;
    pub const FORCE_MAG: f64 = 10.0;
    pub const TAU: f64 = 0.02;
    pub const X_THRESHOLD: f64 = 2.4;
    pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    pub const RESET_BOUND: f64 = 0.05;
}

use consts::*;

/// State `(x, ẋ, θ, θ̇)`, explicit Euler integration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CartPole {
    pub(super) state: [f64; 4],
}

impl CartPole {
    pub(super) fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for s in &mut self.state {
            *s = rng.random_range(-RESET_BOUND..RESET_BOUND);
        }
    }

    pub(super) fn observation(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    pub(super) fn step(&mut self, action: usize) -> (f64, bool) {
        self.step_force(if action == 1 { FORCE_MAG } else { -FORCE_MAG })
    }

    fn step_force(&mut self, force: f64) -> (f64, bool) {
        let [x, x_dot, theta, theta_dot] = self.state;
        let total_mass = MASS_CART + MASS_POLE;
        let polemass_length = MASS_POLE * HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        let [x, _, theta, _] = self.state;
        let terminated = !(-X_THRESHOLD..=X_THRESHOLD).contains(&x) || !(-THETA_THRESHOLD..=THETA_THRESHOLD).contains(&theta);
        (1.0, terminated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = CartPole::default();
        for _ in 0..1000 {
            c.reset(&mut rng);
            assert!(c.state.iter().all(|s| s.abs() <= RESET_BOUND));
        }
    }

    #[test]
    fn constant_push_leaves_track() {
        let mut c = CartPole::default();
        let mut steps = 0;
        loop {
            let (r, done) = c.step(1);
            assert_eq!(r, 1.0);
            steps += 1;
            if done {
                break;
            }
            assert!(steps < 500);
        }
        let [x, _, theta, _] = c.state;
        assert!(x.abs() > X_THRESHOLD || theta.abs() > THETA_THRESHOLD);
    }

    #[test]
    fn unforced_pole_diverges_monotonically() {
        let mut c = CartPole {
            state: [0.0, 0.0, 0.01, 0.0],
        };
        let mut prev = c.state[2].abs();
        loop {
            let (_, done) = c.step_force(0.0);
            let now = c.state[2].abs();
            assert!(now >= prev);
            if done {
                assert!(now > THETA_THRESHOLD);
                break;
            }
            prev = now;
        }
    }
}
