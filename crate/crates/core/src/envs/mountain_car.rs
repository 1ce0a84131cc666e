use rand::Rng;
use serde::{Deserialize, Serialize};

pub mod consts {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GRAVITY: f64 = 0.0025;
    /// Discrete variant.
    pub const FORCE: f64 = 0.001;
    pub const GOAL_POSITION: f64 = 0.5;
    /// Continuous variant.
    pub const POWER: f64 = 0.0015;
    pub const CONTINUOUS_GOAL_POSITION: f64 = 0.45;
    pub const GOAL_VELOCITY: f64 = 0.0;
    pub const RESET_LOW: f64 = -0.6;
    pub const RESET_HIGH: f64 = -0.4;
}

use consts::*;

fn reset_state<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(RESET_LOW..RESET_HIGH), 0.0]
}

/// Shared position update: clip to the track and stop at the left wall.
fn integrate(position: f64, velocity: f64) -> [f64; 2] {
    let position = (position + velocity).clamp(MIN_POSITION, MAX_POSITION);
    let velocity = if position == MIN_POSITION && velocity < 0.0 { 0.0 } else { velocity };
    [position, velocity]
}

/// State `(position, velocity)`; actions push left, do nothing, push right.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MountainCar {
    pub(super) state: [f64; 2],
}

impl MountainCar {
    pub(super) fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = reset_state(rng);
    }

    pub(super) fn observation(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    pub(super) fn step(&mut self, action: usize) -> (f64, bool) {
        let [position, velocity] = self.state;
        let velocity = (velocity + (action as f64 - 1.0) * FORCE + (3.0 * position).cos() * -GRAVITY)
            .clamp(-MAX_SPEED, MAX_SPEED);
        self.state = integrate(position, velocity);
        let [p, v] = self.state;
        (-1.0, p >= GOAL_POSITION && v >= GOAL_VELOCITY)
    }
}

/// Continuous-force variant. The reference stores its state in single
/// precision after every step; that rounding is reproduced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MountainCarContinuous {
    pub(super) state: [f64; 2],
}

impl MountainCarContinuous {
    pub(super) fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = reset_state(rng);
    }

    pub(super) fn observation(&self) -> Vec<f64> {
        self.state.iter().map(|&s| s as f32 as f64).collect()
    }

    pub(super) fn step(&mut self, action: f64) -> (f64, bool) {
        let [position, velocity] = self.state;
        let force = action.clamp(-1.0, 1.0);
        let velocity = (velocity + force * POWER - GRAVITY * (3.0 * position).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let [p, v] = integrate(position, velocity);
        let terminated = p >= CONTINUOUS_GOAL_POSITION && v >= GOAL_VELOCITY;
        self.state = [p as f32 as f64, v as f32 as f64];
        let bonus = if terminated { 100.0 } else { 0.0 };
        (bonus - 0.1 * action * action, terminated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_non_goal_step_costs_one() {
        let mut m = MountainCar { state: [-0.5, 0.0] };
        for a in 0..3 {
            let (r, done) = m.step(a);
            assert_eq!(r, -1.0);
            assert!(!done);
        }
    }

    #[test]
    fn left_wall_stops_the_car() {
        let mut m = MountainCar {
            state: [MIN_POSITION + 0.01, -MAX_SPEED],
        };
        m.step(0);
        assert_eq!(m.state, [MIN_POSITION, 0.0]);
    }

    #[test]
    fn continuous_goal_bonus_and_action_cost() {
        let mut m = MountainCarContinuous {
            state: [0.449, 0.05],
        };
        let (r, done) = m.step(0.5);
        assert!(done);
        assert!((r - (100.0 - 0.025)).abs() < 1e-12);
        let mut m = MountainCarContinuous { state: [-0.5, 0.0] };
        // cost uses the unclipped action
        let (r, _) = m.step(3.0);
        assert!((r + 0.9).abs() < 1e-12);
    }

    #[test]
    fn energy_pumping_clears_the_continuous_threshold() {
        let mut m = MountainCarContinuous { state: [-0.5, 0.0] };
        let mut total = 0.0;
        for _ in 0..999 {
            let action = if m.state[1] >= 0.0 { 0.8 } else { -0.8 };
            let (r, done) = m.step(action);
            total += r;
            if done {
                assert!(total > 90.0, "return {total}");
                return;
            }
        }
        panic!("goal not reached");
    }
}
