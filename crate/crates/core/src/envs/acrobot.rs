use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub mod consts {
    use std::f64::consts::PI;

    pub const DT: f64 = 0.2;
    pub const LINK_LENGTH_1: f64 = 1.0;
    pub const LINK_MASS_1: f64 = 1.0;
    pub const LINK_MASS_2: f64 = 1.0;
    pub const LINK_COM_POS_1: f64 = 0.5;
    pub const LINK_COM_POS_2: f64 = 0.5;
    pub const LINK_MOI: f64 = 1.0;
    pub const MAX_VEL_1: f64 = 4.0 * PI;
    pub const MAX_VEL_2: f64 = 9.0 * PI;
    pub const AVAIL_TORQUE: [f64; 3] = [-1.0, 0.0, 1.0];
    pub const GRAVITY: f64 = 9.8;
    pub const RESET_BOUND: f64 = 0.1;
}

use consts::*;

/// Two-link swing-up with the "book" equations of motion and one RK4 step per
/// transition. State `(θ₁, θ₂, θ̇₁, θ̇₂)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acrobot {
    pub(super) state: [f64; 4],
}

fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (
        LINK_MASS_1,
        LINK_MASS_2,
        LINK_LENGTH_1,
        LINK_COM_POS_1,
        LINK_COM_POS_2,
        LINK_MOI,
        LINK_MOI,
        GRAVITY,
    );
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn axpy(y: [f64; 4], a: f64, k: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| y[i] + a * k[i])
}

/// Wraps by whole turns into `[lo, hi]`, leaving in-range values untouched.
fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let diff = hi - lo;
    while x > hi {
        x -= diff;
    }
    while x < lo {
        x += diff;
    }
    x
}

impl Acrobot {
    pub(super) fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        // the reference casts its initial state to single precision
        for s in &mut self.state {
            *s = rng.random_range(-RESET_BOUND..RESET_BOUND) as f32 as f64;
        }
    }

    pub(super) fn observation(&self) -> Vec<f64> {
        let [t1, t2, d1, d2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2]
    }

    fn terminal(&self) -> bool {
        let [t1, t2, ..] = self.state;
        -t1.cos() - (t2 + t1).cos() > 1.0
    }

    pub(super) fn step(&mut self, action: usize) -> (f64, bool) {
        let torque = AVAIL_TORQUE[action];
        let y = self.state;
        let h = DT / 2.0;
        let k1 = derivatives(y, torque);
        let k2 = derivatives(axpy(y, h, k1), torque);
        let k3 = derivatives(axpy(y, h, k2), torque);
        let k4 = derivatives(axpy(y, DT, k3), torque);
        let ns: [f64; 4] = std::array::from_fn(|i| y[i] + DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        self.state = [
            wrap(ns[0], -PI, PI),
            wrap(ns[1], -PI, PI),
            ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        let terminated = self.terminal();
        (if terminated { 0.0 } else { -1.0 }, terminated)
    }
}
