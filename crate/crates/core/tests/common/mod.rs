//! Checks shared by the integration tests and the acceptance binary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hqrl::hybrid::HybridNet;
use hqrl::quantum::{gradient_adjoint, gradient_parameter_shift, Backend, BackendMode};
use hqrl::tables::ReferenceActor;

/// Worst disagreements of one network's gradient engines.
#[allow(dead_code)]
#[derive(Debug, Clone, Copy)]
pub struct GradientReport {
    /// `max |analytic − fd| / max(|analytic|, |fd|, 1e-3)` over all parameters.
    pub fd_relative: f64,
    /// `max |adjoint − shift|` over every circuit Jacobian entry.
    pub shift_absolute: f64,
    pub n_params: usize,
}

/// Central-difference step for the end-to-end check.
pub const FD_STEP: f64 = 1e-6;

/// Backward pass of a batch of random states against central differences of
/// `Σ d_raw·raw`, and adjoint against shift-rule Jacobians of the bound circuits.
pub fn gradient_check(reference: &ReferenceActor, batch: usize, seed: u64) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = HybridNet::new(reference.config.clone(), &mut rng).expect("reference config builds");
    let dim = reference.config.state_dim;
    let width = reference.config.output.raw_width();
    let states: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let d_raw: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut backend = Backend::exact();
    let (_, tape) = net.forward_raw(&states, &mut backend).unwrap();
    let analytic = net.backward(&tape, &d_raw, &mut backend).unwrap();

    let params = net.params();
    let mut objective = |p: &[f64]| {
        net.set_params(p).unwrap();
        let (raw, _) = net.forward_raw(&states, &mut backend).unwrap();
        raw.iter()
            .zip(&d_raw)
            .map(|(r, d)| r.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
    };
    let mut fd_relative: f64 = 0.0;
    for j in 0..params.len() {
        let mut p = params.clone();
        p[j] += FD_STEP;
        let up = objective(&p);
        p[j] -= 2.0 * FD_STEP;
        let down = objective(&p);
        let fd = (up - down) / (2.0 * FD_STEP);
        let scale = analytic[j].abs().max(fd.abs()).max(1e-3);
        fd_relative = fd_relative.max((analytic[j] - fd).abs() / scale);
    }
    net.set_params(&params).unwrap();

    let n = reference.config.n_qubits;
    let mut shift_absolute: f64 = 0.0;
    for _ in 0..batch {
        let features: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bound = net.template().bind_inputs(net.quantum_params(), &features).unwrap();
        let adjoint = gradient_adjoint(&bound.circuit, &BackendMode::Exact).unwrap();
        let shift = gradient_parameter_shift(&bound.circuit, &mut backend).unwrap();
        for (a, s) in adjoint.iter().flatten().zip(shift.iter().flatten()) {
            shift_absolute = shift_absolute.max((a - s).abs());
        }
    }
    GradientReport {
        fd_relative,
        shift_absolute,
        n_params: params.len(),
    }
}
