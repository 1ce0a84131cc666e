//! Derivatives of per-qubit `⟨Z⟩` with respect to trainable circuit angles.
//!
//! Three independent engines: adjoint (exact state, one backward sweep),
//! parameter shift (any backend mode), and central finite differences
//! (exact state, used as an oracle).

use std::f64::consts::FRAC_PI_2;

use super::{Backend, BackendMode, Circuit, QuantumError, Result, Statevector};

/// `rows[i][j] = ∂⟨Z_i⟩/∂θ_j`.
pub type Jacobian = Vec<Vec<f64>>;

/// Step used by [`gradient_finite_difference`].
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Full Jacobian by the adjoint method. Only valid for exact execution.
pub fn gradient_adjoint(circuit: &Circuit, mode: &BackendMode) -> Result<Jacobian> {
    if !mode.is_exact() {
        return Err(QuantumError::AdjointRequiresExact(mode.name()));
    }
    let n = circuit.n_qubits();
    let final_state = circuit.simulate()?;
    let mut jac = Vec::with_capacity(n);
    for q in 0..n {
        let mut w = vec![0.0; n];
        w[q] = 1.0;
        jac.push(adjoint_vjp(circuit, &final_state, &w)?);
    }
    Ok(jac)
}

/// Gradient of `Σ_q weights[q]·⟨Z_q⟩` with respect to every trainable parameter.
///
/// `final_state` must be the output of `circuit.simulate()`.
pub fn adjoint_vjp(circuit: &Circuit, final_state: &Statevector, weights: &[f64]) -> Result<Vec<f64>> {
    let n = circuit.n_qubits();
    if weights.len() != n {
        return Err(QuantumError::LengthMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if final_state.n_qubits() != n {
        return Err(QuantumError::LengthMismatch {
            expected: n,
            got: final_state.n_qubits(),
        });
    }
    let mut grad = vec![0.0; circuit.n_params()];
    if circuit.n_params() == 0 {
        return Ok(grad);
    }
    let mut ket = final_state.clone();
    let mut bra = final_state.clone();
    bra.apply_weighted_z_sum(weights);
    for op in circuit.ops().iter().rev() {
        if let Some(p) = op.param {
            let (q, pauli) = op.gate.generator().expect("trainable ops are rotations");
            // d/dθ ⟨O⟩ = 2 Re⟨bra| (−i/2) P |ket⟩ = Im⟨bra|P|ket⟩
            grad[p] += ket.pauli_matrix_element(&bra, q, pauli).im;
        }
        let inv = op.gate.inverse();
        ket.apply_unchecked(&inv);
        bra.apply_unchecked(&inv);
    }
    Ok(grad)
}

/// Full Jacobian by the `±π/2` shift rule, evaluated on `backend`.
///
/// Each trainable op is shifted separately and its contribution summed into
/// the op's parameter, so shared parameters are handled by the product rule.
pub fn gradient_parameter_shift(circuit: &Circuit, backend: &mut Backend) -> Result<Jacobian> {
    let n = circuit.n_qubits();
    let mut jac = vec![vec![0.0; circuit.n_params()]; n];
    for (k, op) in circuit.ops().iter().enumerate() {
        let Some(p) = op.param else { continue };
        let angle = op
            .gate
            .angle()
            .ok_or(QuantumError::NoShiftRule(op.gate.name()))?;
        let plus = backend.expectations(&circuit.with_op_angle(k, angle + FRAC_PI_2))?;
        let minus = backend.expectations(&circuit.with_op_angle(k, angle - FRAC_PI_2))?;
        for q in 0..n {
            jac[q][p] += 0.5 * (plus[q] - minus[q]);
        }
    }
    Ok(jac)
}

/// `weightsᵀ · J` computed with the shift rule.
pub fn parameter_shift_vjp(circuit: &Circuit, backend: &mut Backend, weights: &[f64]) -> Result<Vec<f64>> {
    let jac = gradient_parameter_shift(circuit, backend)?;
    if weights.len() != jac.len() {
        return Err(QuantumError::LengthMismatch {
            expected: jac.len(),
            got: weights.len(),
        });
    }
    let mut out = vec![0.0; circuit.n_params()];
    for (row, w) in jac.iter().zip(weights) {
        for (o, j) in out.iter_mut().zip(row) {
            *o += w * j;
        }
    }
    Ok(out)
}

/// Central finite differences on the exact state with step `h`.
pub fn gradient_finite_difference(circuit: &Circuit, h: f64) -> Result<Jacobian> {
    let n = circuit.n_qubits();
    let params = circuit.params();
    let mut jac = vec![vec![0.0; params.len()]; n];
    for j in 0..params.len() {
        let mut up = params.clone();
        up[j] += h;
        let mut down = params.clone();
        down[j] -= h;
        let zp = circuit.with_params(&up)?.simulate()?.expectation_all_z();
        let zm = circuit.with_params(&down)?.simulate()?.expectation_all_z();
        for q in 0..n {
            jac[q][j] = (zp[q] - zm[q]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Gate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ry_circuit(theta: f64) -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        c.push_trainable(Gate::Ry(0, theta), 0).unwrap();
        c
    }

    /// Random layered circuit with every rotation trainable.
    pub(crate) fn random_circuit(n: usize, layers: usize, rng: &mut ChaCha8Rng) -> Circuit {
        let mut c = Circuit::new(n).unwrap();
        let mut p = 0;
        for q in 0..n {
            c.push(Gate::H(q)).unwrap();
        }
        for _ in 0..layers {
            for q in 0..n {
                c.push_trainable(Gate::Ry(q, rng.random_range(-PI..PI)), p).unwrap();
                c.push_trainable(Gate::Rz(q, rng.random_range(-PI..PI)), p + 1).unwrap();
                p += 2;
            }
            for q in 0..n.saturating_sub(1) {
                c.push(Gate::Cz(q, q + 1)).unwrap();
            }
        }
        c
    }

    #[test]
    fn cosine_derivative() {
        let exact = BackendMode::Exact;
        let g0 = gradient_adjoint(&ry_circuit(0.0), &exact).unwrap();
        assert!(g0[0][0].abs() < 1e-15);
        let g = gradient_adjoint(&ry_circuit(PI / 2.0), &exact).unwrap();
        assert!((g[0][0] + 1.0).abs() < 1e-12);
        let mut b = Backend::exact();
        let s = gradient_parameter_shift(&ry_circuit(PI / 2.0), &mut b).unwrap();
        assert!((s[0][0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjoint_rejects_sampled_modes() {
        let mode = BackendMode::Shots { shots: 10, seed: 0 };
        assert!(matches!(
            gradient_adjoint(&ry_circuit(0.1), &mode),
            Err(QuantumError::AdjointRequiresExact("shots"))
        ));
    }

    #[test]
    fn empty_parameter_set() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::H(0)).unwrap();
        let mut b = Backend::exact();
        let jac = gradient_parameter_shift(&c, &mut b).unwrap();
        assert_eq!(jac, vec![Vec::<f64>::new(), Vec::new()]);
        let adj = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
        assert!(adj.iter().all(|r| r.is_empty()));
    }

    #[test]
    fn engines_agree_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            for layers in 1..=3 {
                let c = random_circuit(n, layers, &mut rng);
                let adj = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
                let ps = gradient_parameter_shift(&c, &mut Backend::exact()).unwrap();
                let fd = gradient_finite_difference(&c, FINITE_DIFFERENCE_STEP).unwrap();
                for q in 0..n {
                    for j in 0..c.n_params() {
                        assert!((adj[q][j] - ps[q][j]).abs() < 1e-10);
                        let scale = fd[q][j].abs().max(1e-3);
                        assert!((adj[q][j] - fd[q][j]).abs() / scale < 1e-6, "{n} {layers} {q} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn vjp_matches_weighted_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_circuit(3, 2, &mut rng);
        let jac = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
        let w = [0.3, -1.2, 0.7];
        let vjp = adjoint_vjp(&c, &c.simulate().unwrap(), &w).unwrap();
        for j in 0..c.n_params() {
            let expect: f64 = (0..3).map(|q| w[q] * jac[q][j]).sum();
            assert!((vjp[j] - expect).abs() < 1e-12);
        }
        let ps = parameter_shift_vjp(&c, &mut Backend::exact(), &w).unwrap();
        for j in 0..c.n_params() {
            assert!((vjp[j] - ps[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn shared_parameter_sums_contributions() {
        let mut c = Circuit::new(1).unwrap();
        c.push_trainable(Gate::Ry(0, 0.4), 0).unwrap();
        c.push_trainable(Gate::Ry(0, 0.4), 0).unwrap();
        // <Z> = cos(2θ) so d/dθ = -2 sin(2θ)
        let g = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
        assert!((g[0][0] + 2.0 * (0.8f64).sin()).abs() < 1e-12);
        let s = gradient_parameter_shift(&c, &mut Backend::exact()).unwrap();
        assert!((s[0][0] - g[0][0]).abs() < 1e-12);
    }
}
