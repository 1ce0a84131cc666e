//! Randomised properties of the simulator and its three gradient engines.

use proptest::prelude::*;

use hqrl::quantum::{
    gradient_adjoint, gradient_finite_difference, gradient_parameter_shift, Backend, BackendMode, Circuit, Gate,
    FINITE_DIFFERENCE_STEP,
};

#[derive(Debug, Clone)]
enum Step {
    H(usize),
    Ry(usize, f64, bool),
    Rz(usize, f64, bool),
    Cz(usize, usize),
}

fn steps(n_qubits: usize) -> impl Strategy<Value = Vec<Step>> {
    let angle = -6.3f64..6.3;
    let step = prop_oneof![
        (0..n_qubits).prop_map(Step::H),
        (0..n_qubits, angle.clone(), any::<bool>()).prop_map(|(q, a, t)| Step::Ry(q, a, t)),
        (0..n_qubits, angle, any::<bool>()).prop_map(|(q, a, t)| Step::Rz(q, a, t)),
        (0..n_qubits, 0..n_qubits).prop_map(|(a, b)| Step::Cz(a, b)),
    ];
    proptest::collection::vec(step, 1..40)
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (1usize..=5).prop_flat_map(|n| {
        steps(n).prop_map(move |steps| {
            let mut c = Circuit::new(n).unwrap();
            let mut next = 0;
            for s in steps {
                match s {
                    Step::H(q) => c.push(Gate::H(q)).unwrap(),
                    Step::Ry(q, a, trainable) => {
                        if trainable {
                            c.push_trainable(Gate::Ry(q, a), next).unwrap();
                            next += 1;
                        } else {
                            c.push(Gate::Ry(q, a)).unwrap();
                        }
                    }
                    Step::Rz(q, a, trainable) => {
                        if trainable {
                            c.push_trainable(Gate::Rz(q, a), next).unwrap();
                            next += 1;
                        } else {
                            c.push(Gate::Rz(q, a)).unwrap();
                        }
                    }
                    Step::Cz(a, b) if a != b => c.push(Gate::Cz(a, b)).unwrap(),
                    Step::Cz(..) => {}
                }
            }
            c
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulation_preserves_the_norm(c in circuit()) {
        let state = c.simulate().unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        for z in state.expectation_all_z() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
        }
    }

    #[test]
    fn adjoint_equals_parameter_shift(c in circuit()) {
        let adjoint = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
        let shift = gradient_parameter_shift(&c, &mut Backend::exact()).unwrap();
        for (a, s) in adjoint.iter().flatten().zip(shift.iter().flatten()) {
            prop_assert!((a - s).abs() <= 1e-10, "{} vs {}", a, s);
        }
    }

    #[test]
    fn adjoint_matches_finite_differences(c in circuit()) {
        let adjoint = gradient_adjoint(&c, &BackendMode::Exact).unwrap();
        let fd = gradient_finite_difference(&c, FINITE_DIFFERENCE_STEP).unwrap();
        for (a, f) in adjoint.iter().flatten().zip(fd.iter().flatten()) {
            prop_assert!((a - f).abs() <= 1e-6, "{} vs {}", a, f);
        }
    }
}

#[test]
fn noisy_parameter_shift_is_an_unbiased_estimate() {
    let mut c = Circuit::new(2).unwrap();
    c.push(Gate::H(0)).unwrap();
    c.push_trainable(Gate::Ry(0, 0.4), 0).unwrap();
    c.push(Gate::Cz(0, 1)).unwrap();
    c.push_trainable(Gate::Ry(1, -0.9), 1).unwrap();
    let exact = gradient_parameter_shift(&c, &mut Backend::exact()).unwrap();
    let mut shots = Backend::new(BackendMode::Shots { shots: 200_000, seed: 4 }).unwrap();
    let sampled = gradient_parameter_shift(&c, &mut shots).unwrap();
    for (e, s) in exact.iter().flatten().zip(sampled.iter().flatten()) {
        // two estimates of variance ≤ 1/shots each
        assert!((e - s).abs() < 5.0 * (2.0f64 / 200_000.0).sqrt(), "{e} vs {s}");
    }
}
