mod common;

use hqrl::tables::reference_actors;

#[test]
fn every_reference_network_passes_both_gradient_checks() {
    for (i, reference) in reference_actors().iter().enumerate() {
        let report = common::gradient_check(reference, 4, 100 + i as u64);
        assert!(
            report.fd_relative <= 1e-5,
            "{}: finite differences off by {:e} relative",
            reference.label,
            report.fd_relative
        );
        assert!(
            report.shift_absolute <= 1e-10,
            "{}: adjoint and shift rule differ by {:e}",
            reference.label,
            report.shift_absolute
        );
        assert_eq!(report.n_params, reference.expected_total);
    }
}
