use lattice_kpp::coeffs::make_family;
use lattice_kpp::metrics::audit_stability_hypotheses;
use lattice_kpp::waves_timehet::{build_transition_wave, TimeHetOptions};
use lattice_kpp::{FamilyParams, SimOptions};

#[test]
fn fitted_correction_passes_and_half_of_it_does_not() {
    let field = make_family(&FamilyParams::shipped_quasi_periodic()).unwrap();
    let opts = TimeHetOptions::default();
    let sim = SimOptions::default();
    let wave = build_transition_wave(&field, None, &opts, &sim).unwrap();
    assert!(wave.passed(), "{:?}", wave.failures);

    let mut input = wave.audit_input(opts.x_min, 4, 1, &sim);
    let bound = |input: &lattice_kpp::metrics::WaveAuditInput| {
        audit_stability_hypotheses(input).clause("envelope-bound").unwrap().passed
    };
    assert!(bound(&input));
    input.d1_star *= 0.5;
    assert!(!bound(&input));
}
