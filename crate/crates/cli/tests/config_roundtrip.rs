use otdf_cli::{validate_config, Overrides};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolved_documents_revalidate_to_equal_configs(
        detuning in 50e3f64..200e3,
        eta in 0.01f64..0.2,
        odf in 8.0f64..20.0,
        ramp_frac in 0.0f64..0.5,
        gap in 0.0f64..10.0,
        nbar in 0.0f64..0.5,
        seed in 0u64..=i64::MAX as u64,
        shots in 1u64..100_000,
        analytic in any::<bool>(),
    ) {
        let text = format!(
            "experiment = \"bell-run\"\nseed = {seed}\n[physics]\ndetuning_hz = {detuning}\nbm_eta = {eta}\n\
             odf_duration_us = {odf}\nramp_duration_us = {}\necho_gap_us = {gap}\ncm_nbar = {nbar}\n\
             [model]\nkind = \"{}\"\n[statistics]\nshots = {shots}\n",
            ramp_frac * odf,
            if analytic { "analytic" } else { "numeric" },
        );
        let rc = validate_config(&text, None, &Overrides::default()).unwrap();
        let json = serde_json::to_string(&rc.document).unwrap();
        let again = validate_config(&json, None, &Overrides::default()).unwrap();
        prop_assert_eq!(&again, &rc);
        prop_assert_eq!(rc.gate.delta, std::f64::consts::TAU * detuning);
        prop_assert_eq!(rc.gate.pulse.tau_total, odf * 1e-6);
    }
}
