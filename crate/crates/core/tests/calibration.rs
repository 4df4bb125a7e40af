use std::f64::consts::{PI, TAU};

use otdf_core::calibration::{
    argmax_excitation, calibrate_spacing, intensity_beat_period, simulated_beat_period, spacing_excitation, spacing_scan,
    BeatPeriod, SpacingOptions,
};
use otdf_core::gate::GateConfig;

fn with_mismatch(mismatch: f64) -> GateConfig {
    let mut cfg = GateConfig::ca40_2021();
    cfg.lattice.theta_ion = [-0.5 * mismatch, 0.5 * mismatch];
    cfg
}

#[test]
fn excitation_vanishes_when_matched_and_peaks_when_anti_phased() {
    let cfg = GateConfig::ca40_2021();
    let opts = SpacingOptions::default();
    assert!(spacing_excitation(0.0, &cfg, &opts).unwrap() < 1e-8);
    let phases: Vec<f64> = (0..=16).map(|i| -PI + i as f64 * PI / 8.0).collect();
    let scan = spacing_scan(&phases, &cfg, &opts).unwrap();
    let peak = argmax_excitation(&scan).unwrap();
    assert!((peak.abs() - PI).abs() < 1e-12, "{peak}");
    // growth with the residual mismatch on [0, pi]
    for w in scan[8..].windows(2) {
        assert!(w[1].excitation > w[0].excitation, "{w:?}");
    }
    for i in 0..scan.len() {
        let mirrored = scan[scan.len() - 1 - i].excitation;
        assert!((scan[i].excitation - mirrored).abs() < 1e-8);
    }
}

#[test]
fn matched_lattice_calibrates_to_zero() {
    let x = calibrate_spacing((-1.0, 1.0), &with_mismatch(0.0), &SpacingOptions::default()).unwrap();
    assert!(x.abs() < 1e-3, "{x}");
}

#[test]
fn injected_mismatch_is_recovered_and_the_correction_is_a_fixed_point() {
    let opts = SpacingOptions::default();
    let found = calibrate_spacing((-1.0, 1.0), &with_mismatch(0.3), &opts).unwrap();
    assert!((found - 0.3).abs() < 1e-3, "{found}");
    let again = calibrate_spacing((-1.0, 1.0), &with_mismatch(0.3 - found), &opts).unwrap();
    assert!(again.abs() < 1e-3, "{again}");
}

#[test]
fn simulated_ramsey_beat_matches_the_formula() {
    let rates = [TAU * 21e3, TAU * 20e3];
    let predicted = intensity_beat_period(rates[0], rates[1]).unwrap().seconds();
    let simulated = simulated_beat_period(rates, 2.5e-3, 200).unwrap();
    assert!((simulated / predicted - 1.0).abs() < 0.01, "{simulated} vs {predicted}");
    assert_eq!(intensity_beat_period(rates[0], rates[0]).unwrap(), BeatPeriod::Infinite);
}
