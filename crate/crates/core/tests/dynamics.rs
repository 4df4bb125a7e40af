use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use otdf_core::gate::{
    bell_sequence, calibrate_amplitude, detuning_scan, entangling_phase, fit_detuning_offset, ld_trajectory, parity_scan, pulse_dynamics,
    run_sequence, solve_gate_detuning, solve_gate_detuning_from, GateConfig, InitialCondition, LdModel, Mode,
    NumericOptions, OdfHamiltonian, ScanRow, SequenceSegment, SimulationModel,
};
use otdf_core::quantum::{
    apply_global_rotation, evolve, make_initial_state, reduce_observables, FockSpace, Hamiltonian, SpinConfig,
};

const FULL: SimulationModel = SimulationModel::Analytic(LdModel::FULL);

fn numeric(n_cm: usize, n_bm: usize) -> SimulationModel {
    SimulationModel::Numeric(NumericOptions {
        space: FockSpace::new(n_cm, n_bm).unwrap(),
        rel_tol: 1e-10,
    })
}

/// Resonant breathing-mode drive `(g(t)/2)(a e^{i phi} + a^dagger e^{-i phi})` on every spin block.
struct ResonantDrive {
    space: FockSpace,
    peak: f64,
    duration: f64,
    phi: f64,
}

impl ResonantDrive {
    fn coupling(&self, t: f64) -> f64 {
        self.peak * (PI * t / self.duration).sin().powi(2)
    }
}

impl Hamiltonian for ResonantDrive {
    fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let half = 0.5 * self.coupling(t);
        let e = Complex64::from_polar(1.0, self.phi);
        let nb = self.space.n_bm;
        out.fill(Complex64::new(0.0, 0.0));
        for row in 0..psi.len() / nb {
            for b in 0..nb {
                let i = row * nb + b;
                if b + 1 < nb {
                    out[i] += half * e * ((b + 1) as f64).sqrt() * psi[i + 1];
                }
                if b > 0 {
                    out[i] += half * e.conj() * (b as f64).sqrt() * psi[i - 1];
                }
            }
        }
    }
}

#[test]
fn resonant_drive_makes_the_closed_form_coherent_state() {
    let space = FockSpace::new(2, 40).unwrap();
    let h = ResonantDrive {
        space,
        peak: TAU * 120e3,
        duration: 10e-6,
        phi: 0.7,
    };
    // alpha = -i e^{-i phi} int g/2 dt, and int sin^2 = T/2
    let alpha = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -h.phi) * (h.peak * h.duration / 4.0);
    let start = make_initial_state(SpinConfig::DownDown, (0, 0), space).unwrap();
    let out = evolve(&start, &h, (0.0, h.duration), 1e-10).unwrap();
    let obs = reduce_observables(&out);
    assert!((obs.mean_a[1] - alpha).norm() < 1e-6, "{} vs {alpha}", obs.mean_a[1]);
    assert!((obs.mean_n[1] - alpha.norm_sqr()).abs() < 1e-6);

    // overlap with the Fock expansion of |alpha>
    let mut coh = vec![Complex64::new(0.0, 0.0); space.dim()];
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..space.n_bm {
        coh[space.index(SpinConfig::DownDown, 0, n)] = c;
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    let overlap: Complex64 = coh.iter().zip(&out.amplitudes).map(|(a, b)| a.conj() * b).sum();
    assert!((overlap.norm_sqr() - 1.0).abs() < 1e-6, "{overlap}");
    assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
}

#[test]
fn four_quarter_turns_are_the_identity() {
    let space = FockSpace::square(3).unwrap();
    let mut s = make_initial_state(SpinConfig::DownUp, (1, 2), space).unwrap();
    s = apply_global_rotation(&s, 0.3, 1.1);
    let reference = s.clone();
    for phi in [0.0, 0.4, -2.0] {
        let mut r = reference.clone();
        for _ in 0..4 {
            r = apply_global_rotation(&r, FRAC_PI_2, phi);
        }
        assert!(reference.fidelity(&r) > 1.0 - 1e-12);
        let full = apply_global_rotation(&reference, TAU, phi);
        assert!(reference.fidelity(&full) > 1.0 - 1e-12);
    }
}

#[test]
fn numeric_evolution_conserves_the_norm() {
    let cfg = GateConfig::ca40_2021();
    let space = FockSpace::square(8).unwrap();
    for tol in [1e-8, 1e-10] {
        let start = apply_global_rotation(&make_initial_state(SpinConfig::DownDown, (0, 0), space).unwrap(), FRAC_PI_2, 0.0);
        let h = OdfHamiltonian::new(&cfg, cfg.pulse, space, 0.0, 0.0);
        let out = evolve(&start, &h, (0.0, cfg.pulse.tau_total), tol).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 10.0 * tol);
    }
}

#[test]
fn raising_the_truncation_from_fifteen_to_twenty_changes_nothing() {
    let cfg = GateConfig::ca40_2021();
    let deltas = [TAU * 90e3, TAU * 114e3, TAU * 140e3];
    let a = detuning_scan(&deltas, &cfg, &numeric(15, 15), &InitialCondition::Ground).unwrap();
    let b = detuning_scan(&deltas, &cfg, &numeric(20, 20), &InitialCondition::Ground).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let worst = (x.p0 - y.p0).abs().max((x.p1 - y.p1).abs()).max((x.p2 - y.p2).abs());
        assert!(worst < 1e-6, "{x:?} vs {y:?}");
    }
}

#[test]
fn solved_detuning_does_not_depend_on_the_guess() {
    let cfg = GateConfig::ca40_2021();
    let root = solve_gate_detuning(&cfg, cfg.loops).unwrap();
    // the solver's own estimate for one loop per pulse
    let estimate = TAU / cfg.pulse.tau_total;
    for scale in [0.9, 1.1] {
        let again = solve_gate_detuning_from(&cfg, estimate * scale).unwrap();
        assert!((again - root).abs() / TAU < 1.0, "{} vs {}", again / TAU, root / TAU);
    }
}

#[test]
fn linearized_trajectory_matches_numeric_motion_at_small_eta() {
    // eta / 10 with ten times the coupling keeps the loop radius while suppressing
    // every correction beyond linear order
    let mut cfg = GateConfig::ca40_2021().with_eta_scale(0.1);
    cfg.pulse.omega_peak *= 10.0;
    let space = FockSpace::new(6, 10).unwrap();
    for spin in [SpinConfig::DownUp, SpinConfig::DownDown] {
        let start = make_initial_state(spin, (0, 0), space).unwrap();
        let h = OdfHamiltonian::new(&cfg, cfg.pulse, space, 0.0, 0.0);
        let out = evolve(&start, &h, (0.0, cfg.pulse.tau_total), 1e-11).unwrap();
        let numeric_a = reduce_observables(&out).mean_a;
        for (mode, m) in [(Mode::Cm, 0), (Mode::Bm, 1)] {
            let tr = ld_trajectory(mode, &cfg, spin, 64, LdModel::FULL).unwrap();
            let err = (tr.final_alpha - numeric_a[m]).norm();
            assert!(err < 2e-3 * tr.final_alpha.norm().max(0.05), "{spin:?} {mode:?}: {} vs {}", tr.final_alpha, numeric_a[m]);
        }
    }
}

#[test]
fn entangling_phase_scales_with_the_square_of_the_coupling() {
    let cfg = GateConfig::ca40_2021();
    let chi = entangling_phase(&cfg, LdModel::ROTATING).unwrap();
    let doubled = entangling_phase(&cfg.with_omega_peak(2.0 * cfg.pulse.omega_peak), LdModel::ROTATING).unwrap();
    assert!((doubled / chi - 4.0).abs() < 1e-9, "{}", doubled / chi);
    assert_eq!(entangling_phase(&cfg.with_omega_peak(0.0), LdModel::FULL).unwrap(), 0.0);
    // preset coupling is calibrated for |chi| = pi/2 at its detuning
    let full = entangling_phase(&cfg, LdModel::FULL).unwrap();
    assert!((full.abs() - FRAC_PI_2).abs() < 1e-6, "{full}");

    let at_root = cfg.with_delta(solve_gate_detuning(&cfg, cfg.loops).unwrap());
    let calibrated = calibrate_amplitude(&at_root, LdModel::FULL).unwrap();
    let chi = entangling_phase(&calibrated, LdModel::FULL).unwrap();
    assert!((chi.abs() - FRAC_PI_2).abs() < 1e-4, "{chi}");
}

#[test]
fn odd_configurations_accumulate_equal_phases() {
    let mut cfg = GateConfig::ca40_2021();
    for delta in [95e3, 114e3, 133e3] {
        cfg.delta = TAU * delta;
        let a = pulse_dynamics(&cfg, cfg.pulse, 0.0, 0.0, SpinConfig::DownUp, [0, 0], LdModel::FULL).unwrap();
        let b = pulse_dynamics(&cfg, cfg.pulse, 0.0, 0.0, SpinConfig::UpDown, [0, 0], LdModel::FULL).unwrap();
        assert!((a.phase() - b.phase()).abs() < 1e-12 * a.phase().abs().max(1.0));
    }
}

#[test]
fn far_detuned_gate_reduces_to_the_echo() {
    let cfg = GateConfig::ca40_2021().with_delta(TAU * 3e6);
    let p = run_sequence(&bell_sequence(&cfg), &cfg, &FULL, &InitialCondition::Ground).unwrap().populations;
    assert!(p.p2 > 0.99 && p.p0 < 0.01, "{p:?}");
}

#[test]
fn exchanging_the_initial_spins_relabels_the_populations() {
    let cfg = GateConfig::ca40_2021();
    let flipped: Vec<SequenceSegment> = std::iter::once(SequenceSegment::Rotation { theta: PI, phi: 0.0 })
        .chain(bell_sequence(&cfg))
        .collect();
    for model in [FULL, numeric(6, 10)] {
        let a = run_sequence(&bell_sequence(&cfg), &cfg, &model, &InitialCondition::Ground).unwrap().populations;
        let b = run_sequence(&flipped, &cfg, &model, &InitialCondition::Ground).unwrap().populations;
        // the flip exchanges the labels of the two even outcomes as well
        assert!((a.p0 - b.p2).abs() < 1e-6 && (a.p1 - b.p1).abs() < 1e-6 && (a.p2 - b.p0).abs() < 1e-6, "{a:?} {b:?}");
    }
}

#[test]
fn parity_has_period_pi_and_stays_bounded() {
    let cfg = GateConfig::ca40_2021();
    let phis: Vec<f64> = (0..24).map(|i| i as f64 * PI / 12.0 - 0.3).collect();
    let shifted: Vec<f64> = phis.iter().map(|p| p + PI).collect();
    let a = parity_scan(&phis, &cfg, &FULL, &InitialCondition::Ground).unwrap();
    let b = parity_scan(&shifted, &cfg, &FULL, &InitialCondition::Ground).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.1 - y.1).abs() < 1e-6);
        assert!((-1.0..=1.0).contains(&x.1));
    }
    let ext = parity_scan(&[FRAC_PI_4, 3.0 * FRAC_PI_4], &cfg, &FULL, &InitialCondition::Ground).unwrap();
    assert!(ext[0].1 > 1.0 - 1e-4 && ext[1].1 < -1.0 + 1e-4, "{ext:?}");
}

#[test]
fn uncompensated_echo_makes_odd_population_swing() {
    let mut cfg = GateConfig::ca40_2021();
    cfg.compensate_echo_phase = false;
    let deltas: Vec<f64> = (0..26).map(|i| TAU * (90e3 + 2e3 * i as f64)).collect();
    let rows = detuning_scan(&deltas, &cfg, &FULL, &InitialCondition::Ground).unwrap();
    let hi = rows.iter().map(|r| r.p1).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.p1).fold(1.0, f64::min);
    assert!(hi - lo > 0.1, "{lo} .. {hi}");
}

fn synthetic(cfg: &GateConfig, offset: f64) -> Vec<ScanRow> {
    let deltas: Vec<f64> = (0..26).map(|i| TAU * (90e3 + 2e3 * i as f64)).collect();
    let shifted: Vec<f64> = deltas.iter().map(|d| d + offset).collect();
    detuning_scan(&shifted, cfg, &FULL, &InitialCondition::Ground)
        .unwrap()
        .into_iter()
        .zip(&deltas)
        .map(|(r, &d)| ScanRow { delta: d, ..r })
        .collect()
}

#[test]
fn detuning_offset_fit_recovers_injected_shifts() {
    let cfg = GateConfig::ca40_2021();
    let zero = fit_detuning_offset(&synthetic(&cfg, 0.0), &cfg, &FULL, TAU * 5e3).unwrap();
    assert!(zero.abs() / TAU < 100.0, "{}", zero / TAU);
    let two = fit_detuning_offset(&synthetic(&cfg, TAU * 2e3), &cfg, &FULL, TAU * 5e3).unwrap();
    assert!((two / TAU - 2e3).abs() < 200.0, "{}", two / TAU);
}
