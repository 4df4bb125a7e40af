//! Pulse schedules and their simulation.
//!
//! The Bell sequence is `R(pi/2, 0)`, force pulse, `R(pi, pi/2)` centred in the echo gap,
//! phase-compensated force pulse, `R(pi/2, 0)`. Without force the three rotations compose
//! to a `pi` rotation about `y`, so an idle run ends in `|up up>` (`P2 = 1`).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::config::GateConfig;
use super::hamiltonian::{LightShiftHamiltonian, OdfHamiltonian};
use super::pulse::OdfPulse;
use super::trajectory::{pulse_dynamics, LdModel};
use crate::error::{Error, Result};
use crate::quantum::displacement::diagonal_element;
use crate::quantum::{
    apply_global_rotation, evolve, make_initial_state, rotation_matrix, thermal_weights,
    CompositeState, FockSpace, SpinConfig,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One step of a schedule. Rotations take no time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSegment {
    Rotation { theta: f64, phi: f64 },
    Odf { pulse: OdfPulse, phase_offset: f64 },
    Delay { duration: f64 },
    /// Static differential light shift `sum_j (rates_j / 2) sigma_z,j`.
    LightShift { rates: [f64; 2], duration: f64 },
}

impl SequenceSegment {
    pub fn duration(&self) -> f64 {
        match *self {
            SequenceSegment::Rotation { .. } => 0.0,
            SequenceSegment::Odf { pulse, .. } => pulse.tau_total,
            SequenceSegment::Delay { duration } | SequenceSegment::LightShift { duration, .. } => duration,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SequenceSegment::Rotation { theta, phi } => {
                if !theta.is_finite() || !phi.is_finite() {
                    return Err(Error::invalid("rotation", "angles must be finite"));
                }
            }
            SequenceSegment::Odf { pulse, phase_offset } => {
                pulse.validate()?;
                if !phase_offset.is_finite() {
                    return Err(Error::invalid("phase_offset", "must be finite"));
                }
            }
            SequenceSegment::Delay { duration } | SequenceSegment::LightShift { duration, .. } => {
                if !(duration >= 0.0) || !duration.is_finite() {
                    return Err(Error::invalid("duration", "must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

/// Pulses (1)-(5): entangling echo sequence without the analysis pulse.
pub fn bell_sequence(config: &GateConfig) -> Vec<SequenceSegment> {
    let half_gap = 0.5 * config.echo_gap;
    vec![
        SequenceSegment::Rotation { theta: FRAC_PI_2, phi: 0.0 },
        SequenceSegment::Odf {
            pulse: config.pulse,
            phase_offset: 0.0,
        },
        SequenceSegment::Delay { duration: half_gap },
        SequenceSegment::Rotation { theta: PI, phi: FRAC_PI_2 },
        SequenceSegment::Delay { duration: half_gap },
        SequenceSegment::Odf {
            pulse: config.pulse,
            phase_offset: config.second_pulse_phase(),
        },
        SequenceSegment::Rotation { theta: FRAC_PI_2, phi: 0.0 },
    ]
}

/// Offset between the nominal analysis phase and the rotation axis actually applied; with
/// it the Bell state's parity is `+sin(2 phi)`-like, maximal at `phi = pi/4`.
pub const ANALYSIS_PHASE_OFFSET: f64 = FRAC_PI_2;

/// Pulse (6) at analysis phase `phi`.
pub fn analysis_pulse(phi: f64) -> SequenceSegment {
    SequenceSegment::Rotation {
        theta: FRAC_PI_2,
        phi: phi + ANALYSIS_PHASE_OFFSET,
    }
}

/// Settings of the full Schrödinger integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericOptions {
    pub space: FockSpace,
    pub rel_tol: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            space: FockSpace::default(),
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimulationModel {
    /// Displacement and phase algebra of the linearized force.
    Analytic(LdModel),
    /// Truncated Fock-space integration of the full lattice Hamiltonian.
    Numeric(NumericOptions),
}

impl Default for SimulationModel {
    fn default() -> Self {
        SimulationModel::Numeric(NumericOptions::default())
    }
}

/// Initial motional state; the spins always start in `|down down>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Ground,
    /// Incoherent mixture over the modes' thermal occupations, each truncated at
    /// `weight_cutoff` lost probability.
    Thermal { weight_cutoff: f64 },
}

impl InitialCondition {
    fn components(&self, config: &GateConfig) -> Vec<(f64, [usize; 2])> {
        match *self {
            InitialCondition::Ground => vec![(1.0, [0, 0])],
            InitialCondition::Thermal { weight_cutoff } => {
                let wc = thermal_weights(config.cm.nbar, weight_cutoff);
                let wb = thermal_weights(config.bm.nbar, weight_cutoff);
                let mut out = Vec::with_capacity(wc.len() * wb.len());
                for &(nc, pc) in &wc {
                    for &(nb, pb) in &wb {
                        out.push((pc * pb, [nc, nb]));
                    }
                }
                out
            }
        }
    }
}

/// Spin populations with motion traced out and thermal components averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Populations {
    pub fn parity(&self) -> f64 {
        self.p0 + self.p2 - self.p1
    }

    fn from_spins(p: [f64; 4]) -> Self {
        let total: f64 = p.iter().sum();
        let s = if total > 0.0 { 1.0 / total } else { 1.0 };
        Populations {
            p0: p[0] * s,
            p1: (p[1] + p[2]) * s,
            p2: p[3] * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    pub populations: Populations,
    /// Final pure state of the numeric model for a ground-state start.
    pub final_state: Option<CompositeState>,
}

/// Term of the analytic state: spin amplitudes times a displaced Fock state.
#[derive(Debug, Clone, Copy)]
struct Branch {
    spin: [Complex64; 4],
    disp: [Complex64; 2],
}

/// State after a schedule, kept in whichever representation the model uses.
#[derive(Debug, Clone)]
pub struct PreparedState {
    components: Vec<(f64, Component)>,
}

#[derive(Debug, Clone)]
enum Component {
    Analytic { fock: [usize; 2], branches: Vec<Branch> },
    Numeric(CompositeState),
}

fn kron(theta: f64, phi: f64) -> [[Complex64; 4]; 4] {
    let r = rotation_matrix(theta, phi);
    let mut k = [[ZERO; 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    k[2 * a + b][2 * c + d] = r[a][c] * r[b][d];
                }
            }
        }
    }
    k
}

fn rotate_branches(branches: &mut [Branch], theta: f64, phi: f64) {
    let k = kron(theta, phi);
    for br in branches.iter_mut() {
        let v = br.spin;
        for (row, coeffs) in k.iter().enumerate() {
            br.spin[row] = (0..4).map(|c| coeffs[c] * v[c]).sum();
        }
    }
}

fn analytic_populations(fock: [usize; 2], branches: &[Branch]) -> [f64; 4] {
    let mut p = [0.0; 4];
    for a in branches {
        for b in branches {
            // <n| D(A)^dagger D(B) |n> per mode
            let mut overlap = Complex64::new(1.0, 0.0);
            for m in 0..2 {
                let phase = (a.disp[m].conj() * b.disp[m]).im;
                overlap *= Complex64::from_polar(diagonal_element(b.disp[m] - a.disp[m], fock[m]), phase);
            }
            for s in 0..4 {
                p[s] += (a.spin[s].conj() * b.spin[s] * overlap).re;
            }
        }
    }
    p
}

impl PreparedState {
    fn spin_populations(&self) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (w, c) in &self.components {
            let q = match c {
                Component::Analytic { fock, branches } => analytic_populations(*fock, branches),
                Component::Numeric(state) => {
                    let mut q = [0.0; 4];
                    for spin in SpinConfig::ALL {
                        q[spin.index()] = state.block(spin).iter().map(|a| a.norm_sqr()).sum();
                    }
                    q
                }
            };
            for s in 0..4 {
                p[s] += w * q[s];
            }
        }
        p
    }

    pub fn populations(&self) -> Populations {
        Populations::from_spins(self.spin_populations())
    }

    /// Populations after an extra global rotation.
    pub fn rotated(&self, theta: f64, phi: f64) -> Populations {
        let mut copy = self.clone();
        for (_, c) in copy.components.iter_mut() {
            match c {
                Component::Analytic { branches, .. } => rotate_branches(branches, theta, phi),
                Component::Numeric(state) => *state = apply_global_rotation(state, theta, phi),
            }
        }
        copy.populations()
    }

    fn single_state(&self) -> Option<CompositeState> {
        match self.components.as_slice() {
            [(_, Component::Numeric(s))] => Some(s.clone()),
            _ => None,
        }
    }
}

fn run_analytic(
    segments: &[SequenceSegment],
    config: &GateConfig,
    model: LdModel,
    fock: [usize; 2],
) -> Result<Vec<Branch>> {
    let mut start = [ZERO; 4];
    start[SpinConfig::DownDown.index()] = Complex64::new(1.0, 0.0);
    let mut branches = vec![Branch {
        spin: start,
        disp: [ZERO; 2],
    }];
    let mut t = 0.0;
    for seg in segments {
        match *seg {
            SequenceSegment::Rotation { theta, phi } => rotate_branches(&mut branches, theta, phi),
            SequenceSegment::Delay { duration } => t += duration,
            SequenceSegment::LightShift { rates, duration } => {
                for br in branches.iter_mut() {
                    for spin in SpinConfig::ALL {
                        let sz = spin.sigma_z();
                        let e = 0.5 * (rates[0] * sz[0] + rates[1] * sz[1]);
                        br.spin[spin.index()] *= Complex64::from_polar(1.0, -e * duration);
                    }
                }
                t += duration;
            }
            SequenceSegment::Odf { pulse, phase_offset } => {
                let mut dyns = Vec::with_capacity(4);
                for spin in SpinConfig::ALL {
                    dyns.push(pulse_dynamics(config, pulse, t, phase_offset, spin, fock, model)?);
                }
                let mut next: Vec<Branch> = Vec::with_capacity(4 * branches.len());
                for br in &branches {
                    for (s, d) in dyns.iter().enumerate() {
                        if br.spin[s] == ZERO {
                            continue;
                        }
                        let cross: f64 = (0..2).map(|m| (d.alpha[m] * br.disp[m].conj()).im).sum();
                        let disp = [br.disp[0] + d.alpha[0], br.disp[1] + d.alpha[1]];
                        let amp = br.spin[s] * Complex64::from_polar(1.0, d.phase() + cross);
                        match next.iter_mut().find(|b| {
                            (b.disp[0] - disp[0]).norm() < 1e-15 && (b.disp[1] - disp[1]).norm() < 1e-15
                        }) {
                            Some(b) => b.spin[s] += amp,
                            None => {
                                let mut spin = [ZERO; 4];
                                spin[s] = amp;
                                next.push(Branch { spin, disp });
                            }
                        }
                    }
                }
                branches = next;
                t += pulse.tau_total;
            }
        }
    }
    Ok(branches)
}

fn run_numeric(
    segments: &[SequenceSegment],
    config: &GateConfig,
    opts: &NumericOptions,
    fock: [usize; 2],
) -> Result<CompositeState> {
    let mut state = make_initial_state(SpinConfig::DownDown, (fock[0], fock[1]), opts.space)?;
    let mut t = 0.0;
    for seg in segments {
        match *seg {
            SequenceSegment::Rotation { theta, phi } => state = apply_global_rotation(&state, theta, phi),
            SequenceSegment::Delay { duration } => {
                t += duration;
                state.time = t;
            }
            SequenceSegment::LightShift { rates, duration } => {
                let h = LightShiftHamiltonian {
                    rates,
                    block: opts.space.motional_dim(),
                };
                state = evolve(&state, &h, (t, t + duration), opts.rel_tol)?;
                t += duration;
            }
            SequenceSegment::Odf { pulse, phase_offset } => {
                let h = OdfHamiltonian::new(config, pulse, opts.space, t, phase_offset);
                state = evolve(&state, &h, (t, t + pulse.tau_total), opts.rel_tol)?;
                t += pulse.tau_total;
            }
        }
    }
    Ok(state)
}

/// Runs a schedule and keeps the final state for further analysis rotations.
pub fn prepare_sequence(
    segments: &[SequenceSegment],
    config: &GateConfig,
    model: &SimulationModel,
    initial: &InitialCondition,
) -> Result<PreparedState> {
    config.validate()?;
    for s in segments {
        s.validate()?;
    }
    let mut components = Vec::new();
    for (w, fock) in initial.components(config) {
        let c = match model {
            SimulationModel::Analytic(m) => Component::Analytic {
                fock,
                branches: run_analytic(segments, config, *m, fock)?,
            },
            SimulationModel::Numeric(opts) => Component::Numeric(run_numeric(segments, config, opts, fock)?),
        };
        components.push((w, c));
    }
    Ok(PreparedState { components })
}

pub fn run_sequence(
    segments: &[SequenceSegment],
    config: &GateConfig,
    model: &SimulationModel,
    initial: &InitialCondition,
) -> Result<SequenceOutcome> {
    let prepared = prepare_sequence(segments, config, model, initial)?;
    Ok(SequenceOutcome {
        populations: prepared.populations(),
        final_state: prepared.single_state(),
    })
}

/// One row of a detuning scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Bell-sequence populations at each detuning, with the echo phase recomputed per point.
pub fn detuning_scan(
    deltas: &[f64],
    config: &GateConfig,
    model: &SimulationModel,
    initial: &InitialCondition,
) -> Result<Vec<ScanRow>> {
    deltas
        .par_iter()
        .map(|&delta| {
            let cfg = config.with_delta(delta);
            let out = run_sequence(&bell_sequence(&cfg), &cfg, model, initial)?;
            Ok(ScanRow {
                delta,
                p0: out.populations.p0,
                p1: out.populations.p1,
                p2: out.populations.p2,
            })
        })
        .collect()
}

/// Parity `P0 + P2 - P1` after the analysis pulse at each phase.
pub fn parity_scan(
    phis: &[f64],
    config: &GateConfig,
    model: &SimulationModel,
    initial: &InitialCondition,
) -> Result<Vec<(f64, f64)>> {
    let prepared = prepare_sequence(&bell_sequence(config), config, model, initial)?;
    Ok(phis
        .par_iter()
        .map(|&phi| {
            let SequenceSegment::Rotation { theta, phi: axis } = analysis_pulse(phi) else {
                unreachable!("analysis pulse is a rotation")
            };
            (phi, prepared.rotated(theta, axis).parity())
        })
        .collect())
}

/// Signed detuning offset `o` such that simulating at `delta + o` best reproduces `measured`.
///
/// The offset is searched on `[-max_offset, max_offset]`.
pub fn fit_detuning_offset(
    measured: &[ScanRow],
    config: &GateConfig,
    model: &SimulationModel,
    max_offset: f64,
) -> Result<f64> {
    if measured.len() < 5 {
        return Err(Error::Fit("detuning fit needs at least five rows".into()));
    }
    if !(max_offset > 0.0) {
        return Err(Error::invalid("max_offset", "must be positive"));
    }
    let sse = |offset: f64| -> Result<f64> {
        let shifted: Vec<f64> = measured.iter().map(|r| r.delta + offset).collect();
        let sim = detuning_scan(&shifted, config, model, &InitialCondition::Ground)?;
        Ok(measured
            .iter()
            .zip(&sim)
            .map(|(m, s)| (m.p0 - s.p0).powi(2) + (m.p1 - s.p1).powi(2) + (m.p2 - s.p2).powi(2))
            .sum())
    };
    let pts = crate::optimize::grid(&sse, -max_offset, max_offset, 41)?;
    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return Err(Error::Fit("residual is flat in the detuning offset".into()));
    }
    let step = 2.0 * max_offset / 40.0;
    let (x, _) = crate::optimize::refine_grid_minimum(&sse, &pts, 1e-4 * step)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: SimulationModel = SimulationModel::Analytic(LdModel::FULL);

    fn bell(cfg: &GateConfig) -> Populations {
        run_sequence(&bell_sequence(cfg), cfg, &FULL, &InitialCondition::Ground)
            .unwrap()
            .populations
    }

    #[test]
    fn idle_echo_ends_in_up_up() {
        let cfg = GateConfig::ca40_2021();
        let idle: Vec<SequenceSegment> = bell_sequence(&cfg)
            .into_iter()
            .map(|s| match s {
                SequenceSegment::Odf { pulse, .. } => SequenceSegment::Delay { duration: pulse.tau_total },
                other => other,
            })
            .collect();
        for model in [FULL, SimulationModel::Numeric(NumericOptions { space: FockSpace::square(3).unwrap(), rel_tol: 1e-10 })] {
            let p = run_sequence(&idle, &cfg, &model, &InitialCondition::Ground).unwrap().populations;
            assert!((p.p2 - 1.0).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn calibrated_preset_makes_an_even_bell_state() {
        let p = bell(&GateConfig::ca40_2021());
        assert!((p.p0 - 0.5).abs() < 0.01 && (p.p2 - 0.5).abs() < 0.01, "{p:?}");
        assert!(p.p1 < 1e-4, "{p:?}");
        assert!((p.p0 + p.p1 + p.p2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_extrema_sit_at_odd_eighth_turns() {
        let cfg = GateConfig::ca40_2021();
        let q = PI / 4.0;
        let pts = parity_scan(&[q, 3.0 * q], &cfg, &FULL, &InitialCondition::Ground).unwrap();
        assert!(pts[0].1 > 0.999, "{pts:?}");
        assert!(pts[1].1 < -0.999, "{pts:?}");
    }

    #[test]
    fn dropping_the_echo_phase_leaves_odd_population() {
        // delta * dt is a near-whole number of cycles at the preset, so move off it
        let mut cfg = GateConfig::ca40_2021().with_delta(2.0 * PI * 100e3);
        let on = bell(&cfg).p1;
        cfg.compensate_echo_phase = false;
        let off = bell(&cfg).p1;
        assert!(on < 1e-4 && off > 0.01, "on {on} off {off}");
    }

    #[test]
    fn thermal_average_reduces_to_ground_at_zero_occupation() {
        let cfg = GateConfig::ca40_2021();
        let seq = bell_sequence(&cfg);
        let g = run_sequence(&seq, &cfg, &FULL, &InitialCondition::Ground).unwrap().populations;
        let t = run_sequence(&seq, &cfg, &FULL, &InitialCondition::Thermal { weight_cutoff: 1e-9 })
            .unwrap()
            .populations;
        assert_eq!(g, t);
    }

    #[test]
    fn segments_round_trip_through_json() {
        let seq = bell_sequence(&GateConfig::ca40_2021());
        let text = serde_json::to_string(&seq).unwrap();
        let back: Vec<SequenceSegment> = serde_json::from_str(&text).unwrap();
        assert_eq!(seq, back);
    }

    #[test]
    fn offset_fit_rejects_short_scans() {
        let cfg = GateConfig::ca40_2021();
        let rows = vec![ScanRow { delta: cfg.delta, p0: 0.5, p1: 0.0, p2: 0.5 }; 3];
        assert!(matches!(fit_detuning_offset(&rows, &cfg, &FULL, 1e3), Err(Error::Fit(_))));
    }
}
