//! Simulated ion-spacing and intensity-balance calibrations.
//!
//! The axial-confinement knob is represented directly by the lattice mismatch phase
//! `theta_2 - theta_1`, split symmetrically about the configured mean phase.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{
    prepare_sequence, GateConfig, InitialCondition, NumericOptions, OdfHamiltonian, SequenceSegment, SimulationModel,
};
use crate::optimize::{find_root, grid, minimize_scalar};
use crate::quantum::{evolve, make_initial_state, reduce_observables, FockSpace, SpinConfig};

/// Settings for the resonant spacing scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingOptions {
    /// Peak coupling relative to the gate's, kept small so the resonant
    /// displacement fits the truncation.
    pub omega_scale: f64,
    pub space: FockSpace,
    pub rel_tol: f64,
}

impl Default for SpacingOptions {
    fn default() -> Self {
        Self {
            omega_scale: 0.1,
            space: FockSpace { n_cm: 4, n_bm: 12 },
            rel_tol: 1e-11,
        }
    }
}

/// One point of a spacing scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingScanResult {
    pub mismatch_phase: f64,
    /// Breathing-mode `<n>` after the resonant pulse.
    pub excitation: f64,
}

fn with_mismatch(config: &GateConfig, mismatch: f64) -> GateConfig {
    let mut cfg = config.with_delta(0.0);
    let centre = 0.5 * (cfg.lattice.theta_ion[0] + cfg.lattice.theta_ion[1]);
    cfg.lattice.theta_ion = [centre - 0.5 * mismatch, centre + 0.5 * mismatch];
    cfg
}

/// `<n_BM>` after one force pulse resonant with the breathing mode, starting from
/// `|down down>` and the motional ground state, with lattice mismatch `mismatch_phase`.
pub fn spacing_excitation(mismatch_phase: f64, config: &GateConfig, opts: &SpacingOptions) -> Result<f64> {
    if !mismatch_phase.is_finite() {
        return Err(Error::invalid("mismatch_phase", "must be finite"));
    }
    if !(opts.omega_scale > 0.0) {
        return Err(Error::invalid("omega_scale", "must be positive"));
    }
    let cfg = with_mismatch(config, mismatch_phase);
    cfg.validate()?;
    let mut pulse = cfg.pulse;
    pulse.omega_peak *= opts.omega_scale;
    let state = make_initial_state(SpinConfig::DownDown, (0, 0), opts.space)?;
    let h = OdfHamiltonian::new(&cfg, pulse, opts.space, 0.0, 0.0);
    let out = evolve(&state, &h, (0.0, pulse.tau_total), opts.rel_tol)?;
    Ok(reduce_observables(&out).mean_n[1])
}

/// Spacing scan over the given mismatch phases.
pub fn spacing_scan(phases: &[f64], config: &GateConfig, opts: &SpacingOptions) -> Result<Vec<SpacingScanResult>> {
    use rayon::prelude::*;
    phases
        .par_iter()
        .map(|&x| {
            Ok(SpacingScanResult {
                mismatch_phase: x,
                excitation: spacing_excitation(x, config, opts)?,
            })
        })
        .collect()
}

/// Estimates the configured mismatch by scanning a correction `c` over `bracket` and
/// minimizing the excitation at mismatch `configured - c`.
pub fn calibrate_spacing(bracket: (f64, f64), config: &GateConfig, opts: &SpacingOptions) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("bracket", "needs finite lo < hi"));
    }
    let intrinsic = config.lattice.mismatch();
    let f = |c: f64| spacing_excitation(intrinsic - c, config, opts);
    // coarse grid first: the excitation is 2 pi periodic and may have several minima
    let pts = grid(&f, lo, hi, 17)?;
    let best = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let a = pts[best.saturating_sub(1)].0;
    let b = pts[(best + 1).min(pts.len() - 1)].0;
    let (x, fx) = minimize_scalar(&f, a, b, 1e-7)?;
    let edge = 1e-6 * (hi - lo);
    let interior = x - lo > edge && hi - x > edge;
    let below_ends = fx < pts[0].1 && fx < pts[pts.len() - 1].1;
    if !interior || !below_ends {
        return Err(Error::Calibration(format!(
            "no interior minimum of the spacing excitation on [{lo}, {hi}]"
        )));
    }
    Ok(x)
}

/// Population beat period of two ions precessing at differential light shifts
/// `omega_1` and `omega_2` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "seconds", rename_all = "kebab-case")]
pub enum BeatPeriod {
    Finite(f64),
    /// Equal shifts: no beat.
    Infinite,
}

impl BeatPeriod {
    pub fn seconds(self) -> f64 {
        match self {
            BeatPeriod::Finite(t) => t,
            BeatPeriod::Infinite => f64::INFINITY,
        }
    }
}

/// `2 pi / |omega_1 - omega_2|`.
pub fn intensity_beat_period(omega_1: f64, omega_2: f64) -> Result<BeatPeriod> {
    if !omega_1.is_finite() || !omega_2.is_finite() {
        return Err(Error::invalid("omega", "light shifts must be finite"));
    }
    let d = (omega_1 - omega_2).abs();
    if d == 0.0 {
        return Ok(BeatPeriod::Infinite);
    }
    Ok(BeatPeriod::Finite(TAU / d))
}

/// Correlation `Pi_x + Pi_y = cos((omega_1 - omega_2) t)` from a single-beam Ramsey run:
/// `R(pi/2, 0)`, static shift for `t`, then parity after analysis about `x` and `y`.
pub fn single_beam_ramsey(rates: [f64; 2], duration: f64) -> Result<f64> {
    let cfg = GateConfig::ca40_2021();
    let seq = [
        SequenceSegment::Rotation { theta: FRAC_PI_2, phi: 0.0 },
        SequenceSegment::LightShift { rates, duration },
    ];
    let model = SimulationModel::Numeric(NumericOptions {
        space: FockSpace::new(2, 2)?,
        rel_tol: 1e-12,
    });
    let prepared = prepare_sequence(&seq, &cfg, &model, &InitialCondition::Ground)?;
    let x = prepared.rotated(FRAC_PI_2, 0.0).parity();
    let y = prepared.rotated(FRAC_PI_2, FRAC_PI_2).parity();
    Ok(x + y)
}

/// Beat period read off the simulated single-beam Ramsey signal: twice the spacing of its
/// first two zero crossings within `[0, t_max]`.
pub fn simulated_beat_period(rates: [f64; 2], t_max: f64, samples: usize) -> Result<f64> {
    if !(t_max > 0.0) || samples < 8 {
        return Err(Error::invalid("t_max", "needs a positive window and at least 8 samples"));
    }
    let f = |t: f64| single_beam_ramsey(rates, t);
    let pts = grid(&f, 0.0, t_max, samples)?;
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        if w[0].1.signum() != w[1].1.signum() {
            roots.push(find_root(&f, w[0].0, w[1].0, 1e-15 * t_max)?);
            if roots.len() == 2 {
                return Ok(2.0 * (roots[1] - roots[0]));
            }
        }
    }
    Err(Error::Calibration(format!(
        "fewer than two beat zero crossings within {t_max:e} s (period beyond the window)"
    )))
}

/// Peak of an excitation scan, for the "maximal at pi" property.
pub fn argmax_excitation(scan: &[SpacingScanResult]) -> Option<f64> {
    scan.iter()
        .max_by(|a, b| a.excitation.total_cmp(&b.excitation))
        .map(|r| r.mismatch_phase.rem_euclid(TAU))
        .map(|x| if x > PI + 1e-12 { x - TAU } else { x })
}
