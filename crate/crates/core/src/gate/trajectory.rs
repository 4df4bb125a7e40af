//! First-order Lamb-Dicke dynamics of a single force pulse.
//!
//! Within one spin configuration the linearized Hamiltonian is
//! `sum_m (f_m(t) a_m^dagger + h.c.) + E(t)`, whose propagator is exactly
//! `exp(i Phi) D(alpha_c) D(alpha_b)` with
//!
//! `alpha_m' = -i f_m`, `Phi' = sum_m Im(conj(alpha_m) alpha_m') - E`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::GateConfig;
use super::pulse::{OdfPulse, RampShape};
use crate::error::{Error, Result};
use crate::quantum::displacement::laguerre;
use crate::quantum::integrator::{integrate, Dop853Options};
use crate::quantum::SpinConfig;

/// Which terms of the expanded lattice cosine are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdModel {
    /// Keep only the `e^{i(w_m - mu) t}` term of each mode's drive.
    pub rotating_wave: bool,
    /// Dress the force and carrier with the Fock-state Debye-Waller factors.
    pub debye_waller: bool,
    /// Keep the zeroth-order spin-dependent light shift.
    pub carrier: bool,
    /// Add the third-order force correction `-(eta^2/2) f a^dagger a^dagger a + h.c.`,
    /// evaluated on the displaced state.
    pub kerr: bool,
    /// Add the second-order phase of virtual two-phonon transitions out of the vacuum
    /// (`a_c^dagger^2`, `a_b^dagger^2`, `a_c^dagger a_b^dagger`).
    pub two_phonon: bool,
}

impl LdModel {
    /// Slow term only, bare couplings.
    pub const ROTATING: LdModel = LdModel {
        rotating_wave: true,
        debye_waller: false,
        carrier: false,
        kerr: false,
        two_phonon: false,
    };

    /// Both sidebands, Debye-Waller dressing, carrier light shift and the leading
    /// corrections beyond linear order.
    pub const FULL: LdModel = LdModel {
        rotating_wave: false,
        debye_waller: true,
        carrier: true,
        kerr: true,
        two_phonon: true,
    };
}

impl Default for LdModel {
    fn default() -> Self {
        LdModel::FULL
    }
}

/// Normal mode selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Cm,
    Bm,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::Cm => 0,
            Mode::Bm => 1,
        }
    }
}

/// Propagator of one pulse for one spin configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseDynamics {
    /// Final displacement of (c.m., BM).
    pub alpha: [Complex64; 2],
    /// Geometric phase `Im int conj(alpha) dalpha` per mode.
    pub geometric: [f64; 2],
    /// `-int E dt`.
    pub carrier: f64,
    /// Phase from the amplitude-dependent force correction.
    pub kerr: f64,
    /// Phase from virtual two-phonon transitions.
    pub two_phonon: f64,
}

impl PulseDynamics {
    pub fn phase(&self) -> f64 {
        self.geometric[0] + self.geometric[1] + self.carrier + self.kerr + self.two_phonon
    }
}

/// Drive coefficients of one pulse in one spin configuration.
struct Drive {
    pulse: OdfPulse,
    t_start: f64,
    mu: f64,
    omega: [f64; 2],
    /// `r_j sigma_j b_jm eta_m kappa1_m`, `[mode][ion]`
    force: [[f64; 2]; 2],
    /// `r_j sigma_j kappa0`
    light_shift: [f64; 2],
    /// `theta_j - phi + psi`
    base_phase: [f64; 2],
    /// `eta_m^2 / 2`
    kerr: [f64; 2],
    /// Two-phonon couplings `[cc, bb, cb][ion]`, zero unless enabled.
    pair: [[f64; 2]; 3],
    model: LdModel,
}

impl Drive {
    fn new(
        config: &GateConfig,
        pulse: OdfPulse,
        t_start: f64,
        phase_offset: f64,
        spin: SpinConfig,
        fock: [usize; 2],
        model: LdModel,
    ) -> Self {
        let modes = config.modes();
        let sz = spin.sigma_z();
        let l = &config.lattice;
        let (kappa1, kappa0) = if model.debye_waller {
            debye_waller(&[modes[0].eta, modes[1].eta], fock)
        } else {
            ([1.0, 1.0], 1.0)
        };
        let mut force = [[0.0; 2]; 2];
        for (m, mode) in modes.iter().enumerate() {
            for j in 0..2 {
                force[m][j] = l.balance[j] * sz[j] * mode.signs[j] * mode.eta * kappa1[m];
            }
        }
        Self {
            pulse,
            t_start,
            mu: config.mu(),
            omega: [modes[0].omega, modes[1].omega],
            force,
            light_shift: [0, 1].map(|j| l.balance[j] * sz[j] * kappa0),
            base_phase: [0, 1].map(|j| l.theta_ion[j] - l.phi_lattice + phase_offset),
            kerr: [0, 1].map(|m| if model.kerr { 0.5 * modes[m].eta * modes[m].eta } else { 0.0 }),
            pair: if model.two_phonon {
                let (ec, eb) = (modes[0].eta, modes[1].eta);
                let w = [0, 1].map(|j| l.balance[j] * sz[j] * kappa0);
                [
                    [0, 1].map(|j| w[j] * ec * ec * std::f64::consts::FRAC_1_SQRT_2),
                    [0, 1].map(|j| w[j] * eb * eb * std::f64::consts::FRAC_1_SQRT_2),
                    [0, 1].map(|j| w[j] * modes[0].signs[j] * modes[1].signs[j] * ec * eb),
                ]
            } else {
                [[0.0; 2]; 3]
            },
            model,
        }
    }

    /// `(f_c, f_b, E)` at absolute time `t`.
    fn eval(&self, t: f64) -> ([Complex64; 2], f64) {
        let env = self.pulse.envelope(t - self.t_start);
        let mut f = [Complex64::new(0.0, 0.0); 2];
        if env == 0.0 {
            return (f, 0.0);
        }
        let lattice = [0, 1].map(|j| self.base_phase[j] - self.mu * t);
        for m in 0..2 {
            if self.model.rotating_wave {
                let g: Complex64 = (0..2)
                    .map(|j| self.force[m][j] * Complex64::from_polar(1.0, self.base_phase[j]))
                    .sum();
                f[m] = Complex64::new(0.0, 0.5 * env) * g * Complex64::from_polar(1.0, (self.omega[m] - self.mu) * t);
            } else {
                let s: f64 = (0..2).map(|j| self.force[m][j] * lattice[j].sin()).sum();
                f[m] = -env * s * Complex64::from_polar(1.0, self.omega[m] * t);
            }
        }
        let e = if self.model.carrier {
            env * (0..2).map(|j| self.light_shift[j] * lattice[j].cos()).sum::<f64>()
        } else {
            0.0
        };
        (f, e)
    }

    /// Vacuum two-phonon couplings `(g_cc, g_bb, g_cb)` at absolute time `t`.
    fn pair_couplings(&self, t: f64) -> [Complex64; 3] {
        let env = self.pulse.envelope(t - self.t_start);
        let zero = Complex64::new(0.0, 0.0);
        if env == 0.0 || !self.model.two_phonon {
            return [zero; 3];
        }
        let cosb = [0, 1].map(|j| (self.base_phase[j] - self.mu * t).cos());
        let freq = [2.0 * self.omega[0], 2.0 * self.omega[1], self.omega[0] + self.omega[1]];
        let mut g = [zero; 3];
        for k in 0..3 {
            let amp: f64 = (0..2).map(|j| self.pair[k][j] * cosb[j]).sum();
            g[k] = -env * amp * Complex64::from_polar(1.0, freq[k] * t);
        }
        g
    }

    /// Integrates from the pulse start through `sample_times`, returning the state at each.
    fn run(&self, sample_times: &[f64]) -> Result<Vec<PulseDynamics>> {
        let mut y = [Complex64::new(0.0, 0.0); 9];
        let mut t = self.t_start;
        let mut knots: Vec<f64> = self
            .pulse
            .breakpoints()
            .into_iter()
            .map(|b| b + self.t_start)
            .collect();
        knots.extend_from_slice(sample_times);
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let scale = self.pulse.omega_peak.max(1.0) * self.pulse.tau_total;
        let opts = Dop853Options {
            rel_tol: 1e-12,
            abs_tol: 1e-14 * scale.max(1.0),
            ..Dop853Options::default()
        };
        let mut out = Vec::with_capacity(sample_times.len());
        let mut next_sample = 0;
        let emit = |y: &[Complex64; 9]| PulseDynamics {
            alpha: [y[0], y[1]],
            geometric: [y[2].re, y[2].im],
            carrier: y[3].re,
            kerr: y[4].re,
            two_phonon: y[8].re,
        };
        while next_sample < sample_times.len() && sample_times[next_sample] <= t {
            out.push(emit(&y));
            next_sample += 1;
        }
        for &k in &knots {
            if k <= t {
                continue;
            }
            integrate(
                |tt, yy, dy| {
                    let (f, e) = self.eval(tt);
                    let da = [f[0] * Complex64::new(0.0, -1.0), f[1] * Complex64::new(0.0, -1.0)];
                    dy[0] = da[0];
                    dy[1] = da[1];
                    // geometric phases stored as (re: c.m., im: BM)
                    dy[2] = Complex64::new((yy[0].conj() * da[0]).im, (yy[1].conj() * da[1]).im);
                    dy[3] = Complex64::new(-e, 0.0);
                    // -<V> on the coherent state: 2 eps Re(f conj(alpha) |alpha|^2)
                    let k: f64 = (0..2)
                        .map(|m| 2.0 * self.kerr[m] * (f[m] * yy[m].conj()).re * yy[m].norm_sqr())
                        .sum();
                    dy[4] = Complex64::new(k, 0.0);
                    // virtual pair amplitudes y[5..8] and their accumulated phase y[8]
                    let g = self.pair_couplings(tt);
                    let mut pair_phase = 0.0;
                    for i in 0..3 {
                        let db = g[i] * Complex64::new(0.0, -1.0);
                        dy[5 + i] = db;
                        pair_phase += (yy[5 + i].conj() * db).im;
                    }
                    dy[8] = Complex64::new(pair_phase, 0.0);
                },
                t,
                k,
                &mut y[..],
                &opts,
            )?;
            t = k;
            while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                out.push(emit(&y));
                next_sample += 1;
            }
        }
        Ok(out)
    }
}

/// `(kappa1 per mode, kappa0)` for Fock occupations `fock`.
///
/// `kappa1_m` scales the `n -> n+1` sideband of mode `m` (including the spectator mode's
/// diagonal factor); `kappa0` scales the carrier.
pub fn debye_waller(eta: &[f64; 2], fock: [usize; 2]) -> ([f64; 2], f64) {
    let diag = [0, 1].map(|m| {
        let x = eta[m] * eta[m];
        (-x / 2.0).exp() * laguerre(fock[m], 0.0, x)
    });
    let side = [0, 1].map(|m| {
        let x = eta[m] * eta[m];
        (-x / 2.0).exp() * laguerre(fock[m], 1.0, x) / (fock[m] as f64 + 1.0)
    });
    ([side[0] * diag[1], side[1] * diag[0]], diag[0] * diag[1])
}

/// Dynamics of one force pulse starting at `t_start`.
#[allow(clippy::too_many_arguments)]
pub fn pulse_dynamics(
    config: &GateConfig,
    pulse: OdfPulse,
    t_start: f64,
    phase_offset: f64,
    spin: SpinConfig,
    fock: [usize; 2],
    model: LdModel,
) -> Result<PulseDynamics> {
    let drive = Drive::new(config, pulse, t_start, phase_offset, spin, fock, model);
    Ok(drive.run(&[t_start + pulse.tau_total])?[0])
}

/// Sampled single-mode phase-space path of the first force pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub final_alpha: Complex64,
    pub geometric_phase: f64,
}

/// Path of `mode` for `spin` during a pulse starting at `t = 0`, sampled at `samples`
/// evenly spaced times (ground-state couplings).
pub fn ld_trajectory(
    mode: Mode,
    config: &GateConfig,
    spin: SpinConfig,
    samples: usize,
    model: LdModel,
) -> Result<Trajectory> {
    config.validate()?;
    let n = samples.max(2);
    let tau = config.pulse.tau_total;
    let times: Vec<f64> = (0..n).map(|i| tau * i as f64 / (n - 1) as f64).collect();
    let drive = Drive::new(config, config.pulse, 0.0, 0.0, spin, [0, 0], model);
    let states = drive.run(&times)?;
    let m = mode.index();
    let last = states.last().expect("at least two samples");
    Ok(Trajectory {
        alpha: states.iter().map(|s| s.alpha[m]).collect(),
        final_alpha: last.alpha[m],
        geometric_phase: last.geometric[m],
        times,
    })
}

/// Composite `exp(i phase) D(alpha)` of both pulses for the configuration that starts as
/// `spin` and is flipped between them.
fn echoed_pair(config: &GateConfig, spin: SpinConfig, model: LdModel) -> Result<(f64, [Complex64; 2])> {
    let first = pulse_dynamics(config, config.pulse, 0.0, 0.0, spin, [0, 0], model)?;
    let second = pulse_dynamics(
        config,
        config.pulse,
        config.echo_delay(),
        config.second_pulse_phase(),
        spin.flipped(),
        [0, 0],
        model,
    )?;
    let cross: f64 = (0..2).map(|m| (second.alpha[m] * first.alpha[m].conj()).im).sum();
    let alpha = [0, 1].map(|m| first.alpha[m] + second.alpha[m]);
    Ok((first.phase() + second.phase() + cross, alpha))
}

/// Even-minus-odd parity geometric phase accumulated over the echoed pulse pair.
pub fn entangling_phase(config: &GateConfig, model: LdModel) -> Result<f64> {
    config.validate()?;
    let mut even = 0.0;
    let mut odd = 0.0;
    for spin in SpinConfig::ALL {
        let (phase, _) = echoed_pair(config, spin, model)?;
        if spin.is_even() {
            even += 0.5 * phase;
        } else {
            odd += 0.5 * phase;
        }
    }
    Ok(even - odd)
}

/// Rescales the peak coupling so that `|chi| = pi/2`.
pub fn calibrate_amplitude(config: &GateConfig, model: LdModel) -> Result<GateConfig> {
    let target = std::f64::consts::FRAC_PI_2;
    let mut cfg = *config;
    if !(cfg.pulse.omega_peak > 0.0) {
        cfg.pulse.omega_peak = std::f64::consts::TAU * 0.5e6;
    }
    for _ in 0..60 {
        let chi = entangling_phase(&cfg, model)?.abs();
        if !(chi > 0.0) {
            return Err(Error::Calibration("entangling phase vanishes".into()));
        }
        if (chi - target).abs() < 1e-12 {
            return Ok(cfg);
        }
        cfg.pulse.omega_peak *= (target / chi).sqrt();
    }
    Err(Error::Calibration("amplitude iteration did not converge".into()))
}

/// Closure residual of a single pulse: `max_spin sum_m |alpha_m(T)|^2` in units of the
/// squared breathing-mode loop radius `(eta_bm Omega / delta)^2`.
pub fn closure_residual(config: &GateConfig) -> Result<f64> {
    let radius = config.bm.eta * config.pulse.omega_peak.max(1.0) / config.delta.abs().max(1e-300);
    let cfg = if config.pulse.omega_peak > 0.0 {
        *config
    } else {
        config.with_omega_peak(1.0)
    };
    let mut worst: f64 = 0.0;
    for spin in SpinConfig::ALL {
        let d = pulse_dynamics(&cfg, cfg.pulse, 0.0, 0.0, spin, [0, 0], LdModel::ROTATING)?;
        worst = worst.max(d.alpha.iter().map(|a| a.norm_sqr()).sum::<f64>());
    }
    Ok(worst / (radius * radius))
}

/// Detuning closing every phase-space loop of a single pulse.
///
/// The search scans `[0.5, 2]` times the square-pulse estimate `2 pi K' / tau` with
/// `K' = loops / 2` loops per pulse, then refines with Brent's method.
pub fn solve_gate_detuning(config: &GateConfig, loops: u32) -> Result<f64> {
    let per_pulse = (loops as f64 / 2.0).max(1.0);
    let guess = std::f64::consts::TAU * per_pulse / config.pulse.tau_total;
    solve_gate_detuning_from(config, guess)
}

/// As [`solve_gate_detuning`] with an explicit initial estimate.
pub fn solve_gate_detuning_from(config: &GateConfig, guess: f64) -> Result<f64> {
    let mut cfg = *config;
    cfg.delta = guess;
    cfg.validate()?;
    if cfg.pulse.shape == RampShape::Square {
        // square pulses close exactly on multiples of 2 pi / tau
        let k = (guess * cfg.pulse.tau_total / std::f64::consts::TAU).round().max(1.0);
        return Ok(std::f64::consts::TAU * k / cfg.pulse.tau_total);
    }
    let f = |delta: f64| closure_residual(&cfg.with_delta(delta));
    let one_hz = std::f64::consts::TAU;
    let (lo, hi) = (0.5 * guess, 2.0 * guess);
    let pts = crate::optimize::grid(&f, lo, hi, 61)?;
    // nearest local minimum of the scan to the estimate
    let mut best: Option<usize> = None;
    for i in 1..pts.len() - 1 {
        if pts[i].1 <= pts[i - 1].1 && pts[i].1 <= pts[i + 1].1 {
            let better = match best {
                None => true,
                Some(b) => {
                    let cur = pts[b].1;
                    pts[i].1 < 0.5 * cur
                        || (pts[i].1 < 2.0 * cur && (pts[i].0 - guess).abs() < (pts[b].0 - guess).abs())
                }
            };
            if better {
                best = Some(i);
            }
        }
    }
    let i = best.ok_or_else(|| Error::Calibration("no closure inside the search bracket".into()))?;
    let (x, fx) = crate::optimize::minimize_scalar(&f, pts[i - 1].0, pts[i + 1].0, 0.01 * one_hz)?;
    if fx > 1e-3 {
        return Err(Error::Calibration(format!(
            "closest approach to closure leaves residual {fx:e}"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Configuration whose c.m. mode also closes at `2 pi / tau` for square pulses.
    fn commensurate_square() -> GateConfig {
        let mut c = GateConfig::ca40_2021();
        c.pulse = OdfPulse::square(TAU * 0.3e6, 12e-6);
        c.delta = TAU / 12e-6;
        // mu - w_cm = 22 * 2 pi / tau
        c.cm.omega = c.mu() - 22.0 * TAU / 12e-6;
        c
    }

    #[test]
    fn square_pulse_loop_closes() {
        let c = commensurate_square();
        for spin in SpinConfig::ALL {
            let d = pulse_dynamics(&c, c.pulse, 0.0, 0.0, spin, [0, 0], LdModel::ROTATING).unwrap();
            for a in d.alpha {
                assert!(a.norm() < 1e-12, "{spin:?} {a}");
            }
        }
        assert!(closure_residual(&c).unwrap() < 1e-12);
    }

    #[test]
    fn square_pulse_matches_closed_form_circle() {
        let c = GateConfig::ca40_2021().with_delta(TAU * 61e3);
        let mut c = c;
        c.pulse = OdfPulse::square(TAU * 0.2e6, 12e-6);
        let tr = ld_trajectory(Mode::Bm, &c, SpinConfig::DownUp, 7, LdModel::ROTATING).unwrap();
        // f = i Omega eta e^{-i delta t} (both ions contribute eta, same phase)
        let force = c.pulse.omega_peak * c.bm.eta;
        let d = c.delta;
        for (t, a) in tr.times.iter().zip(&tr.alpha) {
            let exact = Complex64::new(0.0, force / d) * (Complex64::from_polar(1.0, -d * t) - 1.0);
            assert!((a - exact).norm() < 1e-10 * force / d, "t={t}");
        }
        let t = c.pulse.tau_total;
        let phase = (force / d).powi(2) * (d * t - (d * t).sin());
        assert!((tr.geometric_phase + phase).abs() < 1e-9 * phase.abs().max(1.0));
    }

    #[test]
    fn odd_configurations_do_not_drive_the_cm_mode() {
        let c = GateConfig::ca40_2021();
        for spin in [SpinConfig::DownUp, SpinConfig::UpDown] {
            let tr = ld_trajectory(Mode::Cm, &c, spin, 20, LdModel::FULL).unwrap();
            assert!(tr.alpha.iter().all(|a| a.norm() == 0.0));
        }
    }

    #[test]
    fn entangling_phase_is_quadratic_in_the_coupling() {
        let c = GateConfig::ca40_2021().with_omega_peak(TAU * 0.3e6);
        let chi1 = entangling_phase(&c, LdModel::ROTATING).unwrap();
        let chi2 = entangling_phase(&c.with_omega_peak(TAU * 0.6e6), LdModel::ROTATING).unwrap();
        assert!((chi2 / chi1 - 4.0).abs() < 1e-9);
        assert_eq!(entangling_phase(&c.with_omega_peak(0.0), LdModel::FULL).unwrap(), 0.0);
    }

    #[test]
    fn debye_waller_ground_state_reduces_to_gaussian() {
        let (k1, k0) = debye_waller(&[0.083, 0.063], [0, 0]);
        let g = (-(0.083f64.powi(2) + 0.063f64.powi(2)) / 2.0).exp();
        assert!((k1[0] - g).abs() < 1e-15 && (k1[1] - g).abs() < 1e-15 && (k0 - g).abs() < 1e-15);
    }

    #[test]
    fn square_pulse_detuning_is_exact() {
        let mut c = GateConfig::ca40_2021();
        c.pulse = OdfPulse::square(TAU * 0.3e6, 12e-6);
        let d = solve_gate_detuning(&c, 2).unwrap();
        assert!((d - TAU / 12e-6).abs() < 1e-6);
    }
}
