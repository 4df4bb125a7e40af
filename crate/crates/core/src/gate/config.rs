use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::pulse::OdfPulse;
use crate::error::{Error, Result};
use crate::quantum::ModeSpec;

/// Moving-lattice geometry. The beat frequency is not stored; it is `omega_bm + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Wave-vector difference magnitude (rad/m).
    pub delta_k: f64,
    /// Optical lattice phase (rad).
    pub phi_lattice: f64,
    /// Static lattice phase at each ion's equilibrium position (rad).
    pub theta_ion: [f64; 2],
    /// Relative force amplitude on each ion.
    pub balance: [f64; 2],
}

impl LatticeSpec {
    /// `theta_2 - theta_1` reduced to `(-pi, pi]`.
    pub fn mismatch(&self) -> f64 {
        let x = (self.theta_ion[1] - self.theta_ion[0]).rem_euclid(TAU);
        if x > PI {
            x - TAU
        } else {
            x
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_k > 0.0) || !self.delta_k.is_finite() {
            return Err(Error::invalid("delta_k", "must be positive"));
        }
        if self.balance.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid("balance", "force amplitudes must be positive"));
        }
        if self.theta_ion.iter().chain([&self.phi_lattice]).any(|x| !x.is_finite()) {
            return Err(Error::invalid("theta_ion", "lattice phases must be finite"));
        }
        Ok(())
    }
}

/// Reference frequency used to carry the lattice phase across the echo gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationFrame {
    /// Advance by `delta * dt`: the force keeps its phase relative to the breathing-mode
    /// motion, so the two half-gate displacements of that mode cancel at any detuning.
    GateMode,
    /// Advance by `mu * dt`: the lattice itself is phase-continued.
    Lattice,
}

/// Two-ion gate: modes, pulse, lattice, detuning and echo timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub cm: ModeSpec,
    pub bm: ModeSpec,
    pub pulse: OdfPulse,
    pub lattice: LatticeSpec,
    /// Lattice beat minus the breathing-mode frequency (rad/s).
    pub delta: f64,
    /// Phase-space loops per gate.
    pub loops: u32,
    /// Time between the end of the first force pulse and the start of the second (s).
    pub echo_gap: f64,
    pub compensate_echo_phase: bool,
    pub compensation_frame: CompensationFrame,
}

/// Duration of the single-qubit pi/2 pulse assumed when laying out the 35.2 us sequence.
pub const HALF_PI_DURATION: f64 = 2.8e-6;

/// Peak coupling giving `|chi| = pi/2` (to 1e-6) for the `ca40-2021` preset at its
/// nominal detuning under the default analytic model.
pub const CA40_2021_OMEGA_PEAK: f64 = 2.0 * PI * 0.674_577_926e6;

impl GateConfig {
    /// Two `Ca-40` ions, 2.53 / 4.38 MHz axial modes, 12 us force pulses with 3.2 us ramps.
    pub fn ca40_2021() -> Self {
        let khz = 2.0 * PI * 1e3;
        let mhz = 2.0 * PI * 1e6;
        Self {
            cm: ModeSpec {
                omega: 2.53 * mhz,
                eta: 0.083,
                signs: [1.0, 1.0],
                nbar: 0.0,
                heat_rate: 33.0,
            },
            bm: ModeSpec {
                omega: 4.38 * mhz,
                eta: 0.063,
                signs: [1.0, -1.0],
                nbar: 0.0,
                heat_rate: 1.4,
            },
            pulse: OdfPulse::sine_squared(CA40_2021_OMEGA_PEAK, 3.2e-6, 12e-6),
            lattice: LatticeSpec {
                delta_k: 2f64.sqrt() * 2.0 * PI / 532e-9,
                phi_lattice: 0.0,
                theta_ion: [0.0, 0.0],
                balance: [1.0, 1.0],
            },
            delta: 114.0 * khz,
            loops: 2,
            echo_gap: 2.0 * HALF_PI_DURATION,
            compensate_echo_phase: true,
            compensation_frame: CompensationFrame::GateMode,
        }
    }

    /// Lattice beat frequency `mu = omega_bm + delta`.
    pub fn mu(&self) -> f64 {
        self.bm.omega + self.delta
    }

    /// Modes in storage order (c.m., BM).
    pub fn modes(&self) -> [ModeSpec; 2] {
        [self.cm, self.bm]
    }

    /// Start-to-start separation of the two force pulses.
    pub fn echo_delay(&self) -> f64 {
        self.pulse.tau_total + self.echo_gap
    }

    /// Phase offset applied to the second force pulse.
    pub fn second_pulse_phase(&self) -> f64 {
        if !self.compensate_echo_phase {
            return 0.0;
        }
        let frame = match self.compensation_frame {
            CompensationFrame::GateMode => self.delta,
            CompensationFrame::Lattice => self.mu(),
        };
        echo_phase_compensation(frame, self.echo_delay())
    }

    pub fn validate(&self) -> Result<()> {
        self.cm.validate("cm")?;
        self.bm.validate("bm")?;
        self.pulse.validate()?;
        self.lattice.validate()?;
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        if self.loops == 0 {
            return Err(Error::invalid("loops", "must be at least 1"));
        }
        if !(self.echo_gap >= 0.0) || !self.echo_gap.is_finite() {
            return Err(Error::invalid("echo_gap", "must be non-negative"));
        }
        if !(self.mu() > 0.0) {
            return Err(Error::invalid("delta", "lattice beat frequency must stay positive"));
        }
        Ok(())
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_omega_peak(mut self, omega_peak: f64) -> Self {
        self.pulse.omega_peak = omega_peak;
        self
    }

    /// Both Lamb-Dicke parameters multiplied by `factor`.
    pub fn with_eta_scale(mut self, factor: f64) -> Self {
        self.cm.eta *= factor;
        self.bm.eta *= factor;
        self
    }
}

/// Phase offset `frame_frequency * dt` reduced to `[0, 2 pi)`.
pub fn echo_phase_compensation(frame_frequency: f64, dt: f64) -> f64 {
    let x = (frame_frequency * dt).rem_euclid(TAU);
    if TAU - x < 1e-9 {
        0.0
    } else {
        x
    }
}
