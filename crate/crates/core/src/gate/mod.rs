//! Light-shift gate dynamics: pulses, Hamiltonian, Lamb-Dicke trajectories and sequences.

pub mod config;
pub mod hamiltonian;
pub mod pulse;
pub mod sequence;
pub mod trajectory;

pub use config::{echo_phase_compensation, CompensationFrame, GateConfig, LatticeSpec};
pub use hamiltonian::{LightShiftHamiltonian, OdfHamiltonian};
pub use pulse::{OdfPulse, RampShape};
pub use sequence::{
    analysis_pulse, bell_sequence, detuning_scan, fit_detuning_offset, parity_scan, prepare_sequence, run_sequence,
    InitialCondition, NumericOptions, Populations, PreparedState, ScanRow, SequenceOutcome, SequenceSegment,
    SimulationModel,
};
pub use trajectory::{
    calibrate_amplitude, closure_residual, entangling_phase, ld_trajectory, pulse_dynamics, solve_gate_detuning,
    solve_gate_detuning_from, LdModel, Mode, PulseDynamics, Trajectory,
};
