//! Simulation and analysis toolkit for a two-ion light-shift entangling gate on an
//! optical qubit.
//!
//! * [`quantum`]: truncated Fock-space states and the time-dependent integrator.
//! * [`gate`]: force pulses, the lattice Hamiltonian, Lamb-Dicke trajectories, sequences.
//! * [`statistics`]: photon-count mixture model, estimation and resampling.
//! * [`budget`]: closed-form infidelity contributions.
//! * [`calibration`]: ion-spacing and intensity-balance calibrations.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod budget;
pub mod calibration;
pub mod error;
pub mod gate;
pub mod optimize;
pub mod quantum;
pub mod statistics;

pub use error::{Error, Result};
