//! Adaptive Trotterization of driven spin chains.
//!
//! The step size of a second-order Trotter integrator is chosen on the fly by
//! watching how much one step changes the mean and variance of a truncated
//! Magnus generator `H_[k](t, dt)`, which the exact evolution would conserve
//! across the window.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dense;
pub mod error;
pub mod hamiltonian;
pub mod magnus;
pub mod pauli;
pub mod scaling;
pub mod state;
pub mod trace;

pub use controller::{
    constraints_ok, Candidate, FreezeAction, GlobalAccumulator, RunSummary, Selection, Simulator, StepPolicy,
    StepRecord, StopCondition, ToleranceSet, TraceLog,
};
pub use error::{Error, Result};
pub use hamiltonian::{Boundary, DriveSchedule, HamiltonianSpec, StaticOperators};
pub use magnus::{build_piecewise_hamiltonian, MagnusBuilder, PiecewiseHamiltonian};
pub use pauli::{commutator, Pauli, PauliOperator, PauliString, PauliTerm};
pub use scaling::{scaling_study, ScalingFit, ScalingRow, ScalingTable};
pub use state::{magnetization, prepare_initial, Axis, OracleSettings, StateVector, TrotterEngine};
pub use trace::{RunMetadata, CSV_COLUMNS};
