//! Monitored open-quantum-system dynamics with no-knowledge feedback.
//!
//! Dense operator and state algebra, stochastic master equation unravelings
//! (homodyne diffusion and photodetection jumps), feedback-law builders,
//! canonical models, and Liouvillian steady states. Everything here is
//! `no_std` with `alloc`; IO lives in the `noknow` crate.
#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod error;
pub mod feedback;
pub mod generator;
pub mod liouvillian;
pub mod model;
pub mod models;
pub mod noise;
pub mod operator;
pub mod sde;
pub mod state;
pub mod superop;
#[cfg(test)]
mod testutil;
pub mod unravel;

pub use error::{Error, Result};
pub use feedback::{
    beamsplitter_network, hermitian_split, jump_correction, no_knowledge_angle, no_knowledge_feedback, FeedbackKind,
    FeedbackLaw,
};
pub use liouvillian::{
    fidelity_scan, integrate_master_equation, steady_state, vectorize, vectorize_model, FidelityRow, LiouvillianMatrix,
    SteadyStateOptions, SteadyStateResult,
};
pub use model::{Channel, Detection, MonitoredModel};
pub use models::{
    bloch_rhs, dephasing_qubit, dqc_chain, general_l_model, integrate_bloch, BlochState, DephasingQubitParams,
    DqcChainParams,
};
pub use noise::NoiseStream;
pub use operator::{pauli, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, OperatorMatrix, Pauli};
pub use sde::{IntegratorConfig, Scheme};
pub use state::{QuantumState, Tolerances};
pub use superop::{
    cluster_stabilizer, cluster_state, dissipator, expectation, frobenius_distance, innovation_action,
    innovation_squared, lindblad_rhs, trace_fidelity,
};
pub use unravel::{
    coarsen_increments, ensemble_average, homodyne_signal, propagate, propagate_filter, propagate_homodyne,
    propagate_increments, propagate_jump, sme_rhs, EnsembleResult, MeasurementRecord, Observation, Sample,
    TrajectoryResult,
};
