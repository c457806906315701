//! Dense numerical laboratory for variable-time quantum walks and
//! variable-time subroutine composition.
//!
//! The crate builds the exact vector-space objects behind the constructions
//! (star states, transition states, history states, witnesses), checks their
//! identities numerically and runs the phase-estimation decision procedure on
//! small instances.

pub mod alg_compose;
pub mod config;
pub mod error;
pub mod frameworks;
pub mod linalg;
pub mod network;
pub mod phase_estimation;
pub mod random;
pub mod subroutine;
pub mod vt_states;
pub mod walk_compose;

pub use config::Tolerances;
pub use error::{Error, Result};
