//! Adaptive state observer for linear time-varying plants with an additive
//! exosystem disturbance of unknown frequency.
//!
//! The plant and the observer (measurable filters driving an interlaced
//! least-squares / determinant-mixing estimator) are integrated as one RK4
//! state. The plant state is reconstructed by certainty equivalence.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod estimator;
pub mod gpebo;
pub mod linalg;
pub mod observer;
pub mod ode;
pub mod plot;
pub mod scenario_file;
pub mod sim;
pub mod truth;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use sim::{simulate, RunReport, Trajectory};
pub use truth::{make_example_scenario, Scenario};
