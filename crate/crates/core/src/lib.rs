//! Training laboratory for random-structure variational circuits whose angles
//! are either optimized directly (SQC) or emitted by a small neural network
//! (NEQC-NN, NEQC-CNN).
//!
//! - [`qstate`]: dense statevector, gates, cost and fidelity.
//! - [`circuit`]: the random ansatz, its parameter layout and JSON form.
//! - [`diff`]: adjoint circuit gradients and generator backpropagation.
//! - [`train`]: SGD with momentum, stopping rules, paired multi-run sweeps.
//! - [`analysis`]: expressibility (KL to Haar) and loss-landscape grids.

pub mod analysis;
pub mod circuit;
pub mod diff;
pub mod error;
pub mod qstate;
pub mod seed;
pub mod train;

pub use circuit::{block_count, CircuitStructure, ParamVector};
pub use error::{Error, Result};
pub use qstate::State;
pub use train::{ModelKind, RunRecord, StopReason, TrainConfig};
