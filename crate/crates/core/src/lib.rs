//! Quantum convolutional filters for multichannel images, simulated on a
//! dense statevector, with a classical dense head and a training harness.

pub mod ansatz;
pub mod circuit;
pub mod datasets;
pub mod gradients;
pub mod head;
mod kernel;
pub mod model;
pub mod qconv;
pub mod rng;
pub mod sim;
pub mod train;

pub use ansatz::{AnsatzBlock, AnsatzError, BlockKind, ParamStore};
pub use circuit::{Circuit, Readout, Workspace};
pub use head::{AdamState, Head};
pub use model::{Model, ModelError, ModelSpec};
pub use qconv::{
    AnsatzKind, ConvConfig, FeatureMap, ImageTensor, Method, QconvError, QuantumFilter, WevInit,
};
pub use rng::Rng;
pub use sim::{GateOp, Mat2, SimError, Statevector, C64};
pub use train::{EpochMetrics, RunConfig, TrainError};
