//! Policy networks: hand-rolled `f64` linear algebra, LSTM and linear
//! layers with exact analytic backward passes, the recurrent Gaussian
//! policy with observation-dependent variance, and versioned checkpoints.
//!
//! Everything here is deliberately dependency-free and single-threaded so
//! that gradients stay finite-difference-checkable and runs stay
//! bit-reproducible across machines.

pub mod checkpoint;
pub mod layers;
pub mod linalg;
pub mod network;

pub use checkpoint::{Checkpoint, CheckpointError, TrainingProgress, CHECKPOINT_FORMAT_VERSION};
pub use layers::{sample_dropout_mask, Linear, LstmCell};
pub use linalg::Matrix;
pub use network::{
    nav_input_scale, Architecture, DropoutMasks, DropoutMode, ForwardCache, LstmState, OdvPolicy,
    OutputGrads, PolicyGrads, PolicyOutput, ACTION_DIM, DROPOUT_TEST, DROPOUT_TRAIN,
    LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};
