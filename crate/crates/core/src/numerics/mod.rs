//! Dense arrays, a reverse-mode tape, LSTM cells, Adam, seeded randomness
//! and the checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod lstm;
pub mod params;
pub mod rng;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use graph::{dropout_mask, Graph, NodeId};
pub use lstm::{lstm_cell, lstm_sequence, LstmParams, LstmState};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use rng::RandomSource;
pub use tensor::{cross_entropy, sigmoid, softmax, Tensor};
