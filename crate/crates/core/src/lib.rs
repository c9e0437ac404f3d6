pub mod data;
pub mod dialogue;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod matcher;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod training;

#[cfg(test)]
mod fixtures;

pub use error::{Error, Result};
