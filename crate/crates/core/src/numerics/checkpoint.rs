//! JSON checkpoint container.
//!
//! ```json
//! {"format": "qamatch-checkpoint", "version": 1,
//!  "header": { ... },
//!  "tensors": [{"name": "encoder.w_ih", "shape": [512, 100], "values": [ ... ]}]}
//! ```
//!
//! Floats are written in shortest round-trip form, so 64-bit values survive
//! a save/load cycle bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FORMAT: &str = "qamatch-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub header: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value, tensors: Vec<(String, Tensor)>) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            header,
            tensors: tensors
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    values: t.into_values(),
                })
                .collect(),
        }
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        ck.check()?;
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container {} v{}",
                self.format, self.version
            )));
        }
        Ok(())
    }

    pub fn tensors(&self) -> Result<Vec<(String, Tensor)>> {
        self.tensors
            .iter()
            .map(|t| Ok((t.name.clone(), Tensor::new(t.shape.clone(), t.values.clone())?)))
            .collect()
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .and_then(|t| Tensor::new(t.shape.clone(), t.values.clone()).ok())
    }
}
