use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::{HistoryScope, DISTANCE_DIMS};
use crate::error::{Error, Result};

/// Architecture variants. `Hdm` is the full model; the others remove or
/// rewire one information path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// History, distance, mutual attention.
    Hdm,
    /// Distance only, no history.
    Dis,
    /// History only, no distance at the prediction layer.
    Hty,
    /// History is every turn before the question.
    Qh,
    /// History is every turn before the non-question.
    Ah,
    /// Each side attends to its own speaker's turns.
    Nm,
    /// Both sides attend to the whole history.
    Id,
    /// Plain match-LSTM: neither history nor distance.
    Mlstm,
}

/// Which history partition each side attends to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    /// Q attends H_RNQ, NQ attends H_RQ.
    Mutual,
    /// Q attends H_RQ, NQ attends H_RNQ.
    SameSpeaker,
    /// Both attend the full history in turn order.
    Joint,
    /// No attention; contexts are zero.
    Off,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Hdm,
        Variant::Dis,
        Variant::Hty,
        Variant::Qh,
        Variant::Ah,
        Variant::Nm,
        Variant::Id,
        Variant::Mlstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hdm => "HDM",
            Variant::Dis => "DIS",
            Variant::Hty => "HTY",
            Variant::Qh => "QH",
            Variant::Ah => "AH",
            Variant::Nm => "NM",
            Variant::Id => "ID",
            Variant::Mlstm => "MLSTM",
        }
    }

    pub fn uses_distance(self) -> bool {
        !matches!(self, Variant::Hty | Variant::Mlstm)
    }

    pub fn uses_history(self) -> bool {
        self.wiring() != Wiring::Off
    }

    pub fn wiring(self) -> Wiring {
        match self {
            Variant::Hdm | Variant::Hty | Variant::Qh | Variant::Ah => Wiring::Mutual,
            Variant::Nm => Wiring::SameSpeaker,
            Variant::Id => Wiring::Joint,
            Variant::Dis | Variant::Mlstm => Wiring::Off,
        }
    }

    pub fn history_scope(self) -> HistoryScope {
        match self {
            Variant::Qh => HistoryScope::BeforeQuestion,
            Variant::Ah => HistoryScope::BeforeAnswer,
            _ => HistoryScope::Between,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub embedding_dim: usize,
    /// Sentence encoder and mutual-attention size.
    pub encoder_hidden: usize,
    /// Fusion LSTM, match-LSTM and match-attention size.
    pub match_hidden: usize,
    pub dropout: f64,
    pub distance_dims: usize,
    pub classification_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Hdm,
            embedding_dim: 100,
            encoder_hidden: 128,
            match_hidden: 256,
            dropout: 0.3,
            distance_dims: DISTANCE_DIMS,
            classification_threshold: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn new(variant: Variant) -> Self {
        ModelConfig {
            variant,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.encoder_hidden == 0 || self.match_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.distance_dims != DISTANCE_DIMS {
            return Err(Error::Config(format!(
                "distance_dims must be {DISTANCE_DIMS}, got {}",
                self.distance_dims
            )));
        }
        Ok(())
    }

    /// Width of the prediction layer input.
    pub fn fc_input(&self) -> usize {
        self.match_hidden
            + if self.variant.uses_distance() {
                self.distance_dims
            } else {
                0
            }
    }

    /// Fails unless `other` has the same variant and layer sizes.
    pub fn check_compatible(&self, other: &ModelConfig) -> Result<()> {
        if self.variant != other.variant {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds variant {}, requested {}",
                self.variant, other.variant
            )));
        }
        let dims = |c: &ModelConfig| {
            [
                c.embedding_dim,
                c.encoder_hidden,
                c.match_hidden,
                c.distance_dims,
            ]
        };
        if dims(self) != dims(other) {
            return Err(Error::Checkpoint(format!(
                "checkpoint dimensions {:?} differ from requested {:?}",
                dims(self),
                dims(other)
            )));
        }
        Ok(())
    }
}
