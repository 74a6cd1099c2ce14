//! Recurrent trend classifiers written from scratch: vanilla RNN, GRU and LSTM
//! cells stacked into layers with a softmax read-out, exact backpropagation
//! through time, Adam and RMSprop, and a seeded training loop.

mod cell;
mod mat;
mod model;
mod optim;
mod params;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub use cell::{backward, forward, forward_with_dropout, sequence_loss, ForwardCache};
pub use mat::Matrix;
pub use model::{InputScaling, RnnModel};
pub use optim::{adam_step, rmsprop_step, OptimState, OptimizerKind};
pub use params::{LayerParams, Parameters, RnnParams};
pub use train::{train, TrainOptions, TrainOutcome, DIVERGENCE_FACTOR, DIVERGENCE_PATIENCE};

pub const OUT_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Vanilla,
    Gru,
    Lstm,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Vanilla, CellKind::Gru, CellKind::Lstm];

    /// Number of stacked gate blocks in the weight matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Vanilla => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Vanilla => "vanilla",
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "rnn" => Ok(CellKind::Vanilla),
            "gru" => Ok(CellKind::Gru),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(Error::Config(format!("unknown cell type `{other}`"))),
        }
    }
}

fn three() -> usize {
    OUT_CLASSES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnSpec {
    pub cell: CellKind,
    pub n_layers: usize,
    pub hidden_dim: usize,
    /// Inverted dropout rate on the outputs of every layer but the last.
    pub dropout: f64,
    #[serde(default = "three")]
    pub out_classes: usize,
}

impl RnnSpec {
    pub fn new(cell: CellKind, n_layers: usize, hidden_dim: usize, dropout: f64) -> Result<Self> {
        let s = Self { cell, n_layers, hidden_dim, dropout, out_classes: OUT_CLASSES };
        s.validate()?;
        Ok(s)
    }

    /// GRU, 2 layers of 20 units, dropout 0.2.
    pub fn baseline() -> Self {
        Self { cell: CellKind::Gru, n_layers: 2, hidden_dim: 20, dropout: 0.2, out_classes: OUT_CLASSES }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return config_err("rnn needs at least one layer");
        }
        if self.hidden_dim == 0 {
            return config_err("rnn hidden dimension must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return config_err(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.out_classes != OUT_CLASSES {
            return config_err(format!("rnn read-out must have 3 classes, got {}", self.out_classes));
        }
        Ok(())
    }

    pub(crate) fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            1
        } else {
            self.hidden_dim
        }
    }
}
