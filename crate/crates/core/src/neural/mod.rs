//! The densely connected BLSTM mask estimator.
//!
//! ```text
//! LPS (T x f) -> 1-D conv, kernel 2n+1 -> C
//! block 1 input  [C]            (f)   -> BLSTM -> projection -> B1
//! block 2 input  [C, B1]        (2f)  -> BLSTM -> projection -> B2
//! block 3 input  [C, B1, B2]    (3f)  -> BLSTM -> projection -> B3
//! B3 -> fc1 (ReLU) -> fc2 (sigmoid) -> mask (T x f)
//! ```
//!
//! Every BLSTM runs one LSTM per direction with `h` cells, concatenates both
//! directions to `2h` and projects back to `f`.

mod adam;
mod model;
mod params;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use model::{backward, forward, forward_normalized, loss_mse};
pub use params::{
    decode_model, encode_model, init_params, read_model, write_model, BlstmBlock, DBlstmParams,
    LstmDirection, Weights, MODEL_MAGIC,
};
pub use train::{
    batch_gradients, evaluate_loss, load_examples, prepare_example, train, train_on_examples,
    EpochRecord, Example, TrainConfig, TrainingHistory,
};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    /// Feature dimension `f`, also the width of every block output.
    pub feat_dim: usize,
    /// Temporal context `n`; the convolution spans `2n + 1` frames.
    pub context: usize,
    /// LSTM cells per direction.
    pub hidden: usize,
    pub num_blstm_layers: usize,
    pub fc_dim: usize,
}

impl NetConfig {
    /// 257 features, kernel 7, 512 cells per direction.
    pub fn full() -> Self {
        Self {
            feat_dim: 257,
            context: 3,
            hidden: 512,
            num_blstm_layers: 3,
            fc_dim: 257,
        }
    }

    /// Same topology with 32 cells per direction.
    pub fn desk() -> Self {
        Self {
            hidden: 32,
            ..Self::full()
        }
    }

    pub fn tiny(feat_dim: usize, context: usize, hidden: usize) -> Self {
        Self {
            feat_dim,
            context,
            hidden,
            num_blstm_layers: 3,
            fc_dim: feat_dim,
        }
    }

    pub fn kernel(&self) -> usize {
        2 * self.context + 1
    }

    /// Input width of block `k` (0-based): the conv output plus all earlier
    /// block outputs.
    pub fn block_input_dim(&self, k: usize) -> usize {
        (k + 1) * self.feat_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.feat_dim == 0 || self.hidden == 0 || self.num_blstm_layers == 0 {
            return Err(Error::Config(format!(
                "feat_dim, hidden and num_blstm_layers must be positive: {self:?}"
            )));
        }
        if self.fc_dim != self.feat_dim {
            return Err(Error::Config(format!(
                "fc_dim {} must equal feat_dim {}",
                self.fc_dim, self.feat_dim
            )));
        }
        Ok(())
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}
