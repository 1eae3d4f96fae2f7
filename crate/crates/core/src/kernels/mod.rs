//! Deterministic forward-pass reference kernels for graph-aware attention.
//!
//! Dropout is the identity throughout; the kernels exist to pin down the
//! arithmetic, not to train.

mod attention;
pub mod check;
mod layers;
mod params;
mod propagation;

pub use attention::{
    fuse_graph_text, masked_softmax, EncoderOutput, Fusion, GraphEncoder, GraphPropCrossAttention,
    PropagatedAttention,
};
pub use layers::{EncoderLayer, FeedForward, LayerNorm, Linear, MultiHeadAttention, WeightInit};
pub use params::{count_parameters, ArchitectureConfig, SummarizerModel, ParameterCount};
pub use propagation::{propagation_matrix, PropagationConfig, PropagationFormula};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub d_model: usize,
    pub heads: usize,
    /// Feed-forward width of encoder layers.
    pub d_ff: usize,
    /// Kept for completeness; reference mode applies dropout as identity.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            d_model: 16,
            heads: 4,
            d_ff: 32,
            dropout: 0.1,
            seed: 7,
        }
    }
}

impl AttentionConfig {
    pub fn d_k(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}
