//! Trainable-parameter accounting for the full summarization architecture:
//! a text encoder, the graph encoder, and a decoder whose layers add graph
//! cross-attention plus a fusion layer.

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;

use super::attention::{Fusion, GraphPropCrossAttention};
use super::layers::{EncoderLayer, FeedForward, LayerNorm, MultiHeadAttention, WeightInit};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    /// Learned text-encoder positions.
    pub max_positions: usize,
    /// Segment-type embedding rows of the text encoder.
    pub type_vocab: usize,
    pub text_layers: usize,
    pub graph_layers: usize,
    pub decoder_layers: usize,
    pub decoder_d_ff: usize,
    /// Learned decoder positions; 0 for sinusoidal.
    pub decoder_positions: usize,
    /// Decoder reuses the encoder token embedding.
    pub share_decoder_embeddings: bool,
    /// Output projection tied to the decoder token embedding.
    pub tie_output_projection: bool,
}

impl ArchitectureConfig {
    /// RoBERTa-base text encoder with a 1024-token context, two graph
    /// encoder layers, and a six-layer decoder.
    pub fn base_scale() -> Self {
        ArchitectureConfig {
            vocab_size: 50265,
            d_model: 768,
            heads: 12,
            d_ff: 3072,
            max_positions: 1026,
            type_vocab: 1,
            text_layers: 12,
            graph_layers: 2,
            decoder_layers: 6,
            decoder_d_ff: 2048,
            decoder_positions: 0,
            share_decoder_embeddings: true,
            tie_output_projection: true,
        }
    }

    /// Number of `vocab × d_model` tables.
    pub fn vocab_tables(&self) -> usize {
        1 + usize::from(!self.share_decoder_embeddings) + usize::from(!self.tie_output_projection)
    }
}

pub trait ParameterCount {
    fn parameter_count(&self) -> usize;
}

fn linear(i: usize, o: usize, bias: bool) -> usize {
    i * o + if bias { o } else { 0 }
}

fn attention_block(d: usize) -> usize {
    4 * linear(d, d, true)
}

fn encoder_layer(d: usize, ff: usize) -> usize {
    attention_block(d) + 2 * d + linear(d, ff, true) + linear(ff, d, true) + 2 * d
}

fn decoder_layer(d: usize, ff: usize) -> usize {
    let self_attn = attention_block(d) + 2 * d;
    let text_cross = attention_block(d);
    let graph_cross = 2 * linear(d, d, false) + 2 * linear(d, d, true);
    let fusion = linear(2 * d, d, true) + 2 * d;
    let ffn = linear(d, ff, true) + linear(ff, d, true) + 2 * d;
    self_attn + text_cross + graph_cross + fusion + ffn
}

/// Closed-form count of every trainable tensor, without allocating any.
pub fn count_parameters(cfg: &ArchitectureConfig) -> usize {
    let d = cfg.d_model;
    let text_embeddings = cfg.vocab_size * d + cfg.max_positions * d + cfg.type_vocab * d + 2 * d;
    let decoder_embeddings = if cfg.share_decoder_embeddings { 0 } else { cfg.vocab_size * d }
        + cfg.decoder_positions * d;
    let output = if cfg.tie_output_projection { 0 } else { cfg.vocab_size * d };
    text_embeddings
        + cfg.text_layers * encoder_layer(d, cfg.d_ff)
        + cfg.graph_layers * encoder_layer(d, cfg.d_ff)
        + decoder_embeddings
        + cfg.decoder_layers * decoder_layer(d, cfg.decoder_d_ff)
        + output
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer {
    pub self_attention: MultiHeadAttention,
    pub self_norm: LayerNorm,
    pub text_attention: MultiHeadAttention,
    pub graph_attention: GraphPropCrossAttention,
    pub fusion: Fusion,
    pub fusion_norm: LayerNorm,
    pub feed_forward: FeedForward,
    pub output_norm: LayerNorm,
}

impl ParameterCount for DecoderLayer {
    fn parameter_count(&self) -> usize {
        self.self_attention.parameter_count()
            + self.self_norm.parameter_count()
            + self.text_attention.parameter_count()
            + self.graph_attention.parameter_count()
            + self.fusion.parameter_count()
            + self.fusion_norm.parameter_count()
            + self.feed_forward.parameter_count()
            + self.output_norm.parameter_count()
    }
}

/// Every tensor of the architecture, materialized. Only practical for small
/// configurations; used to check [`count_parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct SummarizerModel {
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub type_embedding: Matrix,
    pub embedding_norm: LayerNorm,
    pub text_layers: Vec<EncoderLayer>,
    pub graph_layers: Vec<EncoderLayer>,
    pub decoder_embedding: Option<Matrix>,
    pub decoder_positions: Option<Matrix>,
    pub decoder_layers: Vec<DecoderLayer>,
    pub output_projection: Option<Matrix>,
}

impl SummarizerModel {
    pub fn new(cfg: &ArchitectureConfig, seed: u64) -> Self {
        let mut init = WeightInit::new(seed);
        let d = cfg.d_model;
        let token_embedding = init.matrix(cfg.vocab_size, d);
        let position_embedding = init.matrix(cfg.max_positions, d);
        let type_embedding = init.matrix(cfg.type_vocab, d);
        let text_layers = (0..cfg.text_layers)
            .map(|_| EncoderLayer::new(&mut init, d, cfg.heads, cfg.d_ff))
            .collect();
        let graph_layers = (0..cfg.graph_layers)
            .map(|_| EncoderLayer::new(&mut init, d, cfg.heads, cfg.d_ff))
            .collect();
        let decoder_embedding = (!cfg.share_decoder_embeddings).then(|| init.matrix(cfg.vocab_size, d));
        let decoder_positions = (cfg.decoder_positions > 0).then(|| init.matrix(cfg.decoder_positions, d));
        let decoder_layers = (0..cfg.decoder_layers)
            .map(|_| DecoderLayer {
                self_attention: MultiHeadAttention::new(&mut init, d, cfg.heads),
                self_norm: LayerNorm::new(d),
                text_attention: MultiHeadAttention::new(&mut init, d, cfg.heads),
                graph_attention: GraphPropCrossAttention::with_init(&mut init, d, cfg.heads),
                fusion: Fusion::new(&mut init, d),
                fusion_norm: LayerNorm::new(d),
                feed_forward: FeedForward::new(&mut init, d, cfg.decoder_d_ff),
                output_norm: LayerNorm::new(d),
            })
            .collect();
        let output_projection = (!cfg.tie_output_projection).then(|| init.matrix(d, cfg.vocab_size));
        SummarizerModel {
            token_embedding,
            position_embedding,
            type_embedding,
            embedding_norm: LayerNorm::new(d),
            text_layers,
            graph_layers,
            decoder_embedding,
            decoder_positions,
            decoder_layers,
            output_projection,
        }
    }
}

impl ParameterCount for SummarizerModel {
    fn parameter_count(&self) -> usize {
        let table = |m: &Matrix| m.as_slice().len();
        let opt = |m: &Option<Matrix>| m.as_ref().map_or(0, table);
        table(&self.token_embedding)
            + table(&self.position_embedding)
            + table(&self.type_embedding)
            + self.embedding_norm.parameter_count()
            + self.text_layers.iter().map(EncoderLayer::parameter_count).sum::<usize>()
            + self.graph_layers.iter().map(EncoderLayer::parameter_count).sum::<usize>()
            + opt(&self.decoder_embedding)
            + opt(&self.decoder_positions)
            + self.decoder_layers.iter().map(ParameterCount::parameter_count).sum::<usize>()
            + opt(&self.output_projection)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ArchitectureConfig {
        ArchitectureConfig {
            vocab_size: 11,
            d_model: 8,
            heads: 2,
            d_ff: 16,
            max_positions: 12,
            type_vocab: 1,
            text_layers: 1,
            graph_layers: 1,
            decoder_layers: 1,
            decoder_d_ff: 12,
            decoder_positions: 0,
            share_decoder_embeddings: false,
            tie_output_projection: false,
        }
    }

    #[test]
    fn closed_form_matches_instantiated_model() {
        let mut cfg = toy();
        for share in [false, true] {
            for tie in [false, true] {
                for positions in [0, 5] {
                    cfg.share_decoder_embeddings = share;
                    cfg.tie_output_projection = tie;
                    cfg.decoder_positions = positions;
                    let model = SummarizerModel::new(&cfg, 1);
                    assert_eq!(count_parameters(&cfg), model.parameter_count(), "{cfg:?}");
                }
            }
        }
    }

    #[test]
    fn vocab_growth_is_linear() {
        let mut cfg = toy();
        for (share, tie) in [(false, false), (true, false), (true, true)] {
            cfg.share_decoder_embeddings = share;
            cfg.tie_output_projection = tie;
            let base = count_parameters(&cfg);
            let mut doubled = cfg.clone();
            doubled.vocab_size *= 2;
            assert_eq!(
                count_parameters(&doubled) - base,
                cfg.vocab_size * cfg.d_model * cfg.vocab_tables()
            );
        }
    }

    #[test]
    fn base_scale_count_is_plausible() {
        let n = count_parameters(&ArchitectureConfig::base_scale());
        assert!((150_000_000..300_000_000).contains(&n), "{n}");
    }
}
