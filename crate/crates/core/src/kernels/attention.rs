use crate::dense::Matrix;
use crate::error::{Error, Result};

use super::layers::{EncoderLayer, Linear, WeightInit};
use super::AttentionConfig;

/// Row-wise softmax. Where `mask` is zero the logit is treated as −∞, so
/// the weight is exactly zero. A row with nothing unmasked is an error.
pub fn masked_softmax(logits: &Matrix, mask: Option<&Matrix>) -> Result<Matrix> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let allowed = |j: usize| mask.is_none_or(|m| m[(i, j)] != 0.0);
        let max = (0..logits.cols())
            .filter(|&j| allowed(j))
            .map(|j| logits[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Shape(format!("attention row {i} is fully masked")));
        }
        let row = out.row_mut(i);
        let mut total = 0.0;
        for (j, w) in row.iter_mut().enumerate() {
            if allowed(j) {
                *w = (logits[(i, j)] - max).exp();
                total += *w;
            }
        }
        for w in row.iter_mut() {
            *w /= total;
        }
    }
    Ok(out)
}

pub struct EncoderOutput {
    pub states: Matrix,
    /// `attention[layer][head]`, each `N × N`.
    pub attention: Vec<Vec<Matrix>>,
}

/// Transformer encoder over node states, masked by the augmented adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphEncoder {
    pub layers: Vec<EncoderLayer>,
    pub d_model: usize,
}

impl GraphEncoder {
    pub const DEFAULT_LAYERS: usize = 2;

    pub fn new(cfg: &AttentionConfig, layers: usize) -> Result<Self> {
        cfg.validate()?;
        let mut init = WeightInit::new(cfg.seed);
        Ok(GraphEncoder {
            layers: (0..layers)
                .map(|_| EncoderLayer::new(&mut init, cfg.d_model, cfg.heads, cfg.d_ff))
                .collect(),
            d_model: cfg.d_model,
        })
    }

    /// `adjacency` is the binary `(N_V + 1)²` mask; it must have a unit
    /// diagonal so no row is fully masked.
    pub fn forward(&self, nodes: &Matrix, adjacency: &Matrix) -> Result<EncoderOutput> {
        let n = nodes.rows();
        if adjacency.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "adjacency {}x{} does not match {n} nodes",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        assert!(
            (0..n).all(|i| adjacency[(i, i)] != 0.0),
            "adjacency must carry self-loops"
        );
        self.run(nodes, Some(adjacency))
    }

    pub fn forward_unmasked(&self, nodes: &Matrix) -> Result<EncoderOutput> {
        self.run(nodes, None)
    }

    fn run(&self, nodes: &Matrix, mask: Option<&Matrix>) -> Result<EncoderOutput> {
        if nodes.cols() != self.d_model {
            return Err(Error::Shape(format!(
                "node states have width {}, expected {}",
                nodes.cols(),
                self.d_model
            )));
        }
        let mut states = nodes.clone();
        let mut attention = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, weights) = layer.forward(&states, mask)?;
            states = next;
            attention.push(weights);
        }
        Ok(EncoderOutput { states, attention })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(EncoderLayer::parameter_count).sum()
    }
}

pub struct PropagatedAttention {
    /// `T × d_model` output after the output projection.
    pub context: Matrix,
    /// Per head: softmax-normalized `α`, `T × N`.
    pub weights: Vec<Matrix>,
    /// Per head: `α·Pᵀ` renormalized to unit row sums.
    pub propagated: Vec<Matrix>,
}

/// Cross-attention from decoder states to graph nodes whose weights are
/// propagated over the graph before being applied to the values.
///
/// Logits are `(y W_Q)(v W_K)ᵀ / √d_k` with bias-free query and key
/// projections; value and output projections carry biases.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPropCrossAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl GraphPropCrossAttention {
    pub fn new(cfg: &AttentionConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = WeightInit::new(cfg.seed.wrapping_add(1));
        Ok(Self::with_init(&mut init, cfg.d_model, cfg.heads))
    }

    pub fn with_init(init: &mut WeightInit, d_model: usize, heads: usize) -> Self {
        GraphPropCrossAttention {
            query: Linear::new(init, d_model, d_model, false),
            key: Linear::new(init, d_model, d_model, false),
            value: Linear::new(init, d_model, d_model, true),
            output: Linear::new(init, d_model, d_model, true),
            heads,
        }
    }

    pub fn forward(&self, decoder: &Matrix, nodes: &Matrix, propagation: &Matrix) -> Result<PropagatedAttention> {
        let n = nodes.rows();
        if propagation.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "propagation matrix {}x{} does not match {n} nodes",
                propagation.rows(),
                propagation.cols()
            )));
        }
        let d_model = self.query.input_dim();
        if decoder.cols() != d_model || nodes.cols() != d_model {
            return Err(Error::Shape(format!(
                "decoder width {} and node width {} must both be {d_model}",
                decoder.cols(),
                nodes.cols()
            )));
        }
        let q = self.query.forward(decoder)?;
        let k = self.key.forward(nodes)?;
        let v = self.value.forward(nodes)?;
        let d_k = d_model / self.heads;
        let scale = (d_k as f64).sqrt().recip();
        let mut weights = Vec::with_capacity(self.heads);
        let mut propagated = Vec::with_capacity(self.heads);
        let mut context = Matrix::zeros(decoder.rows(), 0);
        for h in 0..self.heads {
            let logits = q.columns(h * d_k, d_k).matmul_transposed(&k.columns(h * d_k, d_k))?.scale(scale);
            let alpha = masked_softmax(&logits, None)?;
            let mut prop = alpha.matmul_transposed(propagation)?;
            for i in 0..prop.rows() {
                let row = prop.row_mut(i);
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter_mut().for_each(|w| *w /= total);
                }
            }
            context = context.hcat(&prop.matmul(&v.columns(h * d_k, d_k))?)?;
            weights.push(alpha);
            propagated.push(prop);
        }
        Ok(PropagatedAttention {
            context: self.output.forward(&context)?,
            weights,
            propagated,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.query.parameter_count()
            + self.key.parameter_count()
            + self.value.parameter_count()
            + self.output.parameter_count()
    }
}

/// Fully connected `2·d_model → d_model` fusion of text and graph context.
#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub linear: Linear,
}

impl Fusion {
    pub fn new(init: &mut WeightInit, d_model: usize) -> Self {
        Fusion {
            linear: Linear::new(init, 2 * d_model, d_model, true),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.linear.parameter_count()
    }
}

/// `[text ‖ graph]·W + b + residual`; dropout is the identity.
pub fn fuse_graph_text(text_ctx: &Matrix, graph_ctx: &Matrix, residual: &Matrix, fusion: &Fusion) -> Result<Matrix> {
    if text_ctx.shape() != graph_ctx.shape() || text_ctx.shape() != residual.shape() {
        return Err(Error::Shape(format!(
            "text {:?}, graph {:?} and residual {:?} must agree",
            text_ctx.shape(),
            graph_ctx.shape(),
            residual.shape()
        )));
    }
    if fusion.linear.input_dim() != 2 * text_ctx.cols() {
        return Err(Error::Shape(format!(
            "fusion expects width {}, contexts have {}",
            fusion.linear.input_dim() / 2,
            text_ctx.cols()
        )));
    }
    fusion.linear.forward(&text_ctx.hcat(graph_ctx)?)?.add(residual)
}
