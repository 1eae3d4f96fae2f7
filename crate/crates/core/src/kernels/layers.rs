use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::Matrix;
use crate::error::{Error, Result};

use super::attention::masked_softmax;

/// Seeded uniform initializer, `U(-1/√fan_in, 1/√fan_in)`.
pub struct WeightInit {
    rng: ChaCha8Rng,
}

impl WeightInit {
    pub fn new(seed: u64) -> Self {
        WeightInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let bound = (rows.max(1) as f64).sqrt().recip();
        Matrix::from_fn(rows, cols, |_, _| self.rng.gen_range(-bound..=bound))
    }

    pub fn vector(&mut self, len: usize, fan_in: usize) -> Vec<f64> {
        let bound = (fan_in.max(1) as f64).sqrt().recip();
        (0..len).map(|_| self.rng.gen_range(-bound..=bound)).collect()
    }
}

/// `x·W + b` with `W` stored input-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    pub fn new(init: &mut WeightInit, input: usize, output: usize, bias: bool) -> Self {
        let weight = init.matrix(input, output);
        let bias = bias.then(|| init.vector(output, input));
        Linear { weight, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.matmul(&self.weight)?;
        if let Some(b) = &self.bias {
            for i in 0..out.rows() {
                for (o, bj) in out.row_mut(i).iter_mut().zip(b) {
                    *o += bj;
                }
            }
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        let d = x.cols() as f64;
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = (var + self.eps).sqrt().recip();
            for ((v, g), b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = (*v - mean) * inv * g + b;
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }
}

/// Position-wise `ReLU(x·W₁ + b₁)·W₂ + b₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(init: &mut WeightInit, d_model: usize, d_ff: usize) -> Self {
        FeedForward {
            up: Linear::new(init, d_model, d_ff, true),
            down: Linear::new(init, d_ff, d_model, true),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let hidden = self.up.forward(x)?.map(|v| v.max(0.0));
        self.down.forward(&hidden)
    }

    pub fn parameter_count(&self) -> usize {
        self.up.parameter_count() + self.down.parameter_count()
    }
}

/// Multi-head scaled dot-product attention with an optional binary mask.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(init: &mut WeightInit, d_model: usize, heads: usize) -> Self {
        MultiHeadAttention {
            query: Linear::new(init, d_model, d_model, true),
            key: Linear::new(init, d_model, d_model, true),
            value: Linear::new(init, d_model, d_model, true),
            output: Linear::new(init, d_model, d_model, true),
            heads,
        }
    }

    /// Returns the output and each head's attention weights. Positions with
    /// `mask[(i, j)] == 0` get a −∞ logit and hence exactly zero weight.
    pub fn forward(&self, queries: &Matrix, keys: &Matrix, mask: Option<&Matrix>) -> Result<(Matrix, Vec<Matrix>)> {
        if let Some(m) = mask {
            if m.shape() != (queries.rows(), keys.rows()) {
                return Err(Error::Shape(format!(
                    "mask {}x{} does not cover {} queries and {} keys",
                    m.rows(),
                    m.cols(),
                    queries.rows(),
                    keys.rows()
                )));
            }
        }
        let q = self.query.forward(queries)?;
        let k = self.key.forward(keys)?;
        let v = self.value.forward(keys)?;
        let d_model = q.cols();
        let d_k = d_model / self.heads;
        let scale = (d_k as f64).sqrt().recip();
        let mut weights = Vec::with_capacity(self.heads);
        let mut context = Matrix::zeros(queries.rows(), 0);
        for h in 0..self.heads {
            let qh = q.columns(h * d_k, d_k);
            let kh = k.columns(h * d_k, d_k);
            let vh = v.columns(h * d_k, d_k);
            let logits = qh.matmul_transposed(&kh)?.scale(scale);
            let alpha = masked_softmax(&logits, mask)?;
            context = context.hcat(&alpha.matmul(&vh)?)?;
            weights.push(alpha);
        }
        Ok((self.output.forward(&context)?, weights))
    }

    pub fn parameter_count(&self) -> usize {
        self.query.parameter_count()
            + self.key.parameter_count()
            + self.value.parameter_count()
            + self.output.parameter_count()
    }
}

/// Post-norm transformer encoder layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub attention_norm: LayerNorm,
    pub feed_forward: FeedForward,
    pub output_norm: LayerNorm,
}

impl EncoderLayer {
    pub fn new(init: &mut WeightInit, d_model: usize, heads: usize, d_ff: usize) -> Self {
        EncoderLayer {
            attention: MultiHeadAttention::new(init, d_model, heads),
            attention_norm: LayerNorm::new(d_model),
            feed_forward: FeedForward::new(init, d_model, d_ff),
            output_norm: LayerNorm::new(d_model),
        }
    }

    pub fn forward(&self, x: &Matrix, mask: Option<&Matrix>) -> Result<(Matrix, Vec<Matrix>)> {
        let (attended, weights) = self.attention.forward(x, x, mask)?;
        let h = self.attention_norm.forward(&x.add(&attended)?);
        let out = self.output_norm.forward(&h.add(&self.feed_forward.forward(&h)?)?);
        Ok((out, weights))
    }

    pub fn parameter_count(&self) -> usize {
        self.attention.parameter_count()
            + self.attention_norm.parameter_count()
            + self.feed_forward.parameter_count()
            + self.output_norm.parameter_count()
    }
}
