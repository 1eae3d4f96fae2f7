use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};

/// Which tail term the propagation polynomial uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationFormula {
    /// `ω^p · Â`, as the formula is written.
    #[default]
    Literal,
    /// `ω^p · Â^p`, the truncated personalized-PageRank reading.
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Teleport weight, strictly between 0 and 1.
    pub omega: f64,
    /// Aggregation steps, at least 1.
    pub steps: usize,
    pub formula: PropagationFormula,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            omega: 0.85,
            steps: 2,
            formula: PropagationFormula::Literal,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!("omega {} must lie in (0, 1)", self.omega)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row-sum tolerance for the normalized adjacency.
pub const ROW_STOCHASTIC_TOL: f64 = 1e-9;

/// `P = ω^p·T + (1 − ω)·Σ_{i<p} ω^i Â^i` where `T` is `Â` or `Â^p`.
///
/// Powers are accumulated by repeated right multiplication.
pub fn propagation_matrix(a_hat: &Matrix, cfg: &PropagationConfig) -> Result<Matrix> {
    cfg.validate()?;
    let (n, m) = a_hat.shape();
    if n != m {
        return Err(Error::Shape(format!("propagation needs a square matrix, got {n}x{m}")));
    }
    for (row, sum) in a_hat.row_sums().into_iter().enumerate() {
        if sum.is_nan() || (sum - 1.0).abs() > ROW_STOCHASTIC_TOL {
            return Err(Error::NotRowStochastic { row, sum });
        }
    }
    let omega = cfg.omega;
    let mut power = Matrix::identity(n);
    let mut series = Matrix::identity(n);
    let mut coeff = 1.0;
    for _ in 1..cfg.steps {
        power = power.matmul(a_hat)?;
        coeff *= omega;
        series = series.add(&power.scale(coeff))?;
    }
    let tail = match cfg.formula {
        PropagationFormula::Literal => a_hat.clone(),
        PropagationFormula::Power => power.matmul(a_hat)?,
    };
    tail.scale(omega.powi(cfg.steps as i32))
        .add(&series.scale(1.0 - omega))
}
