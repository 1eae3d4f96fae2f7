//! Independent loop oracles and the self-check suite behind `usg kernel-check`.
//!
//! Oracles here deliberately avoid [`Matrix::matmul`] and the other library
//! kernels so that agreement means something.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{degree_normalize_rows, node_init};
use crate::augment::{augment_graph, AugmentedGraph};
use crate::dense::Matrix;
use crate::graph::{GraphEdge, GraphNode, SemanticGraph, Variant};
use crate::sparse::SparseMatrix;

use super::attention::{fuse_graph_text, masked_softmax, Fusion, GraphEncoder, GraphPropCrossAttention};
use super::layers::{Linear, WeightInit};
use super::propagation::{propagation_matrix, PropagationConfig, PropagationFormula};
use super::AttentionConfig;

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

fn naive_axpy(a: &Matrix, s: f64, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + s * b[(i, j)])
}

/// Evaluates the propagation polynomial with Horner's rule:
/// `Σ_{i<p} ω^i Â^i = I + ωÂ(I + ωÂ(… ))`.
pub fn horner_oracle(a_hat: &Matrix, cfg: &PropagationConfig) -> Matrix {
    let n = a_hat.rows();
    let id = Matrix::identity(n);
    let mut series = id.clone();
    for _ in 1..cfg.steps {
        series = naive_axpy(&id, cfg.omega, &naive_matmul(a_hat, &series));
    }
    let tail = match cfg.formula {
        PropagationFormula::Literal => a_hat.clone(),
        PropagationFormula::Power => (1..cfg.steps).fold(a_hat.clone(), |acc, _| naive_matmul(&acc, a_hat)),
    };
    let lead = cfg.omega.powi(cfg.steps as i32);
    Matrix::from_fn(n, n, |i, j| lead * tail[(i, j)] + (1.0 - cfg.omega) * series[(i, j)])
}

/// `α′_ij = Σ_k α_ik·P_jk`, then each row divided by its sum.
pub fn alpha_prop_oracle(alpha: &Matrix, p: &Matrix) -> Matrix {
    let mut out = Matrix::from_fn(alpha.rows(), p.rows(), |i, j| {
        let mut s = 0.0;
        for k in 0..alpha.cols() {
            s += alpha[(i, k)] * p[(j, k)];
        }
        s
    });
    for i in 0..out.rows() {
        let total: f64 = out.row(i).iter().sum();
        if total > 0.0 {
            out.row_mut(i).iter_mut().for_each(|w| *w /= total);
        }
    }
    out
}

/// Loop form of `[text ‖ graph]·W + b + residual`.
pub fn fusion_oracle(text: &Matrix, graph: &Matrix, residual: &Matrix, linear: &Linear) -> Matrix {
    let d = text.cols();
    Matrix::from_fn(text.rows(), linear.output_dim(), |i, j| {
        let mut s = linear.bias.as_ref().map_or(0.0, |b| b[j]);
        for k in 0..d {
            s += text[(i, k)] * linear.weight[(k, j)];
            s += graph[(i, k)] * linear.weight[(d + k, j)];
        }
        s + residual[(i, j)]
    })
}

/// Mean of the token rows aligned to each node, read off the binary `C`.
pub fn node_init_oracle(c: &SparseMatrix, t: &Matrix) -> Matrix {
    let dense = c.to_dense();
    let mut out = Matrix::zeros(c.rows, t.cols());
    for i in 0..c.rows {
        let members: Vec<usize> = (0..c.cols).filter(|&j| dense[(i, j)] != 0.0).collect();
        if members.is_empty() {
            continue;
        }
        for col in 0..t.cols() {
            let mut s = 0.0;
            for &j in &members {
                s += t[(j, col)];
            }
            out[(i, col)] = s / members.len() as f64;
        }
    }
    out
}

/// Boolean `S ∨ S²` over the symmetrized edges, with unit diagonal, plus a
/// trailing all-ones supernode row and column.
pub fn closure_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut s = vec![vec![false; n]; n];
    for &(a, b) in edges {
        if a != b {
            s[a][b] = true;
            s[b][a] = true;
        }
    }
    let mut out = vec![vec![true; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = i == j || s[i][j] || (0..n).any(|k| s[i][k] && s[k][j]);
        }
    }
    out
}

/// Dense nonnegative matrix with a positive diagonal, rows summing to 1.
pub fn random_row_stochastic(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut m = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.gen_range(0.1..1.0)
        } else if rng.gen_bool(0.3) {
            rng.gen_range(0.0..1.0)
        } else {
            0.0
        }
    });
    for i in 0..n {
        let total: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    m
}

/// A graph with `n` single-token nodes and random directed edges.
pub fn random_graph(rng: &mut impl Rng, n: usize, edge_count: usize) -> SemanticGraph {
    let mut edges: Vec<(usize, usize)> = (0..edge_count)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .filter(|(a, b)| a != b)
        .collect();
    edges.sort_unstable();
    edges.dedup();
    SemanticGraph {
        doc_id: "random".into(),
        variant: Variant::Ppr,
        nodes: (0..n)
            .map(|i| GraphNode {
                id: i,
                phrase: format!("n{i}"),
                is_entity: false,
                token_refs: vec![(0, i)],
                char_spans: vec![(2 * i, 2 * i + 1)],
                pos_tags: vec![],
                chunk: 0,
            })
            .collect(),
        edges: edges.into_iter().map(|(a, b)| GraphEdge(a, b, "dep".into())).collect(),
    }
}

pub fn random_states(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Two matrices placed on the diagonal of a larger zero matrix.
pub fn block_diagonal(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.rows(), b.rows());
    Matrix::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (false, false) => b[(i - n, j - n)],
        _ => 0.0,
    })
}

/// Dense row-normalized `Â` of an augmented graph.
pub fn normalized_adjacency(aug: &AugmentedGraph) -> Matrix {
    degree_normalize_rows(&aug.adjacency).matrix.to_dense()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult { name, passed, detail }
    }
}

fn run_guarded(name: &'static str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult::new(name, passed, detail),
        Err(e) => CheckResult::new(name, false, format!("error: {e}")),
    }
}

/// Masked-weight and component-isolation checks on one random graph.
pub fn masked_attention_case(seed: u64, max_nodes: usize) -> crate::Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = AttentionConfig {
        seed,
        ..AttentionConfig::default()
    };
    let encoder = GraphEncoder::new(&cfg, GraphEncoder::DEFAULT_LAYERS)?;

    let n = rng.gen_range(1..=max_nodes);
    let edges = rng.gen_range(0..=2 * n);
    let aug = augment_graph(&random_graph(&mut rng, n, edges))?;
    let mask = aug.adjacency.to_dense();
    let out = encoder.forward(&random_states(&mut rng, aug.size(), cfg.d_model), &mask)?;
    let mut leaked: f64 = 0.0;
    for layer in &out.attention {
        for head in layer {
            for i in 0..mask.rows() {
                for j in 0..mask.cols() {
                    if mask[(i, j)] == 0.0 {
                        leaked = leaked.max(head[(i, j)].abs());
                    }
                }
            }
        }
    }

    let na = rng.gen_range(1..=max_nodes / 2 + 1);
    let nb = rng.gen_range(1..=max_nodes / 2 + 1);
    let a = augment_graph(&random_graph(&mut rng, na, 2 * na))?.adjacency.to_dense();
    let b = augment_graph(&random_graph(&mut rng, nb, 2 * nb))?.adjacency.to_dense();
    let mask = block_diagonal(&a, &b);
    let split = a.rows();
    let x = random_states(&mut rng, mask.rows(), cfg.d_model);
    let mut perturbed = x.clone();
    for i in split..perturbed.rows() {
        for v in perturbed.row_mut(i) {
            *v += rng.gen_range(-5.0..5.0);
        }
    }
    let base = encoder.forward(&x, &mask)?.states;
    let moved = encoder.forward(&perturbed, &mask)?.states;
    let mut delta: f64 = 0.0;
    for i in 0..split {
        for (u, v) in base.row(i).iter().zip(moved.row(i)) {
            delta = delta.max((u - v).abs());
        }
    }
    Ok((leaked, delta))
}

/// Runs every kernel property against its oracle.
pub fn run_kernel_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(run_guarded("propagation rows sum to 1 and match Horner oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst_sum, mut worst_diff): (f64, f64) = (0.0, 0.0);
        for _ in 0..20 {
            let n = rng.gen_range(1..=20);
            let a = random_row_stochastic(&mut rng, n);
            for omega in [0.1, 0.5, 0.85, 0.99] {
                for steps in 1..=4 {
                    for formula in [PropagationFormula::Literal, PropagationFormula::Power] {
                        let cfg = PropagationConfig { omega, steps, formula };
                        let p = propagation_matrix(&a, &cfg)?;
                        for s in p.row_sums() {
                            worst_sum = worst_sum.max((s - 1.0).abs());
                        }
                        worst_diff = worst_diff.max(p.max_abs_diff(&horner_oracle(&a, &cfg)));
                    }
                }
            }
        }
        Ok((
            worst_sum <= 1e-9 && worst_diff <= 1e-12,
            format!("max row-sum error {worst_sum:.2e}, max oracle diff {worst_diff:.2e}"),
        ))
    }));

    out.push(run_guarded("masked positions get exactly zero weight", || {
        let mut leaked: f64 = 0.0;
        let mut delta: f64 = 0.0;
        for case in 0..10 {
            let (l, d) = masked_attention_case(seed.wrapping_add(case), 12)?;
            leaked = leaked.max(l);
            delta = delta.max(d);
        }
        Ok((
            leaked == 0.0 && delta < 1e-12,
            format!("max masked weight {leaked:e}, isolation delta {delta:.2e}"),
        ))
    }));

    out.push(run_guarded("softmax and propagated rows sum to 1", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let cfg = AttentionConfig {
            seed,
            ..AttentionConfig::default()
        };
        let attn = GraphPropCrossAttention::new(&cfg)?;
        let mut worst: f64 = 0.0;
        let mut oracle: f64 = 0.0;
        for _ in 0..10 {
            let n = rng.gen_range(1..10);
            let aug = augment_graph(&random_graph(&mut rng, n, 12))?;
            let p = propagation_matrix(&normalized_adjacency(&aug), &PropagationConfig::default())?;
            let t = rng.gen_range(1..6);
            let y = random_states(&mut rng, t, cfg.d_model);
            let v = random_states(&mut rng, aug.size(), cfg.d_model);
            let res = attn.forward(&y, &v, &p)?;
            for (a, ap) in res.weights.iter().zip(&res.propagated) {
                for s in a.row_sums().into_iter().chain(ap.row_sums()) {
                    worst = worst.max((s - 1.0).abs());
                }
                oracle = oracle.max(ap.max_abs_diff(&alpha_prop_oracle(a, &p)));
            }
        }
        Ok((
            worst <= 1e-12 && oracle <= 1e-12,
            format!("max row-sum error {worst:.2e}, loop oracle diff {oracle:.2e}"),
        ))
    }));

    out.push(run_guarded("fusion matches loop oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf05e);
        let mut init = WeightInit::new(seed);
        let d = 6;
        let fusion = Fusion::new(&mut init, d);
        let text = random_states(&mut rng, 4, d);
        let graph = random_states(&mut rng, 4, d);
        let residual = random_states(&mut rng, 4, d);
        let diff = fuse_graph_text(&text, &graph, &residual, &fusion)?
            .max_abs_diff(&fusion_oracle(&text, &graph, &residual, &fusion.linear));
        Ok((diff <= 1e-12, format!("max diff {diff:.2e}")))
    }));

    out.push(run_guarded("kernels are bitwise deterministic", || {
        let run = || -> crate::Result<Vec<u64>> {
            let cfg = AttentionConfig {
                seed,
                ..AttentionConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let aug = augment_graph(&random_graph(&mut rng, 8, 12))?;
            let a_hat = normalized_adjacency(&aug);
            let p = propagation_matrix(&a_hat, &PropagationConfig::default())?;
            let v = random_states(&mut rng, aug.size(), cfg.d_model);
            let y = random_states(&mut rng, 3, cfg.d_model);
            let enc = GraphEncoder::new(&cfg, GraphEncoder::DEFAULT_LAYERS)?.forward(&v, &aug.adjacency.to_dense())?;
            let ctx = GraphPropCrossAttention::new(&cfg)?.forward(&y, &enc.states, &p)?;
            Ok(p.as_slice()
                .iter()
                .chain(enc.states.as_slice())
                .chain(ctx.context.as_slice())
                .map(|v| v.to_bits())
                .collect())
        };
        let (a, b) = (run()?, run()?);
        Ok((a == b, format!("{} values compared", a.len())))
    }));

    out.push(run_guarded("argmax is invariant to scaling decoder states", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa7);
        let cfg = AttentionConfig {
            heads: 1,
            seed,
            ..AttentionConfig::default()
        };
        let attn = GraphPropCrossAttention::new(&cfg)?;
        let n = 7;
        let p = Matrix::identity(n);
        let v = random_states(&mut rng, n, cfg.d_model);
        let y = random_states(&mut rng, 5, cfg.d_model);
        let argmax = |m: &Matrix| -> Vec<usize> {
            (0..m.rows())
                .map(|i| {
                    let row = m.row(i);
                    (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
                })
                .collect()
        };
        let base = argmax(&attn.forward(&y, &v, &p)?.weights[0]);
        let mut ok = true;
        for c in [0.5, 2.0, 10.0] {
            ok &= argmax(&attn.forward(&y.scale(c), &v, &p)?.weights[0]) == base;
        }
        Ok((ok, format!("argmax {base:?}")))
    }));

    out.push(run_guarded("node initialization matches averaging oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1417);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let (nodes, tokens) = (rng.gen_range(1..=16), rng.gen_range(1..=64));
            let mut triplets = Vec::new();
            for i in 0..nodes {
                for j in 0..tokens {
                    if rng.gen_bool(0.2) {
                        triplets.push((i, j, 1.0));
                    }
                }
            }
            let c = SparseMatrix::from_triplets(nodes, tokens, triplets)?;
            let t = random_states(&mut rng, tokens, 5);
            let g = node_init(&degree_normalize_rows(&c).matrix, &t)?;
            worst = worst.max(g.max_abs_diff(&node_init_oracle(&c, &t)));
        }
        Ok((worst <= 1e-12, format!("max diff {worst:.2e}")))
    }));

    out.push(run_guarded("fully masked rows are rejected", || {
        let logits = Matrix::zeros(2, 2);
        let mask = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]])?;
        Ok((masked_softmax(&logits, Some(&mask)).is_err(), String::new()))
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_agrees_with_closed_form_on_two_states() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let cfg = PropagationConfig {
            omega: 0.5,
            steps: 2,
            formula: PropagationFormula::Power,
        };
        // I·0.5 + 0.5·0.5·A + 0.25·A² = 0.75·I + 0.25·A
        let expected = Matrix::from_rows(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        assert!(horner_oracle(&a, &cfg).max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn closure_oracle_on_path() {
        let c = closure_oracle(3, &[(0, 1), (1, 2)]);
        assert!(c.iter().all(|row| row.iter().all(|&b| b)));
        let c = closure_oracle(4, &[(0, 1), (2, 3)]);
        assert!(!c[0][2] && c[0][4] && c[4][4]);
    }

    #[test]
    fn node_init_oracle_skips_empty_rows() {
        let c = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let t = Matrix::from_rows(&[vec![2.0], vec![4.0]]).unwrap();
        let g = node_init_oracle(&c, &t);
        assert_eq!(g.row(0), &[3.0]);
        assert_eq!(g.row(1), &[0.0]);
    }

    #[test]
    fn full_suite_passes() {
        for r in run_kernel_checks(7) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
