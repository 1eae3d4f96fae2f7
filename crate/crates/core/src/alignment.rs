//! Token-to-node alignment: the construction matrix `C`, row normalization,
//! and node initialization by averaging aligned token embeddings.

use serde::{Deserialize, Serialize};

use crate::augment::AugmentedGraph;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::tokenize::SubwordToken;

/// Default encoder context length in subword tokens.
pub const DEFAULT_CONTEXT_LEN: usize = 1024;

/// What the supernode's row of `C` contains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupernodeRow {
    /// Aligned to every token, so it starts as the sequence mean.
    #[default]
    AllOnes,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignOptions {
    pub context_len: usize,
    pub supernode_row: SupernodeRow,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            context_len: DEFAULT_CONTEXT_LEN,
            supernode_row: SupernodeRow::AllOnes,
        }
    }
}

/// `C` plus a coverage summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionMatrix {
    pub doc_id: String,
    /// `(N_V + 1) × N_T` binary matrix; the last row is the supernode.
    pub matrix: SparseMatrix,
    pub supernode_row: SupernodeRow,
    /// Subword count before truncation.
    pub total_subwords: usize,
    /// Subwords dropped beyond the context length.
    pub truncated: usize,
    /// Real nodes with no aligned subword.
    pub uncovered_nodes: Vec<usize>,
    /// Subwords aligned to at least one real node.
    pub covered_tokens: usize,
}

impl ConstructionMatrix {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("construction matrices always serialize")
    }

    pub fn from_json_line(line: &str, line_no: usize) -> Result<Self> {
        let c: ConstructionMatrix = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        c.matrix.validate()?;
        Ok(c)
    }
}

/// Sets `c_ij = 1` when subword `j` shares at least one byte with any span
/// of node `i`. Spans are swept left to right against the sorted subwords.
/// Subwords past `context_len` are dropped from the tail.
pub fn align_tokens_to_nodes(
    graph: &AugmentedGraph,
    subwords: &[SubwordToken],
    opts: AlignOptions,
) -> Result<ConstructionMatrix> {
    for w in subwords.windows(2) {
        if w[1].char_start < w[0].char_end {
            return Err(Error::InvalidDocument {
                doc_id: graph.base.doc_id.clone(),
                message: format!("subword {} overlaps or precedes subword {}", w[1].index, w[0].index),
            });
        }
    }
    let kept = &subwords[..subwords.len().min(opts.context_len)];
    let n_nodes = graph.base.nodes.len();
    let n_tokens = kept.len();

    let mut spans: Vec<(usize, usize, usize)> = graph
        .base
        .nodes
        .iter()
        .flat_map(|node| node.char_spans.iter().map(move |&(s, e)| (s, e, node.id)))
        .collect();
    spans.sort_unstable();

    let mut entries = Vec::new();
    let mut covered = vec![false; n_tokens];
    let mut lo = 0;
    for (start, end, node) in spans {
        // Ends are increasing, so the first candidate only moves right.
        while lo < n_tokens && kept[lo].char_end <= start {
            lo += 1;
        }
        let mut j = lo;
        while j < n_tokens && kept[j].char_start < end {
            entries.push((node, j, 1.0));
            covered[j] = true;
            j += 1;
        }
    }
    if opts.supernode_row == SupernodeRow::AllOnes {
        entries.extend((0..n_tokens).map(|j| (n_nodes, j, 1.0)));
    }
    let mut matrix = SparseMatrix::from_triplets(n_nodes + 1, n_tokens, entries)?;
    for e in &mut matrix.coo {
        e.2 = 1.0;
    }
    let uncovered_nodes = (0..n_nodes).filter(|&i| matrix.row(i).is_empty()).collect();
    Ok(ConstructionMatrix {
        doc_id: graph.base.doc_id.clone(),
        matrix,
        supernode_row: opts.supernode_row,
        total_subwords: subwords.len(),
        truncated: subwords.len() - n_tokens,
        uncovered_nodes,
        covered_tokens: covered.iter().filter(|&&c| c).count(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D⁻¹M`: every non-zero row sums to one.
    #[default]
    Row,
    /// `D^{-1/2} M D^{-1/2}` for square matrices.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub matrix: SparseMatrix,
    /// Rows that were all zero and are left as such.
    pub zero_rows: Vec<usize>,
}

/// Divides each non-zero row by its sum; zero rows stay zero and are
/// reported.
pub fn degree_normalize_rows(m: &SparseMatrix) -> Normalized {
    let sums = m.row_sums();
    let coo = m.coo.iter().map(|&(i, j, v)| (i, j, v / sums[i])).collect();
    Normalized {
        matrix: SparseMatrix {
            rows: m.rows,
            cols: m.cols,
            coo,
        },
        zero_rows: zero_rows(&sums),
    }
}

pub fn degree_normalize(m: &SparseMatrix, how: Normalization) -> Result<Normalized> {
    match how {
        Normalization::Row => Ok(degree_normalize_rows(m)),
        Normalization::Symmetric => {
            if m.rows != m.cols {
                return Err(Error::Shape(format!(
                    "symmetric normalization needs a square matrix, got {}x{}",
                    m.rows, m.cols
                )));
            }
            let sums = m.row_sums();
            let scale: Vec<f64> = sums.iter().map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 }).collect();
            let coo = m.coo.iter().map(|&(i, j, v)| (i, j, v * scale[i] * scale[j])).collect();
            Ok(Normalized {
                matrix: SparseMatrix {
                    rows: m.rows,
                    cols: m.cols,
                    coo,
                },
                zero_rows: zero_rows(&sums),
            })
        }
    }
}

fn zero_rows(sums: &[f64]) -> Vec<usize> {
    sums.iter()
        .enumerate()
        .filter(|(_, &s)| s == 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `g = C′t`: each node row is the mean of its aligned token embeddings.
pub fn node_init(c_norm: &SparseMatrix, t: &Matrix) -> Result<Matrix> {
    c_norm.matmul_dense(t)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::augment::augment_graph;
    use crate::graph::{GraphNode, SemanticGraph, Variant};

    fn graph_with_spans(spans: &[Vec<(usize, usize)>]) -> AugmentedGraph {
        let g = SemanticGraph {
            doc_id: "d".into(),
            variant: Variant::Src,
            nodes: spans
                .iter()
                .enumerate()
                .map(|(i, s)| GraphNode {
                    id: i,
                    phrase: String::new(),
                    is_entity: false,
                    token_refs: vec![(0, i)],
                    char_spans: s.clone(),
                    pos_tags: vec![],
                    chunk: 0,
                })
                .collect(),
            edges: vec![],
        };
        augment_graph(&g).unwrap()
    }

    fn subwords(spans: &[(usize, usize)]) -> Vec<SubwordToken> {
        spans
            .iter()
            .enumerate()
            .map(|(index, &(char_start, char_end))| SubwordToken {
                index,
                char_start,
                char_end,
            })
            .collect()
    }

    #[test]
    fn node_covers_its_subword_pieces() {
        let g = graph_with_spans(&[vec![(0, 5)]]);
        let c = align_tokens_to_nodes(&g, &subwords(&[(0, 2), (2, 5), (5, 6)]), AlignOptions::default()).unwrap();
        let d = c.matrix.to_dense();
        assert_eq!(d.row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(d.row(1), &[1.0, 1.0, 1.0]);
        assert_eq!(c.covered_tokens, 2);
        assert!(c.uncovered_nodes.is_empty());
    }

    #[test]
    fn disconnected_spans() {
        let g = graph_with_spans(&[vec![(0, 3), (10, 13)], vec![(4, 9)]]);
        let sw = subwords(&[(0, 3), (4, 9), (10, 12), (12, 13), (14, 15)]);
        let c = align_tokens_to_nodes(&g, &sw, AlignOptions::default()).unwrap();
        let d = c.matrix.to_dense();
        assert_eq!(d.row(0), &[1.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.row(1), &[0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn partial_overlap_counts() {
        let g = graph_with_spans(&[vec![(3, 6)]]);
        let c = align_tokens_to_nodes(&g, &subwords(&[(0, 4), (5, 9)]), AlignOptions::default()).unwrap();
        assert_eq!(c.matrix.to_dense().row(0), &[1.0, 1.0]);
    }

    #[test]
    fn uncovered_nodes_and_truncation() {
        let g = graph_with_spans(&[vec![(0, 1)], vec![(5, 6)], vec![(20, 25)]]);
        let sw = subwords(&[(0, 1), (2, 4), (5, 6), (20, 22)]);
        let opts = AlignOptions {
            context_len: 3,
            supernode_row: SupernodeRow::Zero,
        };
        let c = align_tokens_to_nodes(&g, &sw, opts).unwrap();
        assert_eq!(c.matrix.cols, 3);
        assert_eq!(c.truncated, 1);
        assert_eq!(c.uncovered_nodes, vec![2]);
        assert!(c.matrix.row(3).is_empty());
        assert_eq!(c.covered_tokens, 2);
    }

    #[test]
    fn normalization_examples() {
        let m = SparseMatrix::from_triplets(2, 4, vec![(0, 0, 1.0), (0, 1, 1.0), (0, 3, 1.0)]).unwrap();
        let n = degree_normalize_rows(&m);
        let third = 1.0 / 3.0;
        assert_eq!(n.matrix.to_dense().row(0), &[third, third, 0.0, third]);
        assert_eq!(n.matrix.to_dense().row(1), &[0.0; 4]);
        assert_eq!(n.zero_rows, vec![1]);

        let id = SparseMatrix::from_dense(&Matrix::identity(4));
        assert_eq!(degree_normalize_rows(&id).matrix, id);
        assert_eq!(degree_normalize(&id, Normalization::Symmetric).unwrap().matrix, id);
    }

    #[test]
    fn node_init_examples() {
        let c = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        let t = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = node_init(&degree_normalize_rows(&c).matrix, &t).unwrap();
        assert_eq!(g.row(0), &[0.5, 0.5]);

        let id = SparseMatrix::from_dense(&Matrix::identity(2));
        assert_eq!(node_init(&id, &t).unwrap(), t);
        assert!(node_init(&id, &Matrix::zeros(3, 2)).is_err());
    }

    /// Per-node loop over aligned tokens, averaged; no matrices involved.
    fn mean_oracle(c: &SparseMatrix, t: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(c.rows, t.cols());
        for i in 0..c.rows {
            let members: Vec<usize> = (0..c.cols).filter(|&j| c.get(i, j) != 0.0).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..t.cols() {
                let mut acc = 0.0;
                for &j in &members {
                    acc += t[(j, d)];
                }
                out[(i, d)] = acc / members.len() as f64;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn node_init_matches_mean_oracle(seed in any::<u64>(), nodes in 1usize..16, tokens in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let entries = (0..nodes)
                .flat_map(|i| (0..tokens).map(move |j| (i, j)))
                .filter(|_| rng.gen_bool(0.2))
                .map(|(i, j)| (i, j, 1.0))
                .collect::<Vec<_>>();
            let c = SparseMatrix::from_triplets(nodes, tokens, entries).unwrap();
            let t = Matrix::from_fn(tokens, 5, |i, j| ((seed.wrapping_add((i * 5 + j) as u64)) % 97) as f64 / 7.0 - 6.0);
            let norm = degree_normalize_rows(&c);
            for (i, s) in norm.matrix.row_sums().into_iter().enumerate() {
                if norm.zero_rows.contains(&i) {
                    prop_assert_eq!(s, 0.0);
                } else {
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
            let g = node_init(&norm.matrix, &t).unwrap();
            prop_assert!(g.max_abs_diff(&mean_oracle(&c, &t)) < 1e-12);
        }

        #[test]
        fn alignment_is_monotone(lengths in proptest::collection::vec(1usize..6, 2..12), cut in 1usize..4) {
            // Contiguous node spans separated by single spaces; subwords cut each word into pieces.
            let mut spans = Vec::new();
            let mut sw = Vec::new();
            let mut pos = 0;
            for &len in &lengths {
                spans.push(vec![(pos, pos + len)]);
                let mut s = pos;
                while s < pos + len {
                    let e = (s + cut).min(pos + len);
                    sw.push((s, e));
                    s = e;
                }
                pos += len + 1;
            }
            let g = graph_with_spans(&spans);
            let c = align_tokens_to_nodes(&g, &subwords(&sw), AlignOptions::default()).unwrap();
            let firsts: Vec<usize> = (0..lengths.len()).map(|i| c.matrix.row(i)[0].1).collect();
            prop_assert!(firsts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(c.covered_tokens, sw.len());
        }
    }
}
