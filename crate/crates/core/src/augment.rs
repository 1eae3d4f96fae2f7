//! Graph augmentation: reverse edges, two-hop shortcuts, self-loops and a
//! supernode, producing the binary adjacency matrix used as attention mask.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SemanticGraph, Variant};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Original,
    Reverse,
    TwoHop,
    SelfLoop,
    Supernode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedGraph {
    pub base: SemanticGraph,
    /// Index of the supernode, equal to the base node count.
    pub supernode: usize,
    pub adjacency: SparseMatrix,
    /// Why each non-zero of the adjacency exists.
    pub kinds: BTreeMap<(usize, usize), EdgeKind>,
}

impl AugmentedGraph {
    pub fn size(&self) -> usize {
        self.supernode + 1
    }

    pub fn count_kind(&self, kind: EdgeKind) -> usize {
        self.kinds.values().filter(|&&k| k == kind).count()
    }

    pub fn to_record(&self) -> AugmentedRecord {
        AugmentedRecord {
            doc_id: self.base.doc_id.clone(),
            variant: self.base.variant,
            supernode: self.supernode,
            graph: self.base.clone(),
            adjacency: self.adjacency.clone(),
        }
    }
}

/// One line of the augmented-graph JSON-lines file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub doc_id: String,
    pub variant: Variant,
    pub supernode: usize,
    pub graph: SemanticGraph,
    pub adjacency: SparseMatrix,
}

impl AugmentedRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("augmented records always serialize")
    }

    /// Parses a line and re-derives edge kinds; the stored adjacency must
    /// match a fresh augmentation of the stored graph.
    pub fn from_json_line(line: &str, line_no: usize) -> Result<AugmentedGraph> {
        let rec: AugmentedRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.graph.validate()?;
        rec.adjacency.validate()?;
        let aug = augment_graph(&rec.graph)?;
        if aug.adjacency != rec.adjacency || aug.supernode != rec.supernode {
            return Err(Error::InvalidDocument {
                doc_id: rec.doc_id,
                message: "stored adjacency does not match the stored graph".into(),
            });
        }
        Ok(aug)
    }
}

/// Augments `g` in a fixed order: symmetrize, add two-hop shortcuts over the
/// symmetrized edges, add self-loops, then append a supernode linked both
/// ways to every node (and itself). The supernode takes no part in shortcut
/// computation.
pub fn augment_graph(g: &SemanticGraph) -> Result<AugmentedGraph> {
    let n = g.nodes.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut kinds: BTreeMap<(usize, usize), EdgeKind> = BTreeMap::new();
    let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &g.edges {
        let (a, b) = (e.source(), e.target());
        if a == b {
            continue;
        }
        kinds.insert((a, b), EdgeKind::Original);
        neighbours[a].insert(b);
        neighbours[b].insert(a);
    }
    for e in &g.edges {
        let (a, b) = (e.source(), e.target());
        if a != b {
            kinds.entry((b, a)).or_insert(EdgeKind::Reverse);
        }
    }
    for adj in &neighbours {
        for &i in adj {
            for &j in adj {
                if i != j {
                    kinds.entry((i, j)).or_insert(EdgeKind::TwoHop);
                }
            }
        }
    }
    for i in 0..n {
        kinds.entry((i, i)).or_insert(EdgeKind::SelfLoop);
    }
    for i in 0..=n {
        kinds.insert((n, i), EdgeKind::Supernode);
        kinds.insert((i, n), EdgeKind::Supernode);
    }
    let adjacency = SparseMatrix {
        rows: n + 1,
        cols: n + 1,
        coo: kinds.keys().map(|&(i, j)| (i, j, 1.0)).collect(),
    };
    Ok(AugmentedGraph {
        base: g.clone(),
        supernode: n,
        adjacency,
        kinds,
    })
}
