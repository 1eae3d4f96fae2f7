//! The unified semantic graph and its JSON-lines form.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(sentence, token index)` within a document.
pub type TokenRef = (usize, usize);

/// Graph construction variant.
///
/// `Src` follows the reference Java implementation, `Ppr` the published
/// description; they differ in punctuation removal, when coreference chains
/// are merged, and the traversal order of the node-merging pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Src,
    Ppr,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Src => "src",
            Variant::Ppr => "ppr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "src" => Ok(Variant::Src),
            "ppr" => Ok(Variant::Ppr),
            other => Err(Error::Config(format!("unknown variant {other:?}, expected src or ppr"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub phrase: String,
    #[serde(rename = "entity")]
    pub is_entity: bool,
    #[serde(rename = "tokens")]
    pub token_refs: Vec<TokenRef>,
    /// Byte spans `[start, end)`; touching token spans are coalesced.
    #[serde(rename = "spans")]
    pub char_spans: Vec<(usize, usize)>,
    #[serde(rename = "pos", default)]
    pub pos_tags: Vec<String>,
    #[serde(default)]
    pub chunk: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphEdge(pub usize, pub usize, pub String);

impl GraphEdge {
    pub fn source(&self) -> usize {
        self.0
    }

    pub fn target(&self) -> usize {
        self.1
    }

    pub fn relation(&self) -> &str {
        &self.2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGraph {
    pub doc_id: String,
    pub variant: Variant,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl SemanticGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of document tokens represented by some node.
    pub fn token_count(&self) -> usize {
        self.nodes.iter().map(|n| n.token_refs.len()).sum()
    }

    /// Checks node ids, token disjointness and edge well-formedness.
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidDocument {
            doc_id: self.doc_id.clone(),
            message,
        };
        let mut seen = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(invalid(format!("node at position {i} has id {}", node.id)));
            }
            if node.token_refs.is_empty() {
                return Err(invalid(format!("node {i} has no tokens")));
            }
            for t in &node.token_refs {
                if !seen.insert(*t) {
                    return Err(invalid(format!("token {t:?} belongs to more than one node")));
                }
            }
        }
        let mut edges = BTreeSet::new();
        for e in &self.edges {
            if e.0 >= self.nodes.len() || e.1 >= self.nodes.len() {
                return Err(invalid(format!("edge {e:?} references a missing node")));
            }
            if !edges.insert(e) {
                return Err(invalid(format!("duplicate edge {e:?}")));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("graphs always serialize")
    }

    pub fn from_json_line(line: &str, line_no: usize) -> Result<Self> {
        let g: SemanticGraph = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        g.validate()?;
        Ok(g)
    }

    /// Connected components over undirected edges, as sorted node lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.0), find(&mut parent, e.1));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }
}
