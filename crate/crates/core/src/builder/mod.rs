//! Unified semantic graph construction.
//!
//! Per chunk: punctuation removal, coreference mention merging, rule-driven
//! node merging, then chain and phrase merging. Chunk graphs are
//! concatenated into one document graph without merging or connecting
//! nodes across chunks.

mod forest;
mod merge;
mod rules;
mod work;

pub use forest::{remove_punctuation, ChunkTrees, SentenceTree, TreeToken};
pub use merge::{merge_coref_phrase, merge_nodes, merge_phrases};
pub use rules::{MergeRuleTable, RuleAction};
pub use work::PartialGraph;

use crate::annotation::{AnnotatedDocument, Chunk};
use crate::graph::{GraphEdge, SemanticGraph, Variant};

#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub graph: SemanticGraph,
    /// Tokens removed by deletion rules, over all chunks.
    pub deleted_tokens: usize,
    pub warnings: Vec<String>,
}

/// Runs the four construction stages on a single chunk.
pub fn build_chunk(
    doc: &AnnotatedDocument,
    chunk: &Chunk,
    variant: Variant,
    rules: &MergeRuleTable,
) -> PartialGraph {
    let trees = ChunkTrees::from_chunk(doc, chunk);
    let trees = remove_punctuation(trees, variant, rules);
    let g = merge_coref_phrase(&trees, &doc.coref, variant);
    let g = merge_nodes(g, rules, variant);
    merge_phrases(g, variant)
}

pub fn build_usg(
    doc: &AnnotatedDocument,
    chunks: &[Chunk],
    variant: Variant,
    rules: &MergeRuleTable,
) -> BuildOutput {
    let mut graph = SemanticGraph {
        doc_id: doc.doc_id.clone(),
        variant,
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let mut warnings = Vec::new();
    let mut deleted_tokens = 0;
    for chunk in chunks {
        let partial = build_chunk(doc, chunk, variant, rules);
        deleted_tokens += partial.deleted_tokens();
        warnings.extend(partial.warnings().iter().map(|w| format!("{}: {w}", doc.doc_id)));
        let sub = partial.into_graph(&doc.doc_id, variant);
        if sub.nodes.is_empty() {
            warnings.push(format!("{}: chunk {} produced an empty graph", doc.doc_id, chunk.chunk_index));
        }
        let offset = graph.nodes.len();
        graph.nodes.extend(sub.nodes.into_iter().map(|mut n| {
            n.id += offset;
            n
        }));
        graph
            .edges
            .extend(sub.edges.into_iter().map(|e| GraphEdge(e.0 + offset, e.1 + offset, e.2)));
    }
    BuildOutput {
        graph,
        deleted_tokens,
        warnings,
    }
}
