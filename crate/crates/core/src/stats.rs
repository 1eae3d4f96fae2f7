//! Corpus statistics over length buckets and the percentage comparison
//! between two graph sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::alignment::{align_tokens_to_nodes, AlignOptions};
use crate::augment::augment_graph;
use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::par;
use crate::tokenize::SubwordRecord;

pub const DEFAULT_BUCKETS: [usize; 4] = [400, 600, 800, 1000];
pub const HALF_WIDTH: usize = 20;

/// Unit of the document length `t(d)` used for bucket membership.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    #[default]
    Subwords,
    /// Annotated word tokens; requires word counts.
    Words,
}

/// Per-document raw counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeasure {
    pub doc_id: String,
    pub subwords: usize,
    pub words: Option<usize>,
    pub nodes: usize,
    /// Base edges, before augmentation.
    pub edges: usize,
    /// Subwords aligned to at least one real node.
    pub covered: usize,
}

impl DocMeasure {
    pub fn length(&self, unit: LengthUnit) -> Option<usize> {
        match unit {
            LengthUnit::Subwords => Some(self.subwords),
            LengthUnit::Words => self.words,
        }
    }
}

/// Counts one document. Coverage is measured without context truncation.
pub fn measure_document(graph: &SemanticGraph, subwords: &SubwordRecord, words: Option<usize>) -> Result<DocMeasure> {
    let covered = if graph.nodes.is_empty() {
        0
    } else {
        let aug = augment_graph(graph)?;
        let opts = AlignOptions {
            context_len: usize::MAX,
            ..AlignOptions::default()
        };
        align_tokens_to_nodes(&aug, &subwords.tokens(), opts)?.covered_tokens
    };
    Ok(DocMeasure {
        doc_id: graph.doc_id.clone(),
        subwords: subwords.subwords.len(),
        words,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        covered,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub target: usize,
    pub half_width: usize,
    pub docs: usize,
    /// Means are absent for an empty bucket.
    pub mean_tokens: Option<f64>,
    pub mean_nodes: Option<f64>,
    pub mean_edges: Option<f64>,
    pub mean_covered: Option<f64>,
}

/// Buckets documents by `|T − t(d)| ≤ HALF_WIDTH`. A document may fall
/// into several buckets if they overlap.
pub fn bucket_stats(measures: &[DocMeasure], buckets: &[usize], unit: LengthUnit) -> Vec<GraphStats> {
    buckets
        .iter()
        .map(|&target| {
            let mut sums = [0usize; 4];
            let mut docs = 0;
            for m in measures {
                let Some(len) = m.length(unit) else { continue };
                if len.abs_diff(target) <= HALF_WIDTH {
                    docs += 1;
                    sums[0] += len;
                    sums[1] += m.nodes;
                    sums[2] += m.edges;
                    sums[3] += m.covered;
                }
            }
            let mean = |s: usize| (docs > 0).then(|| s as f64 / docs as f64);
            GraphStats {
                target,
                half_width: HALF_WIDTH,
                docs,
                mean_tokens: mean(sums[0]),
                mean_nodes: mean(sums[1]),
                mean_edges: mean(sums[2]),
                mean_covered: mean(sums[3]),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub buckets: Vec<GraphStats>,
    /// Graph documents without a subword record.
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats always serialize")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::Malformed {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Measures every graph against its subword record, in parallel, then
/// reduces into per-bucket means.
pub fn graph_stats(graphs: &[SemanticGraph], subwords: &[SubwordRecord], buckets: &[usize]) -> Result<StatsReport> {
    let by_id: BTreeMap<&str, &SubwordRecord> = subwords.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    let measured = par::map(graphs, |g| {
        by_id
            .get(g.doc_id.as_str())
            .map(|sw| measure_document(g, sw, None).map_err(|e| e.in_stage("stats", &g.doc_id)))
    });
    let mut measures = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for (g, m) in graphs.iter().zip(measured) {
        match m {
            Some(m) => measures.push(m?),
            None => {
                warnings.push(format!("{}: no subword record, excluded from statistics", g.doc_id));
                excluded.push(g.doc_id.clone());
            }
        }
    }
    Ok(StatsReport {
        buckets: bucket_stats(&measures, buckets, LengthUnit::Subwords),
        excluded,
        warnings,
    })
}

/// `100·(b − a)/a` rounded half-up to a whole percent; absent when `a` is
/// missing or zero.
pub fn percent_increase(a: Option<f64>, b: Option<f64>) -> Option<i64> {
    match (a, b) {
        (Some(a), Some(b)) if a != 0.0 => Some(((b - a) * 100.0 / a + 0.5).floor() as i64),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Increase {
    pub target: usize,
    pub nodes: Option<i64>,
    pub edges: Option<i64>,
    pub covered: Option<i64>,
}

/// Per-bucket increase of `b` over `a`. Both must list the same buckets in
/// the same order.
pub fn compare_graph_sets(a: &[GraphStats], b: &[GraphStats]) -> Result<Vec<Increase>> {
    let key = |s: &[GraphStats]| s.iter().map(|g| (g.target, g.half_width)).collect::<Vec<_>>();
    if key(a) != key(b) {
        return Err(Error::BucketMismatch(format!("{:?} vs {:?}", key(a), key(b))));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| Increase {
            target: x.target,
            nodes: percent_increase(x.mean_nodes, y.mean_nodes),
            edges: percent_increase(x.mean_edges, y.mean_edges),
            covered: percent_increase(x.mean_covered, y.mean_covered),
        })
        .collect())
}

const LABEL_W: usize = 10;
const CELL_W: usize = 7;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.0}", x))
}

fn pct(v: Option<i64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}%"))
}

/// Plain-text table: one column group per bucket with mean nodes, edges and
/// covered tokens, one row per labelled graph set, and an optional increase
/// row.
pub fn render_table(rows: &[(&str, &[GraphStats])], increase: Option<&[Increase]>) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let group = 3 * CELL_W;
    let mut out = String::new();
    let _ = write!(out, "{:LABEL_W$}", "");
    for s in first.iter() {
        let _ = write!(out, " | {:^group$}", format!("T={}", s.target));
    }
    out.push('\n');
    let _ = write!(out, "{:LABEL_W$}", "docs/len");
    for s in first.iter() {
        let _ = write!(out, " | {:^group$}", format!("{} docs, t={}", s.docs, cell(s.mean_tokens)));
    }
    out.push('\n');
    let _ = write!(out, "{:LABEL_W$}", "");
    for _ in first.iter() {
        let _ = write!(out, " | {:>CELL_W$}{:>CELL_W$}{:>CELL_W$}", "n", "e", "t_c");
    }
    out.push('\n');
    for (label, stats) in rows {
        let _ = write!(out, "{:LABEL_W$}", label);
        for s in stats.iter() {
            let _ = write!(
                out,
                " | {:>CELL_W$}{:>CELL_W$}{:>CELL_W$}",
                cell(s.mean_nodes),
                cell(s.mean_edges),
                cell(s.mean_covered)
            );
        }
        out.push('\n');
    }
    if let Some(inc) = increase {
        let _ = write!(out, "{:LABEL_W$}", "Increase");
        for i in inc {
            let _ = write!(
                out,
                " | {:>CELL_W$}{:>CELL_W$}{:>CELL_W$}",
                pct(i.nodes),
                pct(i.edges),
                pct(i.covered)
            );
        }
        out.push('\n');
    }
    out
}
