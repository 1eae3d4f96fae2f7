//! Mutable node graph used while merging.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{GraphEdge, GraphNode, SemanticGraph, TokenRef, Variant};

use super::forest::ChunkTrees;

#[derive(Clone, Debug)]
pub(crate) struct TokenInfo {
    pub text: String,
    pub pos: String,
    pub span: (usize, usize),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct WorkNode {
    pub tokens: BTreeSet<TokenRef>,
    pub entity: bool,
    pub chain: Option<u32>,
    pub root: bool,
    /// Outgoing `(child, relation)` pairs.
    pub out: BTreeSet<(usize, String)>,
    /// Incoming `(head, relation)` pairs.
    pub inc: BTreeSet<(usize, String)>,
}

impl WorkNode {
    pub fn key(&self) -> TokenRef {
        *self.tokens.iter().next().expect("live nodes hold tokens")
    }
}

/// Partial graph between the merge stages. Dead nodes are `None`.
#[derive(Clone, Debug)]
pub struct PartialGraph {
    pub(crate) chunk_index: usize,
    pub(crate) nodes: Vec<Option<WorkNode>>,
    pub(crate) info: BTreeMap<TokenRef, TokenInfo>,
    /// Tokens removed by deletion rules.
    pub(crate) deleted: BTreeSet<TokenRef>,
    pub(crate) warnings: Vec<String>,
}

impl PartialGraph {
    /// One node per surviving token, one edge per surviving tree arc.
    pub fn from_trees(trees: &ChunkTrees) -> Self {
        let mut nodes = Vec::new();
        let mut info = BTreeMap::new();
        let mut index: BTreeMap<TokenRef, usize> = BTreeMap::new();
        for sentence in &trees.sentences {
            for tok in sentence.surviving() {
                let r = (sentence.sentence, tok.index);
                index.insert(r, nodes.len());
                info.insert(
                    r,
                    TokenInfo {
                        text: tok.text.clone(),
                        pos: tok.pos.clone(),
                        span: tok.span,
                    },
                );
                nodes.push(Some(WorkNode {
                    tokens: BTreeSet::from([r]),
                    root: tok.head.is_none(),
                    ..WorkNode::default()
                }));
            }
        }
        let mut g = PartialGraph {
            chunk_index: trees.chunk_index,
            nodes,
            info,
            deleted: BTreeSet::new(),
            warnings: Vec::new(),
        };
        for sentence in &trees.sentences {
            for tok in sentence.surviving() {
                if let Some(h) = tok.head {
                    let head = index[&(sentence.sentence, h)];
                    let dep = index[&(sentence.sentence, tok.index)];
                    g.add_edge(head, dep, &tok.relation);
                }
            }
        }
        g
    }

    pub(crate) fn node(&self, id: usize) -> &WorkNode {
        self.nodes[id].as_ref().expect("node is live")
    }

    pub(crate) fn node_mut(&mut self, id: usize) -> &mut WorkNode {
        self.nodes[id].as_mut().expect("node is live")
    }

    pub(crate) fn is_live(&self, id: usize) -> bool {
        self.nodes.get(id).is_some_and(Option::is_some)
    }

    pub(crate) fn live(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|_| i))
    }

    pub fn live_count(&self) -> usize {
        self.live().count()
    }

    pub fn deleted_tokens(&self) -> usize {
        self.deleted.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn add_edge(&mut self, head: usize, dep: usize, rel: &str) {
        if head == dep {
            return;
        }
        self.node_mut(head).out.insert((dep, rel.to_owned()));
        self.node_mut(dep).inc.insert((head, rel.to_owned()));
    }

    pub(crate) fn owners(&self) -> BTreeMap<TokenRef, usize> {
        let mut map = BTreeMap::new();
        for i in self.live() {
            for &t in &self.node(i).tokens {
                map.insert(t, i);
            }
        }
        map
    }

    /// Merges `from` into `into`: tokens are united, edges re-attached with
    /// their labels, self-loops and duplicates dropped.
    pub(crate) fn merge(&mut self, into: usize, from: usize) {
        if into == from {
            return;
        }
        let gone = self.nodes[from].take().expect("merged node is live");
        for (child, rel) in &gone.out {
            self.node_mut(*child).inc.remove(&(from, rel.clone()));
        }
        for (head, rel) in &gone.inc {
            self.node_mut(*head).out.remove(&(from, rel.clone()));
        }
        {
            let target = self.node_mut(into);
            target.tokens.extend(gone.tokens.iter().copied());
            target.entity |= gone.entity;
            target.root |= gone.root;
            if target.chain.is_none() {
                target.chain = gone.chain;
            }
        }
        for (child, rel) in gone.out {
            self.add_edge(into, child, &rel);
        }
        for (head, rel) in gone.inc {
            self.add_edge(head, into, &rel);
        }
    }

    /// Merges every node of `group` into the one with the smallest key.
    pub(crate) fn merge_group(&mut self, group: &[usize]) -> usize {
        let target = *group
            .iter()
            .min_by_key(|&&i| self.node(i).key())
            .expect("non-empty group");
        for &i in group {
            if i != target {
                self.merge(target, i);
            }
        }
        target
    }

    /// Removes a single node; its children stay, detached from it.
    pub(crate) fn delete(&mut self, id: usize) {
        let gone = self.nodes[id].take().expect("deleted node is live");
        self.deleted.extend(gone.tokens.iter().copied());
        for (child, rel) in gone.out {
            let c = self.node_mut(child);
            c.inc.remove(&(id, rel));
            if c.inc.is_empty() {
                c.root = true;
            }
        }
        for (head, rel) in gone.inc {
            self.node_mut(head).out.remove(&(id, rel));
        }
    }

    /// Children of `id` ordered by their first token.
    pub(crate) fn children(&self, id: usize) -> Vec<(usize, String)> {
        let mut out: Vec<_> = self.node(id).out.iter().cloned().collect();
        out.sort_by_key(|(c, rel)| (self.node(*c).key(), rel.clone()));
        out
    }

    pub(crate) fn phrase(&self, id: usize) -> String {
        let node = self.node(id);
        let mut phrase = String::new();
        for t in &node.tokens {
            if !phrase.is_empty() {
                phrase.push(' ');
            }
            phrase.push_str(&self.info[t].text);
        }
        phrase
    }

    /// Live nodes ordered by their first token.
    pub(crate) fn ordered(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.live().collect();
        ids.sort_by_key(|&i| self.node(i).key());
        ids
    }

    /// Freezes into a graph whose node ids follow document order.
    pub fn into_graph(self, doc_id: &str, variant: Variant) -> SemanticGraph {
        let order = self.ordered();
        let remap: BTreeMap<usize, usize> = order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let nodes = order
            .iter()
            .enumerate()
            .map(|(id, &old)| {
                let node = self.node(old);
                let mut spans: Vec<(usize, usize)> = Vec::new();
                for t in &node.tokens {
                    let (s, e) = self.info[t].span;
                    match spans.last_mut() {
                        Some(last) if last.1 == s => last.1 = e,
                        _ => spans.push((s, e)),
                    }
                }
                GraphNode {
                    id,
                    phrase: self.phrase(old),
                    is_entity: node.entity,
                    token_refs: node.tokens.iter().copied().collect(),
                    char_spans: spans,
                    pos_tags: node.tokens.iter().map(|t| self.info[t].pos.clone()).collect(),
                    chunk: self.chunk_index,
                }
            })
            .collect();
        let mut edges: Vec<GraphEdge> = order
            .iter()
            .flat_map(|&old| {
                self.node(old)
                    .out
                    .iter()
                    .map(move |(c, rel)| (old, *c, rel.clone()))
            })
            .map(|(h, c, rel)| GraphEdge(remap[&h], remap[&c], rel))
            .collect();
        edges.sort();
        edges.dedup();
        SemanticGraph {
            doc_id: doc_id.to_owned(),
            variant,
            nodes,
            edges,
        }
    }
}
