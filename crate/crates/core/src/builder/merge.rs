use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{CorefChain, Mention};
use crate::graph::{TokenRef, Variant};

use super::forest::ChunkTrees;
use super::rules::{MergeRuleTable, RuleAction};
use super::work::PartialGraph;

/// Collapses every coreference mention into one entity node.
///
/// Mentions shrink to their surviving tokens; empty ones are skipped with a
/// warning. Overlapping mentions are resolved longest-first, ties going to
/// the earlier start. `Src` additionally merges all entity nodes of a chain
/// right away; `Ppr` defers that to [`merge_phrases`].
pub fn merge_coref_phrase(trees: &ChunkTrees, coref: &[CorefChain], variant: Variant) -> PartialGraph {
    let mut g = PartialGraph::from_trees(trees);
    let in_chunk: BTreeSet<usize> = trees.sentences.iter().map(|s| s.sentence).collect();
    let owners = g.owners();

    let mut candidates: Vec<(u32, Mention, Vec<TokenRef>)> = Vec::new();
    for chain in coref {
        for m in chain.mentions.iter().filter(|m| in_chunk.contains(&m.sentence)) {
            let tokens: Vec<TokenRef> = (m.first..=m.last)
                .map(|i| (m.sentence, i))
                .filter(|t| owners.contains_key(t))
                .collect();
            if tokens.is_empty() {
                g.warnings.push(format!(
                    "chunk {}: coref chain {} mention ({}, {}..={}) has no surviving tokens",
                    trees.chunk_index, chain.chain_id, m.sentence, m.first, m.last
                ));
                continue;
            }
            candidates.push((chain.chain_id, *m, tokens));
        }
    }
    candidates.sort_by(|a, b| {
        b.2.len()
            .cmp(&a.2.len())
            .then_with(|| (a.1.sentence, a.1.first).cmp(&(b.1.sentence, b.1.first)))
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut claimed: BTreeSet<TokenRef> = BTreeSet::new();
    for (chain_id, _, tokens) in candidates {
        if tokens.iter().any(|t| claimed.contains(t)) {
            continue;
        }
        claimed.extend(tokens.iter().copied());
        let group: Vec<usize> = tokens.iter().map(|t| owners[t]).collect();
        let node = g.merge_group(&group);
        let n = g.node_mut(node);
        n.entity = true;
        n.chain = Some(chain_id);
    }

    if variant == Variant::Src {
        merge_chains(&mut g);
    }
    g
}

fn merge_chains(g: &mut PartialGraph) {
    let mut chains: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for i in g.live().collect::<Vec<_>>() {
        let node = g.node(i);
        if let (true, Some(c)) = (node.entity, node.chain) {
            chains.entry(c).or_default().push(i);
        }
    }
    for group in chains.values().filter(|g| g.len() > 1) {
        g.merge_group(group);
    }
}

/// Applies the relation rules over the dependency structure.
///
/// `Src` walks pre-order: a child matched by a deletion rule takes its whole
/// subtree with it, unvisited. `Ppr` walks post-order: children are fully
/// processed before their own relation is considered, so a deleted node goes
/// alone and its descendants stay in the graph, detached. Entity nodes are
/// never merged into their head or deleted.
pub fn merge_nodes(mut g: PartialGraph, rules: &MergeRuleTable, variant: Variant) -> PartialGraph {
    let mut visited = vec![false; g.nodes.len()];
    let mut starts: Vec<usize> = g.live().filter(|&i| g.node(i).root).collect();
    starts.sort_by_key(|&i| g.node(i).key());
    loop {
        for s in starts {
            if g.is_live(s) && !visited[s] {
                match variant {
                    Variant::Src => visit_pre(&mut g, s, rules, &mut visited),
                    Variant::Ppr => visit_post(&mut g, s, rules, &mut visited),
                }
            }
        }
        // Nodes unreachable from any root, e.g. detached entities.
        starts = g.ordered().into_iter().filter(|&i| !visited[i]).collect();
        if starts.is_empty() {
            break;
        }
    }
    g
}

fn next_unvisited(g: &PartialGraph, n: usize, visited: &[bool]) -> Option<(usize, String)> {
    g.children(n).into_iter().find(|(c, _)| !visited[*c])
}

fn visit_pre(g: &mut PartialGraph, n: usize, rules: &MergeRuleTable, visited: &mut [bool]) {
    visited[n] = true;
    while g.is_live(n) {
        let Some((c, rel)) = next_unvisited(g, n, visited) else {
            break;
        };
        if g.node(c).entity {
            visit_pre(g, c, rules, visited);
            continue;
        }
        match rules.action(&rel) {
            RuleAction::Merge => g.merge(n, c),
            RuleAction::Delete => delete_subtree(g, c, visited),
            RuleAction::Keep => visit_pre(g, c, rules, visited),
        }
    }
}

/// Deletes `root` and every non-entity node below it that has not been
/// visited yet. Entity nodes survive and stop the descent.
fn delete_subtree(g: &mut PartialGraph, root: usize, visited: &[bool]) {
    let mut doomed = BTreeSet::from([root]);
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        for (c, _) in g.node(n).out.iter() {
            if !visited[*c] && !g.node(*c).entity && doomed.insert(*c) {
                stack.push(*c);
            }
        }
    }
    for n in doomed {
        g.delete(n);
    }
}

fn visit_post(g: &mut PartialGraph, n: usize, rules: &MergeRuleTable, visited: &mut [bool]) {
    visited[n] = true;
    while g.is_live(n) {
        let Some((c, rel)) = next_unvisited(g, n, visited) else {
            break;
        };
        visit_post(g, c, rules, visited);
        if !g.is_live(n) || !g.is_live(c) || g.node(c).entity {
            continue;
        }
        if !g.node(n).out.contains(&(c, rel.clone())) {
            continue;
        }
        match rules.action(&rel) {
            RuleAction::Merge => g.merge(n, c),
            RuleAction::Delete => g.delete(c),
            RuleAction::Keep => {}
        }
    }
}

/// Final merging within a chunk.
///
/// `Ppr` first merges entity nodes of the same coreference chain. Both
/// variants then merge non-entity nodes whose phrases are identical
/// (case- and whitespace-sensitive), repeating until no two non-entity
/// nodes share a phrase.
pub fn merge_phrases(mut g: PartialGraph, variant: Variant) -> PartialGraph {
    if variant == Variant::Ppr {
        merge_chains(&mut g);
    }
    loop {
        let mut by_phrase: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for i in g.ordered() {
            if !g.node(i).entity {
                by_phrase.entry(g.phrase(i)).or_default().push(i);
            }
        }
        let groups: Vec<Vec<usize>> = by_phrase.into_values().filter(|v| v.len() > 1).collect();
        if groups.is_empty() {
            break;
        }
        for group in groups {
            g.merge_group(&group);
        }
    }
    g
}
