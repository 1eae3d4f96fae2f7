use std::collections::BTreeMap;

use crate::annotation::{AnnotatedDocument, Chunk, Head};
use crate::graph::Variant;

use super::rules::MergeRuleTable;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeToken {
    pub index: usize,
    pub text: String,
    pub pos: String,
    pub span: (usize, usize),
    /// `None` for the sentence root.
    pub head: Option<usize>,
    pub relation: String,
    pub removed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceTree {
    /// Sentence index within the document.
    pub sentence: usize,
    pub tokens: Vec<TreeToken>,
}

impl SentenceTree {
    pub fn surviving(&self) -> impl Iterator<Item = &TreeToken> {
        self.tokens.iter().filter(|t| !t.removed)
    }
}

/// The dependency trees of one chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkTrees {
    pub chunk_index: usize,
    pub sentences: Vec<SentenceTree>,
}

impl ChunkTrees {
    pub fn from_chunk(doc: &AnnotatedDocument, chunk: &Chunk) -> Self {
        let sentences = chunk
            .sentences
            .clone()
            .map(|s| {
                let sentence = &doc.sentences[s];
                let tree = sentence.tree();
                let tokens = sentence
                    .tokens
                    .iter()
                    .zip(tree)
                    .map(|(tok, (head, rel))| TreeToken {
                        index: tok.index,
                        text: tok.text.clone(),
                        pos: tok.pos.clone(),
                        span: (tok.char_start, tok.char_end),
                        head: match head {
                            Head::Root => None,
                            Head::Token(h) => Some(h),
                        },
                        relation: rel.to_owned(),
                        removed: false,
                    })
                    .collect();
                SentenceTree { sentence: s, tokens }
            })
            .collect();
        ChunkTrees {
            chunk_index: chunk.chunk_index,
            sentences,
        }
    }
}

/// Removes punctuation tokens and re-attaches their children.
///
/// `Ppr` removes tokens attached by `punct` or tagged with a punctuation
/// POS; `Src` only looks at the POS tag. Surviving tokens are re-attached to
/// their nearest surviving ancestor with their own relation unchanged. When
/// a root is removed, the orphaned token with the smallest index becomes the
/// new root and the remaining orphans of that tree attach to it.
pub fn remove_punctuation(mut trees: ChunkTrees, variant: Variant, rules: &MergeRuleTable) -> ChunkTrees {
    for sentence in &mut trees.sentences {
        let remove: Vec<bool> = sentence
            .tokens
            .iter()
            .map(|t| {
                t.removed
                    || rules.is_punct_pos(&t.pos)
                    || (variant == Variant::Ppr && t.relation == "punct")
            })
            .collect();
        if !remove.iter().any(|&r| r) {
            continue;
        }
        let original: Vec<Option<usize>> = sentence.tokens.iter().map(|t| t.head).collect();

        // Orphans grouped by the removed original root they hang from.
        let mut orphans: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut new_heads = original.clone();
        for i in 0..sentence.tokens.len() {
            if remove[i] || original[i].is_none() {
                continue;
            }
            let mut cur = original[i];
            let mut top = i;
            loop {
                match cur {
                    Some(h) if remove[h] => {
                        top = h;
                        cur = original[h];
                    }
                    Some(h) => {
                        new_heads[i] = Some(h);
                        break;
                    }
                    None => {
                        orphans.entry(top).or_default().push(i);
                        break;
                    }
                }
            }
        }
        for (_, group) in orphans {
            let new_root = group[0];
            new_heads[new_root] = None;
            sentence.tokens[new_root].relation = "root".to_owned();
            for &i in &group[1..] {
                new_heads[i] = Some(new_root);
            }
        }
        for (i, tok) in sentence.tokens.iter_mut().enumerate() {
            tok.removed = remove[i];
            tok.head = if remove[i] { None } else { new_heads[i] };
        }
    }
    trees
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(index: usize, text: &str, pos: &str, head: Option<usize>, rel: &str) -> TreeToken {
        TreeToken {
            index,
            text: text.into(),
            pos: pos.into(),
            span: (index * 10, index * 10 + text.len()),
            head,
            relation: rel.into(),
            removed: false,
        }
    }

    fn trees(tokens: Vec<TreeToken>) -> ChunkTrees {
        ChunkTrees {
            chunk_index: 0,
            sentences: vec![SentenceTree { sentence: 0, tokens }],
        }
    }

    fn removed(t: &ChunkTrees) -> Vec<bool> {
        t.sentences[0].tokens.iter().map(|t| t.removed).collect()
    }

    #[test]
    fn period_removed_in_both_variants() {
        let input = trees(vec![
            tok(0, "Dogs", "NNS", Some(1), "nsubj"),
            tok(1, "bark", "VBP", None, "root"),
            tok(2, ".", ".", Some(1), "punct"),
        ]);
        let rules = MergeRuleTable::default();
        for v in [Variant::Src, Variant::Ppr] {
            let out = remove_punctuation(input.clone(), v, &rules);
            assert_eq!(removed(&out), vec![false, false, true]);
        }
    }

    #[test]
    fn hyphen_only_removed_in_ppr() {
        let input = trees(vec![
            tok(0, "well", "RB", Some(2), "advmod"),
            tok(1, "–", "HYPH", Some(2), "punct"),
            tok(2, "known", "VBN", None, "root"),
        ]);
        let rules = MergeRuleTable::default();
        let src = remove_punctuation(input.clone(), Variant::Src, &rules);
        let ppr = remove_punctuation(input, Variant::Ppr, &rules);
        assert_eq!(removed(&src), vec![false, false, false]);
        assert_eq!(removed(&ppr), vec![false, true, false]);
    }

    #[test]
    fn no_punctuation_is_identity() {
        let input = trees(vec![
            tok(0, "Dogs", "NNS", Some(1), "nsubj"),
            tok(1, "bark", "VBP", None, "root"),
        ]);
        let out = remove_punctuation(input.clone(), Variant::Ppr, &MergeRuleTable::default());
        assert_eq!(out, input);
    }

    #[test]
    fn children_reattach_to_grandparent() {
        // "a" hangs off a removed ":" which hangs off "b".
        let input = trees(vec![
            tok(0, "b", "NN", None, "root"),
            tok(1, ":", ":", Some(0), "punct"),
            tok(2, "a", "NN", Some(1), "appos"),
        ]);
        let out = remove_punctuation(input, Variant::Src, &MergeRuleTable::default());
        let t = &out.sentences[0].tokens[2];
        assert_eq!((t.head, t.relation.as_str()), (Some(0), "appos"));
    }

    #[test]
    fn removed_root_promotes_smallest_child() {
        let input = trees(vec![
            tok(0, "x", "NN", Some(1), "dep"),
            tok(1, ")", ")", None, "root"),
            tok(2, "y", "NN", Some(1), "dep"),
            tok(3, "z", "NN", Some(2), "amod"),
        ]);
        let out = remove_punctuation(input, Variant::Src, &MergeRuleTable::default());
        let heads: Vec<_> = out.sentences[0].tokens.iter().map(|t| t.head).collect();
        assert_eq!(heads, vec![None, None, Some(0), Some(2)]);
        assert_eq!(out.sentences[0].tokens[0].relation, "root");
        assert_eq!(out.sentences[0].tokens[2].relation, "dep");
    }
}
