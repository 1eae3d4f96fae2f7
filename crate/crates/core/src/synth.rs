//! Synthetic annotated documents for tests, benchmarks and throughput checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{AnnotatedDocument, CorefChain, DependencyEdge, Head, Mention, Sentence, WordToken};

/// Assembles a document from token tuples; token texts are joined by single
/// spaces and offsets computed accordingly.
#[derive(Debug, Default)]
pub struct DocBuilder {
    doc_id: String,
    text: String,
    sentences: Vec<Sentence>,
    coref: Vec<CorefChain>,
}

impl DocBuilder {
    pub fn new(doc_id: &str) -> Self {
        DocBuilder {
            doc_id: doc_id.to_owned(),
            ..Default::default()
        }
    }

    /// Adds a sentence of `(text, pos, head, relation)`; head `-1` is ROOT.
    pub fn sentence(&mut self, tokens: &[(&str, &str, i64, &str)]) -> &mut Self {
        let mut sentence = Sentence::default();
        for (i, &(text, pos, head, rel)) in tokens.iter().enumerate() {
            if !self.text.is_empty() {
                self.text.push(' ');
            }
            let start = self.text.len();
            self.text.push_str(text);
            sentence.tokens.push(WordToken {
                index: i,
                text: text.to_owned(),
                char_start: start,
                char_end: self.text.len(),
                pos: pos.to_owned(),
                lemma: text.to_lowercase(),
            });
            sentence.deps.push(DependencyEdge {
                head: if head < 0 { Head::Root } else { Head::Token(head as usize) },
                dependent: i,
                relation: rel.to_owned(),
                extra: false,
            });
        }
        self.sentences.push(sentence);
        self
    }

    /// Adds a chain of `(sentence, first, last)` mentions.
    pub fn chain(&mut self, id: u32, mentions: &[(usize, usize, usize)]) -> &mut Self {
        self.coref.push(CorefChain {
            chain_id: id,
            mentions: mentions
                .iter()
                .map(|&(sentence, first, last)| Mention { sentence, first, last })
                .collect(),
        });
        self
    }

    pub fn build(&self) -> AnnotatedDocument {
        AnnotatedDocument {
            doc_id: self.doc_id.clone(),
            text: self.text.clone(),
            sentences: self.sentences.clone(),
            coref: self.coref.clone(),
        }
    }
}

const WORDS: [(&str, &str); 16] = [
    ("the", "DT"),
    ("system", "NN"),
    ("patent", "NN"),
    ("claim", "NN"),
    ("device", "NN"),
    ("comprises", "VBZ"),
    ("a", "DT"),
    ("layer", "NN"),
    ("of", "IN"),
    ("metal", "NN"),
    ("first", "JJ"),
    ("is", "VBZ"),
    ("coupled", "VBN"),
    (",", ","),
    ("-", "HYPH"),
    ("it", "PRP"),
];

const RELATIONS: [&str; 12] = [
    "det", "nsubj", "obj", "amod", "compound", "case", "nmod", "punct", "conj", "parataxis", "advmod",
    "aux",
];

/// A random but well-formed document: random trees, POS tags drawn from a
/// small vocabulary (including punctuation), and a few coreference chains.
pub fn random_document(doc_id: &str, seed: u64, sentences: usize, max_len: usize, chains: usize) -> AnnotatedDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DocBuilder::new(doc_id);
    let mut lengths = Vec::new();
    for _ in 0..sentences {
        let n = rng.gen_range(1..=max_len.max(1));
        let root = rng.gen_range(0..n);
        // Random recursive tree over a random token order.
        let mut order: Vec<usize> = (0..n).filter(|&i| i != root).collect();
        order.shuffle(&mut rng);
        let mut placed = vec![root];
        let mut heads = vec![-1i64; n];
        for &t in &order {
            heads[t] = *placed.choose(&mut rng).unwrap() as i64;
            placed.push(t);
        }
        let tokens: Vec<(&str, &str, i64, &str)> = (0..n)
            .map(|i| {
                let (w, p) = WORDS[rng.gen_range(0..WORDS.len())];
                let rel = if heads[i] < 0 { "root" } else { RELATIONS[rng.gen_range(0..RELATIONS.len())] };
                (w, p, heads[i], rel)
            })
            .collect();
        b.sentence(&tokens);
        lengths.push(n);
    }
    for c in 0..chains {
        let k = rng.gen_range(2..=4);
        let mut mentions = Vec::new();
        for _ in 0..k {
            let s = rng.gen_range(0..sentences);
            let first = rng.gen_range(0..lengths[s]);
            let last = (first + rng.gen_range(0..3)).min(lengths[s] - 1);
            mentions.push((s, first, last));
        }
        b.chain(c as u32 + 1, &mentions);
    }
    b.build()
}
