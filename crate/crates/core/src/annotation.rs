//! Annotated documents: the parser-agnostic interchange format and
//! sentence chunking.
//!
//! One document per JSON line:
//!
//! ```text
//! {"doc_id": "...", "text": "...",
//!  "sentences": [{"tokens": [{"i", "text", "start", "end", "pos", "lemma"}],
//!                 "deps":   [{"head", "dep", "rel", "extra"}]}],
//!  "coref": [{"id", "mentions": [{"sent", "first", "last"}]}]}
//! ```
//!
//! Offsets are byte offsets into the UTF-8 document text, end exclusive.
//! A dependency head of `-1` denotes the artificial ROOT.

use std::io::BufRead;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// POS tags treated as punctuation by default.
pub const DEFAULT_PUNCT_POS: [&str; 7] = [".", ",", ":", "!", "?", "(", ")"];

/// Default chunk size in words.
pub const DEFAULT_TARGET_WORDS: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordToken {
    #[serde(rename = "i")]
    pub index: usize,
    pub text: String,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
    pub pos: String,
    #[serde(default)]
    pub lemma: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Head {
    Root,
    Token(usize),
}

impl Serialize for Head {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Head::Root => s.serialize_i64(-1),
            Head::Token(i) => s.serialize_u64(i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Head {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = i64::deserialize(d)?;
        match raw {
            -1 => Ok(Head::Root),
            i if i >= 0 => Ok(Head::Token(i as usize)),
            other => Err(serde::de::Error::custom(format!(
                "invalid head {other}, expected a token index or -1 for ROOT"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub head: Head,
    #[serde(rename = "dep")]
    pub dependent: usize,
    #[serde(rename = "rel")]
    pub relation: String,
    /// Enhanced/extra arcs; ignored by tree traversals.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub extra: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<WordToken>,
    #[serde(default)]
    pub deps: Vec<DependencyEdge>,
}

impl Sentence {
    /// Head and relation of every token, from the non-extra arcs.
    ///
    /// Only meaningful on validated sentences.
    pub fn tree(&self) -> Vec<(Head, &str)> {
        let mut out = vec![(Head::Root, ""); self.tokens.len()];
        for edge in self.deps.iter().filter(|e| !e.extra) {
            out[edge.dependent] = (edge.head, edge.relation.as_str());
        }
        out
    }
}

/// A mention: token range `[first, last]` (inclusive) in one sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    #[serde(rename = "sent")]
    pub sentence: usize,
    pub first: usize,
    pub last: usize,
}

impl Mention {
    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefChain {
    #[serde(rename = "id")]
    pub chain_id: u32,
    pub mentions: Vec<Mention>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    #[serde(default)]
    pub coref: Vec<CorefChain>,
}

impl AnnotatedDocument {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// Checks every structural invariant of the interchange format.
    pub fn validate(&self) -> Result<()> {
        let doc_id = self.doc_id.as_str();
        let invalid = |message: String| Error::InvalidDocument {
            doc_id: doc_id.to_owned(),
            message,
        };
        let mut prev_end = 0usize;
        for (s, sentence) in self.sentences.iter().enumerate() {
            if sentence.tokens.is_empty() {
                return Err(invalid(format!("sentence {s} has no tokens")));
            }
            for (t, token) in sentence.tokens.iter().enumerate() {
                if token.index != t {
                    return Err(invalid(format!(
                        "sentence {s}: token at position {t} has index {}",
                        token.index
                    )));
                }
                if token.char_start >= token.char_end {
                    return Err(invalid(format!("sentence {s}, token {t}: empty or inverted span")));
                }
                if token.char_start < prev_end {
                    return Err(invalid(format!(
                        "sentence {s}, token {t}: span starts at {} before previous token end {prev_end}",
                        token.char_start
                    )));
                }
                let found = self.text.get(token.char_start..token.char_end);
                if found != Some(token.text.as_str()) {
                    return Err(Error::SpanMismatch {
                        doc_id: doc_id.to_owned(),
                        sentence: s,
                        token: t,
                        expected: token.text.clone(),
                        found: found
                            .map(str::to_owned)
                            .unwrap_or_else(|| "<out of range>".to_owned()),
                    });
                }
                prev_end = token.char_end;
            }
            validate_tree(doc_id, s, sentence)?;
        }
        for chain in &self.coref {
            if chain.mentions.len() < 2 {
                return Err(invalid(format!("coref chain {} has fewer than 2 mentions", chain.chain_id)));
            }
            for m in &chain.mentions {
                let ok = self
                    .sentences
                    .get(m.sentence)
                    .is_some_and(|s| m.first <= m.last && m.last < s.tokens.len());
                if !ok {
                    return Err(invalid(format!(
                        "coref chain {}: mention ({}, {}..={}) does not reference existing tokens",
                        chain.chain_id, m.sentence, m.first, m.last
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_tree(doc_id: &str, s: usize, sentence: &Sentence) -> Result<()> {
    let n = sentence.tokens.len();
    let violation = |message: String| Error::TreeViolation {
        doc_id: doc_id.to_owned(),
        sentence: s,
        message,
    };
    let mut heads: Vec<Option<Head>> = vec![None; n];
    for edge in &sentence.deps {
        if edge.dependent >= n {
            return Err(violation(format!("dependent {} out of range", edge.dependent)));
        }
        if let Head::Token(h) = edge.head {
            if h >= n {
                return Err(violation(format!("head {h} out of range")));
            }
            if h == edge.dependent && !edge.extra {
                return Err(violation(format!("token {h} is its own head")));
            }
        }
        if edge.extra {
            continue;
        }
        if heads[edge.dependent].is_some() {
            return Err(violation(format!("token {} has more than one head", edge.dependent)));
        }
        heads[edge.dependent] = Some(edge.head);
    }
    if let Some(t) = heads.iter().position(Option::is_none) {
        return Err(violation(format!("token {t} has no head")));
    }
    // Walk up from every token; a walk longer than n revisits a token.
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(Head::Token(h)) = heads[cur] {
            cur = h;
            steps += 1;
            if steps > n {
                return Err(Error::DependencyCycle {
                    doc_id: doc_id.to_owned(),
                    sentence: s,
                    token: start,
                });
            }
        }
    }
    Ok(())
}

/// Parses one interchange line and validates it.
pub fn parse_document(line: &str, line_no: usize) -> Result<AnnotatedDocument> {
    let doc: AnnotatedDocument = serde_json::from_str(line).map_err(|e| Error::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    doc.validate()?;
    Ok(doc)
}

/// Reads interchange lines; one result per non-blank line, in order.
/// Invalid documents are returned as errors rather than dropped.
pub fn ingest_annotations<R: BufRead>(reader: R) -> Vec<Result<AnnotatedDocument>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        match line {
            Ok(line) if line.trim().is_empty() => {}
            Ok(line) => out.push(parse_document(&line, line_no)),
            Err(e) => out.push(Err(Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })),
        }
    }
    out
}

pub fn to_json_line(doc: &AnnotatedDocument) -> String {
    serde_json::to_string(doc).expect("annotated documents always serialize")
}

/// How tokens are counted towards a chunk's word budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordCount {
    #[default]
    AllTokens,
    /// Skip tokens whose POS tag is in [`DEFAULT_PUNCT_POS`].
    ExcludePunct,
}

impl WordCount {
    pub fn count(self, sentence: &Sentence) -> usize {
        match self {
            WordCount::AllTokens => sentence.tokens.len(),
            WordCount::ExcludePunct => sentence
                .tokens
                .iter()
                .filter(|t| !DEFAULT_PUNCT_POS.contains(&t.pos.as_str()))
                .count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_index: usize,
    /// Half-open range of sentence indices.
    pub sentences: std::ops::Range<usize>,
    pub word_count: usize,
}

/// Greedy not-to-exceed chunking: sentences are appended to the current
/// chunk until the next one would push it past `target_words`. A sentence
/// longer than the target gets a chunk of its own.
pub fn chunk_document(doc: &AnnotatedDocument, target_words: usize, counting: WordCount) -> Vec<Chunk> {
    assert!(target_words >= 1, "target_words must be at least 1");
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut words = 0;
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let n = counting.count(sentence);
        if s > start && words + n > target_words {
            chunks.push(Chunk {
                doc_id: doc.doc_id.clone(),
                chunk_index: chunks.len(),
                sentences: start..s,
                word_count: words,
            });
            start = s;
            words = 0;
        }
        words += n;
    }
    if start < doc.sentences.len() {
        chunks.push(Chunk {
            doc_id: doc.doc_id.clone(),
            chunk_index: chunks.len(),
            sentences: start..doc.sentences.len(),
            word_count: words,
        });
    }
    chunks
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const DOGS_BARK: &str = r#"{"doc_id":"d0","text":"Dogs bark.","sentences":[{"tokens":[{"i":0,"text":"Dogs","start":0,"end":4,"pos":"NNS","lemma":"dog"},{"i":1,"text":"bark","start":5,"end":9,"pos":"VBP","lemma":"bark"},{"i":2,"text":".","start":9,"end":10,"pos":".","lemma":"."}],"deps":[{"head":1,"dep":0,"rel":"nsubj"},{"head":-1,"dep":1,"rel":"root"},{"head":1,"dep":2,"rel":"punct"}]}],"coref":[]}"#;

    #[test]
    fn minimal_document_ingests() {
        let docs = ingest_annotations(DOGS_BARK.as_bytes());
        assert_eq!(docs.len(), 1);
        let doc = docs.into_iter().next().unwrap().unwrap();
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.sentences[0].tokens.len(), 3);
        assert_eq!(doc.sentences[0].tree()[1], (Head::Root, "root"));
    }

    #[test]
    fn span_mismatch_names_location() {
        let line = DOGS_BARK.replace(r#""text":"Dogs""#, r#""text":"Cats""#);
        let err = parse_document(&line, 1).unwrap_err();
        match err {
            Error::SpanMismatch { doc_id, sentence, token, expected, found } => {
                assert_eq!((doc_id.as_str(), sentence, token), ("d0", 0, 0));
                assert_eq!((expected.as_str(), found.as_str()), ("Cats", "Dogs"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_head_is_tree_violation() {
        let line = DOGS_BARK.replace(
            r#"{"head":1,"dep":2,"rel":"punct"}"#,
            r#"{"head":1,"dep":0,"rel":"dep"}"#,
        );
        let err = parse_document(&line, 1).unwrap_err();
        assert!(matches!(err, Error::TreeViolation { .. }), "{err}");
    }

    #[test]
    fn cycle_is_reported() {
        let line = DOGS_BARK
            .replace(r#"{"head":-1,"dep":1,"rel":"root"}"#, r#"{"head":2,"dep":1,"rel":"dep"}"#);
        let err = parse_document(&line, 1).unwrap_err();
        assert!(matches!(err, Error::DependencyCycle { .. }), "{err}");
    }

    #[test]
    fn extra_arcs_do_not_count_as_heads() {
        let line = DOGS_BARK.replace(
            r#"{"head":1,"dep":2,"rel":"punct"}"#,
            r#"{"head":1,"dep":2,"rel":"punct"},{"head":2,"dep":0,"rel":"ref","extra":true}"#,
        );
        parse_document(&line, 1).unwrap();
    }

    #[test]
    fn malformed_line_reports_position() {
        let input = format!("{DOGS_BARK}\n\n{{not json\n");
        let docs = ingest_annotations(input.as_bytes());
        assert_eq!(docs.len(), 2);
        assert!(docs[0].is_ok());
        assert!(matches!(docs[1], Err(Error::Malformed { line: 3, .. })));
    }

    #[test]
    fn single_mention_chain_rejected() {
        let line = DOGS_BARK.replace(
            r#""coref":[]"#,
            r#""coref":[{"id":1,"mentions":[{"sent":0,"first":0,"last":0}]}]"#,
        );
        assert!(parse_document(&line, 1).is_err());
    }

    fn doc_with_lengths(lengths: &[usize]) -> AnnotatedDocument {
        let mut text = String::new();
        let mut sentences = Vec::new();
        for &n in lengths {
            let mut tokens = Vec::new();
            let mut deps = Vec::new();
            for i in 0..n {
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text.len();
                text.push('w');
                tokens.push(WordToken {
                    index: i,
                    text: "w".into(),
                    char_start: start,
                    char_end: start + 1,
                    pos: "NN".into(),
                    lemma: "w".into(),
                });
                deps.push(DependencyEdge {
                    head: if i == 0 { Head::Root } else { Head::Token(0) },
                    dependent: i,
                    relation: if i == 0 { "root" } else { "dep" }.into(),
                    extra: false,
                });
            }
            sentences.push(Sentence { tokens, deps });
        }
        AnnotatedDocument {
            doc_id: "synthetic".into(),
            text,
            sentences,
            coref: vec![],
        }
    }

    #[test]
    fn greedy_chunking() {
        let doc = doc_with_lengths(&[200, 200, 200]);
        doc.validate().unwrap();
        let chunks = chunk_document(&doc, 500, WordCount::AllTokens);
        let ranges: Vec<_> = chunks.iter().map(|c| c.sentences.clone()).collect();
        assert_eq!(ranges, vec![0..2, 2..3]);
        assert_eq!(chunks[0].word_count, 400);
    }

    #[test]
    fn oversized_sentence_gets_own_chunk() {
        let doc = doc_with_lengths(&[700]);
        let chunks = chunk_document(&doc, 500, WordCount::AllTokens);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].word_count, 700);

        let doc = doc_with_lengths(&[1]);
        assert_eq!(chunk_document(&doc, 500, WordCount::AllTokens).len(), 1);
    }

    #[test]
    fn punctuation_can_be_excluded_from_counts() {
        let doc = parse_document(DOGS_BARK, 1).unwrap();
        assert_eq!(WordCount::AllTokens.count(&doc.sentences[0]), 3);
        assert_eq!(WordCount::ExcludePunct.count(&doc.sentences[0]), 2);
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        proptest! {
            #[test]
            fn chunking_partitions_and_is_greedy(
                lengths in proptest::collection::vec(1usize..40, 1..30),
                target in 1usize..80,
            ) {
                let doc = doc_with_lengths(&lengths);
                let chunks = chunk_document(&doc, target, WordCount::AllTokens);
                let mut next = 0;
                for c in &chunks {
                    prop_assert_eq!(c.sentences.start, next);
                    prop_assert!(c.sentences.end > c.sentences.start);
                    next = c.sentences.end;
                }
                prop_assert_eq!(next, lengths.len());
                if lengths.iter().all(|&n| n <= target) {
                    for pair in chunks.windows(2) {
                        prop_assert!(pair[0].word_count <= target);
                        let first_next = lengths[pair[1].sentences.start];
                        prop_assert!(pair[0].word_count + first_next > target);
                    }
                }
            }

            #[test]
            fn serialize_round_trip(lengths in proptest::collection::vec(1usize..6, 1..5)) {
                let doc = doc_with_lengths(&lengths);
                let line = to_json_line(&doc);
                let back = parse_document(&line, 1).unwrap();
                prop_assert_eq!(back, doc);
            }
        }
    }
}
