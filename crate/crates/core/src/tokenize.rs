//! Subword span files and a whitespace span tokenizer for tests.
//!
//! Subword file: one JSON line per document,
//! `{"doc_id": "...", "subwords": [[start, end], ...]}` with byte offsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubwordToken {
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordRecord {
    pub doc_id: String,
    pub subwords: Vec<(usize, usize)>,
}

impl SubwordRecord {
    pub fn tokens(&self) -> Vec<SubwordToken> {
        self.subwords
            .iter()
            .enumerate()
            .map(|(index, &(char_start, char_end))| SubwordToken {
                index,
                char_start,
                char_end,
            })
            .collect()
    }

    /// Spans must be non-empty, ordered and non-overlapping.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0;
        for (j, &(s, e)) in self.subwords.iter().enumerate() {
            if s >= e || s < prev {
                return Err(Error::InvalidDocument {
                    doc_id: self.doc_id.clone(),
                    message: format!("subword {j} span [{s}, {e}) is empty or out of order"),
                });
            }
            prev = e;
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("subword records always serialize")
    }

    pub fn from_json_line(line: &str, line_no: usize) -> Result<Self> {
        let rec: SubwordRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.validate()?;
        Ok(rec)
    }
}

/// Maximal runs of non-whitespace characters, as byte spans.
pub fn whitespace_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

pub fn whitespace_record(doc_id: &str, text: &str) -> SubwordRecord {
    SubwordRecord {
        doc_id: doc_id.to_owned(),
        subwords: whitespace_spans(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_tokenizer() {
        assert_eq!(whitespace_spans("  Dogs bark.\n"), vec![(2, 6), (7, 12)]);
        assert_eq!(whitespace_spans("é x"), vec![(0, 2), (3, 4)]);
        assert!(whitespace_spans("   ").is_empty());
    }

    #[test]
    fn overlapping_spans_rejected() {
        let rec = SubwordRecord {
            doc_id: "d".into(),
            subwords: vec![(0, 3), (2, 4)],
        };
        assert!(rec.validate().is_err());
        let line = whitespace_record("d", "a bc").to_json_line();
        assert_eq!(line, r#"{"doc_id":"d","subwords":[[0,1],[2,4]]}"#);
        SubwordRecord::from_json_line(&line, 1).unwrap();
    }
}
