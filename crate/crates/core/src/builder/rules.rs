use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::DEFAULT_PUNCT_POS;
use crate::error::{Error, Result};

/// Relation-driven merge and deletion rules for the node-merging pass.
///
/// Loaded from TOML:
///
/// ```toml
/// merge_into_parent = ["det", "case"]
/// delete_subtree = []
/// punct_pos = [".", ","]
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRuleTable {
    pub merge_into_parent: BTreeSet<String>,
    #[serde(default)]
    pub delete_subtree: BTreeSet<String>,
    #[serde(default = "default_punct")]
    pub punct_pos: BTreeSet<String>,
}

fn default_punct() -> BTreeSet<String> {
    DEFAULT_PUNCT_POS.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleAction {
    Merge,
    Delete,
    Keep,
}

impl Default for MergeRuleTable {
    fn default() -> Self {
        let merge = [
            "det", "case", "aux", "aux:pass", "cop", "mark", "compound", "fixed", "flat", "nummod",
            "amod", "nmod:poss",
        ];
        MergeRuleTable {
            merge_into_parent: merge.iter().map(|s| s.to_string()).collect(),
            delete_subtree: BTreeSet::new(),
            punct_pos: default_punct(),
        }
    }
}

impl MergeRuleTable {
    pub fn from_toml(src: &str) -> Result<Self> {
        let table: MergeRuleTable =
            toml::from_str(src).map_err(|e| Error::Config(format!("rule table: {e}")))?;
        table.check()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rule tables always serialize")
    }

    /// The three sets must be pairwise disjoint.
    pub fn check(&self) -> Result<()> {
        let overlap = |a: &BTreeSet<String>, b: &BTreeSet<String>| a.intersection(b).next().cloned();
        let clash = overlap(&self.merge_into_parent, &self.delete_subtree)
            .or_else(|| overlap(&self.merge_into_parent, &self.punct_pos))
            .or_else(|| overlap(&self.delete_subtree, &self.punct_pos));
        match clash {
            Some(label) => Err(Error::Config(format!("rule table lists {label:?} in more than one set"))),
            None => Ok(()),
        }
    }

    pub fn action(&self, relation: &str) -> RuleAction {
        if self.merge_into_parent.contains(relation) {
            RuleAction::Merge
        } else if self.delete_subtree.contains(relation) {
            RuleAction::Delete
        } else {
            RuleAction::Keep
        }
    }

    pub fn is_punct_pos(&self, pos: &str) -> bool {
        self.punct_pos.contains(pos)
    }
}
