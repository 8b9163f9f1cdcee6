//! Utterance-level attribute trees.

use serde::{Deserialize, Serialize};

use super::{SpeakerClass, Utterance};
use crate::error::{config_err, Result};

/// One level of the tree: an attribute and the partition it induces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "attribute", rename_all = "snake_case")]
pub enum AttributeLevel {
    /// Branches `A` and `B`.
    SpeakerClass,
    /// Branches `hi` (`snr_db ≥ threshold_db`) and `lo`.
    Snr { threshold_db: f64 },
}

impl AttributeLevel {
    pub fn branches(&self) -> &'static [&'static str] {
        match self {
            AttributeLevel::SpeakerClass => &["A", "B"],
            AttributeLevel::Snr { .. } => &["hi", "lo"],
        }
    }

    /// Branch taken by `u`.
    fn branch(&self, u: &Utterance) -> Result<&'static str> {
        let a = &u.attributes;
        match self {
            AttributeLevel::SpeakerClass => a
                .speaker_class
                .map(SpeakerClass::name)
                .ok_or_else(|| config_err!("utterance {} has no speaker_class attribute", u.id)),
            AttributeLevel::Snr { threshold_db } => {
                let snr = a
                    .snr_db
                    .ok_or_else(|| config_err!("utterance {} has no snr_db attribute", u.id))?;
                Ok(if snr >= *threshold_db { "hi" } else { "lo" })
            }
        }
    }
}

/// Ordered levels. Every node below the root names one encoder, so a one-level
/// tree gives one encoder per branch and a two-level tree additionally gives
/// one per intersection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeTree {
    pub levels: Vec<AttributeLevel>,
}

/// High/low SNR boundary used by the preset trees.
pub const HIGH_SNR_DB: f64 = 10.0;

impl AttributeTree {
    /// Nodes `A`, `B`.
    pub fn two_node() -> Self {
        Self {
            levels: vec![AttributeLevel::SpeakerClass],
        }
    }

    /// Nodes `A`, `A/hi`, `A/lo`, `B`, `B/hi`, `B/lo`.
    pub fn six_node() -> Self {
        Self {
            levels: vec![
                AttributeLevel::SpeakerClass,
                AttributeLevel::Snr {
                    threshold_db: HIGH_SNR_DB,
                },
            ],
        }
    }

    /// Number of nodes below the root.
    pub fn node_count(&self) -> usize {
        let mut total = 0;
        let mut width = 1;
        for level in &self.levels {
            width *= level.branches().len();
            total += width;
        }
        total
    }

    /// Node names in preorder.
    pub fn node_names(&self) -> Vec<String> {
        fn walk(levels: &[AttributeLevel], prefix: &str, out: &mut Vec<String>) {
            let Some((level, rest)) = levels.split_first() else {
                return;
            };
            for b in level.branches() {
                let name = if prefix.is_empty() {
                    b.to_string()
                } else {
                    format!("{prefix}/{b}")
                };
                out.push(name.clone());
                walk(rest, &name, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.levels, "", &mut out);
        out
    }
}

/// A non-root node and the indices of the utterances it holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UatNode {
    /// Branch names joined by `/`, e.g. `A/hi`.
    pub name: String,
    /// 1 for children of the root.
    pub depth: usize,
    /// Ascending indices into the split input.
    pub members: Vec<usize>,
}

/// Splits `utterances` along `tree`. Returns every non-root node in preorder
/// (`A`, `A/hi`, `A/lo`, `B`, ... for the six-node tree). Nodes may be empty.
pub fn uat_split(utterances: &[Utterance], tree: &AttributeTree) -> Result<Vec<UatNode>> {
    if tree.levels.is_empty() {
        return Err(config_err!("attribute tree has no levels"));
    }
    let paths: Vec<Vec<&str>> = utterances
        .iter()
        .map(|u| tree.levels.iter().map(|l| l.branch(u)).collect())
        .collect::<Result<_>>()?;
    Ok(tree
        .node_names()
        .into_iter()
        .map(|name| {
            let parts: Vec<&str> = name.split('/').collect();
            let members = paths
                .iter()
                .enumerate()
                .filter(|(_, p)| p[..parts.len()] == parts[..])
                .map(|(i, _)| i)
                .collect();
            UatNode {
                depth: parts.len(),
                name,
                members,
            }
        })
        .collect())
}
