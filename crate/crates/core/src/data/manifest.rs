use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jsonl::SkeletonSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

/// Class names, joint layout and split membership of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub layout: BTreeMap<String, usize>,
    pub splits: Splits,
    /// Resolved configuration of the run that produced the dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

impl DatasetManifest {
    /// Checks split disjointness, id resolution and label range.
    pub fn validate(&self, seqs: &[SkeletonSequence]) -> Result<()> {
        let known: HashSet<&str> = seqs.iter().map(|s| s.id.as_str()).collect();
        if known.len() != seqs.len() {
            return Err(Error::Config("duplicate sequence ids in dataset".into()));
        }
        let mut seen = HashSet::new();
        for (name, ids) in [
            ("train", &self.splits.train),
            ("val", &self.splits.val),
            ("test", &self.splits.test),
        ] {
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Config(format!(
                        "id {id:?} appears twice across splits (second time in {name})"
                    )));
                }
                if !known.contains(id.as_str()) {
                    return Err(Error::Config(format!(
                        "{name} split references unknown id {id:?}"
                    )));
                }
            }
        }
        for s in seqs {
            if let Some(l) = s.label {
                if l >= self.classes.len() {
                    return Err(Error::Sequence {
                        id: s.id.clone(),
                        message: format!("label {l} out of range for {} classes", self.classes.len()),
                    });
                }
            }
            if let Some(&max) = self.layout.values().max() {
                if s.skeleton.joints() <= max {
                    return Err(Error::Sequence {
                        id: s.id.clone(),
                        message: format!(
                            "{} joints but the layout references joint {max}",
                            s.skeleton.joints()
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Sequences of one split, in manifest order.
    pub fn select<'a>(
        &self,
        seqs: &'a [SkeletonSequence],
        ids: &[String],
    ) -> Result<Vec<&'a SkeletonSequence>> {
        let by_id: BTreeMap<&str, &SkeletonSequence> =
            seqs.iter().map(|s| (s.id.as_str(), s)).collect();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Config(format!("unknown sequence id {id:?}")))
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
