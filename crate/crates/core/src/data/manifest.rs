//! Dataset manifests: `dataset.json` for cohort metadata plus
//! `manifest.jsonl` with one subject per line.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NUM_VIEWS;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATASET_FILE: &str = "dataset.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    /// Output neuron of the class: 0 negative, 1 positive.
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One subject: four view files and a binary label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSample {
    pub subject_id: String,
    pub label: Label,
    /// View files, relative to the dataset directory.
    pub views: Vec<PathBuf>,
    pub frame_counts: Vec<usize>,
    /// Free-form clinical subtype (e.g. "tia"); never used by the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<String>,
    /// Synthetic cohorts only: the side carrying the motion deficit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deficit_side: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub name: String,
    /// `[height, width]` of the stored frames.
    pub resolution: [usize; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub info: DatasetInfo,
    pub samples: Vec<VideoSample>,
}

impl Manifest {
    pub fn new(info: DatasetInfo, samples: Vec<VideoSample>) -> Result<Self> {
        let m = Self { info, samples };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.samples {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::Data(format!("duplicate subject id {:?}", s.subject_id)));
            }
            if s.views.len() != NUM_VIEWS || s.frame_counts.len() != NUM_VIEWS {
                return Err(Error::Data(format!(
                    "subject {:?} has {} views and {} frame counts, expected {NUM_VIEWS}",
                    s.subject_id,
                    s.views.len(),
                    s.frame_counts.len()
                )));
            }
            if s.frame_counts.contains(&0) {
                return Err(Error::Data(format!("subject {:?} has an empty view", s.subject_id)));
            }
        }
        for label in Label::ALL {
            if self.count(label) == 0 {
                return Err(Error::Data(format!("manifest has no {label} subjects")));
            }
        }
        Ok(())
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn get(&self, subject_id: &str) -> Option<&VideoSample> {
        self.samples.iter().find(|s| s.subject_id == subject_id)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let info_path = dir.join(DATASET_FILE);
        let mut info = serde_json::to_string_pretty(&self.info).expect("dataset info serializes");
        info.push('\n');
        fs::write(&info_path, info).map_err(|e| Error::io(&info_path, e))?;
        let mut lines = String::new();
        for s in &self.samples {
            lines.push_str(&serde_json::to_string(s).expect("sample serializes"));
            lines.push('\n');
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, lines).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let info_path = dir.join(DATASET_FILE);
        let text = fs::read_to_string(&info_path).map_err(|e| Error::io(&info_path, e))?;
        let info: DatasetInfo =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", info_path.display())))?;
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let s = serde_json::from_str(line)
                .map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
            samples.push(s);
        }
        Self::new(info, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, label: Label) -> VideoSample {
        VideoSample {
            subject_id: id.into(),
            label,
            views: (0..4).map(|v| PathBuf::from(format!("{id}_{v}.mvid"))).collect(),
            frame_counts: vec![10; 4],
            subtype: None,
            deficit_side: None,
        }
    }

    fn info() -> DatasetInfo {
        DatasetInfo {
            name: "t".into(),
            resolution: [8, 8],
            seed: 1,
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut pos = sample("a", Label::Positive);
        pos.subtype = Some("tia".into());
        let m = Manifest::new(info(), vec![pos, sample("b", Label::Negative)]).unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::load(dir.path()).unwrap(), m);
    }

    #[test]
    fn invariants() {
        let dup = vec![sample("a", Label::Positive), sample("a", Label::Negative)];
        assert!(Manifest::new(info(), dup).is_err());
        assert!(Manifest::new(info(), vec![sample("a", Label::Positive)]).is_err());
        let mut three = sample("a", Label::Positive);
        three.views.pop();
        assert!(Manifest::new(info(), vec![three, sample("b", Label::Negative)]).is_err());
    }
}
