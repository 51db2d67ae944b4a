//! Target-annotated corpora → one entry per unique sentence with every frame
//! it evokes.
//!
//! Instance files hold one record per (sentence, target, frame):
//! `{"sentence_id":"fn15-001","sentence":"...","target_span":[3,3],"frame_label":"Commerce_buy"}`.
//! Grouped files hold one record per sentence:
//! `{"sentence_id":"fn15-001","sentence":"...","gold_frames":["Commerce_buy","Goal"],"split":"test"}`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "validation", alias = "val")]
    Dev,
    Test,
    Exemplars,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Exemplars => "exemplars",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "val" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "exemplars" => Ok(Split::Exemplars),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedInstance {
    pub sentence_id: String,
    pub sentence: String,
    /// Inclusive whitespace-token span of the target.
    pub target_span: (usize, usize),
    pub frame_label: String,
}

impl AnnotatedInstance {
    pub fn check(&self) -> std::result::Result<(), String> {
        let (start, end) = self.target_span;
        let tokens = self.sentence.split_whitespace().count();
        if start > end || end >= tokens {
            return Err(format!(
                "target span ({start}, {end}) outside sentence of {tokens} tokens"
            ));
        }
        if self.frame_label.trim().is_empty() {
            return Err("empty frame label".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedExample {
    pub sentence_id: String,
    pub sentence: String,
    pub gold_frames: BTreeSet<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub example_count: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub mean_frames: f64,
}

impl fmt::Display for SplitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "examples {}  min {}  max {}  mean {:.2}",
            self.example_count, self.min_frames, self.max_frames, self.mean_frames
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeOrder {
    ExemplarsFirst,
    TrainOnly,
    ExemplarsOnly,
}

impl FromStr for MergeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exemplars_first" | "exemplars-first" => Ok(MergeOrder::ExemplarsFirst),
            "train_only" | "train-only" => Ok(MergeOrder::TrainOnly),
            "exemplars_only" | "exemplars-only" => Ok(MergeOrder::ExemplarsOnly),
            _ => Err(Error::InvalidArgument(format!("unknown merge order {s:?}"))),
        }
    }
}

/// Merges every instance of a sentence (exact match after trimming outer
/// whitespace) into one example whose gold set is the union of their frames.
/// The example keeps the smallest sentence id of its instances; output is
/// sorted by that id.
pub fn group_by_sentence(instances: &[AnnotatedInstance], split: Split) -> Result<Vec<GroupedExample>> {
    let mut groups: BTreeMap<&str, GroupedExample> = BTreeMap::new();
    for inst in instances {
        if inst.frame_label.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "instance of sentence {:?} has an empty frame label",
                inst.sentence_id
            )));
        }
        let key = inst.sentence.trim();
        let entry = groups.entry(key).or_insert_with(|| GroupedExample {
            sentence_id: inst.sentence_id.clone(),
            sentence: key.to_string(),
            gold_frames: BTreeSet::new(),
            split,
        });
        if inst.sentence_id < entry.sentence_id {
            entry.sentence_id = inst.sentence_id.clone();
        }
        entry.gold_frames.insert(inst.frame_label.clone());
    }
    let mut out: Vec<GroupedExample> = groups.into_values().collect();
    out.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id).then_with(|| a.sentence.cmp(&b.sentence)));
    Ok(out)
}

/// Frames-per-sentence statistics for one split.
pub fn compute_split_stats(examples: &[GroupedExample]) -> Result<SplitStats> {
    let sizes: Vec<usize> = examples.iter().map(|e| e.gold_frames.len()).collect();
    let (Some(&min), Some(&max)) = (sizes.iter().min(), sizes.iter().max()) else {
        return Err(Error::InvalidArgument("no examples to summarize".into()));
    };
    Ok(SplitStats {
        example_count: sizes.len(),
        min_frames: min,
        max_frames: max,
        mean_frames: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
    })
}

/// Concatenates exemplar and training data in the requested order. Split
/// labels are kept as provenance; the same sentence appearing in both sources
/// yields two entries.
pub fn merge_exemplars(
    train: &[GroupedExample],
    exemplars: &[GroupedExample],
    order: MergeOrder,
) -> Result<Vec<GroupedExample>> {
    check_unique_ids(train, "train")?;
    check_unique_ids(exemplars, "exemplars")?;
    Ok(match order {
        MergeOrder::ExemplarsFirst => exemplars.iter().chain(train).cloned().collect(),
        MergeOrder::TrainOnly => train.to_vec(),
        MergeOrder::ExemplarsOnly => exemplars.to_vec(),
    })
}

fn check_unique_ids(examples: &[GroupedExample], source_name: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(examples.len());
    for e in examples {
        if !seen.insert(e.sentence_id.as_str()) {
            return Err(Error::DuplicateId {
                id: e.sentence_id.clone(),
                source_name: source_name.into(),
            });
        }
    }
    Ok(())
}

pub fn load_instances(path: &Path) -> Result<Vec<AnnotatedInstance>> {
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let inst: AnnotatedInstance = jsonl::parse_line(path, line, &text)?;
        inst.check().map_err(|message| Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_grouped(path: &Path) -> Result<Vec<GroupedExample>> {
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let ex: GroupedExample = jsonl::parse_line(path, line, &text)?;
        if ex.gold_frames.is_empty() {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line,
                message: format!("example {:?} has no gold frames", ex.sentence_id),
            });
        }
        out.push(ex);
    }
    Ok(out)
}
