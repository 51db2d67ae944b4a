//! Frame-augmented question datasets.
//!
//! A question inherits the frames of every annotated corpus sentence whose
//! knowledge-base signature (relation ids plus class ids) equals the one
//! extracted from the question's SPARQL query.
//!
//! Question records: `{"id":"q1","raw_question":"...","reformulated_question":"...","sparql":"...","split":"train"}`.
//! Corpus records: `{"id":"s1","sentence":"...","signature":{"relations":["P31"],"classes":["Q5"]},"frames":["People"]}`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::lexicon::FrameLexicon;
use crate::metrics::sparql_tokenize;

pub const SIGNATURE_RULES_VERSION: &str = "kb-signature/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionSplit {
    Train,
    #[serde(alias = "validation", alias = "dev")]
    Val,
    Test,
}

impl QuestionSplit {
    pub const ALL: [QuestionSplit; 3] = [Self::Train, Self::Val, Self::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for QuestionSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionEntry {
    pub id: String,
    #[serde(alias = "question")]
    pub raw_question: String,
    #[serde(default, alias = "paraphrased_question", skip_serializing_if = "Option::is_none")]
    pub reformulated_question: Option<String>,
    pub sparql: String,
    pub split: QuestionSplit,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KbSignature {
    pub relations: BTreeSet<String>,
    pub classes: BTreeSet<String>,
}

fn is_id(s: &str, prefix: char) -> bool {
    s.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

impl KbSignature {
    pub fn new<R, C>(relations: R, classes: C) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let sig = Self {
            relations: relations.into_iter().map(Into::into).collect(),
            classes: classes.into_iter().map(Into::into).collect(),
        };
        sig.check().map_err(Error::InvalidArgument)?;
        Ok(sig)
    }

    /// Relations must look like `P123`, classes like `Q123`.
    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some(r) = self.relations.iter().find(|r| !is_id(r, 'P')) {
            return Err(format!("relation {r:?} is not a property id"));
        }
        if let Some(c) = self.classes.iter().find(|c| !is_id(c, 'Q')) {
            return Err(format!("class {c:?} is not an entity id"));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty() && self.classes.is_empty()
    }

    pub fn is_subset(&self, other: &KbSignature) -> bool {
        self.relations.is_subset(&other.relations) && self.classes.is_subset(&other.classes)
    }
}

/// Which prefixed names count as relations and which relations define classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignatureRules {
    pub property_prefixes: Vec<String>,
    pub class_properties: Vec<String>,
    pub entity_prefix: String,
}

impl Default for SignatureRules {
    fn default() -> Self {
        Self {
            property_prefixes: ["wdt", "p", "ps", "pq"].map(String::from).to_vec(),
            class_properties: vec!["P31".into()],
            entity_prefix: "wd".into(),
        }
    }
}

/// Compiled form of [`SignatureRules`].
pub struct SignatureExtractor {
    property: Regex,
    class_properties: HashSet<String>,
    entity_prefix: String,
}

impl SignatureExtractor {
    pub fn new(rules: &SignatureRules) -> Result<Self> {
        if rules.property_prefixes.is_empty() {
            return Err(Error::InvalidArgument("no property prefixes".into()));
        }
        let alts: Vec<String> = rules.property_prefixes.iter().map(|p| regex::escape(p)).collect();
        let property = Regex::new(&format!(r"(?:^|[^A-Za-z0-9_])(?:{}):(P[0-9]+)\b", alts.join("|")))
            .map_err(|e| Error::InvalidArgument(format!("property prefixes: {e}")))?;
        Ok(Self {
            property,
            class_properties: rules.class_properties.iter().cloned().collect(),
            entity_prefix: format!("{}:", rules.entity_prefix),
        })
    }

    fn relations_in<'s, 't>(&'s self, text: &'t str) -> impl Iterator<Item = &'t str> + use<'s, 't> {
        self.property
            .captures_iter(text)
            .map(|c| c.get(1).expect("group 1 always participates").as_str())
    }

    fn entity_id<'t>(&self, token: &'t str) -> Option<&'t str> {
        token.strip_prefix(self.entity_prefix.as_str()).filter(|id| is_id(id, 'Q'))
    }

    /// Lexical scan. Relations are property ids under a listed prefix; classes
    /// are entity ids in object position after a predicate whose path contains
    /// a class-defining property (object lists separated by `,` included).
    pub fn extract(&self, sparql: &str) -> KbSignature {
        let mut sig = KbSignature::default();
        sig.relations.extend(self.relations_in(sparql).map(str::to_string));

        let tokens = sparql_tokenize(sparql);
        let mut i = 0;
        while i < tokens.len() {
            let defines_class = self.relations_in(&tokens[i]).any(|p| self.class_properties.contains(p));
            if defines_class {
                let mut j = i + 1;
                while let Some(id) = tokens.get(j).and_then(|t| self.entity_id(t)) {
                    sig.classes.insert(id.to_string());
                    if tokens.get(j + 1).map(String::as_str) == Some(",") {
                        j += 2;
                    } else {
                        break;
                    }
                }
            }
            i += 1;
        }
        sig
    }
}

/// [`SignatureExtractor::extract`] under the default rules.
pub fn extract_kb_signature(sparql: &str) -> KbSignature {
    SignatureExtractor::new(&SignatureRules::default())
        .expect("default rules compile")
        .extract(sparql)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedKbSentence {
    pub id: String,
    pub sentence: String,
    pub signature: KbSignature,
    pub frames: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Signatures must be equal on both components.
    #[default]
    Exact,
    /// A nonempty sentence signature contained in the question's suffices.
    Subset,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "subset" => Ok(Self::Subset),
            other => Err(Error::InvalidArgument(format!("unknown match mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phrasing {
    #[default]
    Raw,
    Reformulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDetail {
    pub label: String,
    pub description: String,
    pub frame_elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedQuestion {
    #[serde(flatten)]
    pub base: QuestionEntry,
    /// The question text this entry presents, per `phrasing`.
    pub question: String,
    pub phrasing: Phrasing,
    pub signature: KbSignature,
    pub frames: BTreeSet<String>,
    /// Present exactly for the enriched variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_details: Option<Vec<FrameDetail>>,
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, source_name: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                id: id.to_string(),
                source_name: source_name.into(),
            });
        }
    }
    Ok(())
}

pub fn load_questions(path: &Path) -> Result<Vec<QuestionEntry>> {
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let q: QuestionEntry = jsonl::parse_line(path, line, &text)?;
        if q.sparql.trim().is_empty() {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line,
                message: format!("question {:?} has an empty query", q.id),
            });
        }
        out.push(q);
    }
    unique_ids(out.iter().map(|q| q.id.as_str()), &path.display().to_string())?;
    Ok(out)
}

pub fn load_kb_corpus(path: &Path) -> Result<Vec<AnnotatedKbSentence>> {
    let mut out = Vec::new();
    for (line, text) in jsonl::read_lines(path)? {
        let s: AnnotatedKbSentence = jsonl::parse_line(path, line, &text)?;
        let problem = if s.frames.is_empty() {
            Some(format!("sentence {:?} has no frames", s.id))
        } else {
            s.signature.check().err()
        };
        if let Some(message) = problem {
            return Err(Error::MalformedRecord {
                path: path.to_path_buf(),
                line,
                message,
            });
        }
        out.push(s);
    }
    unique_ids(out.iter().map(|s| s.id.as_str()), &path.display().to_string())?;
    Ok(out)
}

/// Keeps each question whose signature matches at least one corpus sentence,
/// with the union of the matching sentences' frames. Output is sorted by id.
pub fn match_questions(
    questions: &[QuestionEntry],
    corpus: &[AnnotatedKbSentence],
    extractor: &SignatureExtractor,
    mode: MatchMode,
) -> Vec<AugmentedQuestion> {
    let mut by_signature: HashMap<&KbSignature, BTreeSet<String>> = HashMap::new();
    for s in corpus {
        by_signature.entry(&s.signature).or_default().extend(s.frames.iter().cloned());
    }
    let mut out: Vec<AugmentedQuestion> = questions
        .par_iter()
        .filter_map(|q| {
            let signature = extractor.extract(&q.sparql);
            let frames: BTreeSet<String> = match mode {
                MatchMode::Exact => by_signature.get(&signature).cloned().unwrap_or_default(),
                MatchMode::Subset => by_signature
                    .iter()
                    .filter(|(sig, _)| !sig.is_empty() && sig.is_subset(&signature))
                    .flat_map(|(_, f)| f.iter().cloned())
                    .collect(),
            };
            (!frames.is_empty()).then(|| AugmentedQuestion {
                question: q.raw_question.clone(),
                base: q.clone(),
                phrasing: Phrasing::Raw,
                signature,
                frames,
                frame_details: None,
            })
        })
        .collect();
    out.sort_by(|a, b| a.base.id.cmp(&b.base.id));
    out
}

/// Per-split augmented questions, in input order within each split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lcq2fDataset {
    pub plus: bool,
    pub splits: BTreeMap<QuestionSplit, Vec<AugmentedQuestion>>,
}

impl Lcq2fDataset {
    pub fn len(&self) -> usize {
        self.splits.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split(&self, split: QuestionSplit) -> &[AugmentedQuestion] {
        self.splits.get(&split).map_or(&[], Vec::as_slice)
    }
}

/// Groups matches by split. With `plus`, attaches each frame's description
/// and frame-element names; a frame missing from the lexicon is an error.
pub fn build_lcq2f(matches: &[AugmentedQuestion], lex: &FrameLexicon, plus: bool) -> Result<Lcq2fDataset> {
    let mut splits: BTreeMap<QuestionSplit, Vec<AugmentedQuestion>> =
        QuestionSplit::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for m in matches {
        let mut entry = m.clone();
        entry.frame_details = if plus {
            let details = m
                .frames
                .iter()
                .map(|label| {
                    let frame = lex.get(label).ok_or_else(|| Error::UnknownLabel {
                        label: label.clone(),
                        context: Some(format!("frame of question {}", m.base.id)),
                    })?;
                    Ok(FrameDetail {
                        label: label.clone(),
                        description: frame.description.clone(),
                        frame_elements: frame.frame_elements.iter().map(|fe| fe.name.clone()).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(details)
        } else {
            None
        };
        splits.entry(m.base.split).or_default().push(entry);
    }
    Ok(Lcq2fDataset { plus, splits })
}

/// Each entry twice: `<id>:raw` with the template question, then
/// `<id>:reformulated` with the reformulation, sharing query and frames.
pub fn build_combined_split(questions: &[AugmentedQuestion]) -> Result<Vec<AugmentedQuestion>> {
    let mut out = Vec::with_capacity(questions.len() * 2);
    for q in questions {
        let reformulated = q
            .base
            .reformulated_question
            .as_deref()
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::MissingReformulation(q.base.id.clone()))?;
        let mut raw = q.clone();
        raw.base.id = format!("{}:raw", q.base.id);
        raw.question = q.base.raw_question.clone();
        raw.phrasing = Phrasing::Raw;
        let mut alt = q.clone();
        alt.base.id = format!("{}:reformulated", q.base.id);
        alt.question = reformulated.to_string();
        alt.phrasing = Phrasing::Reformulated;
        out.push(raw);
        out.push(alt);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lcq2fManifest {
    pub dataset: String,
    pub rules_version: String,
    pub rules: SignatureRules,
    pub match_mode: MatchMode,
    pub combined: bool,
    pub sources: Vec<SourceFile>,
    pub files: BTreeMap<String, usize>,
}

/// Writes `<name>_<split>.jsonl` per split (plus the `_combined` variants when
/// requested) and `manifest.json` into `out_dir`.
pub fn write_lcq2f(
    dataset: &Lcq2fDataset,
    out_dir: &Path,
    combined: bool,
    rules: &SignatureRules,
    match_mode: MatchMode,
    sources: &[&Path],
) -> Result<Lcq2fManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let name = if dataset.plus { "lcq2f_plus" } else { "lcq2f" };
    let mut files = BTreeMap::new();
    for split in QuestionSplit::ALL {
        let entries = dataset.split(split);
        let file = format!("{name}_{split}.jsonl");
        jsonl::write_records(&out_dir.join(&file), entries)?;
        files.insert(file, entries.len());
        if combined {
            let doubled = build_combined_split(entries)?;
            let file = format!("{name}_{split}_combined.jsonl");
            jsonl::write_records(&out_dir.join(&file), &doubled)?;
            files.insert(file, doubled.len());
        }
    }
    let manifest = Lcq2fManifest {
        dataset: name.into(),
        rules_version: SIGNATURE_RULES_VERSION.into(),
        rules: rules.clone(),
        match_mode,
        combined,
        sources: sources
            .iter()
            .map(|p| {
                Ok(SourceFile {
                    path: p.to_path_buf(),
                    sha256: jsonl::file_sha256(p)?,
                })
            })
            .collect::<Result<_>>()?,
        files,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
