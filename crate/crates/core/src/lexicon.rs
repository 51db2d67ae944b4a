//! The frame inventory: loading, validation, and text representations for embedding.
//!
//! A lexicon file is UTF-8 JSON lines. An optional first line
//! `{"lexicon_version": "fn1.5"}` tags the inventory; every other line is one frame:
//!
//! ```text
//! {"label":"Commerce_buy","description":"...","frame_elements":[{"name":"Buyer","definition":"..."}],"lexical_units":[{"lemma":"buy","pos":"v"}]}
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// Version of the rendering templates below. Part of every index fingerprint,
/// so bump it whenever [`render_representation`] output changes.
pub const TEMPLATE_VERSION: &str = "frame-repr/v1";

/// Tag used when a lexicon file has no version header.
pub const UNVERSIONED: &str = "unversioned";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameElement {
    pub name: String,
    #[serde(default)]
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalUnit {
    pub lemma: String,
    pub pos: String,
}

impl fmt::Display for LexicalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pos.is_empty() {
            f.write_str(&self.lemma)
        } else {
            write!(f, "{}.{}", self.lemma, self.pos)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub label: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub frame_elements: Vec<FrameElement>,
    #[serde(default)]
    pub lexical_units: Vec<LexicalUnit>,
}

impl Frame {
    /// Checks the per-frame invariants: nonempty label, unique nonempty FE
    /// names, unique nonempty-lemma lexical units.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.label.trim().is_empty() {
            return Err("empty frame label".into());
        }
        let mut names = HashSet::new();
        for fe in &self.frame_elements {
            if fe.name.is_empty() {
                return Err(format!("{}: frame element with empty name", self.label));
            }
            if !names.insert(fe.name.as_str()) {
                return Err(format!("{}: duplicate frame element {:?}", self.label, fe.name));
            }
        }
        let mut lus = HashSet::new();
        for lu in &self.lexical_units {
            if lu.lemma.is_empty() {
                return Err(format!("{}: lexical unit with empty lemma", self.label));
            }
            if !lus.insert((lu.lemma.as_str(), lu.pos.as_str())) {
                return Err(format!("{}: duplicate lexical unit {lu}", self.label));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationVariant {
    /// Label and description.
    Rep1,
    /// Rep1 plus lexical units.
    Rep2,
    /// Rep2 plus frame elements.
    Rep3,
}

impl RepresentationVariant {
    pub const ALL: [RepresentationVariant; 3] = [Self::Rep1, Self::Rep2, Self::Rep3];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rep1 => "rep1",
            Self::Rep2 => "rep2",
            Self::Rep3 => "rep3",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Self::Rep1 => 1,
            Self::Rep2 => 2,
            Self::Rep3 => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Rep1),
            2 => Some(Self::Rep2),
            3 => Some(Self::Rep3),
            _ => None,
        }
    }
}

impl fmt::Display for RepresentationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepresentationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rep1" | "1" => Ok(Self::Rep1),
            "rep2" | "2" => Ok(Self::Rep2),
            "rep3" | "3" => Ok(Self::Rep3),
            _ => Err(Error::InvalidArgument(format!(
                "unknown representation {s:?} (expected rep1, rep2 or rep3)"
            ))),
        }
    }
}

/// Immutable, label-keyed frame inventory. Iteration follows file order.
#[derive(Debug, Clone)]
pub struct FrameLexicon {
    version_tag: String,
    frames: Vec<Frame>,
    by_label: HashMap<String, usize>,
}

impl PartialEq for FrameLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.version_tag == other.version_tag && self.frames == other.frames
    }
}

impl Eq for FrameLexicon {}

#[derive(Serialize, Deserialize)]
struct LexiconHeader {
    lexicon_version: String,
}

impl FrameLexicon {
    pub fn new(version_tag: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let mut by_label = HashMap::with_capacity(frames.len());
        for (i, frame) in frames.iter().enumerate() {
            frame.check().map_err(Error::InvalidArgument)?;
            if by_label.insert(frame.label.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(frame.label.clone()));
            }
        }
        Ok(Self {
            version_tag: version_tag.into(),
            frames,
            by_label,
        })
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Exact, case-sensitive lookup.
    pub fn get(&self, label: &str) -> Option<&Frame> {
        self.by_label.get(label).map(|&i| &self.frames[i])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.by_label.contains_key(label)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if self.version_tag != UNVERSIONED {
            out.push_str(&jsonl::to_string([&LexiconHeader {
                lexicon_version: self.version_tag.clone(),
            }]));
        }
        out.push_str(&jsonl::to_string(&self.frames));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Loads a lexicon file, rejecting malformed records (with their line
/// number) and duplicate labels.
pub fn load_lexicon(path: &Path) -> Result<FrameLexicon> {
    let lines = jsonl::read_lines(path)?;
    let mut version_tag = UNVERSIONED.to_string();
    let mut frames = Vec::with_capacity(lines.len());
    let mut seen = HashSet::new();
    for (n, (line, text)) in lines.iter().enumerate() {
        if n == 0 {
            if let Ok(header) = serde_json::from_str::<LexiconHeader>(text) {
                if !text.contains("\"label\"") {
                    version_tag = header.lexicon_version;
                    continue;
                }
            }
        }
        let frame: Frame = jsonl::parse_line(path, *line, text)?;
        frame.check().map_err(|message| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: *line,
            message,
        })?;
        if !seen.insert(frame.label.clone()) {
            return Err(Error::DuplicateLabel(frame.label));
        }
        frames.push(frame);
    }
    log::info!("loaded {} frames from {}", frames.len(), path.display());
    FrameLexicon::new(version_tag, frames)
}

/// Renders the text that gets embedded for a frame.
///
/// ```text
/// Frame: <label>
/// Description: <description>
/// Lexical units: <lemma.pos>, <lemma.pos>           (rep2, rep3)
/// Frame elements: <name>: <definition>; <name>: ... (rep3)
/// ```
///
/// Frame element definitions are cut to their first sentence. Empty lists keep
/// their header line.
pub fn render_representation(frame: &Frame, variant: RepresentationVariant) -> String {
    let mut out = format!("Frame: {}\nDescription: {}", frame.label, frame.description);
    if variant >= RepresentationVariant::Rep2 {
        out.push_str("\nLexical units:");
        let lus: Vec<String> = frame.lexical_units.iter().map(|lu| lu.to_string()).collect();
        if !lus.is_empty() {
            out.push(' ');
            out.push_str(&lus.join(", "));
        }
    }
    if variant >= RepresentationVariant::Rep3 {
        out.push_str("\nFrame elements:");
        let fes: Vec<String> = frame
            .frame_elements
            .iter()
            .map(|fe| {
                let def = first_sentence(&fe.definition);
                if def.is_empty() {
                    fe.name.clone()
                } else {
                    format!("{}: {}", fe.name, def)
                }
            })
            .collect();
        if !fes.is_empty() {
            out.push(' ');
            out.push_str(&fes.join("; "));
        }
    }
    out
}

/// Text up to and including the first `.`, `!` or `?` that ends the string or
/// is followed by a space and a character that is not a lowercase letter
/// (so "e.g. a person" stays whole). Whitespace runs collapse to one space.
pub fn first_sentence(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let ends = match (chars.get(i + 1), chars.get(i + 2)) {
            (None, _) => true,
            (Some(' '), Some(next)) => !next.is_lowercase(),
            _ => false,
        };
        if ends {
            return chars[..=i].iter().collect();
        }
    }
    collapsed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    EmptyDescription,
    NoLexicalUnits,
    NoFrameElements,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationWarning {
    pub label: String,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub lexicon_version: String,
    pub frame_count: usize,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Lists frames with empty descriptions, LU lists, or FE lists. These are
/// warnings: such frames still render and embed.
pub fn validate_lexicon(lex: &FrameLexicon) -> ValidationReport {
    let mut warnings = Vec::new();
    for frame in lex.frames() {
        let checks = [
            (frame.description.trim().is_empty(), WarningKind::EmptyDescription),
            (frame.lexical_units.is_empty(), WarningKind::NoLexicalUnits),
            (frame.frame_elements.is_empty(), WarningKind::NoFrameElements),
        ];
        for (failed, kind) in checks {
            if failed {
                warnings.push(ValidationWarning {
                    label: frame.label.clone(),
                    kind,
                });
            }
        }
    }
    ValidationReport {
        lexicon_version: lex.version_tag().to_string(),
        frame_count: lex.len(),
        warnings,
    }
}
