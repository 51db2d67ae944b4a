//! Scores for set-valued frame predictions, ranked predictions, and generated
//! SPARQL.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

pub type FrameSet = BTreeSet<String>;

/// Additive floor for zero n-gram match counts in [`corpus_bleu`].
pub const BLEU_EPSILON: f64 = 1e-9;
pub const BLEU_MAX_ORDER: usize = 4;
/// Version tag of [`sparql_tokenize`].
pub const SPARQL_TOKENIZER_VERSION: &str = "sparql-tok/v1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn of(pred: &FrameSet, gold: &FrameSet) -> Self {
        let tp = pred.intersection(gold).count();
        Counts {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        }
    }

    /// tp / (tp + fp). An empty prediction scores 1 against an empty gold set, else 0.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp, self.fn_ == 0)
    }

    /// tp / (tp + fn). An empty gold set scores 1 against an empty prediction, else 0.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_, self.fp == 0)
    }

    /// tp / (tp + fp + fn), the set overlap (Jaccard) of the pooled memberships.
    pub fn jaccard(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp + self.fn_, true)
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize, empty_is_perfect: bool) -> f64 {
    if den == 0 {
        if empty_is_perfect {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleScore {
    pub id: String,
    #[serde(flatten)]
    pub counts: Counts,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    /// Fraction of examples whose predicted set equals the gold set.
    pub accuracy_exact: f64,
    /// Pooled tp / (tp + fp + fn).
    pub accuracy_micro: f64,
    pub counts: Counts,
    pub per_example: Vec<ExampleScore>,
}

/// Pairs predictions with gold sets by id, so both lists must cover the same ids.
fn pair_by_id<'a, T>(
    predictions: &'a [(String, T)],
    gold: &'a [(String, FrameSet)],
) -> Result<Vec<(&'a str, &'a T, &'a FrameSet)>> {
    let mut by_id: HashMap<&str, &T> = HashMap::with_capacity(predictions.len());
    for (id, p) in predictions {
        if by_id.insert(id.as_str(), p).is_some() {
            return Err(Error::IdMismatch(format!("duplicate prediction id {id:?}")));
        }
    }
    let mut seen = HashSet::with_capacity(gold.len());
    let mut out = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        if !seen.insert(id.as_str()) {
            return Err(Error::IdMismatch(format!("duplicate gold id {id:?}")));
        }
        let p = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for {id:?}")))?;
        out.push((id.as_str(), *p, g));
    }
    if let Some(extra) = predictions.iter().find(|(id, _)| !seen.contains(id.as_str())) {
        return Err(Error::IdMismatch(format!("prediction {:?} has no gold entry", extra.0)));
    }
    Ok(out)
}

/// Micro-averaged precision/recall over all (example, frame) memberships, plus
/// exact-match and pooled-overlap accuracy. Per-example rows follow gold order.
pub fn score_sets(predictions: &[(String, FrameSet)], gold: &[(String, FrameSet)]) -> Result<MetricsReport> {
    let pairs = pair_by_id(predictions, gold)?;
    let mut total = Counts::default();
    let mut exact = 0usize;
    let mut per_example = Vec::with_capacity(pairs.len());
    for (id, pred, g) in pairs {
        let c = Counts::of(pred, g);
        let is_exact = pred == g;
        exact += usize::from(is_exact);
        total.add(c);
        per_example.push(ExampleScore {
            id: id.to_string(),
            counts: c,
            exact: is_exact,
        });
    }
    Ok(MetricsReport {
        precision: total.precision(),
        recall: total.recall(),
        accuracy_exact: ratio(exact, per_example.len(), true),
        accuracy_micro: total.jaccard(),
        counts: total,
        per_example,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallAtK {
    pub k: usize,
    pub value: f64,
    pub hits: usize,
    pub gold_total: usize,
}

/// Σ|top-k ∩ gold| / Σ|gold| with each ranking truncated to `k`.
pub fn recall_at_k(
    ranked_predictions: &[(String, Vec<String>)],
    gold: &[(String, FrameSet)],
    k: usize,
) -> Result<RecallAtK> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    for (id, ranking) in ranked_predictions {
        let mut seen = HashSet::with_capacity(ranking.len());
        if let Some(dup) = ranking.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidArgument(format!("ranking {id:?} lists {dup:?} twice")));
        }
    }
    let pairs = pair_by_id(ranked_predictions, gold)?;
    let mut hits = 0;
    let mut gold_total = 0;
    for (_, ranking, g) in pairs {
        hits += ranking.iter().take(k).filter(|l| g.contains(l.as_str())).count();
        gold_total += g.len();
    }
    Ok(RecallAtK {
        k,
        value: ratio(hits, gold_total, true),
        hits,
        gold_total,
    })
}

/// Corpus-level BLEU-4 against one reference per hypothesis, scaled to
/// [0, 100]: clipped n-gram precisions pooled over the corpus, uniform weights,
/// brevity penalty on total lengths. Zero match counts are replaced by
/// [`BLEU_EPSILON`] so short queries do not collapse the geometric mean to 0.
pub fn corpus_bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.is_empty() {
        return Err(Error::InvalidArgument("empty reference corpus".into()));
    }
    let hyp_len: usize = hypotheses.iter().map(Vec::len).sum();
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if hyp_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (hyp, reference) in hypotheses.iter().zip(references) {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total += count;
            }
        }
        let p = if matched == 0 {
            BLEU_EPSILON / total.max(1) as f64
        } else {
            matched as f64 / total as f64
        };
        log_precision += p.ln() / BLEU_MAX_ORDER as f64;
    }
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok((100.0 * brevity * log_precision.exp()).clamp(0.0, 100.0))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Whitespace tokenization after setting braces, parentheses, commas,
/// semicolons and statement-ending periods apart. Prefixed names such as
/// `wdt:P31` and decimals stay whole.
pub fn sparql_tokenize(query: &str) -> Vec<String> {
    let chars: Vec<char> = query.chars().collect();
    let mut padded = String::with_capacity(query.len() + 16);
    for (i, &c) in chars.iter().enumerate() {
        let ends_statement = c == '.' && chars.get(i + 1).is_none_or(|n| n.is_whitespace() || *n == '}');
        if matches!(c, '{' | '}' | '(' | ')' | ',' | ';') || ends_statement {
            padded.push(' ');
            padded.push(c);
            padded.push(' ');
        } else {
            padded.push(c);
        }
    }
    padded.split_whitespace().map(str::to_string).collect()
}

/// Number of frame evaluations needed to detect frames in a sentence: every
/// token against the whole lexicon, or against `candidates` frames once
/// retrieval has filtered the search space. Candidate counts above the
/// lexicon size are capped at it.
pub fn complexity_estimate(sentence_tokens: u64, lexicon_size: u64, candidates: Option<u64>) -> u64 {
    let frames = candidates.map_or(lexicon_size, |c| c.min(lexicon_size));
    sentence_tokens.saturating_mul(frames)
}
