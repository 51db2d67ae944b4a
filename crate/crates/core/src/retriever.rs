//! Raw sentence → top-k candidate frames, and retrieval quality against gold
//! frame sets.

use std::collections::HashSet;

use serde::Serialize;

use crate::datasetops::GroupedExample;
use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::vector_index::{SearchHit, VectorIndex};

/// Upper bound on frames evoked by one training sentence; the default number
/// of retrieved candidates.
pub const DEFAULT_K: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    pub sentence: String,
    pub k: usize,
    pub candidates: Vec<SearchHit>,
}

impl CandidateSet {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|h| h.frame_label.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels().any(|l| l == label)
    }

    /// The first `k` candidates, as if retrieved with a smaller `k`.
    pub fn truncated(&self, k: usize) -> CandidateSet {
        CandidateSet {
            sentence: self.sentence.clone(),
            k,
            candidates: self.candidates.iter().take(k).cloned().collect(),
        }
    }
}

fn checked_sentence(sentence: &str) -> Result<&str> {
    let trimmed = sentence.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidArgument("empty sentence".into()));
    }
    Ok(trimmed)
}

/// Embeds the sentence once and returns its `min(k, |index|)` nearest frames.
pub fn retrieve_candidates(
    sentence: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<CandidateSet> {
    let sentence = checked_sentence(sentence)?;
    let query = embedder.embed(sentence)?;
    Ok(CandidateSet {
        sentence: sentence.to_string(),
        k,
        candidates: index.search_topk(&query, k)?,
    })
}

/// [`retrieve_candidates`] for many sentences, embedding in provider-sized batches.
pub fn retrieve_batch(
    sentences: &[String],
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<CandidateSet>> {
    let trimmed: Vec<String> = sentences
        .iter()
        .map(|s| checked_sentence(s).map(str::to_string))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(trimmed.len());
    for chunk in trimmed.chunks(embedder.batch_size().max(1)) {
        let vectors = embedder.embed_batch(chunk)?;
        for (sentence, query) in chunk.iter().zip(vectors) {
            out.push(CandidateSet {
                sentence: sentence.clone(),
                k,
                candidates: index.search_topk(&query, k)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalExample {
    pub sentence_id: String,
    pub hit_count: usize,
    pub gold_count: usize,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub k: usize,
    /// Σ|candidates ∩ gold| / Σ|candidates|
    pub precision: f64,
    /// Σ|candidates ∩ gold| / Σ|gold|
    pub recall: f64,
    pub hits: usize,
    pub candidate_total: usize,
    pub gold_total: usize,
    pub per_example: Vec<RetrievalExample>,
}

/// Micro-averaged precision and recall of precomputed candidate sets, paired
/// with `dataset` by position.
pub fn score_retrieval(dataset: &[GroupedExample], candidates: &[CandidateSet], k: usize) -> Result<RetrievalReport> {
    if dataset.len() != candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} examples but {} candidate sets",
            dataset.len(),
            candidates.len()
        )));
    }
    let mut per_example = Vec::with_capacity(dataset.len());
    let (mut hits, mut candidate_total, mut gold_total) = (0, 0, 0);
    for (ex, cands) in dataset.iter().zip(candidates) {
        let labels: HashSet<&str> = cands.labels().take(k).collect();
        let hit_count = ex.gold_frames.iter().filter(|g| labels.contains(g.as_str())).count();
        hits += hit_count;
        candidate_total += labels.len();
        gold_total += ex.gold_frames.len();
        per_example.push(RetrievalExample {
            sentence_id: ex.sentence_id.clone(),
            hit_count,
            gold_count: ex.gold_frames.len(),
            candidate_count: labels.len(),
        });
    }
    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(RetrievalReport {
        k,
        precision: frac(hits, candidate_total),
        recall: frac(hits, gold_total),
        hits,
        candidate_total,
        gold_total,
        per_example,
    })
}

/// Fails on the first gold label absent from the index, naming its sentence.
pub fn check_gold_labels(dataset: &[GroupedExample], index: &VectorIndex) -> Result<()> {
    let known: HashSet<&str> = index.entries().iter().map(|e| e.frame_label.as_str()).collect();
    for ex in dataset {
        if let Some(label) = ex.gold_frames.iter().find(|g| !known.contains(g.as_str())) {
            return Err(Error::UnknownLabel {
                label: label.clone(),
                context: Some(format!("gold frame of sentence {}", ex.sentence_id)),
            });
        }
    }
    Ok(())
}

/// Retrieves `k` candidates per example and scores them against the gold sets.
pub fn evaluate_retrieval(
    dataset: &[GroupedExample],
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<RetrievalReport> {
    Ok(evaluate_retrieval_sweep(dataset, index, embedder, &[k])?.remove(0))
}

/// One report per entry of `ks`, retrieving once at the largest `k` and
/// truncating. Exact top-k makes the truncation identical to a fresh search.
pub fn evaluate_retrieval_sweep(
    dataset: &[GroupedExample],
    index: &VectorIndex,
    embedder: &dyn Embedder,
    ks: &[usize],
) -> Result<Vec<RetrievalReport>> {
    let Some(&max_k) = ks.iter().max() else {
        return Err(Error::InvalidArgument("no k values".into()));
    };
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    check_gold_labels(dataset, index)?;
    let sentences: Vec<String> = dataset.iter().map(|e| e.sentence.clone()).collect();
    let candidates = retrieve_batch(&sentences, index, embedder, max_k)?;
    ks.iter().map(|&k| score_retrieval(dataset, &candidates, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasetops::Split;
    use crate::embedding::{EmbeddingVector, FallbackEmbedder};
    use crate::lexicon::RepresentationVariant;
    use crate::vector_index::IndexEntry;

    fn hit(label: &str, rank: usize) -> SearchHit {
        SearchHit {
            frame_label: label.into(),
            score: 1.0 - rank as f64 * 0.01,
            rank,
        }
    }

    fn example(id: &str, gold: &[&str]) -> GroupedExample {
        GroupedExample {
            sentence_id: id.into(),
            sentence: format!("sentence {id}"),
            gold_frames: gold.iter().map(|s| s.to_string()).collect(),
            split: Split::Train,
        }
    }

    fn candidates(labels: &[&str]) -> CandidateSet {
        CandidateSet {
            sentence: "s".into(),
            k: labels.len(),
            candidates: labels.iter().enumerate().map(|(i, l)| hit(l, i + 1)).collect(),
        }
    }

    #[test]
    fn both_gold_in_24_candidates() {
        let mut labels: Vec<String> = (0..22).map(|i| format!("X{i}")).collect();
        labels.insert(3, "A".into());
        labels.insert(10, "B".into());
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let r = score_retrieval(&[example("1", &["A", "B"])], &[candidates(&refs)], 24).unwrap();
        assert_eq!(r.recall, 1.0);
        assert!((r.precision - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn gold_missing_from_candidates() {
        let r = score_retrieval(&[example("1", &["A"])], &[candidates(&["B", "C"])], 2).unwrap();
        assert_eq!((r.recall, r.precision), (0.0, 0.0));
    }

    fn text_index(embedder: &FallbackEmbedder, texts: &[(&str, &str)]) -> VectorIndex {
        let entries = texts
            .iter()
            .map(|(label, text)| IndexEntry {
                frame_label: label.to_string(),
                vector: embedder.embed_text(text),
            })
            .collect();
        VectorIndex::from_entries(embedder.dim(), RepresentationVariant::Rep1, "t", "fp", entries).unwrap()
    }

    #[test]
    fn sentence_matching_a_stored_vector_ranks_first() {
        let e = FallbackEmbedder::new(128, 3).unwrap();
        let idx = text_index(&e, &[("Commerce_buy", "buy a soda"), ("Goal", "go to the bar"), ("Emotion", "sad")]);
        let c = retrieve_candidates("buy a soda", &idx, &e, 1).unwrap();
        assert_eq!(c.candidates.len(), 1);
        assert_eq!(c.candidates[0].frame_label, "Commerce_buy");
        assert!((c.candidates[0].score - 1.0).abs() < 1e-6);
        assert_eq!(c, retrieve_candidates("  buy a soda ", &idx, &e, 1).unwrap());
        assert_eq!(retrieve_candidates("buy a soda", &idx, &e, 24).unwrap().candidates.len(), 3);
        assert!(retrieve_candidates("   ", &idx, &e, 3).is_err());
    }

    #[test]
    fn unknown_gold_label_names_sentence() {
        let e = FallbackEmbedder::new(16, 3).unwrap();
        let idx = text_index(&e, &[("A", "a"), ("B", "b")]);
        match evaluate_retrieval(&[example("s9", &["Nope"])], &idx, &e, 2) {
            Err(Error::UnknownLabel { label, context }) => {
                assert_eq!(label, "Nope");
                assert!(context.unwrap().contains("s9"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batch_matches_single() {
        let e = FallbackEmbedder::new(64, 1).unwrap();
        let idx = text_index(&e, &[("A", "alpha beta"), ("B", "beta gamma"), ("C", "gamma delta")]);
        let sentences: Vec<String> = ["alpha", "gamma", "delta beta"].iter().map(|s| s.to_string()).collect();
        let batch = retrieve_batch(&sentences, &idx, &e, 2).unwrap();
        for (s, c) in sentences.iter().zip(&batch) {
            assert_eq!(c, &retrieve_candidates(s, &idx, &e, 2).unwrap());
        }
    }

    #[test]
    fn vectors_unit_in_index() {
        let e = FallbackEmbedder::new(8, 1).unwrap();
        let v: EmbeddingVector = e.embed_text("x");
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }
}
