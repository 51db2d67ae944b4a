//! Exact top-k cosine search over frame-representation embeddings, and the
//! on-disk index format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic            b"FSIX"
//! format_version   u32
//! dim              u32
//! variant          u8   (1 = rep1, 2 = rep2, 3 = rep3)
//! entry_count      u32
//! lexicon_version  u32 length + UTF-8
//! fingerprint      u32 length + UTF-8
//! body_len         u64
//! checksum         32 bytes, SHA-256 of the body
//! body:
//!   entry_count * dim f32 vectors
//!   entry_count labels, each u32 length + UTF-8
//! ```

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::embedding::{cosine_unit, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::lexicon::{render_representation, FrameLexicon, RepresentationVariant, TEMPLATE_VERSION};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FSIX";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub frame_label: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub frame_label: String,
    pub score: f64,
    pub rank: usize,
}

/// Immutable collection of one embedding per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    variant: RepresentationVariant,
    lexicon_version: String,
    provider_fingerprint: String,
    entries: Vec<IndexEntry>,
}

/// Hash of the embedder configuration, template version and variant. Two
/// indices with the same fingerprint were embedded the same way.
pub fn provider_fingerprint(embedder: &dyn Embedder, variant: RepresentationVariant) -> String {
    let mut h = Sha256::new();
    h.update(embedder.fingerprint().as_bytes());
    h.update([0]);
    h.update(TEMPLATE_VERSION.as_bytes());
    h.update([0]);
    h.update(variant.as_str().as_bytes());
    hex16(&h.finalize())
}

pub(crate) fn hex16(digest: &[u8]) -> String {
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

impl VectorIndex {
    pub fn from_entries(
        dim: usize,
        variant: RepresentationVariant,
        lexicon_version: impl Into<String>,
        provider_fingerprint: impl Into<String>,
        entries: Vec<IndexEntry>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("index dimension must be positive".into()));
        }
        let mut labels = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.vector.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.vector.dim(),
                });
            }
            if !labels.insert(e.frame_label.as_str()) {
                return Err(Error::DuplicateLabel(e.frame_label.clone()));
            }
        }
        Ok(Self {
            dim,
            variant,
            lexicon_version: lexicon_version.into(),
            provider_fingerprint: provider_fingerprint.into(),
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> RepresentationVariant {
        self.variant
    }

    pub fn lexicon_version(&self) -> &str {
        &self.lexicon_version
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.frame_label == label)
    }

    /// True when `embedder` would reproduce this index's vectors.
    pub fn is_compatible_with(&self, embedder: &dyn Embedder) -> bool {
        embedder.dim() == self.dim && provider_fingerprint(embedder, self.variant) == self.provider_fingerprint
    }

    /// Exact top-k by exhaustive scan. Scores descend; ties go to the
    /// lexicographically smaller label.
    pub fn search_topk(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<SearchHit>> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let mut scored: Vec<(f64, &str)> = self
            .entries
            .iter()
            .map(|e| (cosine_unit(query.values(), e.vector.values()), e.frame_label.as_str()))
            .collect();
        let order = |a: &(f64, &str), b: &(f64, &str)| -> Ordering { b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)) };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, label))| SearchHit {
                frame_label: label.to_string(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::with_capacity(self.entries.len() * (self.dim * 4 + 24));
        for e in &self.entries {
            for v in e.vector.values() {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
        for e in &self.entries {
            put_str(&mut body, &e.frame_label);
        }

        let mut out = Vec::with_capacity(body.len() + 128);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.variant.code());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        put_str(&mut out, &self.lexicon_version);
        put_str(&mut out, &self.provider_fingerprint);
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&body));
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::IndexFormat("not an index file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::IndexVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let dim = r.u32()? as usize;
        let variant = RepresentationVariant::from_code(r.take(1)?[0])
            .ok_or_else(|| Error::IndexFormat("unknown representation variant".into()))?;
        let count = r.u32()? as usize;
        let lexicon_version = r.string()?;
        let fingerprint = r.string()?;
        let body_len = r.u64()?;
        let checksum = r.take(32)?.to_vec();
        let body = &bytes[r.pos..];
        if (body.len() as u64) < body_len {
            return Err(Error::IndexTruncated {
                expected: body_len,
                found: body.len() as u64,
            });
        }
        if body.len() as u64 != body_len || Sha256::digest(body).as_slice() != checksum.as_slice() {
            return Err(Error::IndexChecksum);
        }

        let mut r = Reader { buf: body, pos: 0 };
        let mut vectors = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = r.take(dim * 4)?;
            let values: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            vectors.push(EmbeddingVector::from_unit(values)?);
        }
        let mut entries = Vec::with_capacity(count);
        for vector in vectors {
            entries.push(IndexEntry {
                frame_label: r.string()?,
                vector,
            });
        }
        if r.pos != body.len() {
            return Err(Error::IndexFormat("trailing bytes after label table".into()));
        }
        Self::from_entries(dim, variant, lexicon_version, fingerprint, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_index(path: &Path) -> Result<VectorIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    VectorIndex::from_bytes(&bytes)
}

/// Embeds every frame's representation, in lexicon order. A failing batch is
/// retried frame by frame so the error names the offending label.
pub fn build_index(
    lex: &FrameLexicon,
    variant: RepresentationVariant,
    embedder: &dyn Embedder,
) -> Result<VectorIndex> {
    if lex.is_empty() {
        return Err(Error::InvalidArgument("cannot index an empty lexicon".into()));
    }
    let frames = lex.frames();
    let mut entries = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(embedder.batch_size().max(1)) {
        let texts: Vec<String> = chunk.iter().map(|f| render_representation(f, variant)).collect();
        let vectors = match embedder.embed_batch(&texts) {
            Ok(v) if v.len() == texts.len() => v,
            Ok(v) => {
                return Err(Error::ProviderResponse(format!(
                    "embedder returned {} vectors for {} texts",
                    v.len(),
                    texts.len()
                )))
            }
            Err(batch_err) => {
                let mut v = Vec::with_capacity(texts.len());
                for (frame, text) in chunk.iter().zip(&texts) {
                    v.push(embedder.embed(text).map_err(|e| Error::FrameEmbedding {
                        label: frame.label.clone(),
                        source: Box::new(e),
                    })?);
                }
                log::warn!("batch embedding failed ({batch_err}) but per-frame retry succeeded");
                v
            }
        };
        for (frame, vector) in chunk.iter().zip(vectors) {
            if vector.dim() != embedder.dim() {
                return Err(Error::FrameEmbedding {
                    label: frame.label.clone(),
                    source: Box::new(Error::DimensionMismatch {
                        expected: embedder.dim(),
                        actual: vector.dim(),
                    }),
                });
            }
            entries.push(IndexEntry {
                frame_label: frame.label.clone(),
                vector,
            });
        }
    }
    VectorIndex::from_entries(
        embedder.dim(),
        variant,
        lex.version_tag(),
        provider_fingerprint(embedder, variant),
        entries,
    )
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::IndexTruncated {
                expected: (self.pos + n) as u64,
                found: self.buf.len() as u64,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::IndexFormat("label is not UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::FallbackEmbedder;
    use crate::lexicon::Frame;
    use proptest::prelude::*;

    fn unit(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::normalize(values.to_vec()).unwrap()
    }

    fn basis_index() -> VectorIndex {
        VectorIndex::from_entries(
            2,
            RepresentationVariant::Rep1,
            "t",
            "fp",
            vec![
                IndexEntry { frame_label: "A".into(), vector: unit(&[1.0, 0.0]) },
                IndexEntry { frame_label: "B".into(), vector: unit(&[0.0, 1.0]) },
            ],
        )
        .unwrap()
    }

    fn lexicon(n: usize) -> FrameLexicon {
        let frames = (0..n)
            .map(|i| Frame {
                label: format!("Frame_{i}"),
                description: format!("description number {i} about topic {}", i % 3),
                frame_elements: vec![],
                lexical_units: vec![],
            })
            .collect();
        FrameLexicon::new("t", frames).unwrap()
    }

    /// Full sort of every score, independent of the select-then-sort path.
    fn oracle(index: &VectorIndex, query: &EmbeddingVector, k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = index
            .entries()
            .iter()
            .map(|e| {
                let s: f64 = e.vector.values().iter().zip(query.values()).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
                (e.frame_label.clone(), s.clamp(-1.0, 1.0))
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn self_retrieval() {
        let hits = basis_index().search_topk(&unit(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(hits, vec![SearchHit { frame_label: "A".into(), score: 1.0, rank: 1 }]);
    }

    #[test]
    fn k_beyond_entry_count_returns_all() {
        let hits = basis_index().search_topk(&unit(&[1.0, 1.0]), 10).unwrap();
        assert_eq!(hits.len(), 2);
        // equal scores: ascending label
        assert_eq!(hits[0].frame_label, "A");
        assert_eq!(hits[1].frame_label, "B");
        assert_eq!(hits[1].rank, 2);
    }

    #[test]
    fn search_errors() {
        let idx = basis_index();
        assert!(matches!(idx.search_topk(&unit(&[1.0, 0.0, 0.0]), 1), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(idx.search_topk(&unit(&[1.0, 0.0]), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn build_one_entry_per_frame() {
        let e = FallbackEmbedder::new(32, 1).unwrap();
        let idx = build_index(&lexicon(3), RepresentationVariant::Rep1, &e).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 32);
        assert!(idx.is_compatible_with(&e));
        assert!(!idx.is_compatible_with(&FallbackEmbedder::new(32, 2).unwrap()));
        let again = build_index(&lexicon(3), RepresentationVariant::Rep1, &e).unwrap();
        assert_eq!(idx.to_bytes(), again.to_bytes());
        assert!(build_index(&lexicon(0), RepresentationVariant::Rep1, &e).is_err());
    }

    #[test]
    fn fingerprint_tracks_variant_and_provider() {
        let e = FallbackEmbedder::new(32, 1).unwrap();
        let a = provider_fingerprint(&e, RepresentationVariant::Rep1);
        assert_eq!(a, provider_fingerprint(&e, RepresentationVariant::Rep1));
        assert_ne!(a, provider_fingerprint(&e, RepresentationVariant::Rep3));
        assert_ne!(a, provider_fingerprint(&FallbackEmbedder::new(64, 1).unwrap(), RepresentationVariant::Rep1));
    }

    struct FailsOn(&'static str, FallbackEmbedder);

    impl Embedder for FailsOn {
        fn dim(&self) -> usize {
            self.1.dim()
        }
        fn fingerprint(&self) -> String {
            "fails".into()
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
            if texts.iter().any(|t| t.contains(self.0)) {
                return Err(Error::Transport("boom".into()));
            }
            self.1.embed_batch(texts)
        }
    }

    #[test]
    fn build_failure_names_frame() {
        let e = FailsOn("Frame_2\n", FallbackEmbedder::new(8, 1).unwrap());
        match build_index(&lexicon(5), RepresentationVariant::Rep1, &e) {
            Err(Error::FrameEmbedding { label, .. }) => assert_eq!(label, "Frame_2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_and_corruption() {
        let e = FallbackEmbedder::new(64, 5).unwrap();
        let idx = build_index(&lexicon(3), RepresentationVariant::Rep3, &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.idx");
        idx.save(&path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(loaded, idx);

        let bytes = idx.to_bytes();
        let mut corrupt = bytes.clone();
        *corrupt.last_mut().unwrap() ^= 0xff;
        assert!(matches!(VectorIndex::from_bytes(&corrupt), Err(Error::IndexChecksum)));

        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(VectorIndex::from_bytes(&extended), Err(Error::IndexChecksum)));

        assert!(matches!(
            VectorIndex::from_bytes(&bytes[..bytes.len() - 10]),
            Err(Error::IndexTruncated { .. })
        ));
        assert!(matches!(VectorIndex::from_bytes(&bytes[..20]), Err(Error::IndexTruncated { .. })));

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(VectorIndex::from_bytes(&wrong_version), Err(Error::IndexVersion { found: 9, .. })));

        let query = fallback_query(32);
        assert!(matches!(loaded.search_topk(&query, 3), Err(Error::DimensionMismatch { expected: 64, actual: 32 })));
    }

    fn fallback_query(dim: usize) -> EmbeddingVector {
        FallbackEmbedder::new(dim, 1).unwrap().embed_text("query")
    }

    fn arb_index() -> impl Strategy<Value = VectorIndex> {
        (1usize..6, 1usize..40).prop_flat_map(|(dim, n)| {
            prop::collection::vec(prop::collection::vec(-3i8..=3, dim), n).prop_map(move |rows| {
                // small integer grid forces many exact ties
                let entries = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut row)| {
                        if row.iter().all(|&v| v == 0) {
                            row[0] = 1;
                        }
                        IndexEntry {
                            frame_label: format!("L{:02}", (i * 7) % 40),
                            vector: unit(&row.iter().map(|&v| f32::from(v)).collect::<Vec<_>>()),
                        }
                    })
                    .collect::<Vec<_>>();
                let mut seen = HashSet::new();
                let entries = entries.into_iter().filter(|e| seen.insert(e.frame_label.clone())).collect();
                VectorIndex::from_entries(dim, RepresentationVariant::Rep1, "t", "fp", entries).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn search_equals_full_sort(index in arb_index(), q in prop::collection::vec(-3i8..=3, 6), k in prop::sample::select(vec![1usize, 3, 5, 24])) {
            let mut q: Vec<f32> = q[..index.dim()].iter().map(|&v| f32::from(v)).collect();
            if q.iter().all(|&v| v == 0.0) { q[0] = 1.0; }
            let query = unit(&q);
            let hits = index.search_topk(&query, k).unwrap();
            let expected = oracle(&index, &query, k);
            prop_assert_eq!(hits.len(), k.min(index.len()));
            for (i, (hit, (label, score))) in hits.iter().zip(&expected).enumerate() {
                prop_assert_eq!(&hit.frame_label, label);
                prop_assert_eq!(hit.score, *score);
                prop_assert_eq!(hit.rank, i + 1);
                prop_assert!((-1.0..=1.0).contains(&hit.score));
            }
            prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        }

        #[test]
        fn bytes_round_trip(index in arb_index()) {
            prop_assert_eq!(VectorIndex::from_bytes(&index.to_bytes()).unwrap(), index);
        }
    }
}
