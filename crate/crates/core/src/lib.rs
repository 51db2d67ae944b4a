//! Target-free frame detection.
//!
//! Frames from a lexicon are rendered as text, embedded, and indexed for exact
//! cosine search. A raw sentence retrieves its top-k candidate frames; a chat
//! model then picks the evoked frames from (and beyond) the candidates. The
//! crate also groups target-annotated corpora by sentence, scores set
//! predictions, and builds frame-augmented question/SPARQL datasets.

pub mod datasetops;
pub mod embedding;
pub mod error;
pub mod http;
pub mod identifier;
pub mod jsonl;
pub mod lcq2f;
pub mod lexicon;
pub mod metrics;
pub mod retriever;
pub mod vector_index;

pub use error::{Error, ErrorKind, Result};
