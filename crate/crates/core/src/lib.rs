//! Data-level toolkit for temporally structured music captions: synthetic
//! song composition from short clips, segmented caption text, IoU-weighted
//! text↔audio retrieval, and caption/retrieval/generation metrics.
//!
//! All embeddings are inputs; nothing here runs a neural model.

pub mod captionfmt;
pub mod corpus;
pub mod embedding;
pub mod interval;
pub mod jsonfmt;
pub mod metrics;
pub mod retrieval;
pub mod sampler;

pub use captionfmt::{parse_caption, serialize_caption, SegmentedCaption};
pub use corpus::{load_clip_corpus, ClipCorpus, ClipRecord};
pub use embedding::{cosine, EmbeddingVector};
pub use interval::TimeInterval;
pub use retrieval::{rank_items, score_matrix, PairScore, RankedList, SegmentDoc};
pub use sampler::{sample_composition, CompositionPlan, TemplatedCaption};
