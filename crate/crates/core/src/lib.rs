//! Axis-word data augmentation for disease-name normalization.
//!
//! The pipeline tags names with axis words (disease center, anatomical
//! region, disease characteristic), generates new unnormalized → standard
//! pairs by axis-word replacement and multi-granularity aggregation, keeps the
//! ones that pass an n-gram and an embedding-similarity gate, and scores the
//! result with a retrieval baseline.

pub mod augment;
pub mod eval;
pub mod filter;
pub mod ingest;
pub mod model;
pub mod stats;
pub mod tagger;

pub use augment::{run_augmentation, Augmentation, AugmentationConfig, AugmentationReport};
pub use filter::{filter_pairs, EmbeddingProvider, FilterConfig};
pub use ingest::Dataset;
pub use model::{
    AxisAnnotation, AxisType, AxisWord, DiseasePair, IcdCode, IcdEntry, Provenance, RegionTree,
};
pub use tagger::{Lexicon, Tagger};
