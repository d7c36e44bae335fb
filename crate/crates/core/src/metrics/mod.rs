//! Sample-quality metrics: pluggable featurization with Gaussian-fit Fréchet
//! distance, fidelity/novelty counting, Pareto dominance, and the exact
//! hypervolume indicator with per-point contributions.

mod features;
mod frechet;
mod hypervolume;
mod validity;

pub use features::{ngram_featurize, FeatureCloud, Featurizer, FileFeaturizer, NGramFeaturizer};
pub use frechet::{fit_gaussian, frechet_distance, FrechetScorer, GaussianSummary};
pub use hypervolume::{
    dominates, hv_contribution, hypervolume, pareto_front, ObjectiveVector, ReferencePoint, Sense,
};
pub use validity::{fidelity, FidelityOutcome, PropertyTable, ValidityRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("n-gram order must be at least 1")]
    BadNgramOrder,
    #[error("n-gram order {k} exceeds the sequence length {n}")]
    NgramTooLong { k: usize, n: usize },
    #[error("feature dimension {dim} too large (alphabet {d}, order {k})")]
    FeatureDimTooLarge { dim: usize, d: usize, k: usize },
    #[error("no features for sample {id:?}")]
    UnknownSample { id: String },
    #[error("feature table line {line}: {msg}")]
    FeatureFile { line: usize, msg: String },
    #[error("at least 2 samples are required to fit a Gaussian, got {n}")]
    TooFewSamples { n: usize },
    #[error("feature dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("objective dimension mismatch: {a} vs {b}")]
    ObjectiveMismatch { a: usize, b: usize },
    #[error("objective senses differ")]
    SenseMismatch,
    #[error("objective values must be finite")]
    NonFiniteObjective,
    #[error("property table line {line}: {msg}")]
    PropertyCsv { line: usize, msg: String },
    #[error("duplicate sample id {id:?} in property table")]
    DuplicateSample { id: String },
    #[error("decoding sample for lookup: {0}")]
    Decode(#[from] crate::data::DataError),
    #[error("linear algebra: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("reading file: {0}")]
    Io(#[from] std::io::Error),
}
