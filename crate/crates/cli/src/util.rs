//! Shared command plumbing: dataset and featurizer construction, model-kind
//! parsing, and the worker-pool flag.

use std::path::Path;

use tngen_core::data::{load_dataset, SequenceDataset, Tokenization};
use tngen_core::metrics::{FileFeaturizer, Featurizer, FrechetScorer, NGramFeaturizer};
use tngen_core::train::ModelKind;

use crate::CliError;

pub fn parse_kind(s: &str) -> Result<ModelKind, CliError> {
    ModelKind::parse(s).ok_or_else(|| {
        CliError::usage(format!(
            "unknown model kind {s:?} (expected positive_mps, born_real, born_complex, \
             lps_real, lps_complex or gan)"
        ))
    })
}

pub fn parse_tokenizer(s: &str) -> Result<Tokenization, CliError> {
    Tokenization::parse(s)
        .ok_or_else(|| CliError::usage(format!("unknown tokenizer {s:?} (brackets|whitespace)")))
}

pub fn load_corpus(
    path: &str,
    tokenizer: Tokenization,
    max_len: Option<usize>,
) -> Result<SequenceDataset, CliError> {
    load_dataset(path, tokenizer, max_len)
        .map_err(|e| CliError::runtime(format!("loading dataset {path}: {e}")))
}

/// `ngram:K` or `file:PATH`.
pub fn build_featurizer(spec: &str) -> Result<Box<dyn Featurizer<f64>>, CliError> {
    if let Some(k) = spec.strip_prefix("ngram:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::usage(format!("bad n-gram order in {spec:?}")))?;
        return Ok(Box::new(NGramFeaturizer { k }));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let f = FileFeaturizer::<f64>::load(path)
            .map_err(|e| CliError::runtime(format!("loading feature table {path}: {e}")))?;
        return Ok(Box::new(f));
    }
    Err(CliError::usage(format!(
        "bad featurizer {spec:?} (expected ngram:K or file:PATH)"
    )))
}

/// Reference features of the training corpus, with the default ridge.
pub fn reference_scorer(
    data: &SequenceDataset,
    featurizer: &dyn Featurizer<f64>,
) -> Result<FrechetScorer<f64>, CliError> {
    let cloud = featurizer
        .featurize(&data.sequences, &data.alphabet)
        .map_err(|e| CliError::runtime(format!("featurizing the dataset: {e}")))?;
    FrechetScorer::from_cloud(&cloud, Some(FrechetScorer::<f64>::DEFAULT_RIDGE))
        .map_err(|e| CliError::runtime(format!("fitting reference features: {e}")))
}

/// Cap the rayon worker pool; call before any parallel work.
pub fn init_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::runtime(format!("creating {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    tngen_core::fsio::atomic_write(path, contents)
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}
