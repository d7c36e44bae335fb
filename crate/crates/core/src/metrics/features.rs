//! Feature extraction for sample sets: a built-in token n-gram featurizer
//! and an external lookup table keyed by decoded strings, both behind one
//! trait so the Fréchet-distance scoring is featurizer-agnostic.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::MetricsError;
use crate::data::{TokenAlphabet, TokenSequence};
use crate::scalar::Scalar;

const MAX_FEATURE_DIM: usize = 2_000_000;

/// `n x f` matrix of per-sample feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud<T> {
    n: usize,
    dim: usize,
    data: Vec<T>,
    provenance: String,
}

impl<T: Scalar> FeatureCloud<T> {
    pub fn from_rows(dim: usize, rows: Vec<Vec<T>>, provenance: impl Into<String>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged feature rows");
            data.extend(r);
        }
        FeatureCloud {
            n,
            dim,
            data,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

pub trait Featurizer<T: Scalar>: Send + Sync {
    fn featurize(
        &self,
        seqs: &[TokenSequence],
        alphabet: &TokenAlphabet,
    ) -> Result<FeatureCloud<T>, MetricsError>;

    fn name(&self) -> String;
}

/// Each row is the normalized count vector of token k-grams over the
/// pad-truncated sequence; feature dimension `d^k` with row-major index
/// ordering. Sequences shorter than `k` tokens produce a zero row.
pub fn ngram_featurize<T: Scalar>(
    seqs: &[TokenSequence],
    alphabet: &TokenAlphabet,
    k: usize,
) -> Result<FeatureCloud<T>, MetricsError> {
    if k == 0 {
        return Err(MetricsError::BadNgramOrder);
    }
    if let Some(n) = seqs.first().map(TokenSequence::len) {
        if k > n {
            return Err(MetricsError::NgramTooLong { k, n });
        }
    }
    let d = alphabet.size();
    let dim = d
        .checked_pow(k as u32)
        .filter(|&dim| dim <= MAX_FEATURE_DIM)
        .ok_or(MetricsError::FeatureDimTooLarge { dim: 0, d, k })?;
    let pad = alphabet.pad_index();
    let mut data = vec![T::zero(); seqs.len() * dim];
    for (row, seq) in seqs.iter().enumerate() {
        let eff = seq.effective_len(pad);
        let toks = &seq.indices()[..eff];
        if toks.len() < k {
            continue;
        }
        let windows = toks.len() - k + 1;
        let weight = T::one() / T::from_usize_lossy(windows);
        for w in 0..windows {
            let mut idx = 0usize;
            for &t in &toks[w..w + k] {
                idx = idx * d + t;
            }
            data[row * dim + idx] += weight;
        }
    }
    Ok(FeatureCloud {
        n: seqs.len(),
        dim,
        data,
        provenance: format!("ngram:{k}"),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NGramFeaturizer {
    pub k: usize,
}

impl<T: Scalar> Featurizer<T> for NGramFeaturizer {
    fn featurize(
        &self,
        seqs: &[TokenSequence],
        alphabet: &TokenAlphabet,
    ) -> Result<FeatureCloud<T>, MetricsError> {
        ngram_featurize(seqs, alphabet, self.k)
    }

    fn name(&self) -> String {
        format!("ngram:{}", self.k)
    }
}

/// Feature lookup loaded from a CSV file with header
/// `sequence,f0,f1,...` — one row per decoded string. Stands in for any
/// externally computed embedding.
#[derive(Debug, Clone)]
pub struct FileFeaturizer<T> {
    label: String,
    dim: usize,
    map: HashMap<String, Vec<T>>,
}

impl<T: Scalar> FileFeaturizer<T> {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn parse(text: &str, label: String) -> Result<Self, MetricsError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MetricsError::FeatureFile {
            line: 1,
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"sequence") || cols.len() < 2 {
            return Err(MetricsError::FeatureFile {
                line: 1,
                msg: "header must be `sequence,f0,...`".into(),
            });
        }
        let dim = cols.len() - 1;
        let mut map = HashMap::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(MetricsError::FeatureFile {
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", dim + 1, fields.len()),
                });
            }
            let mut row = Vec::with_capacity(dim);
            for f in &fields[1..] {
                let v = f.parse::<T>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    MetricsError::FeatureFile {
                        line: i + 1,
                        msg: format!("bad number {f:?}"),
                    }
                })?;
                row.push(v);
            }
            map.insert(fields[0].to_owned(), row);
        }
        Ok(FileFeaturizer { label, dim, map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl<T: Scalar> Featurizer<T> for FileFeaturizer<T> {
    fn featurize(
        &self,
        seqs: &[TokenSequence],
        alphabet: &TokenAlphabet,
    ) -> Result<FeatureCloud<T>, MetricsError> {
        let mut data = Vec::with_capacity(seqs.len() * self.dim);
        for seq in seqs {
            let id = alphabet.decode(seq)?;
            let row = self
                .map
                .get(&id)
                .ok_or(MetricsError::UnknownSample { id })?;
            data.extend_from_slice(row);
        }
        Ok(FeatureCloud {
            n: seqs.len(),
            dim: self.dim,
            data,
            provenance: format!("file:{}", self.label),
        })
    }

    fn name(&self) -> String {
        format!("file:{}", self.label)
    }
}
