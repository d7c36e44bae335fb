//! Tensor-network probability models over fixed-length token sequences.
//!
//! Three factorizations of the unnormalized weight tensor `T(x) >= 0` are
//! supported, each over a chain of `N` site tensors with shared bond
//! dimension `r`:
//!
//! * nonnegative MPS: `T(x)` is a plain chain product of matrices whose
//!   entries are squares of the raw parameters;
//! * Born machine: `T(x) = |chain amplitude|^2`, amplitudes real or complex;
//! * locally purified state: each site tensor carries an extra purification
//!   index of size `mu` contracted between the tensor and its conjugate,
//!   which keeps `T(x)` nonnegative for free. A Born machine is exactly the
//!   `mu = 1` case, so both run on one contraction engine.
//!
//! Likelihoods, partition functions, conditionals, exact ancestral samples
//! and analytic gradients of the mean negative log-likelihood are all
//! computed by transfer-operator chains with per-site rescaling; no
//! canonical-form machinery is used.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod positive;
mod purified;

use std::sync::OnceLock;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::TokenSequence;
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TnError {
    #[error("invalid model dimensions: {0}")]
    InvalidDimensions(String),
    #[error("sequence has length {found}, model expects {expected}")]
    SequenceLength { expected: usize, found: usize },
    #[error("token index {index} out of range for d={d}")]
    TokenOutOfRange { index: usize, d: usize },
    #[error("degenerate model: every sequence has zero weight")]
    DegenerateModel,
    #[error("sequence {index} in the batch has zero weight")]
    ZeroWeightSequence { index: usize },
    #[error("prefix has zero probability")]
    ZeroProbabilityPrefix,
    #[error("prefix of length {len} leaves no site to condition on (N={n})")]
    PrefixTooLong { len: usize, n: usize },
    #[error("gradient shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Which factorization a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TnKind {
    PositiveMps,
    BornReal,
    BornComplex,
    LpsReal,
    LpsComplex,
}

impl TnKind {
    pub const ALL: [TnKind; 5] = [
        TnKind::PositiveMps,
        TnKind::BornReal,
        TnKind::BornComplex,
        TnKind::LpsReal,
        TnKind::LpsComplex,
    ];

    pub fn is_complex(self) -> bool {
        matches!(self, TnKind::BornComplex | TnKind::LpsComplex)
    }

    pub fn is_purified(self) -> bool {
        matches!(self, TnKind::LpsReal | TnKind::LpsComplex)
    }

    pub fn label(self) -> &'static str {
        match self {
            TnKind::PositiveMps => "positive_mps",
            TnKind::BornReal => "born_real",
            TnKind::BornComplex => "born_complex",
            TnKind::LpsReal => "lps_real",
            TnKind::LpsComplex => "lps_complex",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

/// One site tensor, stored as raw unconstrained parameters in row-major
/// `[d][mu][left][right]` order. Boundary sites have `left = 1` or
/// `right = 1`; non-purified kinds have `mu = 1`, which makes this layout
/// coincide with the natural `d x r`, `d x r x r`, `d x mu x r`,
/// `d x mu x r x r` shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreTensor<T> {
    pub(crate) d: usize,
    pub(crate) mu: usize,
    pub(crate) left: usize,
    pub(crate) right: usize,
    pub(crate) re: Vec<T>,
    pub(crate) im: Option<Vec<T>>,
}

impl<T: Scalar> CoreTensor<T> {
    fn zeros(d: usize, mu: usize, left: usize, right: usize, complex: bool) -> Self {
        let len = d * mu * left * right;
        CoreTensor {
            d,
            mu,
            left,
            right,
            re: vec![T::zero(); len],
            im: complex.then(|| vec![T::zero(); len]),
        }
    }

    #[inline]
    pub(crate) fn idx(&self, x: usize, b: usize, a: usize, g: usize) -> usize {
        ((x * self.mu + b) * self.left + a) * self.right + g
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// `(d, mu, left, right)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.d, self.mu, self.left, self.right)
    }

    pub fn raw_re(&self) -> &[T] {
        &self.re
    }

    pub fn raw_im(&self) -> Option<&[T]> {
        self.im.as_deref()
    }
}

/// Analytic gradient of the batch-mean NLL with respect to the raw
/// parameters, one array per raw-parameter array in `param_arrays` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub arrays: Vec<Vec<T>>,
}

impl<T: Scalar> Gradient<T> {
    pub fn array_views(&self) -> Vec<&[T]> {
        self.arrays.iter().map(|a| a.as_slice()).collect()
    }

    pub fn assert_finite(&self) -> bool {
        self.arrays
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// A tensor-network generative model.
#[derive(Debug, Clone)]
pub struct TnModel<T: Scalar> {
    kind: TnKind,
    d: usize,
    n: usize,
    bond_dim: usize,
    purif_dim: usize,
    seed: u64,
    cores: Vec<CoreTensor<T>>,
    log_z_cache: OnceLock<Result<T, TnError>>,
}

impl<T: Scalar> TnModel<T> {
    /// Initialize with i.i.d. raw parameters: uniform on `[0.9, 1.1]` for the
    /// nonnegative MPS (so effective entries start near one); for the
    /// amplitude-based kinds, Gaussian with mean `2/sqrt(bond_dim)` and
    /// standard deviation `0.5/sqrt(bond_dim)` on the real part (imaginary
    /// parts zero-mean), which keeps the initial distribution near-uniform.
    pub fn init(
        kind: TnKind,
        d: usize,
        n: usize,
        bond_dim: usize,
        purif_dim: usize,
        seed: u64,
    ) -> Result<Self, TnError> {
        if d < 2 {
            return Err(TnError::InvalidDimensions(format!("d={d} must be >= 2")));
        }
        if n < 1 {
            return Err(TnError::InvalidDimensions("N must be >= 1".into()));
        }
        if bond_dim < 1 {
            return Err(TnError::InvalidDimensions("bond_dim must be >= 1".into()));
        }
        if purif_dim < 1 {
            return Err(TnError::InvalidDimensions("purif_dim must be >= 1".into()));
        }
        if !kind.is_purified() && purif_dim != 1 {
            return Err(TnError::InvalidDimensions(format!(
                "purif_dim={purif_dim} only applies to purified kinds"
            )));
        }

        let mu = if kind.is_purified() { purif_dim } else { 1 };
        let mut cores = Vec::with_capacity(n);
        for site in 0..n {
            let left = if site == 0 { 1 } else { bond_dim };
            let right = if site + 1 == n { 1 } else { bond_dim };
            cores.push(CoreTensor::zeros(d, mu, left, right, kind.is_complex()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = 1.0 / (bond_dim as f64).sqrt();
        for core in &mut cores {
            match kind {
                TnKind::PositiveMps => {
                    for v in &mut core.re {
                        *v = T::from_f64_lossy(rng.random_range(0.9..1.1));
                    }
                }
                _ => {
                    // amplitudes start positive-biased: zero-mean signs are
                    // hard to reorganize by gradient descent (products of
                    // mixed-sign entries frustrate the early search), while
                    // a positive mean with 25% relative noise starts near a
                    // uniform distribution and trains reliably
                    for v in &mut core.re {
                        *v = T::from_f64_lossy((2.0 + 0.5 * gaussian(&mut rng)) * sd);
                    }
                    if let Some(im) = &mut core.im {
                        for v in im {
                            *v = T::from_f64_lossy(0.5 * gaussian(&mut rng) * sd);
                        }
                    }
                }
            }
        }

        Ok(TnModel {
            kind,
            d,
            n,
            bond_dim,
            purif_dim: mu,
            seed,
            cores,
            log_z_cache: OnceLock::new(),
        })
    }

    /// Rebuild a model from explicit cores (checkpoint loading).
    pub fn from_parts(
        kind: TnKind,
        d: usize,
        n: usize,
        bond_dim: usize,
        purif_dim: usize,
        seed: u64,
        cores: Vec<CoreTensor<T>>,
    ) -> Result<Self, TnError> {
        let mut model = Self::init(kind, d, n, bond_dim, purif_dim, seed)?;
        if cores.len() != model.cores.len() {
            return Err(TnError::InvalidDimensions(format!(
                "expected {} cores, got {}",
                model.cores.len(),
                cores.len()
            )));
        }
        for (site, (have, want)) in cores.iter().zip(&model.cores).enumerate() {
            if have.dims() != want.dims()
                || have.re.len() != want.re.len()
                || have.im.is_some() != want.im.is_some()
            {
                return Err(TnError::InvalidDimensions(format!(
                    "core {site} has shape {:?}, expected {:?}",
                    have.dims(),
                    want.dims()
                )));
            }
        }
        model.cores = cores;
        model.log_z_cache = OnceLock::new();
        Ok(model)
    }

    pub fn kind(&self) -> TnKind {
        self.kind
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn purif_dim(&self) -> usize {
        self.purif_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cores(&self) -> &[CoreTensor<T>] {
        &self.cores
    }

    pub fn num_params(&self) -> usize {
        self.cores
            .iter()
            .map(|c| c.re.len() + c.im.as_ref().map_or(0, Vec::len))
            .sum()
    }

    /// Raw parameter arrays in a fixed order: per core, the real array, then
    /// the imaginary array when the kind is complex. Gradients use the same
    /// order.
    pub fn param_arrays(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for c in &self.cores {
            out.push(c.re.as_slice());
            if let Some(im) = &c.im {
                out.push(im.as_slice());
            }
        }
        out
    }

    /// Mutable view of the raw parameters. Invalidates the cached partition
    /// value, since any change to the parameters changes `Z`.
    pub fn param_arrays_mut(&mut self) -> Vec<&mut [T]> {
        self.log_z_cache = OnceLock::new();
        let mut out = Vec::new();
        for c in &mut self.cores {
            out.push(c.re.as_mut_slice());
            if let Some(im) = &mut c.im {
                out.push(im.as_mut_slice());
            }
        }
        out
    }

    fn check_seq(&self, seq: &TokenSequence) -> Result<(), TnError> {
        if seq.len() != self.n {
            return Err(TnError::SequenceLength {
                expected: self.n,
                found: seq.len(),
            });
        }
        for &i in seq.indices() {
            if i >= self.d {
                return Err(TnError::TokenOutOfRange { index: i, d: self.d });
            }
        }
        Ok(())
    }

    /// `log T(x)`; `-inf` when the sequence has zero weight.
    pub fn log_weight(&self, seq: &TokenSequence) -> Result<T, TnError> {
        self.check_seq(seq)?;
        let x = seq.indices();
        Ok(match self.kind {
            TnKind::PositiveMps => positive::log_weight(&self.cores, x),
            TnKind::BornReal | TnKind::LpsReal => purified::log_weight::<T>(&self.cores, x),
            TnKind::BornComplex | TnKind::LpsComplex => {
                purified::log_weight::<Complex<T>>(&self.cores, x)
            }
        })
    }

    /// `log Z` where `Z = sum_x T(x)`, by token-summed transfer contraction.
    /// Cached until the parameters change.
    pub fn log_partition(&self) -> Result<T, TnError> {
        self.log_z_cache
            .get_or_init(|| {
                let lz = match self.kind {
                    TnKind::PositiveMps => positive::log_partition(&self.cores),
                    TnKind::BornReal | TnKind::LpsReal => {
                        purified::log_partition::<T>(&self.cores)
                    }
                    TnKind::BornComplex | TnKind::LpsComplex => {
                        purified::log_partition::<Complex<T>>(&self.cores)
                    }
                };
                lz.ok_or(TnError::DegenerateModel)
            })
            .clone()
    }

    /// `log p(x) = log T(x) - log Z`; `-inf` for zero-weight sequences.
    pub fn log_prob(&self, seq: &TokenSequence) -> Result<T, TnError> {
        let lw = self.log_weight(seq)?;
        let lz = self.log_partition()?;
        Ok(lw - lz)
    }

    /// Mean negative log-probability over the sequences. A zero-weight
    /// sequence is reported as an error carrying its index, since it would
    /// make the value `+inf`.
    pub fn nll(&self, seqs: &[TokenSequence]) -> Result<T, TnError> {
        let mut acc = T::zero();
        for (index, seq) in seqs.iter().enumerate() {
            let lp = self.log_prob(seq)?;
            if lp == T::neg_infinity() {
                return Err(TnError::ZeroWeightSequence { index });
            }
            acc += lp;
        }
        Ok(-acc / T::from_usize_lossy(seqs.len().max(1)))
    }

    /// Exact gradient of the batch-mean NLL with respect to every raw
    /// parameter, via left/right environment chains for both the data term
    /// and the partition term.
    pub fn nll_gradient(&self, batch: &[TokenSequence]) -> Result<Gradient<T>, TnError> {
        if batch.is_empty() {
            return Err(TnError::ShapeMismatch("empty batch".into()));
        }
        for seq in batch {
            self.check_seq(seq)?;
        }
        let engine = match self.kind {
            TnKind::PositiveMps => positive::nll_gradient(&self.cores, batch)?,
            TnKind::BornReal | TnKind::LpsReal => {
                purified::nll_gradient::<T>(&self.cores, batch)?
            }
            TnKind::BornComplex | TnKind::LpsComplex => {
                purified::nll_gradient::<Complex<T>>(&self.cores, batch)?
            }
        };
        let mut arrays = Vec::new();
        let mut im_iter = engine.im.into_iter();
        let has_im = self.kind.is_complex();
        for re in engine.re {
            arrays.push(re);
            if has_im {
                arrays.push(im_iter.next().expect("imaginary gradient per core"));
            }
        }
        Ok(Gradient { arrays })
    }

    /// Exact conditional distribution of the next token given a prefix.
    pub fn marginal(&self, prefix: &[usize]) -> Result<Vec<T>, TnError> {
        self.sampler()?.marginal(prefix)
    }

    /// Precompute the token-summed right environments shared by every draw
    /// of a sampling session. Rebuild after any parameter update.
    pub fn sampler(&self) -> Result<TnSampler<'_, T>, TnError> {
        let cache = match self.kind {
            TnKind::PositiveMps => RightEnvs::Positive(
                positive::right_envs_summed(&self.cores).ok_or(TnError::DegenerateModel)?,
            ),
            TnKind::BornReal | TnKind::LpsReal => RightEnvs::Real(
                purified::right_envs_summed::<T>(&self.cores).ok_or(TnError::DegenerateModel)?,
            ),
            TnKind::BornComplex | TnKind::LpsComplex => RightEnvs::Complex(
                purified::right_envs_summed::<Complex<T>>(&self.cores)
                    .ok_or(TnError::DegenerateModel)?,
            ),
        };
        Ok(TnSampler { model: self, cache })
    }

    /// One exact ancestral sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TokenSequence, TnError> {
        self.sampler()?.draw(rng)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Per-core gradient arrays as produced by an engine; `im` is empty for real
/// kinds and parallel to `re` for complex kinds.
pub(crate) struct EngineGrad<T> {
    pub(crate) re: Vec<Vec<T>>,
    pub(crate) im: Vec<Vec<T>>,
}

enum RightEnvs<T: Scalar> {
    Positive(Vec<Vec<T>>),
    Real(Vec<Mat<T>>),
    Complex(Vec<Mat<Complex<T>>>),
}

/// Sampling session over a fixed model: owns the precomputed right
/// environments and issues exact ancestral draws and conditionals.
pub struct TnSampler<'a, T: Scalar> {
    model: &'a TnModel<T>,
    cache: RightEnvs<T>,
}

impl<'a, T: Scalar> TnSampler<'a, T> {
    /// `P(X_{k+1} = . | prefix)` where `k = prefix.len()`.
    pub fn marginal(&self, prefix: &[usize]) -> Result<Vec<T>, TnError> {
        let model = self.model;
        if prefix.len() >= model.n {
            return Err(TnError::PrefixTooLong {
                len: prefix.len(),
                n: model.n,
            });
        }
        for &i in prefix {
            if i >= model.d {
                return Err(TnError::TokenOutOfRange { index: i, d: model.d });
            }
        }
        let weights = match &self.cache {
            RightEnvs::Positive(envs) => positive::prefix_weights(&model.cores, envs, prefix)?,
            RightEnvs::Real(envs) => purified::prefix_weights::<T>(&model.cores, envs, prefix)?,
            RightEnvs::Complex(envs) => {
                purified::prefix_weights::<Complex<T>>(&model.cores, envs, prefix)?
            }
        };
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(TnError::ZeroProbabilityPrefix);
        }
        Ok(weights.into_iter().map(|w| w / total).collect())
    }

    /// Draw one sequence; deterministic given the rng state.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TokenSequence, TnError> {
        let model = self.model;
        let indices = match &self.cache {
            RightEnvs::Positive(envs) => positive::draw(&model.cores, envs, rng)?,
            RightEnvs::Real(envs) => purified::draw::<T, R>(&model.cores, envs, rng)?,
            RightEnvs::Complex(envs) => purified::draw::<Complex<T>, R>(&model.cores, envs, rng)?,
        };
        Ok(TokenSequence::new(indices))
    }
}

/// Select an index from nonnegative weights using one uniform draw.
pub(crate) fn categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Option<usize> {
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let u = T::from_f64_lossy(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            last_positive = Some(i);
        }
        acc += w;
        if u < acc && w > T::zero() {
            return Some(i);
        }
    }
    last_positive
}
