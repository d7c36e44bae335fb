//! Training loops (minibatch Adam on the TN NLL, alternating GAN updates),
//! per-epoch sample evaluation by Fréchet distance with best-epoch
//! retention, and random hyperparameter search over declarative spaces.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::adam::{AdamConfig, AdamError, AdamState};
use crate::data::{SequenceDataset, TokenSequence};
use crate::gan::{one_hot, GanError, GanModel, GanOptimizer};
use crate::metrics::{Featurizer, FrechetScorer, MetricsError};
use crate::scalar::Scalar;
use crate::tn::{TnError, TnKind, TnModel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("model failure at epoch {epoch}: {source}")]
    Model { epoch: usize, source: TnError },
    #[error("GAN failure at epoch {epoch}: {source}")]
    Gan { epoch: usize, source: GanError },
    #[error(transparent)]
    Optimizer(#[from] AdamError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("history holds no evaluations")]
    NoEvaluations,
    #[error("search space is empty")]
    EmptySpace,
    #[error("search trial is missing parameter {0:?}")]
    MissingParameter(String),
    #[error("dataset incompatible with model: {0}")]
    IncompatibleData(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Samples drawn at each evaluation point.
    pub eval_sample_count: usize,
    /// Epochs between evaluations; larger than `epochs` disables evaluation.
    pub eval_every: usize,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            learning_rate: T::from_f64_lossy(1e-3),
            batch_size: 64,
            epochs: 200,
            seed: 0,
            eval_sample_count: 10_000,
            eval_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpochLoss<T> {
    Nll(T),
    Gan { d_objective: T, g_objective: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub epoch: usize,
    pub frechet: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory<T> {
    /// One entry per epoch, 1-based.
    pub losses: Vec<(usize, EpochLoss<T>)>,
    pub evaluations: Vec<Evaluation<T>>,
    /// Index into `evaluations` of the lowest recorded distance.
    pub best: Option<usize>,
}

impl<T> Default for TrainHistory<T> {
    fn default() -> Self {
        TrainHistory {
            losses: Vec::new(),
            evaluations: Vec::new(),
            best: None,
        }
    }
}

impl<T: Scalar> TrainHistory<T> {
    /// CSV rendering: `epoch,nll,frechet` for likelihood models,
    /// `epoch,d_objective,g_objective,frechet` for the GAN. The distance
    /// column is empty on epochs without an evaluation.
    pub fn to_csv(&self) -> String {
        let gan = matches!(self.losses.first(), Some((_, EpochLoss::Gan { .. })));
        let mut out = String::from(if gan {
            "epoch,d_objective,g_objective,frechet\n"
        } else {
            "epoch,nll,frechet\n"
        });
        for (epoch, loss) in &self.losses {
            let fd = self
                .evaluations
                .iter()
                .find(|e| e.epoch == *epoch)
                .map(|e| format!("{}", e.frechet))
                .unwrap_or_default();
            match loss {
                EpochLoss::Nll(v) => out.push_str(&format!("{epoch},{v},{fd}\n")),
                EpochLoss::Gan {
                    d_objective,
                    g_objective,
                } => out.push_str(&format!("{epoch},{d_objective},{g_objective},{fd}\n")),
            }
        }
        out
    }
}

/// Lowest recorded Fréchet distance; ties break to the earliest epoch.
/// Returns `(epoch, index into evaluations)`.
pub fn select_best_epoch<T: Scalar>(history: &TrainHistory<T>) -> Result<(usize, usize), TrainError> {
    let mut best: Option<(usize, usize)> = None;
    for (i, e) in history.evaluations.iter().enumerate() {
        let better = match best {
            None => true,
            Some((_, bi)) => e.frechet < history.evaluations[bi].frechet,
        };
        if better {
            best = Some((e.epoch, i));
        }
    }
    best.ok_or(TrainError::NoEvaluations)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar, M> {
    /// Model after the final epoch.
    pub model: M,
    /// Checkpoint of the best (lowest-distance) epoch; the final model when
    /// no evaluation ran.
    pub best_model: M,
    /// Sample set drawn at the best epoch (suffix-pad normalized).
    pub best_samples: Vec<TokenSequence>,
    pub history: TrainHistory<T>,
}

fn check_compat(data: &SequenceDataset, d: usize, n: usize) -> Result<(), TrainError> {
    if data.alphabet.size() != d || data.sequence_len() != n {
        return Err(TrainError::IncompatibleData(format!(
            "dataset (d={}, N={}) vs model (d={d}, N={n})",
            data.alphabet.size(),
            data.sequence_len(),
        )));
    }
    Ok(())
}

/// Minibatch Adam on the NLL; at each evaluation point, draw
/// `eval_sample_count` samples, score them against the reference features,
/// and retain the best epoch's samples and checkpoint.
pub fn train_tn<T: Scalar>(
    mut model: TnModel<T>,
    data: &SequenceDataset,
    cfg: &TrainConfig<T>,
    featurizer: &dyn Featurizer<T>,
    scorer: &FrechetScorer<T>,
) -> Result<TrainOutcome<T, TnModel<T>>, TrainError> {
    check_compat(data, model.phys_dim(), model.num_sites())?;
    let mut adam = AdamState::for_params(&model.param_arrays(), AdamConfig::default());
    let mut rng_train = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_eval = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_eval.set_stream(1);
    let pad = data.alphabet.pad_index();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(usize, T)> = None;
    let mut best_model: Option<TnModel<T>> = None;
    let mut best_samples: Vec<TokenSequence> = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng_train);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<TokenSequence> =
                chunk.iter().map(|&i| data.sequences[i].clone()).collect();
            let grad = model
                .nll_gradient(&batch)
                .map_err(|source| TrainError::Model { epoch, source })?;
            let grad_views = grad.array_views();
            let mut params = model.param_arrays_mut();
            adam.step(&mut params, &grad_views, cfg.learning_rate)?;
        }
        let nll = model
            .nll(&data.sequences)
            .map_err(|source| TrainError::Model { epoch, source })?;
        history.losses.push((epoch, EpochLoss::Nll(nll)));

        if epoch % cfg.eval_every == 0 {
            let sampler = model
                .sampler()
                .map_err(|source| TrainError::Model { epoch, source })?;
            let mut samples = Vec::with_capacity(cfg.eval_sample_count);
            for _ in 0..cfg.eval_sample_count {
                let s = sampler
                    .draw(&mut rng_eval)
                    .map_err(|source| TrainError::Model { epoch, source })?;
                samples.push(s.normalize_suffix(pad));
            }
            let cloud = featurizer.featurize(&samples, &data.alphabet)?;
            let fd = scorer.score(&cloud)?;
            let eval_index = history.evaluations.len();
            history.evaluations.push(Evaluation { epoch, frechet: fd });
            if best.is_none_or(|(_, b)| fd < b) {
                best = Some((eval_index, fd));
                best_model = Some(model.clone());
                best_samples = samples;
            }
        }
    }

    history.best = best.map(|(i, _)| i);
    debug_assert_eq!(
        history.best,
        select_best_epoch(&history).ok().map(|(_, i)| i)
    );
    Ok(TrainOutcome {
        best_model: best_model.unwrap_or_else(|| model.clone()),
        model,
        best_samples,
        history,
    })
}

/// Alternating discriminator/generator updates over one-hot minibatches,
/// with the same evaluation and best-epoch retention as `train_tn`.
pub fn train_gan<T: Scalar>(
    mut gan: GanModel<T>,
    data: &SequenceDataset,
    cfg: &TrainConfig<T>,
    featurizer: &dyn Featurizer<T>,
    scorer: &FrechetScorer<T>,
) -> Result<TrainOutcome<T, GanModel<T>>, TrainError> {
    check_compat(data, gan.phys_dim(), gan.seq_len())?;
    let mut opt = GanOptimizer::new(&gan);
    let mut rng_train = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_eval = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_eval.set_stream(1);
    let pad = data.alphabet.pad_index();

    let onehots: Vec<crate::linalg::Mat<T>> = data
        .sequences
        .iter()
        .map(|s| one_hot(s, data.alphabet.size()))
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(usize, T)> = None;
    let mut best_model: Option<GanModel<T>> = None;
    let mut best_samples: Vec<TokenSequence> = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng_train);
        let mut d_sum = T::zero();
        let mut g_sum = T::zero();
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let reals: Vec<crate::linalg::Mat<T>> =
                chunk.iter().map(|&i| onehots[i].clone()).collect();
            let losses = gan
                .train_step(&reals, &mut rng_train, cfg.learning_rate, &mut opt)
                .map_err(|source| TrainError::Gan { epoch, source })?;
            d_sum += losses.d_objective;
            g_sum += losses.g_objective;
            batches += 1;
        }
        let inv = T::one() / T::from_usize_lossy(batches.max(1));
        history.losses.push((
            epoch,
            EpochLoss::Gan {
                d_objective: d_sum * inv,
                g_objective: g_sum * inv,
            },
        ));

        if epoch % cfg.eval_every == 0 {
            let samples = gan
                .sample(&mut rng_eval, cfg.eval_sample_count, pad)
                .map_err(|source| TrainError::Gan { epoch, source })?;
            let cloud = featurizer.featurize(&samples, &data.alphabet)?;
            let fd = scorer.score(&cloud)?;
            let eval_index = history.evaluations.len();
            history.evaluations.push(Evaluation { epoch, frechet: fd });
            if best.is_none_or(|(_, b)| fd < b) {
                best = Some((eval_index, fd));
                best_model = Some(gan.clone());
                best_samples = samples;
            }
        }
    }

    history.best = best.map(|(i, _)| i);
    Ok(TrainOutcome {
        best_model: best_model.unwrap_or_else(|| gan.clone()),
        model: gan,
        best_samples,
        history,
    })
}

// ---------------------------------------------------------------------------
// Random hyperparameter search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue<T> {
    Int(i64),
    Real(T),
}

impl<T: Scalar> ParamValue<T> {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> T {
        match self {
            ParamValue::Int(v) => T::from_f64_lossy(*v as f64),
            ParamValue::Real(v) => *v,
        }
    }
}

impl<T: Scalar> fmt::Display for ParamValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamRule<T> {
    FixedInt(i64),
    FixedReal(T),
    /// `10^u` with the exponent uniform in `[lo, hi]`.
    LogUniform10 { lo: T, hi: T },
    /// Inclusive integer range.
    UniformInt { lo: i64, hi: i64 },
    UniformReal { lo: T, hi: T },
}

impl<T: Scalar> ParamRule<T> {
    fn sample(&self, rng: &mut ChaCha8Rng) -> ParamValue<T> {
        match *self {
            ParamRule::FixedInt(v) => ParamValue::Int(v),
            ParamRule::FixedReal(v) => ParamValue::Real(v),
            ParamRule::LogUniform10 { lo, hi } => {
                let u = T::from_f64_lossy(rng.random::<f64>());
                let exp = lo + (hi - lo) * u;
                ParamValue::Real(T::from_f64_lossy(10.0).powf(exp))
            }
            ParamRule::UniformInt { lo, hi } => ParamValue::Int(rng.random_range(lo..=hi)),
            ParamRule::UniformReal { lo, hi } => {
                let u = T::from_f64_lossy(rng.random::<f64>());
                ParamValue::Real(lo + (hi - lo) * u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum<T> {
    pub label: String,
    pub params: Vec<(String, ParamRule<T>)>,
}

/// Sampling rules grouped by stratum; every stratum draws the same number
/// of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace<T> {
    pub strata: Vec<Stratum<T>>,
    pub trials_per_stratum: usize,
}

impl<T: Scalar> SearchSpace<T> {
    /// Bond dimensions 2, 3, 5; one deterministic trial per value.
    pub fn tn_default() -> Self {
        SearchSpace {
            strata: [2i64, 3, 5]
                .into_iter()
                .map(|r| Stratum {
                    label: format!("r={r}"),
                    params: vec![("bond_dim".to_string(), ParamRule::FixedInt(r))],
                })
                .collect(),
            trials_per_stratum: 1,
        }
    }

    /// Add a log-uniform learning-rate axis (exponent in `[-4, -2]`) to
    /// every stratum.
    pub fn with_lr_axis(mut self) -> Self {
        for s in &mut self.strata {
            s.params.push((
                "learning_rate".to_string(),
                ParamRule::LogUniform10 {
                    lo: T::from_f64_lossy(-4.0),
                    hi: T::from_f64_lossy(-2.0),
                },
            ));
        }
        self
    }

    /// One stratum per hidden-layer count 1..=3 with 200 trials each:
    /// learning-rate exponent uniform in `[-7, -4]`, hidden units in
    /// `[300, 3000]`, prior dimension in `[50, 300]`, dropout in `[0, 0.8]`.
    pub fn gan_default() -> Self {
        SearchSpace {
            strata: (1i64..=3)
                .map(|layers| Stratum {
                    label: format!("layers={layers}"),
                    params: vec![
                        ("hidden_layers".to_string(), ParamRule::FixedInt(layers)),
                        (
                            "learning_rate".to_string(),
                            ParamRule::LogUniform10 {
                                lo: T::from_f64_lossy(-7.0),
                                hi: T::from_f64_lossy(-4.0),
                            },
                        ),
                        (
                            "hidden_units".to_string(),
                            ParamRule::UniformInt { lo: 300, hi: 3000 },
                        ),
                        (
                            "prior_dim".to_string(),
                            ParamRule::UniformInt { lo: 50, hi: 300 },
                        ),
                        (
                            "dropout".to_string(),
                            ParamRule::UniformReal {
                                lo: T::zero(),
                                hi: T::from_f64_lossy(0.8),
                            },
                        ),
                    ],
                })
                .collect(),
            trials_per_stratum: 200,
        }
    }

    /// Deterministic draw: each trial's values come from a counter-derived
    /// stream, so the list is stable under reordering and parallelism.
    pub fn draw(&self, seed: u64) -> Result<Vec<TrialConfig<T>>, TrainError> {
        if self.strata.is_empty() || self.trials_per_stratum == 0 {
            return Err(TrainError::EmptySpace);
        }
        let mut out = Vec::with_capacity(self.strata.len() * self.trials_per_stratum);
        for (si, stratum) in self.strata.iter().enumerate() {
            for trial in 0..self.trials_per_stratum {
                let index = (si * self.trials_per_stratum + trial) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed, index));
                let values: BTreeMap<String, ParamValue<T>> = stratum
                    .params
                    .iter()
                    .map(|(name, rule)| (name.clone(), rule.sample(&mut rng)))
                    .collect();
                out.push(TrialConfig {
                    stratum: stratum.label.clone(),
                    trial,
                    values,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig<T> {
    pub stratum: String,
    pub trial: usize,
    pub values: BTreeMap<String, ParamValue<T>>,
}

impl<T: Scalar> TrialConfig<T> {
    pub fn summary(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    fn int(&self, name: &str) -> Option<i64> {
        self.values.get(name).and_then(ParamValue::as_int)
    }

    fn real(&self, name: &str) -> Option<T> {
        self.values.get(name).map(ParamValue::as_real)
    }
}

/// Which model family a search trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Tn(TnKind),
    Gan,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Tn(k) => k.label(),
            ModelKind::Gan => "gan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "gan" {
            return Some(ModelKind::Gan);
        }
        TnKind::parse(s).map(ModelKind::Tn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub config: TrialConfig<T>,
    pub best_frechet: T,
    pub best_epoch: usize,
}

/// Train every drawn configuration for `budget_epochs` and rank ascending by
/// the best recorded Fréchet distance. Trials run in parallel; per-trial
/// seeds derive from the search seed and the trial index, so the ranking is
/// independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn random_search<T: Scalar>(
    space: &SearchSpace<T>,
    kind: ModelKind,
    data: &SequenceDataset,
    budget_epochs: usize,
    base: &TrainConfig<T>,
    purif_dim: usize,
    featurizer: &dyn Featurizer<T>,
    scorer: &FrechetScorer<T>,
    seed: u64,
) -> Result<Vec<SearchResult<T>>, TrainError> {
    let configs = space.draw(seed)?;
    let results: Vec<SearchResult<T>> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| {
            let mut cfg = base.clone();
            cfg.epochs = budget_epochs;
            cfg.seed = splitmix64(seed, 0x1000_0000 + index as u64);
            if let Some(lr) = config.real("learning_rate") {
                cfg.learning_rate = lr;
            }
            let history = match kind {
                ModelKind::Tn(tn_kind) => {
                    let bond = config
                        .int("bond_dim")
                        .ok_or_else(|| TrainError::MissingParameter("bond_dim".into()))?
                        as usize;
                    let mu = if tn_kind.is_purified() { purif_dim } else { 1 };
                    let model = TnModel::init(
                        tn_kind,
                        data.alphabet.size(),
                        data.sequence_len(),
                        bond,
                        mu,
                        cfg.seed,
                    )
                    .map_err(|source| TrainError::Model { epoch: 0, source })?;
                    train_tn(model, data, &cfg, featurizer, scorer)?.history
                }
                ModelKind::Gan => {
                    let layers = config.int("hidden_layers").unwrap_or(1) as usize;
                    let units = config.int("hidden_units").unwrap_or(300) as usize;
                    let prior = config.int("prior_dim").unwrap_or(50) as usize;
                    let dropout = config.real("dropout").unwrap_or_else(T::zero);
                    let gan = GanModel::init(
                        data.alphabet.size(),
                        data.sequence_len(),
                        layers,
                        units,
                        prior,
                        dropout,
                        cfg.seed,
                    )
                    .map_err(|source| TrainError::Gan { epoch: 0, source })?;
                    train_gan(gan, data, &cfg, featurizer, scorer)?.history
                }
            };
            let (best_epoch, best_idx) = select_best_epoch(&history)?;
            Ok(SearchResult {
                config,
                best_frechet: history.evaluations[best_idx].frechet,
                best_epoch,
            })
        })
        .collect::<Result<_, TrainError>>()?;

    let mut ranked = results;
    ranked.sort_by(|a, b| {
        a.best_frechet
            .partial_cmp(&b.best_frechet)
            .expect("finite distances")
    });
    Ok(ranked)
}

pub fn search_csv<T: Scalar>(results: &[SearchResult<T>]) -> String {
    let mut out = String::from("rank,stratum,trial,params,best_epoch,best_frechet\n");
    for (rank, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rank + 1,
            r.config.stratum,
            r.config.trial,
            r.config.summary(),
            r.best_epoch,
            r.best_frechet
        ));
    }
    out
}

/// Stateless seed derivation for repetitions and trials.
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests;
