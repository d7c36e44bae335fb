//! Evaluation protocol: fold splitting, criteria filtering, per-fold
//! fidelity and hypervolume, cross-model fold combination, and exhaustive
//! best-subset search, with CSV report rendering.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{
    fidelity, hypervolume, MetricsError, ObjectiveVector, PropertyTable, ReferencePoint, Sense,
    ValidityRecord,
};
use crate::scalar::Scalar;

/// Offset inside `ln(hv + eps)` so empty folds survive log-scale reporting.
pub const LOG_HV_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot split {n} samples into {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("fold counts differ: {a} vs {b}")]
    MismatchedFolds { a: usize, b: usize },
    #[error("no fold sets given")]
    NoFoldSets,
    #[error("too many models for exhaustive subsets: {n} (limit 20)")]
    TooManyModels { n: usize },
    #[error("{count} samples missing from the property table (first: {first:?})")]
    MissingProperties { count: usize, first: Vec<String> },
    #[error("criteria reference unknown column {column:?}")]
    UnknownColumn { column: String },
    #[error("column {column:?} is not usable as {wanted}")]
    ColumnType {
        column: String,
        wanted: &'static str,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Gt,
    Lt,
    Ge,
    Le,
}

impl Cmp {
    pub fn eval<T: Scalar>(self, value: T, bound: T) -> bool {
        match self {
            Cmp::Gt => value > bound,
            Cmp::Lt => value < bound,
            Cmp::Ge => value >= bound,
            Cmp::Le => value <= bound,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cmp::Gt => ">",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            ">" => Some(Cmp::Gt),
            "<" => Some(Cmp::Lt),
            ">=" => Some(Cmp::Ge),
            "<=" => Some(Cmp::Le),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Requirement<T> {
    /// Named boolean flag must be set. A numeric column counts as set when
    /// its value is nonzero, so 0/1 flag columns work too.
    Flag(String),
    Threshold {
        column: String,
        cmp: Cmp,
        bound: T,
    },
}

/// A named conjunction of requirements over a property table.
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaSpec<T> {
    pub name: String,
    pub requirements: Vec<Requirement<T>>,
}

impl<T: Scalar> CriteriaSpec<T> {
    pub fn new(name: impl Into<String>, requirements: Vec<Requirement<T>>) -> Self {
        CriteriaSpec {
            name: name.into(),
            requirements,
        }
    }

    /// Check every referenced column exists (and thresholds refer to numeric
    /// columns) before any per-record evaluation.
    pub fn validate(&self, table: &PropertyTable<T>) -> Result<(), HarnessError> {
        for req in &self.requirements {
            match req {
                Requirement::Flag(col) => {
                    if !table.has_column(col) {
                        return Err(HarnessError::UnknownColumn { column: col.clone() });
                    }
                }
                Requirement::Threshold { column, .. } => {
                    if !table.has_column(column) {
                        return Err(HarnessError::UnknownColumn {
                            column: column.clone(),
                        });
                    }
                    if table.flag_columns().iter().any(|c| c == column) {
                        return Err(HarnessError::ColumnType {
                            column: column.clone(),
                            wanted: "a threshold (column is boolean)",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Record check; call `validate` against the table first.
    pub fn passes(&self, rec: &ValidityRecord<T>) -> bool {
        self.requirements.iter().all(|req| match req {
            Requirement::Flag(col) => rec
                .flags
                .get(col)
                .copied()
                .or_else(|| rec.props.get(col).map(|&v| v != T::zero()))
                .unwrap_or(false),
            Requirement::Threshold { column, cmp, bound } => rec
                .props
                .get(column)
                .map(|&v| cmp.eval(v, *bound))
                .unwrap_or(false),
        })
    }
}

/// Sample ids (decoded strings) split into `k` folds for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSet {
    pub model: String,
    pub folds: Vec<Vec<String>>,
}

impl FoldSet {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Deterministic round-robin split of an ordered sample list.
pub fn fold_split(
    model: impl Into<String>,
    samples: &[impl AsRef<str>],
    k: usize,
) -> Result<FoldSet, HarnessError> {
    if k == 0 || samples.len() < k {
        return Err(HarnessError::TooFewSamples {
            n: samples.len(),
            k,
        });
    }
    let mut folds = vec![Vec::new(); k];
    for (i, s) in samples.iter().enumerate() {
        folds[i % k].push(s.as_ref().to_owned());
    }
    Ok(FoldSet {
        model: model.into(),
        folds,
    })
}

/// Samples in the fold that satisfy every requirement. Missing property rows
/// abort with the offending ids.
pub fn apply_criteria<'a, T: Scalar>(
    fold: &'a [String],
    table: &PropertyTable<T>,
    criteria: &CriteriaSpec<T>,
) -> Result<Vec<&'a str>, HarnessError> {
    criteria.validate(table)?;
    let mut missing: Vec<String> = Vec::new();
    let mut seen_missing: HashSet<&str> = HashSet::new();
    for id in fold {
        if table.get(id).is_none() && seen_missing.insert(id) {
            missing.push(id.clone());
        }
    }
    if !missing.is_empty() {
        let count = missing.len();
        missing.truncate(10);
        return Err(HarnessError::MissingProperties {
            count,
            first: missing,
        });
    }
    Ok(fold
        .iter()
        .filter(|id| criteria.passes(table.get(id.as_str()).expect("checked above")))
        .map(String::as_str)
        .collect())
}

/// Objective columns, their senses, and the reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec<T> {
    pub columns: Vec<String>,
    pub senses: Vec<Sense>,
    pub reference: Vec<T>,
}

impl<T: Scalar> ObjectiveSpec<T> {
    pub fn validate(&self, table: &PropertyTable<T>) -> Result<(), HarnessError> {
        for col in &self.columns {
            if !table.has_column(col) {
                return Err(HarnessError::UnknownColumn { column: col.clone() });
            }
            if table.flag_columns().iter().any(|c| c == col) {
                return Err(HarnessError::ColumnType {
                    column: col.clone(),
                    wanted: "an objective (column is boolean)",
                });
            }
        }
        Ok(())
    }

    pub fn reference_point(&self) -> Result<ReferencePoint<T>, MetricsError> {
        ReferencePoint::new(self.reference.clone(), self.senses.clone())
    }

    fn point_for(&self, rec: &ValidityRecord<T>) -> Result<ObjectiveVector<T>, MetricsError> {
        let values: Vec<T> = self
            .columns
            .iter()
            .map(|c| rec.props[c])
            .collect();
        ObjectiveVector::new(values, self.senses.clone())
    }
}

/// Everything needed to score folds.
pub struct EvalContext<'a, T: Scalar> {
    pub criteria: &'a CriteriaSpec<T>,
    pub objectives: &'a ObjectiveSpec<T>,
    pub train_set: &'a HashSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldEval<T> {
    pub fold: usize,
    pub n_samples: usize,
    pub n_new: usize,
    pub n_new_valid: usize,
    pub fidelity: Option<T>,
    pub rate: T,
    pub hv: T,
    pub log_hv: T,
    pub empty_after_filter: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEval<T> {
    pub model: String,
    pub folds: Vec<FoldEval<T>>,
    pub median_fidelity: Option<T>,
    pub median_rate: T,
    pub median_hv: T,
    pub std_hv: T,
    pub median_log_hv: T,
}

/// Per-fold fidelity/rate and hypervolume of the criteria-passing samples.
pub fn evaluate_folds<T: Scalar>(
    foldset: &FoldSet,
    table: &PropertyTable<T>,
    ctx: &EvalContext<'_, T>,
) -> Result<ModelEval<T>, HarnessError> {
    ctx.criteria.validate(table)?;
    ctx.objectives.validate(table)?;
    let reference = ctx.objectives.reference_point()?;
    let mut folds = Vec::with_capacity(foldset.k());
    for (fold_idx, fold) in foldset.folds.iter().enumerate() {
        let passing = apply_criteria(fold, table, ctx.criteria)?;
        let fid = fidelity::<T>(fold, ctx.train_set, |s| {
            table.get(s).map(|r| ctx.criteria.passes(r)).unwrap_or(false)
        });
        let points: Vec<ObjectiveVector<T>> = passing
            .iter()
            .map(|id| ctx.objectives.point_for(table.get(id).expect("covered")))
            .collect::<Result<_, _>>()?;
        let hv = hypervolume(&points, &reference)?;
        let log_hv = (hv + T::from_f64_lossy(LOG_HV_EPS)).ln();
        folds.push(FoldEval {
            fold: fold_idx,
            n_samples: fold.len(),
            n_new: fid.n_new,
            n_new_valid: fid.n_new_valid,
            fidelity: fid.fidelity,
            rate: fid.rate,
            hv,
            log_hv,
            empty_after_filter: points.is_empty(),
        });
    }
    let hvs: Vec<T> = folds.iter().map(|f| f.hv).collect();
    let log_hvs: Vec<T> = folds.iter().map(|f| f.log_hv).collect();
    let rates: Vec<T> = folds.iter().map(|f| f.rate).collect();
    let fids: Vec<T> = folds.iter().filter_map(|f| f.fidelity).collect();
    Ok(ModelEval {
        model: foldset.model.clone(),
        median_fidelity: (!fids.is_empty()).then(|| median(&fids)),
        median_rate: median(&rates),
        median_hv: median(&hvs),
        std_hv: sample_std(&hvs),
        median_log_hv: median(&log_hvs),
        folds,
    })
}

/// Union by fold index: fold `j` of the combination is every model's fold
/// `j` concatenated in input order. Duplicates are retained.
pub fn combine_models(foldsets: &[FoldSet]) -> Result<FoldSet, HarnessError> {
    let first = foldsets.first().ok_or(HarnessError::NoFoldSets)?;
    let k = first.k();
    for fs in foldsets {
        if fs.k() != k {
            return Err(HarnessError::MismatchedFolds { a: k, b: fs.k() });
        }
    }
    let model = foldsets
        .iter()
        .map(|fs| fs.model.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let mut folds = vec![Vec::new(); k];
    for fs in foldsets {
        for (j, fold) in fs.folds.iter().enumerate() {
            folds[j].extend(fold.iter().cloned());
        }
    }
    Ok(FoldSet { model, folds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetEval<T> {
    pub members: Vec<String>,
    pub median_hv: T,
    pub median_log_hv: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSearchResult<T> {
    /// One entry per nonempty subset, in bitmask enumeration order.
    pub evaluated: Vec<SubsetEval<T>>,
    /// Index of the winner in `evaluated`.
    pub best: usize,
}

/// Exhaustive search over all nonempty model subsets, ranked by median
/// per-fold hypervolume of the combined folds. Ties prefer smaller subsets,
/// then lexicographic member order.
pub fn best_subset<T: Scalar>(
    foldsets: &[FoldSet],
    table: &PropertyTable<T>,
    ctx: &EvalContext<'_, T>,
) -> Result<SubsetSearchResult<T>, HarnessError> {
    let n = foldsets.len();
    if n == 0 {
        return Err(HarnessError::NoFoldSets);
    }
    if n > 20 {
        return Err(HarnessError::TooManyModels { n });
    }
    let masks: Vec<u32> = (1..(1u32 << n)).collect();
    let evaluated: Vec<SubsetEval<T>> = masks
        .par_iter()
        .map(|&mask| {
            let members: Vec<FoldSet> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| foldsets[i].clone())
                .collect();
            let combined = combine_models(&members)?;
            let eval = evaluate_folds(&combined, table, ctx)?;
            Ok(SubsetEval {
                members: members.into_iter().map(|m| m.model).collect(),
                median_hv: eval.median_hv,
                median_log_hv: eval.median_log_hv,
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut best = 0usize;
    for (i, cand) in evaluated.iter().enumerate().skip(1) {
        let cur = &evaluated[best];
        let better = cand.median_hv > cur.median_hv
            || (cand.median_hv == cur.median_hv
                && (cand.members.len() < cur.members.len()
                    || (cand.members.len() == cur.members.len()
                        && cand.members.join("+") < cur.members.join("+"))));
        if better {
            best = i;
        }
    }
    Ok(SubsetSearchResult { evaluated, best })
}

/// Median with the usual even-count convention (mean of the middle pair).
pub fn median<T: Scalar>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::from_f64_lossy(2.0)
    }
}

/// Sample standard deviation (`1/(n-1)`); zero for fewer than two values.
pub fn sample_std<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let mean = values.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / T::from_usize_lossy(n - 1);
    var.sqrt()
}

// ---------------------------------------------------------------------------
// CSV report rendering
// ---------------------------------------------------------------------------

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "NA".into(),
    }
}

pub fn per_fold_csv<T: Scalar>(evals: &[ModelEval<T>]) -> String {
    let mut out =
        String::from("model,fold,n_samples,n_new,n_new_valid,fidelity,rate,hv,log_hv,empty_after_filter\n");
    for e in evals {
        for f in &e.folds {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.model,
                f.fold,
                f.n_samples,
                f.n_new,
                f.n_new_valid,
                fmt_opt(f.fidelity),
                f.rate,
                f.hv,
                f.log_hv,
                f.empty_after_filter
            ));
        }
    }
    out
}

pub fn summary_csv<T: Scalar>(evals: &[ModelEval<T>]) -> String {
    let mut out =
        String::from("model,folds,median_fidelity,median_rate,median_hv,std_hv,median_log_hv\n");
    for e in evals {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.model,
            e.folds.len(),
            fmt_opt(e.median_fidelity),
            e.median_rate,
            e.median_hv,
            e.std_hv,
            e.median_log_hv
        ));
    }
    out
}

pub fn subsets_csv<T: Scalar>(result: &SubsetSearchResult<T>) -> String {
    let mut out = String::from("members,size,median_hv,median_log_hv,best\n");
    for (i, s) in result.evaluated.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.members.join("+"),
            s.members.len(),
            s.median_hv,
            s.median_log_hv,
            i == result.best
        ));
    }
    out
}
