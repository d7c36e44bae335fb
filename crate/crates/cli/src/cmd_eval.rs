//! `tngen eval`: split sample files into folds, filter by criteria, and
//! report per-fold fidelity and hypervolume with optional model combination
//! and exhaustive subset search.

use std::collections::HashSet;
use std::fs;

use tngen_core::harness::{
    best_subset, combine_models, evaluate_folds, fold_split, per_fold_csv, subsets_csv,
    summary_csv, Cmp, CriteriaSpec, EvalContext, FoldSet, ObjectiveSpec, Requirement,
};
use tngen_core::metrics::{PropertyTable, Sense};

use crate::config::{merge, require, ConfigFile};
use crate::util::{ensure_dir, init_jobs, write_file};
use crate::{CliError, EvalArgs};

const ALLOWED_KEYS: &[&str] = &[
    "samples",
    "dataset",
    "properties",
    "criteria",
    "objectives",
    "ref",
    "folds",
    "combine",
    "subset_search",
    "out",
    "jobs",
];

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.validate("eval", ALLOWED_KEYS)?;
    let cfg = |key: &str| file.get("eval", key);

    let mut sample_specs: Vec<String> = args.samples.clone();
    if sample_specs.is_empty() {
        sample_specs = file
            .get_all("eval", "samples")
            .into_iter()
            .map(str::to_owned)
            .collect();
    }
    if sample_specs.is_empty() {
        return Err(CliError::usage("no samples given (use --samples tag=path)"));
    }
    let dataset_path = require(
        args.dataset.or(cfg("dataset").map(str::to_owned)),
        "dataset",
    )?;
    let properties_path = require(
        args.properties.or(cfg("properties").map(str::to_owned)),
        "properties",
    )?;
    let criteria_name = require(
        args.criteria.or(cfg("criteria").map(str::to_owned)),
        "criteria",
    )?;
    let objectives_raw = require(
        args.objectives.or(cfg("objectives").map(str::to_owned)),
        "objectives",
    )?;
    let reference_raw = require(
        args.reference.or(cfg("ref").map(str::to_owned)),
        "ref",
    )?;
    let folds = merge(args.folds, cfg("folds"), 10usize, "folds")?;
    let combine = args.combine || cfg("combine") == Some("true");
    let subset_search = args.subset_search || cfg("subset_search") == Some("true");
    let out = require(
        args.out.or(cfg("out").map(std::path::PathBuf::from)),
        "out",
    )?;
    init_jobs(merge(args.jobs, cfg("jobs"), 0usize, "jobs").ok().filter(|&j| j > 0));

    // training corpus lines are the novelty reference
    let train_text = fs::read_to_string(&dataset_path)
        .map_err(|e| CliError::runtime(format!("reading dataset {dataset_path}: {e}")))?;
    let train_set: HashSet<String> = train_text.lines().map(str::to_owned).collect();

    let table = PropertyTable::<f64>::load(&properties_path)
        .map_err(|e| CliError::runtime(format!("loading properties {properties_path}: {e}")))?;

    let criteria = parse_criteria(&file, &criteria_name)?;
    let objectives = parse_objectives(&objectives_raw, &reference_raw)?;
    let ctx = EvalContext {
        criteria: &criteria,
        objectives: &objectives,
        train_set: &train_set,
    };

    let mut foldsets: Vec<FoldSet> = Vec::new();
    for spec in &sample_specs {
        let (tag, samples) = read_samples(spec)?;
        let fs = fold_split(tag, &samples, folds)
            .map_err(|e| CliError::runtime(format!("splitting {spec}: {e}")))?;
        foldsets.push(fs);
    }

    let mut evals = Vec::new();
    for fs in &foldsets {
        let eval = evaluate_folds(fs, &table, &ctx)
            .map_err(|e| CliError::runtime(format!("evaluating {}: {e}", fs.model)))?;
        evals.push(eval);
    }
    if combine && foldsets.len() > 1 {
        let combined = combine_models(&foldsets)
            .map_err(|e| CliError::runtime(format!("combining models: {e}")))?;
        let eval = evaluate_folds(&combined, &table, &ctx)
            .map_err(|e| CliError::runtime(format!("evaluating combination: {e}")))?;
        evals.push(eval);
    }

    ensure_dir(&out)?;
    write_file(&out.join("per_fold.csv"), &per_fold_csv(&evals))?;
    write_file(&out.join("summary.csv"), &summary_csv(&evals))?;

    if subset_search {
        let result = best_subset(&foldsets, &table, &ctx)
            .map_err(|e| CliError::runtime(format!("subset search: {e}")))?;
        write_file(&out.join("subsets.csv"), &subsets_csv(&result))?;
    }
    Ok(())
}

/// `tag=path` or `tag=path1+path2` (pooling; the tag is labeled as pooled).
fn read_samples(spec: &str) -> Result<(String, Vec<String>), CliError> {
    let (tag, paths) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("bad samples spec {spec:?} (tag=path)")))?;
    let paths: Vec<&str> = paths.split('+').collect();
    let mut samples = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p)
            .map_err(|e| CliError::runtime(format!("reading samples {p}: {e}")))?;
        samples.extend(text.lines().map(str::to_owned));
    }
    let tag = if paths.len() > 1 {
        format!("{tag}[pooled:{}]", paths.len())
    } else {
        tag.to_owned()
    };
    Ok((tag, samples))
}

fn parse_criteria(file: &ConfigFile, name: &str) -> Result<CriteriaSpec<f64>, CliError> {
    let section = format!("criteria.{name}");
    let lines = file.get_all(&section, "require");
    if lines.is_empty() {
        return Err(CliError::usage(format!(
            "criteria {name:?} not found (expected a [criteria.{name}] section with `require` lines)"
        )));
    }
    let mut requirements = Vec::new();
    for line in lines {
        requirements.push(parse_requirement(line)?);
    }
    Ok(CriteriaSpec::new(name, requirements))
}

/// `flag <column>` or `<column> <cmp> <value>`.
fn parse_requirement(line: &str) -> Result<Requirement<f64>, CliError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["flag", col] => Ok(Requirement::Flag((*col).to_owned())),
        [col, cmp, value] => {
            let cmp = Cmp::parse(cmp)
                .ok_or_else(|| CliError::usage(format!("bad comparator in {line:?}")))?;
            let bound: f64 = value
                .parse()
                .map_err(|_| CliError::usage(format!("bad bound in {line:?}")))?;
            Ok(Requirement::Threshold {
                column: (*col).to_owned(),
                cmp,
                bound,
            })
        }
        _ => Err(CliError::usage(format!(
            "bad requirement {line:?} (expected `flag COL` or `COL CMP VALUE`)"
        ))),
    }
}

fn parse_objectives(objectives: &str, reference: &str) -> Result<ObjectiveSpec<f64>, CliError> {
    let mut columns = Vec::new();
    let mut senses = Vec::new();
    for part in objectives.split(',') {
        let (col, sense) = part
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("bad objective {part:?} (column:sense)")))?;
        let sense = Sense::parse(sense.trim())
            .ok_or_else(|| CliError::usage(format!("bad sense in {part:?} (min|max)")))?;
        columns.push(col.trim().to_owned());
        senses.push(sense);
    }
    let reference: Vec<f64> = reference
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad reference value {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    if reference.len() != columns.len() {
        return Err(CliError::usage(format!(
            "reference has {} values for {} objectives",
            reference.len(),
            columns.len()
        )));
    }
    Ok(ObjectiveSpec {
        columns,
        senses,
        reference,
    })
}
