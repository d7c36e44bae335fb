//! `tngen search`: random hyperparameter search, one CSV row per trial,
//! ranked ascending by the best recorded Fréchet distance.

use tngen_core::train::{
    random_search, search_csv, ModelKind, ParamRule, SearchSpace, Stratum, TrainConfig,
};

use crate::config::{merge, merge_opt, require, ConfigFile, Effective};
use crate::util::*;
use crate::{CliError, SearchArgs};

const ALLOWED_KEYS: &[&str] = &[
    "dataset",
    "kind",
    "out",
    "seed",
    "trials",
    "budget",
    "bond_dims",
    "layer_counts",
    "lr_axis",
    "purif_dim",
    "batch_size",
    "learning_rate",
    "eval_samples",
    "eval_every",
    "featurizer",
    "tokenizer",
    "max_len",
    "jobs",
];

pub fn run(args: SearchArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.validate("search", ALLOWED_KEYS)?;
    let cfg = |key: &str| file.get("search", key);

    let dataset_path = require(
        args.dataset.or(cfg("dataset").map(str::to_owned)),
        "dataset",
    )?;
    let kind_raw = require(args.kind.or(cfg("kind").map(str::to_owned)), "kind")?;
    let kind = parse_kind(&kind_raw)?;
    let out = require(
        args.out.or(cfg("out").map(std::path::PathBuf::from)),
        "out",
    )?;
    let seed = merge(args.seed, cfg("seed"), 0u64, "seed")?;
    let (default_trials, default_budget, default_lr) = match kind {
        ModelKind::Gan => (200usize, 1000usize, 1e-4f64),
        ModelKind::Tn(_) => (1, 200, 1e-3),
    };
    let trials = merge(args.trials, cfg("trials"), default_trials, "trials")?;
    let budget = merge(args.budget, cfg("budget"), default_budget, "budget")?;
    let learning_rate = merge(args.learning_rate, cfg("learning_rate"), default_lr, "learning_rate")?;
    let batch_size = merge(args.batch_size, cfg("batch_size"), 64usize, "batch_size")?;
    let purif_dim = merge(args.purif_dim, cfg("purif_dim"), 2usize, "purif_dim")?;
    let eval_samples = merge(args.eval_samples, cfg("eval_samples"), 10_000usize, "eval_samples")?;
    let eval_every = merge(args.eval_every, cfg("eval_every"), 1usize, "eval_every")?;
    let featurizer_spec = merge(
        args.featurizer,
        cfg("featurizer"),
        "ngram:2".to_owned(),
        "featurizer",
    )?;
    let tokenizer = parse_tokenizer(&merge(
        args.tokenizer,
        cfg("tokenizer"),
        "brackets".to_owned(),
        "tokenizer",
    )?)?;
    let max_len = merge_opt(args.max_len, cfg("max_len"), "max_len")?;
    let lr_axis = args.lr_axis || cfg("lr_axis") == Some("true");
    let jobs = merge_opt(args.jobs, cfg("jobs"), "jobs")?;
    init_jobs(jobs);

    let data = load_corpus(&dataset_path, tokenizer, max_len)?;
    let featurizer = build_featurizer(&featurizer_spec)?;
    let scorer = reference_scorer(&data, featurizer.as_ref())?;

    let space = build_space(
        kind,
        trials,
        args.bond_dims.as_deref().or(cfg("bond_dims")),
        args.layer_counts.as_deref().or(cfg("layer_counts")),
        lr_axis,
    )?;

    let base = TrainConfig {
        learning_rate,
        batch_size,
        epochs: budget,
        seed,
        eval_sample_count: eval_samples,
        eval_every,
    };
    let results = random_search(
        &space,
        kind,
        &data,
        budget,
        &base,
        purif_dim,
        featurizer.as_ref(),
        &scorer,
        seed,
    )
    .map_err(|e| CliError::runtime(format!("search failed: {e}")))?;

    ensure_dir(&out)?;
    let mut eff = Effective::default();
    eff.set("dataset", &dataset_path);
    eff.set("kind", kind.label());
    eff.set("seed", seed);
    eff.set("trials", trials);
    eff.set("budget", budget);
    eff.set("featurizer", &featurizer_spec);
    write_file(&out.join("config.txt"), &eff.render("search"))?;
    write_file(&out.join("search.csv"), &search_csv(&results))?;
    Ok(())
}

fn build_space(
    kind: ModelKind,
    trials: usize,
    bond_dims: Option<&str>,
    layer_counts: Option<&str>,
    lr_axis: bool,
) -> Result<SearchSpace<f64>, CliError> {
    let parse_list = |raw: &str, what: &str| -> Result<Vec<i64>, CliError> {
        raw.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad {what} value {v:?}")))
            })
            .collect()
    };
    match kind {
        ModelKind::Tn(_) => {
            let mut space = match bond_dims {
                None => SearchSpace::tn_default(),
                Some(raw) => {
                    let values = parse_list(raw, "bond_dims")?;
                    if values.is_empty() || values.iter().any(|&v| v < 1) {
                        return Err(CliError::usage("bond_dims must be positive"));
                    }
                    SearchSpace {
                        strata: values
                            .into_iter()
                            .map(|r| Stratum {
                                label: format!("r={r}"),
                                params: vec![("bond_dim".to_string(), ParamRule::FixedInt(r))],
                            })
                            .collect(),
                        trials_per_stratum: 1,
                    }
                }
            };
            space.trials_per_stratum = trials;
            if lr_axis {
                space = space.with_lr_axis();
            }
            Ok(space)
        }
        ModelKind::Gan => {
            let mut space = SearchSpace::gan_default();
            if let Some(raw) = layer_counts {
                let values = parse_list(raw, "layer_counts")?;
                if values.is_empty() || values.iter().any(|&v| v < 1) {
                    return Err(CliError::usage("layer_counts must be positive"));
                }
                let template = space.strata[0].params.clone();
                space.strata = values
                    .into_iter()
                    .map(|layers| Stratum {
                        label: format!("layers={layers}"),
                        params: template
                            .iter()
                            .map(|(name, rule)| {
                                if name == "hidden_layers" {
                                    (name.clone(), ParamRule::FixedInt(layers))
                                } else {
                                    (name.clone(), *rule)
                                }
                            })
                            .collect(),
                    })
                    .collect();
            }
            space.trials_per_stratum = trials;
            Ok(space)
        }
    }
}
