//! `tngen train`: one or more seeded training runs into a run directory —
//! effective config, per-epoch history CSV, final and best-epoch checkpoints,
//! best-epoch samples, and the alphabet export.

use std::path::Path;

use tngen_core::checkpoint;
use tngen_core::data::SequenceDataset;
use tngen_core::gan::GanModel;
use tngen_core::harness::{median, sample_std};
use tngen_core::metrics::{Featurizer, FrechetScorer};
use tngen_core::tn::TnModel;
use tngen_core::train::{
    select_best_epoch, splitmix64, train_gan, train_tn, ModelKind, TrainConfig, TrainHistory,
    TrainOutcome,
};

use crate::config::{merge, merge_opt, require, ConfigFile, Effective};
use crate::util::*;
use crate::{CliError, TrainArgs};

const ALLOWED_KEYS: &[&str] = &[
    "dataset",
    "kind",
    "out",
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "bond_dim",
    "purif_dim",
    "hidden_layers",
    "hidden_units",
    "prior_dim",
    "dropout",
    "eval_samples",
    "eval_every",
    "featurizer",
    "tokenizer",
    "max_len",
    "repetitions",
    "jobs",
];

struct RepOutcome {
    seed: u64,
    best_epoch: Option<usize>,
    best_frechet: Option<f64>,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.validate("train", ALLOWED_KEYS)?;
    let cfg = |key: &str| file.get("train", key);

    let dataset_path = require(
        args.dataset.or(cfg("dataset").map(str::to_owned)),
        "dataset",
    )?;
    let kind_raw = require(args.kind.or(cfg("kind").map(str::to_owned)), "kind")?;
    let kind = parse_kind(&kind_raw)?;
    let out = require(
        args.out
            .or(cfg("out").map(std::path::PathBuf::from)),
        "out",
    )?;
    let seed = merge(args.seed, cfg("seed"), 0u64, "seed")?;
    let (default_epochs, default_lr) = match kind {
        ModelKind::Gan => (1000usize, 1e-4f64),
        ModelKind::Tn(_) => (200, 1e-3),
    };
    let epochs = merge(args.epochs, cfg("epochs"), default_epochs, "epochs")?;
    let batch_size = merge(args.batch_size, cfg("batch_size"), 64usize, "batch_size")?;
    let learning_rate = merge(
        args.learning_rate,
        cfg("learning_rate"),
        default_lr,
        "learning_rate",
    )?;
    let bond_dim = merge(args.bond_dim, cfg("bond_dim"), 3usize, "bond_dim")?;
    let purif_dim = merge(args.purif_dim, cfg("purif_dim"), 2usize, "purif_dim")?;
    let hidden_layers = merge(args.hidden_layers, cfg("hidden_layers"), 1usize, "hidden_layers")?;
    let hidden_units = merge(args.hidden_units, cfg("hidden_units"), 300usize, "hidden_units")?;
    let prior_dim = merge(args.prior_dim, cfg("prior_dim"), 50usize, "prior_dim")?;
    let dropout = merge(args.dropout, cfg("dropout"), 0.0f64, "dropout")?;
    let eval_samples = merge(args.eval_samples, cfg("eval_samples"), 10_000usize, "eval_samples")?;
    let eval_every = merge(args.eval_every, cfg("eval_every"), 1usize, "eval_every")?;
    let featurizer_spec = merge(
        args.featurizer,
        cfg("featurizer"),
        "ngram:2".to_owned(),
        "featurizer",
    )?;
    let tokenizer_raw = merge(
        args.tokenizer,
        cfg("tokenizer"),
        "brackets".to_owned(),
        "tokenizer",
    )?;
    let tokenizer = parse_tokenizer(&tokenizer_raw)?;
    let max_len = merge_opt(args.max_len, cfg("max_len"), "max_len")?;
    let repetitions = merge(args.repetitions, cfg("repetitions"), 1usize, "repetitions")?;
    let jobs = merge_opt(args.jobs, cfg("jobs"), "jobs")?;
    init_jobs(jobs);

    let data = load_corpus(&dataset_path, tokenizer, max_len)?;
    let featurizer = build_featurizer(&featurizer_spec)?;
    let scorer = reference_scorer(&data, featurizer.as_ref())?;

    ensure_dir(&out)?;
    let mut eff = Effective::default();
    eff.set("dataset", &dataset_path);
    eff.set("kind", kind.label());
    eff.set("out", out.display());
    eff.set("seed", seed);
    eff.set("epochs", epochs);
    eff.set("batch_size", batch_size);
    eff.set("learning_rate", learning_rate);
    eff.set("eval_samples", eval_samples);
    eff.set("eval_every", eval_every);
    eff.set("featurizer", &featurizer_spec);
    eff.set("tokenizer", tokenizer.label());
    eff.set("repetitions", repetitions);
    if let Some(m) = max_len {
        eff.set("max_len", m);
    }
    match kind {
        ModelKind::Tn(_) => {
            eff.set("bond_dim", bond_dim);
            eff.set("purif_dim", purif_dim);
        }
        ModelKind::Gan => {
            eff.set("hidden_layers", hidden_layers);
            eff.set("hidden_units", hidden_units);
            eff.set("prior_dim", prior_dim);
            eff.set("dropout", dropout);
        }
    }
    write_file(&out.join("config.txt"), &eff.render("train"))?;
    write_file(&out.join("alphabet.txt"), &data.alphabet.export())?;

    let mut reps = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let rep_seed = if repetitions == 1 {
            seed
        } else {
            splitmix64(seed, rep as u64)
        };
        let dir = if repetitions == 1 {
            out.clone()
        } else {
            out.join(format!("rep-{rep}"))
        };
        ensure_dir(&dir)?;
        let train_cfg = TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            seed: rep_seed,
            eval_sample_count: eval_samples,
            eval_every,
        };
        let outcome = run_one(
            kind,
            &data,
            &train_cfg,
            featurizer.as_ref(),
            &scorer,
            bond_dim,
            purif_dim,
            hidden_layers,
            hidden_units,
            prior_dim,
            dropout,
            &dir,
        )?;
        reps.push(RepOutcome {
            seed: rep_seed,
            best_epoch: outcome.0,
            best_frechet: outcome.1,
        });
    }

    if repetitions > 1 {
        let mut csv = String::from("rep,seed,best_epoch,best_frechet\n");
        for (i, r) in reps.iter().enumerate() {
            csv.push_str(&format!(
                "{i},{},{},{}\n",
                r.seed,
                r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
                r.best_frechet.map(|f| f.to_string()).unwrap_or_default(),
            ));
        }
        write_file(&out.join("reps.csv"), &csv)?;
        let best: Vec<f64> = reps.iter().filter_map(|r| r.best_frechet).collect();
        if !best.is_empty() {
            let min = best.iter().copied().fold(f64::INFINITY, f64::min);
            let stats = format!(
                "runs,min_frechet,median_frechet,std_frechet\n{},{},{},{}\n",
                best.len(),
                min,
                median(&best),
                sample_std(&best),
            );
            write_file(&out.join("reps_stats.csv"), &stats)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    kind: ModelKind,
    data: &SequenceDataset,
    cfg: &TrainConfig<f64>,
    featurizer: &dyn Featurizer<f64>,
    scorer: &FrechetScorer<f64>,
    bond_dim: usize,
    purif_dim: usize,
    hidden_layers: usize,
    hidden_units: usize,
    prior_dim: usize,
    dropout: f64,
    dir: &Path,
) -> Result<(Option<usize>, Option<f64>), CliError> {
    let d = data.alphabet.size();
    let n = data.sequence_len();
    match kind {
        ModelKind::Tn(tn_kind) => {
            let mu = if tn_kind.is_purified() { purif_dim } else { 1 };
            let model = TnModel::<f64>::init(tn_kind, d, n, bond_dim, mu, cfg.seed)
                .map_err(|e| CliError::runtime(format!("initializing model: {e}")))?;
            let outcome = train_tn(model, data, cfg, featurizer, scorer)
                .map_err(|e| CliError::runtime(format!("training: {e}")))?;
            finish_run(
                dir,
                data,
                &outcome.history,
                checkpoint::save_tn(&outcome.model, &data.alphabet),
                checkpoint::save_tn(&outcome.best_model, &data.alphabet),
                &outcome,
            )
        }
        ModelKind::Gan => {
            let gan = GanModel::<f64>::init(
                d,
                n,
                hidden_layers,
                hidden_units,
                prior_dim,
                dropout,
                cfg.seed,
            )
            .map_err(|e| CliError::runtime(format!("initializing GAN: {e}")))?;
            let outcome = train_gan(gan, data, cfg, featurizer, scorer)
                .map_err(|e| CliError::runtime(format!("training: {e}")))?;
            finish_run(
                dir,
                data,
                &outcome.history,
                checkpoint::save_gan(&outcome.model, &data.alphabet),
                checkpoint::save_gan(&outcome.best_model, &data.alphabet),
                &outcome,
            )
        }
    }
}

fn finish_run<M>(
    dir: &Path,
    data: &SequenceDataset,
    history: &TrainHistory<f64>,
    final_ckpt: String,
    best_ckpt: String,
    outcome: &TrainOutcome<f64, M>,
) -> Result<(Option<usize>, Option<f64>), CliError> {
    write_file(&dir.join("history.csv"), &history.to_csv())?;
    write_file(&dir.join("final.ckpt"), &final_ckpt)?;
    let best = select_best_epoch(history).ok();
    if let Some((epoch, idx)) = best {
        write_file(&dir.join("best.ckpt"), &best_ckpt)?;
        let mut lines = String::new();
        for s in &outcome.best_samples {
            let decoded = data
                .alphabet
                .decode(s)
                .map_err(|e| CliError::runtime(format!("decoding sample: {e}")))?;
            lines.push_str(&decoded);
            lines.push('\n');
        }
        write_file(&dir.join("best_samples.txt"), &lines)?;
        return Ok((Some(epoch), Some(history.evaluations[idx].frechet)));
    }
    Ok((None, None))
}
