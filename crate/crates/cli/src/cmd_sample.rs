//! `tngen sample`: draw decoded strings from a checkpoint, one per line.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tngen_core::checkpoint::{self, CheckpointKind};

use crate::config::{merge, merge_opt, require, ConfigFile};
use crate::util::{init_jobs, write_file};
use crate::{CliError, SampleArgs};

const ALLOWED_KEYS: &[&str] = &["checkpoint", "count", "seed", "out", "jobs"];

pub fn run(args: SampleArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.validate("sample", ALLOWED_KEYS)?;
    let cfg = |key: &str| file.get("sample", key);

    let ckpt_path = require(
        args.checkpoint.or(cfg("checkpoint").map(str::to_owned)),
        "checkpoint",
    )?;
    let count = merge(args.count, cfg("count"), 1000usize, "count")?;
    let seed = merge(args.seed, cfg("seed"), 0u64, "seed")?;
    let out = require(
        args.out.or(cfg("out").map(std::path::PathBuf::from)),
        "out",
    )?;
    init_jobs(merge_opt(args.jobs, cfg("jobs"), "jobs")?);

    let text = std::fs::read_to_string(&ckpt_path)
        .map_err(|e| CliError::runtime(format!("reading checkpoint {ckpt_path}: {e}")))?;
    let kind = checkpoint::sniff(&text)
        .map_err(|e| CliError::runtime(format!("checkpoint {ckpt_path}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut lines = String::new();
    match kind {
        CheckpointKind::Tn => {
            let (model, alphabet) = checkpoint::load_tn::<f64>(&text)
                .map_err(|e| CliError::runtime(format!("checkpoint {ckpt_path}: {e}")))?;
            let sampler = model
                .sampler()
                .map_err(|e| CliError::runtime(format!("building sampler: {e}")))?;
            let pad = alphabet.pad_index();
            for _ in 0..count {
                let s = sampler
                    .draw(&mut rng)
                    .map_err(|e| CliError::runtime(format!("sampling: {e}")))?
                    .normalize_suffix(pad);
                let decoded = alphabet
                    .decode(&s)
                    .map_err(|e| CliError::runtime(format!("decoding sample: {e}")))?;
                lines.push_str(&decoded);
                lines.push('\n');
            }
        }
        CheckpointKind::Gan => {
            let (gan, alphabet) = checkpoint::load_gan::<f64>(&text)
                .map_err(|e| CliError::runtime(format!("checkpoint {ckpt_path}: {e}")))?;
            let samples = gan
                .sample(&mut rng, count, alphabet.pad_index())
                .map_err(|e| CliError::runtime(format!("sampling: {e}")))?;
            for s in &samples {
                let decoded = alphabet
                    .decode(s)
                    .map_err(|e| CliError::runtime(format!("decoding sample: {e}")))?;
                lines.push_str(&decoded);
                lines.push('\n');
            }
        }
    }
    write_file(&out, &lines)?;
    Ok(())
}
