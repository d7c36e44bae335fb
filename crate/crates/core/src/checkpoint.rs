//! Self-describing structured-text checkpoints for both model families.
//!
//! A checkpoint records the format tag, a version, every shape field, the
//! alphabet, and the raw parameter arrays in row-major order. Floats render
//! through `Display`, which round-trips bit-exactly, so save/load is an
//! identity on parameters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::data::{DataError, TokenAlphabet, Tokenization};
use crate::gan::{Activation, DenseLayer, GanError, GanModel};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::tn::{CoreTensor, TnError, TnKind, TnModel};

pub const TN_FORMAT: &str = "tn-checkpoint";
pub const GAN_FORMAT: &str = "gan-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint truncated: missing field {field:?}")]
    MissingField { field: &'static str },
    #[error("bad value for field {field:?}: {detail}")]
    BadValue { field: String, detail: String },
    #[error("unsupported checkpoint version {found:?} (this build reads version {VERSION})")]
    UnsupportedVersion { found: String },
    #[error("unknown checkpoint format {found:?}")]
    UnknownFormat { found: String },
    #[error(transparent)]
    Model(#[from] TnError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("reading checkpoint: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    Tn,
    Gan,
}

/// Identify the checkpoint family from the `format:` line.
pub fn sniff(text: &str) -> Result<CheckpointKind, CheckpointError> {
    let first = text.lines().next().unwrap_or_default();
    match first.strip_prefix("format: ") {
        Some(TN_FORMAT) => Ok(CheckpointKind::Tn),
        Some(other) => Err(CheckpointError::UnknownFormat {
            found: other.to_owned(),
        }),
        None => Err(CheckpointError::MissingField { field: "format" }),
    }
    .or_else(|e| {
        if first == format!("format: {GAN_FORMAT}") {
            Ok(CheckpointKind::Gan)
        } else {
            Err(e)
        }
    })
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines().peekable(),
        }
    }

    fn field(&mut self, name: &'static str) -> Result<&'a str, CheckpointError> {
        let line = self
            .lines
            .next()
            .ok_or(CheckpointError::MissingField { field: name })?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(": "))
            .ok_or_else(|| CheckpointError::BadValue {
                field: name.to_owned(),
                detail: format!("expected `{name}: ...`, found {line:?}"),
            })
    }

    fn parse_field<V: std::str::FromStr>(
        &mut self,
        name: &'static str,
    ) -> Result<V, CheckpointError> {
        let raw = self.field(name)?;
        raw.parse().map_err(|_| CheckpointError::BadValue {
            field: name.to_owned(),
            detail: format!("cannot parse {raw:?}"),
        })
    }

    fn expect_literal(&mut self, lit: &'static str) -> Result<(), CheckpointError> {
        match self.lines.next() {
            Some(l) if l == lit => Ok(()),
            _ => Err(CheckpointError::MissingField { field: lit }),
        }
    }

    fn values<T: Scalar>(
        &mut self,
        name: &'static str,
        expected: usize,
    ) -> Result<Vec<T>, CheckpointError> {
        let raw = self.field(name)?;
        let out: Vec<T> = raw
            .split_whitespace()
            .map(|tok| {
                tok.parse::<T>().map_err(|_| CheckpointError::BadValue {
                    field: name.to_owned(),
                    detail: format!("bad number {tok:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if out.len() != expected {
            return Err(CheckpointError::BadValue {
                field: name.to_owned(),
                detail: format!("expected {expected} values, found {}", out.len()),
            });
        }
        Ok(out)
    }
}

fn write_values<T: Scalar>(out: &mut String, name: &str, values: &[T]) {
    out.push_str(name);
    out.push_str(": ");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn header(out: &mut String, format: &str) {
    let _ = writeln!(out, "format: {format}");
    let _ = writeln!(out, "version: {VERSION}");
}

fn write_alphabet(out: &mut String, alphabet: &TokenAlphabet) {
    let _ = writeln!(out, "tokenizer: {}", alphabet.mode().label());
    let _ = writeln!(out, "alphabet: {}", alphabet.size());
    for t in alphabet.tokens() {
        let _ = writeln!(out, "token: {t}");
    }
}

fn read_alphabet(r: &mut Reader<'_>) -> Result<TokenAlphabet, CheckpointError> {
    let mode_raw = r.field("tokenizer")?;
    let mode = Tokenization::parse(mode_raw).ok_or_else(|| CheckpointError::BadValue {
        field: "tokenizer".into(),
        detail: format!("unknown mode {mode_raw:?}"),
    })?;
    let count: usize = r.parse_field("alphabet")?;
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        tokens.push(r.field("token")?.to_owned());
    }
    Ok(TokenAlphabet::from_tokens(tokens, mode)?)
}

fn check_version(r: &mut Reader<'_>) -> Result<(), CheckpointError> {
    let v = r.field("version")?;
    if v != VERSION.to_string() {
        return Err(CheckpointError::UnsupportedVersion { found: v.to_owned() });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tensor-network checkpoints
// ---------------------------------------------------------------------------

pub fn save_tn<T: Scalar>(model: &TnModel<T>, alphabet: &TokenAlphabet) -> String {
    let mut out = String::new();
    header(&mut out, TN_FORMAT);
    let _ = writeln!(out, "kind: {}", model.kind().label());
    let _ = writeln!(out, "d: {}", model.phys_dim());
    let _ = writeln!(out, "n: {}", model.num_sites());
    let _ = writeln!(out, "bond_dim: {}", model.bond_dim());
    let _ = writeln!(out, "purif_dim: {}", model.purif_dim());
    let _ = writeln!(out, "seed: {}", model.seed());
    write_alphabet(&mut out, alphabet);
    for (site, core) in model.cores().iter().enumerate() {
        let (d, mu, left, right) = core.dims();
        let _ = writeln!(out, "core: {site} {d} {mu} {left} {right}");
        write_values(&mut out, "re", core.raw_re());
        if let Some(im) = core.raw_im() {
            write_values(&mut out, "im", im);
        }
    }
    out.push_str("end\n");
    out
}

pub fn load_tn<T: Scalar>(text: &str) -> Result<(TnModel<T>, TokenAlphabet), CheckpointError> {
    let mut r = Reader::new(text);
    let format = r.field("format")?;
    if format != TN_FORMAT {
        return Err(CheckpointError::UnknownFormat {
            found: format.to_owned(),
        });
    }
    check_version(&mut r)?;
    let kind_raw = r.field("kind")?;
    let kind = TnKind::parse(kind_raw).ok_or_else(|| CheckpointError::BadValue {
        field: "kind".into(),
        detail: format!("unknown kind {kind_raw:?}"),
    })?;
    let d: usize = r.parse_field("d")?;
    let n: usize = r.parse_field("n")?;
    let bond_dim: usize = r.parse_field("bond_dim")?;
    let purif_dim: usize = r.parse_field("purif_dim")?;
    let seed: u64 = r.parse_field("seed")?;
    let alphabet = read_alphabet(&mut r)?;

    let mut cores = Vec::with_capacity(n);
    for site in 0..n {
        let header = r.field("core")?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| CheckpointError::BadValue {
                    field: "core".into(),
                    detail: format!("bad core header {header:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if nums.len() != 5 || nums[0] != site {
            return Err(CheckpointError::BadValue {
                field: "core".into(),
                detail: format!("expected `core: {site} d mu left right`, found {header:?}"),
            });
        }
        let (cd, mu, left, right) = (nums[1], nums[2], nums[3], nums[4]);
        let len = cd * mu * left * right;
        let re: Vec<T> = r.values("re", len)?;
        let im = if kind.is_complex() {
            Some(r.values("im", len)?)
        } else {
            None
        };
        cores.push(CoreTensor {
            d: cd,
            mu,
            left,
            right,
            re,
            im,
        });
    }
    r.expect_literal("end")?;
    let model = TnModel::from_parts(kind, d, n, bond_dim, purif_dim, seed, cores)?;
    Ok((model, alphabet))
}

// ---------------------------------------------------------------------------
// GAN checkpoints
// ---------------------------------------------------------------------------

fn act_label(a: Activation) -> &'static str {
    match a {
        Activation::LeakyRelu => "leaky_relu",
        Activation::Sigmoid => "sigmoid",
        Activation::SoftmaxRows => "softmax_rows",
        Activation::Identity => "identity",
    }
}

fn parse_act(s: &str) -> Option<Activation> {
    match s {
        "leaky_relu" => Some(Activation::LeakyRelu),
        "sigmoid" => Some(Activation::Sigmoid),
        "softmax_rows" => Some(Activation::SoftmaxRows),
        "identity" => Some(Activation::Identity),
        _ => None,
    }
}

pub fn save_gan<T: Scalar>(gan: &GanModel<T>, alphabet: &TokenAlphabet) -> String {
    let mut out = String::new();
    header(&mut out, GAN_FORMAT);
    let _ = writeln!(out, "d: {}", gan.phys_dim());
    let _ = writeln!(out, "n: {}", gan.seq_len());
    let _ = writeln!(out, "prior_dim: {}", gan.prior_dim());
    let _ = writeln!(out, "dropout: {}", gan.dropout());
    let _ = writeln!(out, "hidden_layers: {}", gan.hidden_layers());
    let _ = writeln!(out, "hidden_units: {}", gan.hidden_units());
    let _ = writeln!(out, "seed: {}", gan.seed());
    write_alphabet(&mut out, alphabet);
    for (tag, layers) in [("gen_layer", gan.gen_layers()), ("disc_layer", gan.disc_layers())] {
        for (i, layer) in layers.iter().enumerate() {
            let _ = writeln!(
                out,
                "{tag}: {i} {} {} {}",
                layer.w.rows(),
                layer.w.cols(),
                act_label(layer.act)
            );
            write_values(&mut out, "w", layer.w.data());
            write_values(&mut out, "b", &layer.b);
        }
    }
    out.push_str("end\n");
    out
}

fn read_layers<T: Scalar>(
    r: &mut Reader<'_>,
    tag: &'static str,
    count: usize,
) -> Result<Vec<DenseLayer<T>>, CheckpointError> {
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let header = r.field(tag)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != i.to_string() {
            return Err(CheckpointError::BadValue {
                field: tag.into(),
                detail: format!("expected `{tag}: {i} rows cols act`, found {header:?}"),
            });
        }
        let rows: usize = parts[1].parse().map_err(|_| CheckpointError::BadValue {
            field: tag.into(),
            detail: format!("bad rows in {header:?}"),
        })?;
        let cols: usize = parts[2].parse().map_err(|_| CheckpointError::BadValue {
            field: tag.into(),
            detail: format!("bad cols in {header:?}"),
        })?;
        let act = parse_act(parts[3]).ok_or_else(|| CheckpointError::BadValue {
            field: tag.into(),
            detail: format!("unknown activation {:?}", parts[3]),
        })?;
        let w: Vec<T> = r.values("w", rows * cols)?;
        let b: Vec<T> = r.values("b", rows)?;
        layers.push(DenseLayer {
            w: Mat::from_rows(rows, cols, w),
            b,
            act,
        });
    }
    Ok(layers)
}

pub fn load_gan<T: Scalar>(text: &str) -> Result<(GanModel<T>, TokenAlphabet), CheckpointError> {
    let mut r = Reader::new(text);
    let format = r.field("format")?;
    if format != GAN_FORMAT {
        return Err(CheckpointError::UnknownFormat {
            found: format.to_owned(),
        });
    }
    check_version(&mut r)?;
    let d: usize = r.parse_field("d")?;
    let n: usize = r.parse_field("n")?;
    let prior_dim: usize = r.parse_field("prior_dim")?;
    let dropout: T = r.parse_field("dropout")?;
    let hidden_layers: usize = r.parse_field("hidden_layers")?;
    let _hidden_units: usize = r.parse_field("hidden_units")?;
    let seed: u64 = r.parse_field("seed")?;
    let alphabet = read_alphabet(&mut r)?;
    let gen = read_layers::<T>(&mut r, "gen_layer", hidden_layers + 1)?;
    let disc = read_layers::<T>(&mut r, "disc_layer", hidden_layers + 1)?;
    r.expect_literal("end")?;
    let gan = GanModel::from_parts(d, n, prior_dim, dropout, gen, disc, seed)?;
    Ok((gan, alphabet))
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

pub fn load_tn_file<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(TnModel<T>, TokenAlphabet), CheckpointError> {
    let text = fs::read_to_string(path)?;
    load_tn(&text)
}

pub fn load_gan_file<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(GanModel<T>, TokenAlphabet), CheckpointError> {
    let text = fs::read_to_string(path)?;
    load_gan(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Tokenization;

    fn alphabet(d: usize) -> TokenAlphabet {
        let line: String = (0..d - 1).map(|i| format!("[T{i}]")).collect();
        TokenAlphabet::build(&[line], Tokenization::Brackets).unwrap()
    }

    #[test]
    fn tn_round_trip_is_bit_exact_for_every_kind() {
        for kind in TnKind::ALL {
            let mu = if kind.is_purified() { 2 } else { 1 };
            let model = TnModel::<f64>::init(kind, 4, 3, 2, mu, 99).unwrap();
            let a = alphabet(4);
            let text = save_tn(&model, &a);
            let (loaded, a2) = load_tn::<f64>(&text).unwrap();
            assert_eq!(a, a2);
            assert_eq!(loaded.kind(), kind);
            assert_eq!(loaded.seed(), 99);
            let orig: Vec<u64> = model
                .param_arrays()
                .iter()
                .flat_map(|arr| arr.iter().map(|v| v.to_bits()))
                .collect();
            let back: Vec<u64> = loaded
                .param_arrays()
                .iter()
                .flat_map(|arr| arr.iter().map(|v| v.to_bits()))
                .collect();
            assert_eq!(orig, back, "{kind:?} params must round-trip exactly");
            // byte-identical re-render
            assert_eq!(save_tn(&loaded, &a2), text);
        }
    }

    #[test]
    fn gan_round_trip_is_bit_exact() {
        let gan = GanModel::<f64>::init(3, 4, 2, 8, 5, 0.25, 7).unwrap();
        let a = alphabet(3);
        let text = save_gan(&gan, &a);
        let (loaded, a2) = load_gan::<f64>(&text).unwrap();
        assert_eq!(a, a2);
        assert_eq!(loaded.prior_dim(), 5);
        assert_eq!(loaded.dropout(), 0.25);
        assert_eq!(save_gan(&loaded, &a2), text);
    }

    #[test]
    fn sniff_distinguishes_families() {
        let model = TnModel::<f64>::init(TnKind::BornReal, 3, 2, 2, 1, 0).unwrap();
        let gan = GanModel::<f64>::init(3, 2, 1, 4, 3, 0.0, 0).unwrap();
        let a = alphabet(3);
        assert_eq!(sniff(&save_tn(&model, &a)).unwrap(), CheckpointKind::Tn);
        assert_eq!(sniff(&save_gan(&gan, &a)).unwrap(), CheckpointKind::Gan);
        assert!(matches!(
            sniff("format: other\n"),
            Err(CheckpointError::UnknownFormat { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let model = TnModel::<f64>::init(TnKind::BornReal, 3, 2, 2, 1, 0).unwrap();
        let a = alphabet(3);
        let text = save_tn(&model, &a).replace("version: 1", "version: 9");
        match load_tn::<f64>(&text) {
            Err(CheckpointError::UnsupportedVersion { found }) => assert_eq!(found, "9"),
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_names_the_missing_field() {
        let model = TnModel::<f64>::init(TnKind::LpsComplex, 3, 3, 2, 2, 1).unwrap();
        let a = alphabet(3);
        let text = save_tn(&model, &a);
        // cut the file in the middle of the core list
        let cut = text.find("core: 1").unwrap();
        let truncated = &text[..cut];
        let err = load_tn::<f64>(truncated).unwrap_err();
        let msg = format!("{err}");
        assert!(
            msg.contains("core") || msg.contains("missing field"),
            "error should mention the field: {msg}"
        );
    }

    #[test]
    fn value_corruption_is_reported_with_field() {
        let model = TnModel::<f64>::init(TnKind::BornReal, 3, 2, 2, 1, 0).unwrap();
        let a = alphabet(3);
        let text = save_tn(&model, &a).replacen("re: ", "re: oops ", 1);
        let err = load_tn::<f64>(&text).unwrap_err();
        assert!(format!("{err}").contains("re"));
    }
}
