//! Shared fixtures and independent oracles for the acceptance suite. The
//! oracles enumerate definitions directly (path sums, Monte-Carlo volumes)
//! and never call the contraction engines they check.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tngen_core::data::TokenSequence;
use tngen_core::tn::{TnKind, TnModel};

pub fn mixed_radix(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut counter = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(counter.clone());
        for (c, &dim) in counter.iter_mut().zip(dims).rev() {
            *c += 1;
            if *c < dim {
                break;
            }
            *c = 0;
        }
    }
    out
}

pub fn all_sequences(d: usize, n: usize) -> Vec<Vec<usize>> {
    mixed_radix(&vec![d; n])
}

pub fn seq(x: &[usize]) -> TokenSequence {
    TokenSequence::new(x.to_vec())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn purif_for(kind: TnKind) -> usize {
    if kind.is_purified() {
        2
    } else {
        1
    }
}

fn raw_complex(
    model: &TnModel<f64>,
    site: usize,
    x: usize,
    b: usize,
    a: usize,
    g: usize,
) -> Complex<f64> {
    let core = &model.cores()[site];
    let (_, mu, left, right) = core.dims();
    let i = ((x * mu + b) * left + a) * right + g;
    Complex::new(
        core.raw_re()[i],
        core.raw_im().map_or(0.0, |im| im[i]),
    )
}

/// Brute-force `T(x)` straight from the defining sums over bond and
/// purification indices.
pub fn oracle_weight(model: &TnModel<f64>, x: &[usize]) -> f64 {
    let n = model.num_sites();
    let bond_dims: Vec<usize> = (1..n).map(|p| model.cores()[p].dims().2).collect();
    let paths = mixed_radix(&bond_dims);
    let bond = |path: &[usize], site: usize| -> (usize, usize) {
        let a_in = if site == 0 { 0 } else { path[site - 1] };
        let a_out = if site + 1 == n { 0 } else { path[site] };
        (a_in, a_out)
    };
    match model.kind() {
        TnKind::PositiveMps => {
            let mut total = 0.0;
            for path in &paths {
                let mut term = 1.0;
                for site in 0..n {
                    let (a, g) = bond(path, site);
                    let raw = raw_complex(model, site, x[site], 0, a, g).re;
                    term *= raw * raw;
                }
                total += term;
            }
            total
        }
        TnKind::BornReal | TnKind::BornComplex => {
            let mut amp = Complex::new(0.0, 0.0);
            for path in &paths {
                let mut term = Complex::new(1.0, 0.0);
                for site in 0..n {
                    let (a, g) = bond(path, site);
                    term *= raw_complex(model, site, x[site], 0, a, g);
                }
                amp += term;
            }
            amp.norm_sqr()
        }
        TnKind::LpsReal | TnKind::LpsComplex => {
            let mu_dims: Vec<usize> = model.cores().iter().map(|c| c.dims().1).collect();
            let mut total = 0.0;
            for beta in mixed_radix(&mu_dims) {
                let mut amp = Complex::new(0.0, 0.0);
                for path in &paths {
                    let mut term = Complex::new(1.0, 0.0);
                    for site in 0..n {
                        let (a, g) = bond(path, site);
                        term *= raw_complex(model, site, x[site], beta[site], a, g);
                    }
                    amp += term;
                }
                total += amp.norm_sqr();
            }
            total
        }
    }
}

/// A random model made deliberately non-uniform by multiplicative noise on
/// the raw parameters, so sampled distributions have real structure.
pub fn sharpened_model(kind: TnKind, d: usize, n: usize, r: usize, seed: u64) -> TnModel<f64> {
    let mut model = TnModel::<f64>::init(kind, d, n, r, purif_for(kind), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    for arr in model.param_arrays_mut() {
        for v in arr.iter_mut() {
            *v *= rng.random_range(-1.8f64..1.8).exp();
        }
    }
    model
}

/// Ground-truth nonnegative MPS over suffix-padded sequences: the last token
/// index is the pad, bond state 0 is absorbing, every sample is already
/// suffix-padded.
pub fn padded_ground_truth(d: usize, n: usize, r: usize, seed: u64) -> TnModel<f64> {
    assert!(r >= 2 && d >= 2 && n >= 2);
    let pad = d - 1;
    let mut model = TnModel::<f64>::init(TnKind::PositiveMps, d, n, r, 1, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut arrays = model.param_arrays_mut();
    for (site, arr) in arrays.iter_mut().enumerate() {
        let left = if site == 0 { 1 } else { r };
        let right = if site + 1 == n { 1 } else { r };
        let idx = |x: usize, a: usize, g: usize| (x * left + a) * right + g;
        for v in arr.iter_mut() {
            *v = 0.0;
        }
        for x in 0..d {
            for a in 0..left {
                let from_padded = left > 1 && a == 0;
                for g in 0..right {
                    let to_padded = right > 1 && g == 0;
                    arr[idx(x, a, g)] = if x == pad {
                        if right == 1 || to_padded {
                            1.0
                        } else {
                            0.0
                        }
                    } else if from_padded || to_padded {
                        0.0
                    } else {
                        rng.random_range(0.9..1.1)
                    };
                }
            }
        }
    }
    drop(arrays);
    model
}

/// Decode a suffix-padded truth-space sequence to a bracket line.
pub fn truth_line(s: &TokenSequence, pad: usize) -> String {
    s.indices()
        .iter()
        .take_while(|&&i| i != pad)
        .map(|&i| format!("[T{i}]"))
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic properties: a pure deterministic function of the sample string.
// ---------------------------------------------------------------------------

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn unit(h: u64, lane: u64) -> f64 {
    let mut x = h ^ lane.wrapping_mul(0x9e3779b97f4a7c15);
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51afd7ed558ccd);
    x ^= x >> 33;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// `(has_oh, bde, ip, sa)` for a sample id.
pub fn synth_props(id: &str) -> (bool, f64, f64, f64) {
    let h = fnv1a(id);
    (
        unit(h, 1) < 0.6,
        60.0 + 40.0 * unit(h, 2),
        150.0 + 60.0 * unit(h, 3),
        1.0 + 9.0 * unit(h, 4),
    )
}

/// Chi-square 0.999 quantile for 80 degrees of freedom (standard tables).
pub const CHI2_P999_DF80: f64 = 124.839;
