//! Contraction engine for the nonnegative MPS.
//!
//! Effective entries are squares of the raw parameters, so weights are plain
//! chain products of nonnegative matrices. Environments are row/column
//! vectors of bond dimension, rescaled to unit max-norm at every site with
//! the logs accumulated where an absolute value is needed; log-derivatives
//! are scale-free, so gradients use the rescaled environments directly.

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;

use super::{categorical, CoreTensor, TnError};
use crate::scalar::Scalar;

#[inline]
fn eff<T: Scalar>(core: &CoreTensor<T>, x: usize, a: usize, g: usize) -> T {
    let v = core.re[core.idx(x, 0, a, g)];
    v * v
}

/// `out[g] = sum_a l[a] * eff(x, a, g)`
fn advance<T: Scalar>(core: &CoreTensor<T>, x: usize, l: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); core.right];
    for a in 0..core.left {
        let la = l[a];
        if la == T::zero() {
            continue;
        }
        for g in 0..core.right {
            out[g] += la * eff(core, x, a, g);
        }
    }
    out
}

/// `out[g] = sum_a l[a] * sum_x eff(x, a, g)`
fn advance_summed<T: Scalar>(core: &CoreTensor<T>, l: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); core.right];
    for x in 0..core.d {
        for a in 0..core.left {
            let la = l[a];
            if la == T::zero() {
                continue;
            }
            for g in 0..core.right {
                out[g] += la * eff(core, x, a, g);
            }
        }
    }
    out
}

/// `out[a] = sum_g eff(x, a, g) * r[g]`
fn advance_right<T: Scalar>(core: &CoreTensor<T>, x: usize, r: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); core.left];
    for a in 0..core.left {
        let mut acc = T::zero();
        for g in 0..core.right {
            acc += eff(core, x, a, g) * r[g];
        }
        out[a] = acc;
    }
    out
}

fn advance_right_summed<T: Scalar>(core: &CoreTensor<T>, r: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); core.left];
    for x in 0..core.d {
        for a in 0..core.left {
            let mut acc = T::zero();
            for g in 0..core.right {
                acc += eff(core, x, a, g) * r[g];
            }
            out[a] += acc;
        }
    }
    out
}

/// Rescale to unit max-norm; `None` when the vector vanished.
fn normalize<T: Scalar>(v: &mut [T]) -> Option<T> {
    let mut m = T::zero();
    for &x in v.iter() {
        let a = x.abs();
        if a > m {
            m = a;
        }
    }
    if m == T::zero() || !m.is_finite() {
        return None;
    }
    for x in v.iter_mut() {
        *x /= m;
    }
    Some(m)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(super) fn log_weight<T: Scalar>(cores: &[CoreTensor<T>], seq: &[usize]) -> T {
    let mut l = vec![T::one()];
    let mut log_acc = T::zero();
    for (core, &x) in cores.iter().zip(seq) {
        l = advance(core, x, &l);
        match normalize(&mut l) {
            Some(s) => log_acc += s.ln(),
            None => return T::neg_infinity(),
        }
    }
    debug_assert_eq!(l.len(), 1);
    if l[0] > T::zero() {
        log_acc + l[0].ln()
    } else {
        T::neg_infinity()
    }
}

pub(super) fn log_partition<T: Scalar>(cores: &[CoreTensor<T>]) -> Option<T> {
    let mut l = vec![T::one()];
    let mut log_acc = T::zero();
    for core in cores {
        l = advance_summed(core, &l);
        log_acc += normalize(&mut l)?.ln();
    }
    (l[0] > T::zero()).then(|| log_acc + l[0].ln())
}

/// Token-summed right environments, unit max-norm: `envs[p]` covers sites
/// `p..N`, so `envs[N]` is the scalar seed.
pub(super) fn right_envs_summed<T: Scalar>(cores: &[CoreTensor<T>]) -> Option<Vec<Vec<T>>> {
    let n = cores.len();
    let mut envs = vec![Vec::new(); n + 1];
    envs[n] = vec![T::one()];
    for p in (0..n).rev() {
        let mut e = advance_right_summed(&cores[p], &envs[p + 1]);
        normalize(&mut e)?;
        envs[p] = e;
    }
    Some(envs)
}

/// Unnormalized next-token weights after a prefix, using shared right
/// environments.
pub(super) fn prefix_weights<T: Scalar>(
    cores: &[CoreTensor<T>],
    envs: &[Vec<T>],
    prefix: &[usize],
) -> Result<Vec<T>, TnError> {
    let mut l = vec![T::one()];
    for (core, &x) in cores.iter().zip(prefix) {
        l = advance(core, x, &l);
        if normalize(&mut l).is_none() {
            return Err(TnError::ZeroProbabilityPrefix);
        }
    }
    let site = prefix.len();
    let core = &cores[site];
    let right_env = &envs[site + 1];
    let mut w = Vec::with_capacity(core.d);
    for t in 0..core.d {
        let lt = advance(core, t, &l);
        w.push(dot(&lt, right_env).max(T::zero()));
    }
    Ok(w)
}

pub(super) fn draw<T: Scalar, R: Rng + ?Sized>(
    cores: &[CoreTensor<T>],
    envs: &[Vec<T>],
    rng: &mut R,
) -> Result<Vec<usize>, TnError> {
    let n = cores.len();
    let mut l = vec![T::one()];
    let mut seq = Vec::with_capacity(n);
    for (site, core) in cores.iter().enumerate() {
        let right_env = &envs[site + 1];
        let mut w = Vec::with_capacity(core.d);
        for t in 0..core.d {
            let lt = advance(core, t, &l);
            w.push(dot(&lt, right_env).max(T::zero()));
        }
        let t = categorical(&w, rng).ok_or(TnError::DegenerateModel)?;
        seq.push(t);
        l = advance(core, t, &l);
        if normalize(&mut l).is_none() {
            return Err(TnError::DegenerateModel);
        }
    }
    Ok(seq)
}

/// Gradient of the batch-mean NLL with respect to the raw parameters,
/// one array per core.
pub(super) fn nll_gradient<T: Scalar>(
    cores: &[CoreTensor<T>],
    batch: &[crate::data::TokenSequence],
) -> Result<super::EngineGrad<T>, TnError> {
    let n = cores.len();

    // Partition-term environments.
    let mut lz = vec![Vec::new(); n + 1];
    lz[0] = vec![T::one()];
    for p in 0..n {
        let mut e = advance_summed(&cores[p], &lz[p]);
        normalize(&mut e).ok_or(TnError::DegenerateModel)?;
        lz[p + 1] = e;
    }
    let rz = right_envs_summed(cores).ok_or(TnError::DegenerateModel)?;

    let mut grad_eff: Vec<Vec<T>> = cores.iter().map(|c| vec![T::zero(); c.len()]).collect();

    // d log Z / d eff(i, x, a, g) = Lz[a] * Rz[g] / Z_i, identical across x.
    for (i, core) in cores.iter().enumerate() {
        let mut denom = T::zero();
        for x in 0..core.d {
            let lt = advance(core, x, &lz[i]);
            denom += dot(&lt, &rz[i + 1]);
        }
        if !(denom > T::zero()) {
            return Err(TnError::DegenerateModel);
        }
        for x in 0..core.d {
            for a in 0..core.left {
                let la = lz[i][a];
                for g in 0..core.right {
                    grad_eff[i][core.idx(x, 0, a, g)] += la * rz[i + 1][g] / denom;
                }
            }
        }
    }

    // Data term, averaged over the batch.
    let inv_b = T::one() / T::from_usize_lossy(batch.len());
    for (index, seq) in batch.iter().enumerate() {
        let x = seq.indices();
        let mut left = vec![Vec::new(); n + 1];
        left[0] = vec![T::one()];
        for p in 0..n {
            let mut e = advance(&cores[p], x[p], &left[p]);
            normalize(&mut e).ok_or(TnError::ZeroWeightSequence { index })?;
            left[p + 1] = e;
        }
        let mut right = vec![Vec::new(); n + 1];
        right[n] = vec![T::one()];
        for p in (0..n).rev() {
            let mut e = advance_right(&cores[p], x[p], &right[p + 1]);
            normalize(&mut e).ok_or(TnError::ZeroWeightSequence { index })?;
            right[p] = e;
        }
        for (i, core) in cores.iter().enumerate() {
            let lt = advance(core, x[i], &left[i]);
            let denom = dot(&lt, &right[i + 1]);
            if !(denom > T::zero()) {
                return Err(TnError::ZeroWeightSequence { index });
            }
            for a in 0..core.left {
                let la = left[i][a];
                for g in 0..core.right {
                    grad_eff[i][core.idx(x[i], 0, a, g)] -= inv_b * la * right[i + 1][g] / denom;
                }
            }
        }
    }

    // Chain rule through eff = raw^2.
    let two = T::from_f64_lossy(2.0);
    let mut re = Vec::with_capacity(n);
    for (core, eff_grad) in cores.iter().zip(grad_eff) {
        let arr: Vec<T> = core
            .re
            .iter()
            .zip(eff_grad)
            .map(|(&raw, g)| two * raw * g)
            .collect();
        re.push(arr);
    }
    Ok(super::EngineGrad { re, im: Vec::new() })
}
