//! Contraction engine for Born machines and locally purified states.
//!
//! A Born machine is run as the `mu = 1` case of the purified form, so one
//! engine covers four kinds (real and complex each). Everything works in the
//! doubled picture: environments are `bond x bond` Hermitian matrices
//! `E[a, a'] = sum over open configurations of chain[a] * conj(chain[a'])`,
//! advanced per site by `E' = sum_b A_b^T E conj(A_b)` (token fixed or
//! token-summed), with the purification index `b` contracted locally. The
//! pairing `sum_{a,a'} L[a,a'] * R[a,a']` of a left and a right environment
//! is the weight, which is real and nonnegative by construction.
//!
//! Environments are rescaled to unit max-norm per site. Log-derivatives are
//! ratios in which the scales cancel, so gradients use the rescaled
//! environments with per-site denominators recomputed in the same gauge.

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use num_traits::{Float, One, Zero};
use rand::Rng;

use super::{categorical, CoreTensor, EngineGrad, TnError};
use crate::linalg::Mat;
use crate::scalar::{Amplitude, Scalar};

#[inline]
fn amp<A: Amplitude>(core: &CoreTensor<A::Real>, x: usize, b: usize, a: usize, g: usize) -> A {
    let i = core.idx(x, b, a, g);
    match &core.im {
        Some(im) => A::from_parts(core.re[i], im[i]),
        None => A::from_parts(core.re[i], <A::Real>::zero()),
    }
}

/// `out[g, g'] = sum_b sum_{a, a'} amp(x,b,a,g) l[a,a'] conj(amp(x,b,a',g'))`
fn advance_left<A: Amplitude>(core: &CoreTensor<A::Real>, x: usize, l: &Mat<A>) -> Mat<A> {
    let (left, right) = (core.left, core.right);
    let mut out = Mat::zeros(right, right);
    let mut tmp = Mat::zeros(left, right);
    for b in 0..core.mu {
        for v in tmp.data_mut() {
            *v = A::zero();
        }
        for a in 0..left {
            for a2 in 0..left {
                let lv = l.get(a, a2);
                for g2 in 0..right {
                    tmp.add_at(a, g2, lv * amp::<A>(core, x, b, a2, g2).conj());
                }
            }
        }
        for a in 0..left {
            for g in 0..right {
                let av: A = amp(core, x, b, a, g);
                for g2 in 0..right {
                    out.add_at(g, g2, av * tmp.get(a, g2));
                }
            }
        }
    }
    out
}

fn advance_left_summed<A: Amplitude>(core: &CoreTensor<A::Real>, l: &Mat<A>) -> Mat<A> {
    let mut out = Mat::zeros(core.right, core.right);
    for x in 0..core.d {
        let part = advance_left(core, x, l);
        for (o, p) in out.data_mut().iter_mut().zip(part.data()) {
            *o += *p;
        }
    }
    out
}

/// `out[a, a'] = sum_b sum_{g, g'} amp(x,b,a,g) r[g,g'] conj(amp(x,b,a',g'))`
fn advance_right<A: Amplitude>(core: &CoreTensor<A::Real>, x: usize, r: &Mat<A>) -> Mat<A> {
    let (left, right) = (core.left, core.right);
    let mut out = Mat::zeros(left, left);
    let mut tmp = Mat::zeros(left, right);
    for b in 0..core.mu {
        for v in tmp.data_mut() {
            *v = A::zero();
        }
        for a in 0..left {
            for g in 0..right {
                let av: A = amp(core, x, b, a, g);
                for g2 in 0..right {
                    tmp.add_at(a, g2, av * r.get(g, g2));
                }
            }
        }
        for a in 0..left {
            for a2 in 0..left {
                let mut acc = A::zero();
                for g2 in 0..right {
                    acc += tmp.get(a, g2) * amp::<A>(core, x, b, a2, g2).conj();
                }
                out.add_at(a, a2, acc);
            }
        }
    }
    out
}

fn advance_right_summed<A: Amplitude>(core: &CoreTensor<A::Real>, r: &Mat<A>) -> Mat<A> {
    let mut out = Mat::zeros(core.left, core.left);
    for x in 0..core.d {
        let part = advance_right(core, x, r);
        for (o, p) in out.data_mut().iter_mut().zip(part.data()) {
            *o += *p;
        }
    }
    out
}

fn normalize<A: Amplitude>(m: &mut Mat<A>) -> Option<A::Real> {
    let s = m.max_abs();
    if s == <A::Real>::zero() || !s.is_finite() {
        return None;
    }
    m.scale_in_place(<A::Real>::one() / s);
    Some(s)
}

fn pair_real<A: Amplitude>(l: &Mat<A>, r: &Mat<A>) -> A::Real {
    l.pair(r).re()
}

pub(super) fn log_weight<A: Amplitude>(cores: &[CoreTensor<A::Real>], seq: &[usize]) -> A::Real {
    let mut l: Mat<A> = Mat::unit();
    let mut log_acc = <A::Real>::zero();
    for (core, &x) in cores.iter().zip(seq) {
        l = advance_left(core, x, &l);
        match normalize(&mut l) {
            Some(s) => log_acc += s.ln(),
            None => return <A::Real>::neg_infinity(),
        }
    }
    let v = l.get(0, 0).re();
    if v > <A::Real>::zero() {
        log_acc + v.ln()
    } else {
        <A::Real>::neg_infinity()
    }
}

pub(super) fn log_partition<A: Amplitude>(cores: &[CoreTensor<A::Real>]) -> Option<A::Real> {
    let mut l: Mat<A> = Mat::unit();
    let mut log_acc = <A::Real>::zero();
    for core in cores {
        l = advance_left_summed(core, &l);
        log_acc += normalize(&mut l)?.ln();
    }
    let v = l.get(0, 0).re();
    (v > <A::Real>::zero()).then(|| log_acc + v.ln())
}

pub(super) fn right_envs_summed<A: Amplitude>(
    cores: &[CoreTensor<A::Real>],
) -> Option<Vec<Mat<A>>> {
    let n = cores.len();
    let mut envs: Vec<Mat<A>> = Vec::with_capacity(n + 1);
    envs.resize(n + 1, Mat::unit());
    for p in (0..n).rev() {
        let mut e = advance_right_summed(&cores[p], &envs[p + 1]);
        normalize(&mut e)?;
        envs[p] = e;
    }
    Some(envs)
}

pub(super) fn prefix_weights<A: Amplitude>(
    cores: &[CoreTensor<A::Real>],
    envs: &[Mat<A>],
    prefix: &[usize],
) -> Result<Vec<A::Real>, TnError> {
    let mut l: Mat<A> = Mat::unit();
    for (core, &x) in cores.iter().zip(prefix) {
        l = advance_left(core, x, &l);
        if normalize(&mut l).is_none() {
            return Err(TnError::ZeroProbabilityPrefix);
        }
    }
    let site = prefix.len();
    Ok(token_weights(&cores[site], &l, &envs[site + 1]))
}

fn token_weights<A: Amplitude>(
    core: &CoreTensor<A::Real>,
    l: &Mat<A>,
    right_env: &Mat<A>,
) -> Vec<A::Real> {
    let mut w = Vec::with_capacity(core.d);
    for t in 0..core.d {
        let lt = advance_left(core, t, l);
        w.push(pair_real(&lt, right_env).max(<A::Real>::zero()));
    }
    w
}

pub(super) fn draw<A: Amplitude, R: Rng + ?Sized>(
    cores: &[CoreTensor<A::Real>],
    envs: &[Mat<A>],
    rng: &mut R,
) -> Result<Vec<usize>, TnError> {
    let n = cores.len();
    let mut l: Mat<A> = Mat::unit();
    let mut seq = Vec::with_capacity(n);
    for (site, core) in cores.iter().enumerate() {
        let w = token_weights(core, &l, &envs[site + 1]);
        let t = categorical(&w, rng).ok_or(TnError::DegenerateModel)?;
        seq.push(t);
        l = advance_left(core, t, &l);
        if normalize(&mut l).is_none() {
            return Err(TnError::DegenerateModel);
        }
    }
    Ok(seq)
}

/// `X_b[a, g] = sum_{a2, g2} L[a, a2] conj(amp(x,b,a2,g2)) R[g, g2]`, the
/// holomorphic half of the weight derivative at one site. The derivative of
/// the weight with respect to the raw real part is `2 Re X`, with respect to
/// the raw imaginary part `-2 Im X`.
fn site_derivative<A: Amplitude>(
    core: &CoreTensor<A::Real>,
    x: usize,
    b: usize,
    l: &Mat<A>,
    r: &Mat<A>,
) -> Mat<A> {
    let (left, right) = (core.left, core.right);
    let mut c = Mat::zeros(left, right);
    for a in 0..left {
        for a2 in 0..left {
            let lv = l.get(a, a2);
            for g2 in 0..right {
                c.add_at(a, g2, lv * amp::<A>(core, x, b, a2, g2).conj());
            }
        }
    }
    let mut out = Mat::zeros(left, right);
    for a in 0..left {
        for g in 0..right {
            let mut acc = A::zero();
            for g2 in 0..right {
                acc += c.get(a, g2) * r.get(g, g2);
            }
            out.set(a, g, acc);
        }
    }
    out
}

pub(super) fn nll_gradient<A: Amplitude>(
    cores: &[CoreTensor<A::Real>],
    batch: &[crate::data::TokenSequence],
) -> Result<EngineGrad<A::Real>, TnError> {
    type R<A> = <A as Amplitude>::Real;
    let n = cores.len();
    let two = <R<A>>::from_f64_lossy(2.0);

    let mut grad_re: Vec<Vec<R<A>>> = cores.iter().map(|c| vec![<R<A>>::zero(); c.len()]).collect();
    let mut grad_im: Vec<Vec<R<A>>> = if A::IS_COMPLEX {
        cores.iter().map(|c| vec![<R<A>>::zero(); c.len()]).collect()
    } else {
        Vec::new()
    };

    // Partition-term environments.
    let mut lz: Vec<Mat<A>> = Vec::with_capacity(n + 1);
    lz.push(Mat::unit());
    for p in 0..n {
        let mut e = advance_left_summed(&cores[p], &lz[p]);
        normalize(&mut e).ok_or(TnError::DegenerateModel)?;
        lz.push(e);
    }
    let rz = right_envs_summed::<A>(cores).ok_or(TnError::DegenerateModel)?;

    for (i, core) in cores.iter().enumerate() {
        let mut denom = <R<A>>::zero();
        for x in 0..core.d {
            let lt = advance_left(core, x, &lz[i]);
            denom += pair_real(&lt, &rz[i + 1]);
        }
        if !(denom > <R<A>>::zero()) {
            return Err(TnError::DegenerateModel);
        }
        for x in 0..core.d {
            for b in 0..core.mu {
                let xmat = site_derivative(core, x, b, &lz[i], &rz[i + 1]);
                for a in 0..core.left {
                    for g in 0..core.right {
                        let idx = core.idx(x, b, a, g);
                        let xv = xmat.get(a, g);
                        grad_re[i][idx] += two * xv.re() / denom;
                        if A::IS_COMPLEX {
                            grad_im[i][idx] -= two * xv.im() / denom;
                        }
                    }
                }
            }
        }
    }

    // Data term, averaged over the batch.
    let inv_b = <R<A>>::one() / <R<A>>::from_usize_lossy(batch.len());
    for (index, seq) in batch.iter().enumerate() {
        let x = seq.indices();
        let mut left: Vec<Mat<A>> = Vec::with_capacity(n + 1);
        left.push(Mat::unit());
        for p in 0..n {
            let mut e = advance_left(&cores[p], x[p], &left[p]);
            normalize(&mut e).ok_or(TnError::ZeroWeightSequence { index })?;
            left.push(e);
        }
        let mut right: Vec<Mat<A>> = Vec::with_capacity(n + 1);
        right.resize(n + 1, Mat::unit());
        for p in (0..n).rev() {
            let mut e = advance_right(&cores[p], x[p], &right[p + 1]);
            normalize(&mut e).ok_or(TnError::ZeroWeightSequence { index })?;
            right[p] = e;
        }
        for (i, core) in cores.iter().enumerate() {
            let lt = advance_left(core, x[i], &left[i]);
            let denom = pair_real(&lt, &right[i + 1]);
            if !(denom > <R<A>>::zero()) {
                return Err(TnError::ZeroWeightSequence { index });
            }
            for b in 0..core.mu {
                let xmat = site_derivative(core, x[i], b, &left[i], &right[i + 1]);
                for a in 0..core.left {
                    for g in 0..core.right {
                        let idx = core.idx(x[i], b, a, g);
                        let xv = xmat.get(a, g);
                        grad_re[i][idx] -= inv_b * two * xv.re() / denom;
                        if A::IS_COMPLEX {
                            grad_im[i][idx] += inv_b * two * xv.im() / denom;
                        }
                    }
                }
            }
        }
    }

    Ok(EngineGrad {
        re: grad_re,
        im: grad_im,
    })
}
