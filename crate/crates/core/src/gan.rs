//! MLP GAN baseline over one-hot sequence space.
//!
//! The generator maps a standard-normal prior vector to an `N x d` matrix of
//! position-wise softmax rows; the discriminator maps an `N x d` matrix
//! (one-hot real data or soft generator output, consumed directly) to a
//! probability. Both are dense stacks sharing hidden layer count and width.
//! Training ascends `log D(x) + log(1 - D(G(z)))` for the discriminator and
//! the non-saturating `log D(G(z))` for the generator, with Adam updates and
//! exact backpropagation; dropout masks apply to discriminator hidden
//! activations during its own update only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adam::{AdamConfig, AdamState};
use crate::data::TokenSequence;
use crate::linalg::Mat;
use crate::scalar::Scalar;

const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GanError {
    #[error("invalid GAN configuration: {0}")]
    InvalidConfig(String),
    #[error("input has wrong shape: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite {which} objective")]
    NonFiniteLoss { which: &'static str },
    #[error("empty batch")]
    EmptyBatch,
    #[error("optimizer: {0}")]
    Optim(#[from] crate::adam::AdamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Sigmoid,
    SoftmaxRows,
    Identity,
}

#[derive(Debug, Clone)]
pub struct DenseLayer<T> {
    pub w: Mat<T>,
    pub b: Vec<T>,
    pub act: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    fn preact(&self, input: &[T]) -> Vec<T> {
        let mut y = self.w.matvec(input);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += *bi;
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrad<T> {
    pub w: Mat<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> LayerGrad<T> {
    fn zeros_like(layer: &DenseLayer<T>) -> Self {
        LayerGrad {
            w: Mat::zeros(layer.w.rows(), layer.w.cols()),
            b: vec![T::zero(); layer.b.len()],
        }
    }

    fn scale(&mut self, s: T) {
        self.w.scale_in_place(s);
        for v in &mut self.b {
            *v *= s;
        }
    }
}

/// Per-hidden-layer keep multipliers for one discriminator pass
/// (inverted dropout: kept units carry `1/(1-p)`).
pub type DropoutMasks<T> = Vec<Vec<T>>;

#[derive(Debug, Clone)]
pub struct GanModel<T: Scalar> {
    gen: Vec<DenseLayer<T>>,
    disc: Vec<DenseLayer<T>>,
    n: usize,
    d: usize,
    prior_dim: usize,
    dropout: T,
    hidden_layers: usize,
    hidden_units: usize,
    seed: u64,
}

impl<T: Scalar> GanModel<T> {
    pub fn init(
        d: usize,
        n: usize,
        hidden_layers: usize,
        hidden_units: usize,
        prior_dim: usize,
        dropout: T,
        seed: u64,
    ) -> Result<Self, GanError> {
        if d < 2 || n < 1 {
            return Err(GanError::InvalidConfig(format!("bad data dims d={d}, n={n}")));
        }
        if hidden_layers < 1 || hidden_units < 1 || prior_dim < 1 {
            return Err(GanError::InvalidConfig(
                "hidden_layers, hidden_units and prior_dim must be >= 1".into(),
            ));
        }
        if dropout < T::zero() || dropout >= T::one() {
            return Err(GanError::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = Vec::with_capacity(hidden_layers + 1);
        let mut dims = vec![prior_dim];
        dims.extend(std::iter::repeat_n(hidden_units, hidden_layers));
        dims.push(n * d);
        for w in 0..=hidden_layers {
            let act = if w == hidden_layers {
                Activation::SoftmaxRows
            } else {
                Activation::LeakyRelu
            };
            gen.push(glorot_layer(dims[w], dims[w + 1], act, &mut rng));
        }
        let mut disc = Vec::with_capacity(hidden_layers + 1);
        let mut dims = vec![n * d];
        dims.extend(std::iter::repeat_n(hidden_units, hidden_layers));
        dims.push(1);
        for w in 0..=hidden_layers {
            let act = if w == hidden_layers {
                Activation::Sigmoid
            } else {
                Activation::LeakyRelu
            };
            disc.push(glorot_layer(dims[w], dims[w + 1], act, &mut rng));
        }
        Ok(GanModel {
            gen,
            disc,
            n,
            d,
            prior_dim,
            dropout,
            hidden_layers,
            hidden_units,
            seed,
        })
    }

    pub fn from_parts(
        d: usize,
        n: usize,
        prior_dim: usize,
        dropout: T,
        gen: Vec<DenseLayer<T>>,
        disc: Vec<DenseLayer<T>>,
        seed: u64,
    ) -> Result<Self, GanError> {
        if gen.len() != disc.len() || gen.is_empty() {
            return Err(GanError::InvalidConfig(
                "generator and discriminator must share the hidden layer count".into(),
            ));
        }
        let hidden_layers = gen.len() - 1;
        let hidden_units = if hidden_layers > 0 { gen[0].w.rows() } else { 0 };
        let model = GanModel {
            gen,
            disc,
            n,
            d,
            prior_dim,
            dropout,
            hidden_layers,
            hidden_units,
            seed,
        };
        if model.gen[0].w.cols() != prior_dim
            || model.gen.last().unwrap().w.rows() != n * d
            || model.disc[0].w.cols() != n * d
            || model.disc.last().unwrap().w.rows() != 1
        {
            return Err(GanError::InvalidConfig("layer shapes do not match dims".into()));
        }
        Ok(model)
    }

    pub fn seq_len(&self) -> usize {
        self.n
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn prior_dim(&self) -> usize {
        self.prior_dim
    }

    pub fn dropout(&self) -> T {
        self.dropout
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden_layers
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gen_layers(&self) -> &[DenseLayer<T>] {
        &self.gen
    }

    pub fn disc_layers(&self) -> &[DenseLayer<T>] {
        &self.disc
    }

    pub fn gen_layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.gen
    }

    pub fn disc_layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.disc
    }

    fn gen_param_views_mut(&mut self) -> Vec<&mut [T]> {
        stack_params_mut(&mut self.gen)
    }

    fn disc_param_views_mut(&mut self) -> Vec<&mut [T]> {
        stack_params_mut(&mut self.disc)
    }

    pub fn gen_param_views(&self) -> Vec<&[T]> {
        stack_params(&self.gen)
    }

    pub fn disc_param_views(&self) -> Vec<&[T]> {
        stack_params(&self.disc)
    }

    /// Deterministic forward pass: `N x d` row-stochastic output.
    pub fn generator_forward(&self, z: &[T]) -> Result<Mat<T>, GanError> {
        Ok(self.gen_forward_cached(z)?.soft)
    }

    fn gen_forward_cached(&self, z: &[T]) -> Result<GenCache<T>, GanError> {
        if z.len() != self.prior_dim {
            return Err(GanError::ShapeMismatch {
                expected: self.prior_dim,
                found: z.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.gen.len());
        let mut preacts = Vec::with_capacity(self.gen.len());
        let mut x = z.to_vec();
        for layer in &self.gen {
            inputs.push(x.clone());
            let y = layer.preact(&x);
            preacts.push(y.clone());
            x = match layer.act {
                Activation::LeakyRelu => leaky(&y),
                Activation::Identity => y,
                Activation::SoftmaxRows => y, // handled below
                Activation::Sigmoid => y.iter().map(|&v| sigmoid(v)).collect(),
            };
        }
        let flat = preacts.last().expect("generator has layers");
        let soft = softmax_rows(flat, self.n, self.d);
        Ok(GenCache {
            inputs,
            preacts,
            soft,
        })
    }

    /// Discriminator probability for an `N x d` input. Dropout masks are
    /// drawn from `rng` only when `train` is set and the rate is positive.
    pub fn discriminator_forward<R: Rng + ?Sized>(
        &self,
        x: &Mat<T>,
        train: bool,
        rng: &mut R,
    ) -> Result<T, GanError> {
        let masks = if train {
            self.draw_masks(rng)
        } else {
            self.unit_masks()
        };
        let cache = self.disc_forward_cached(x, &masks)?;
        Ok(sigmoid(cache.logit))
    }

    /// One set of inverted-dropout masks for a single discriminator pass.
    pub fn draw_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutMasks<T> {
        if self.dropout == T::zero() {
            return self.unit_masks();
        }
        let p = self.dropout.to_f64().unwrap_or(0.0);
        let keep_scale = T::one() / (T::one() - self.dropout);
        (0..self.hidden_layers)
            .map(|_| {
                (0..self.hidden_units)
                    .map(|_| {
                        if rng.random::<f64>() < p {
                            T::zero()
                        } else {
                            keep_scale
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn unit_masks(&self) -> DropoutMasks<T> {
        (0..self.hidden_layers)
            .map(|_| vec![T::one(); self.hidden_units])
            .collect()
    }

    fn disc_forward_cached(&self, x: &Mat<T>, masks: &DropoutMasks<T>) -> Result<DiscCache<T>, GanError> {
        if x.rows() != self.n || x.cols() != self.d {
            return Err(GanError::ShapeMismatch {
                expected: self.n * self.d,
                found: x.rows() * x.cols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.disc.len());
        let mut preacts = Vec::with_capacity(self.disc.len());
        let mut a = x.data().to_vec();
        for (l, layer) in self.disc.iter().enumerate() {
            inputs.push(a.clone());
            let y = layer.preact(&a);
            preacts.push(y.clone());
            a = match layer.act {
                Activation::LeakyRelu => {
                    let mut v = leaky(&y);
                    for (vi, mi) in v.iter_mut().zip(&masks[l]) {
                        *vi *= *mi;
                    }
                    v
                }
                Activation::Identity => y,
                Activation::Sigmoid => y, // logit kept; loss works on it
                Activation::SoftmaxRows => softmax_rows(&y, 1, y.len()).data().to_vec(),
            };
        }
        let logit = preacts.last().expect("discriminator has layers")[0];
        Ok(DiscCache {
            inputs,
            preacts,
            logit,
        })
    }

    /// Discriminator objective `mean log D(real) + mean log(1 - D(fake))`
    /// with explicit fakes and masks, so the value is a pure function of the
    /// parameters (used both for training and for finite differencing).
    pub fn disc_objective(
        &self,
        reals: &[Mat<T>],
        fakes: &[Mat<T>],
        masks_real: &[DropoutMasks<T>],
        masks_fake: &[DropoutMasks<T>],
    ) -> Result<T, GanError> {
        self.disc_pass(reals, fakes, masks_real, masks_fake, None)
    }

    pub fn disc_objective_grads(
        &self,
        reals: &[Mat<T>],
        fakes: &[Mat<T>],
        masks_real: &[DropoutMasks<T>],
        masks_fake: &[DropoutMasks<T>],
    ) -> Result<(T, Vec<LayerGrad<T>>), GanError> {
        let mut grads: Vec<LayerGrad<T>> =
            self.disc.iter().map(LayerGrad::zeros_like).collect();
        let obj = self.disc_pass(reals, fakes, masks_real, masks_fake, Some(&mut grads))?;
        Ok((obj, grads))
    }

    fn disc_pass(
        &self,
        reals: &[Mat<T>],
        fakes: &[Mat<T>],
        masks_real: &[DropoutMasks<T>],
        masks_fake: &[DropoutMasks<T>],
        mut grads: Option<&mut Vec<LayerGrad<T>>>,
    ) -> Result<T, GanError> {
        if reals.is_empty() || fakes.is_empty() {
            return Err(GanError::EmptyBatch);
        }
        let inv_r = T::one() / T::from_usize_lossy(reals.len());
        let inv_f = T::one() / T::from_usize_lossy(fakes.len());
        let mut obj = T::zero();
        for (x, masks) in reals.iter().zip(masks_real) {
            let cache = self.disc_forward_cached(x, masks)?;
            obj += -softplus(-cache.logit) * inv_r; // log sigmoid(s)
            if let Some(g) = grads.as_deref_mut() {
                let dlogit = (T::one() - sigmoid(cache.logit)) * inv_r;
                self.disc_backward(&cache, masks, dlogit, g);
            }
        }
        for (x, masks) in fakes.iter().zip(masks_fake) {
            let cache = self.disc_forward_cached(x, masks)?;
            obj += -softplus(cache.logit) * inv_f; // log(1 - sigmoid(s))
            if let Some(g) = grads.as_deref_mut() {
                let dlogit = -sigmoid(cache.logit) * inv_f;
                self.disc_backward(&cache, masks, dlogit, g);
            }
        }
        if !obj.is_finite() {
            return Err(GanError::NonFiniteLoss {
                which: "discriminator",
            });
        }
        Ok(obj)
    }

    /// Backward through the discriminator stack; returns the gradient with
    /// respect to the flat input (needed when the generator trains through
    /// the discriminator).
    fn disc_backward(
        &self,
        cache: &DiscCache<T>,
        masks: &DropoutMasks<T>,
        dlogit: T,
        grads: &mut [LayerGrad<T>],
    ) -> Vec<T> {
        let mut dy = vec![dlogit];
        for l in (0..self.disc.len()).rev() {
            let layer = &self.disc[l];
            // accumulate dW = dy * input^T, db = dy
            let input = &cache.inputs[l];
            for (i, &dyi) in dy.iter().enumerate() {
                grads[l].b[i] += dyi;
                for (j, &xj) in input.iter().enumerate() {
                    grads[l].w.add_at(i, j, dyi * xj);
                }
            }
            let mut dx = layer.w.matvec_t(&dy);
            if l > 0 {
                // through the previous layer's mask and leaky activation
                let prev = l - 1;
                let y_prev = &cache.preacts[prev];
                for (k, v) in dx.iter_mut().enumerate() {
                    *v *= masks[prev][k] * leaky_deriv(y_prev[k]);
                }
            }
            dy = dx;
        }
        dy
    }

    /// Non-saturating generator objective `mean log D(G(z))`, discriminator
    /// in evaluation mode.
    pub fn gen_objective(&self, zs: &[Vec<T>]) -> Result<T, GanError> {
        self.gen_pass(zs, None)
    }

    pub fn gen_objective_grads(&self, zs: &[Vec<T>]) -> Result<(T, Vec<LayerGrad<T>>), GanError> {
        let mut grads: Vec<LayerGrad<T>> = self.gen.iter().map(LayerGrad::zeros_like).collect();
        let obj = self.gen_pass(zs, Some(&mut grads))?;
        Ok((obj, grads))
    }

    fn gen_pass(
        &self,
        zs: &[Vec<T>],
        mut grads: Option<&mut Vec<LayerGrad<T>>>,
    ) -> Result<T, GanError> {
        if zs.is_empty() {
            return Err(GanError::EmptyBatch);
        }
        let masks = self.unit_masks();
        let inv_b = T::one() / T::from_usize_lossy(zs.len());
        let mut obj = T::zero();
        let mut disc_sink: Vec<LayerGrad<T>> =
            self.disc.iter().map(LayerGrad::zeros_like).collect();
        for z in zs {
            let gcache = self.gen_forward_cached(z)?;
            let dcache = self.disc_forward_cached(&gcache.soft, &masks)?;
            obj += -softplus(-dcache.logit) * inv_b;
            if let Some(g) = grads.as_deref_mut() {
                let dlogit = (T::one() - sigmoid(dcache.logit)) * inv_b;
                let dsoft_flat = self.disc_backward(&dcache, &masks, dlogit, &mut disc_sink);
                self.gen_backward(&gcache, &dsoft_flat, g);
            }
        }
        if !obj.is_finite() {
            return Err(GanError::NonFiniteLoss { which: "generator" });
        }
        Ok(obj)
    }

    fn gen_backward(&self, cache: &GenCache<T>, dsoft_flat: &[T], grads: &mut [LayerGrad<T>]) {
        // through the per-row softmax: dy = s .* (ds - <ds, s>)
        let last = self.gen.len() - 1;
        let mut dy = vec![T::zero(); self.n * self.d];
        for row in 0..self.n {
            let s = cache.soft.row(row);
            let ds = &dsoft_flat[row * self.d..(row + 1) * self.d];
            let mut dot = T::zero();
            for j in 0..self.d {
                dot += ds[j] * s[j];
            }
            for j in 0..self.d {
                dy[row * self.d + j] = s[j] * (ds[j] - dot);
            }
        }
        for l in (0..=last).rev() {
            let layer = &self.gen[l];
            let input = &cache.inputs[l];
            for (i, &dyi) in dy.iter().enumerate() {
                grads[l].b[i] += dyi;
                for (j, &xj) in input.iter().enumerate() {
                    grads[l].w.add_at(i, j, dyi * xj);
                }
            }
            if l == 0 {
                break;
            }
            let mut dx = layer.w.matvec_t(&dy);
            let y_prev = &cache.preacts[l - 1];
            for (k, v) in dx.iter_mut().enumerate() {
                *v *= leaky_deriv(y_prev[k]);
            }
            dy = dx;
        }
    }

    /// One alternating update: an Adam ascent step on the discriminator
    /// objective, then one on the non-saturating generator objective.
    /// Returns the two objective values as measured before each update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        reals: &[Mat<T>],
        rng: &mut R,
        lr: T,
        opt: &mut GanOptimizer<T>,
    ) -> Result<StepLosses<T>, GanError> {
        if reals.is_empty() {
            return Err(GanError::EmptyBatch);
        }
        let b = reals.len();

        // Discriminator step: fakes are produced and then treated as data.
        let zs: Vec<Vec<T>> = (0..b).map(|_| self.draw_prior(rng)).collect();
        let fakes: Vec<Mat<T>> = zs
            .iter()
            .map(|z| self.generator_forward(z))
            .collect::<Result<_, _>>()?;
        let masks_real: Vec<DropoutMasks<T>> = (0..b).map(|_| self.draw_masks(rng)).collect();
        let masks_fake: Vec<DropoutMasks<T>> = (0..b).map(|_| self.draw_masks(rng)).collect();
        let (d_obj, d_grads) =
            self.disc_objective_grads(reals, &fakes, &masks_real, &masks_fake)?;
        let neg: Vec<Vec<T>> = flatten_grads(&d_grads, true);
        {
            let mut views = self.disc_param_views_mut();
            let grad_views: Vec<&[T]> = neg.iter().map(Vec::as_slice).collect();
            opt.disc.step(&mut views, &grad_views, lr)?;
        }

        // Generator step on fresh prior draws, discriminator in eval mode.
        let zs: Vec<Vec<T>> = (0..b).map(|_| self.draw_prior(rng)).collect();
        let (g_obj, g_grads) = self.gen_objective_grads(&zs)?;
        let neg: Vec<Vec<T>> = flatten_grads(&g_grads, true);
        {
            let mut views = self.gen_param_views_mut();
            let grad_views: Vec<&[T]> = neg.iter().map(Vec::as_slice).collect();
            opt.gen.step(&mut views, &grad_views, lr)?;
        }

        Ok(StepLosses {
            d_objective: d_obj,
            g_objective: g_obj,
        })
    }

    pub fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        use rand_distr::{Distribution, StandardNormal};
        (0..self.prior_dim)
            .map(|_| T::from_f64_lossy(StandardNormal.sample(rng)))
            .collect()
    }

    /// Draw `count` sequences: prior sample, forward pass, per-position
    /// argmax (ties to the lowest index), then suffix-pad normalization.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        pad_index: usize,
    ) -> Result<Vec<TokenSequence>, GanError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let z = self.draw_prior(rng);
            let soft = self.generator_forward(&z)?;
            let mut indices = Vec::with_capacity(self.n);
            for row in 0..self.n {
                let r = soft.row(row);
                let mut best = 0usize;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                indices.push(best);
            }
            out.push(TokenSequence::new(indices).normalize_suffix(pad_index));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepLosses<T> {
    pub d_objective: T,
    pub g_objective: T,
}

/// Adam states for the two stacks.
pub struct GanOptimizer<T> {
    pub gen: AdamState<T>,
    pub disc: AdamState<T>,
}

impl<T: Scalar> GanOptimizer<T> {
    pub fn new(model: &GanModel<T>) -> Self {
        GanOptimizer {
            gen: AdamState::for_params(&model.gen_param_views(), AdamConfig::default()),
            disc: AdamState::for_params(&model.disc_param_views(), AdamConfig::default()),
        }
    }
}

struct GenCache<T> {
    inputs: Vec<Vec<T>>,
    preacts: Vec<Vec<T>>,
    soft: Mat<T>,
}

struct DiscCache<T> {
    inputs: Vec<Vec<T>>,
    preacts: Vec<Vec<T>>,
    logit: T,
}

fn glorot_layer<T: Scalar>(
    fan_in: usize,
    fan_out: usize,
    act: Activation,
    rng: &mut ChaCha8Rng,
) -> DenseLayer<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w = Mat::from_fn(fan_out, fan_in, |_, _| {
        T::from_f64_lossy(rng.random_range(-limit..limit))
    });
    DenseLayer {
        w,
        b: vec![T::zero(); fan_out],
        act,
    }
}

fn stack_params<T: Scalar>(layers: &[DenseLayer<T>]) -> Vec<&[T]> {
    let mut out = Vec::with_capacity(layers.len() * 2);
    for l in layers {
        out.push(l.w.data());
        out.push(l.b.as_slice());
    }
    out
}

fn stack_params_mut<T: Scalar>(layers: &mut [DenseLayer<T>]) -> Vec<&mut [T]> {
    let mut out = Vec::with_capacity(layers.len() * 2);
    for l in layers {
        out.push(l.w.data_mut());
        out.push(l.b.as_mut_slice());
    }
    out
}

fn flatten_grads<T: Scalar>(grads: &[LayerGrad<T>], negate: bool) -> Vec<Vec<T>> {
    let s = if negate { -T::one() } else { T::one() };
    let mut out = Vec::with_capacity(grads.len() * 2);
    for g in grads {
        let mut gw = g.clone();
        gw.scale(s);
        out.push(gw.w.data().to_vec());
        out.push(gw.b);
    }
    out
}

fn leaky<T: Scalar>(y: &[T]) -> Vec<T> {
    let slope = T::from_f64_lossy(LEAKY_SLOPE);
    y.iter()
        .map(|&v| if v > T::zero() { v } else { slope * v })
        .collect()
}

fn leaky_deriv<T: Scalar>(y: T) -> T {
    if y > T::zero() {
        T::one()
    } else {
        T::from_f64_lossy(LEAKY_SLOPE)
    }
}

fn sigmoid<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
}

fn softmax_rows<T: Scalar>(flat: &[T], rows: usize, cols: usize) -> Mat<T> {
    assert_eq!(flat.len(), rows * cols);
    let mut out = Mat::zeros(rows, cols);
    for r in 0..rows {
        let row = &flat[r * cols..(r + 1) * cols];
        let mx = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for &v in row {
            total += (v - mx).exp();
        }
        for (c, &v) in row.iter().enumerate() {
            out.set(r, c, (v - mx).exp() / total);
        }
    }
    out
}

/// One-hot encode a token sequence as an `N x d` matrix.
pub fn one_hot<T: Scalar>(seq: &TokenSequence, d: usize) -> Mat<T> {
    let mut m = Mat::zeros(seq.len(), d);
    for (row, &idx) in seq.indices().iter().enumerate() {
        m.set(row, idx, T::one());
    }
    m
}
