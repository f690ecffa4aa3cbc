//! Two small segmentation networks trained from scratch.
//!
//! - [`FcnMini`]: five conv-ReLU-conv-ReLU-pool stages (strides 2..32), 1x1
//!   class scores at strides 32, 16 and 8, fused by addition after fixed
//!   bilinear x2 upsampling, then bilinear x8 back to input resolution.
//! - [`AtrousMini`]: strided stem and residual stages down to stride 8, two
//!   dilated residual stages at stride 8, a 1x1 score conv and fixed
//!   bilinear x8 upsampling.
//!
//! Both produce `(1, num_classes, size, size)` logits for a single-channel
//! `size x size` input. Upsampling kernels are fixed and never trained.

mod atrous;
mod checkpoint;
mod fcn;

pub use atrous::{AtrousCache, AtrousMini, AtrousMiniConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fcn::{FcnCache, FcnMini, FcnMiniConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask2D, ScalarImage2D};
use crate::nn::{relative_error, softmax_cross_entropy, ConvParams, Tensor4};

/// A trainable convolution with a stable name used in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub params: ConvParams,
}

impl ConvLayer {
    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }
}

/// Gradient of one [`ConvLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub grad_w: Tensor4,
    pub grad_b: Vec<f64>,
}

/// He-style initialisation: zero-mean Gaussian, std `sqrt(2 / fan_in)`.
pub(crate) struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub(crate) fn conv(
        &mut self,
        name: &str,
        out_c: usize,
        in_c: usize,
        k: usize,
        stride: usize,
        dilation: usize,
    ) -> ConvLayer {
        let fan_in = (in_c * k * k) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let data = (0..out_c * in_c * k * k)
            .map(|_| normal.sample(&mut self.rng))
            .collect();
        let weights = Tensor4::from_raw([out_c, in_c, k, k], data);
        ConvLayer {
            name: name.to_string(),
            params: ConvParams::same(weights, vec![0.0; out_c], stride, dilation).expect("valid geometry"),
        }
    }

    pub(crate) fn zero_conv(name: &str, out_c: usize, in_c: usize) -> ConvLayer {
        ConvLayer {
            name: name.to_string(),
            params: ConvParams::new(Tensor4::zeros([out_c, in_c, 1, 1]), vec![0.0; out_c], 1, 1, 0)
                .expect("valid geometry"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Fcn,
    Atrous,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcn" => Ok(Arch::Fcn),
            "atrous" => Ok(Arch::Atrous),
            other => Err(Error::invalid(format!("unknown architecture `{other}` (fcn or atrous)"))),
        }
    }
}

/// Activations kept from a training forward pass.
#[derive(Debug, Clone)]
pub enum ForwardCache {
    Fcn(FcnCache),
    Atrous(AtrousCache),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Fcn(FcnMini),
    Atrous(AtrousMini),
}

impl Model {
    pub fn arch(&self) -> Arch {
        match self {
            Model::Fcn(_) => Arch::Fcn,
            Model::Atrous(_) => Arch::Atrous,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Model::Fcn(m) => m.config().input_size,
            Model::Atrous(m) => m.config().input_size,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Fcn(m) => m.config().num_classes,
            Model::Atrous(m) => m.config().num_classes,
        }
    }

    /// Trainable layers in checkpoint order.
    pub fn layers(&self) -> &[ConvLayer] {
        match self {
            Model::Fcn(m) => m.layers(),
            Model::Atrous(m) => m.layers(),
        }
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        match self {
            Model::Fcn(m) => m.layers_mut(),
            Model::Atrous(m) => m.layers_mut(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.params.num_params()).sum()
    }

    fn input_tensor(&self, image: &ScalarImage2D) -> Result<Tensor4> {
        let s = self.input_size();
        if image.width() != s || image.height() != s {
            return Err(Error::shape(format!(
                "model expects {s}x{s} input, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        Ok(Tensor4::from_raw([1, 1, s, s], image.values().to_vec()))
    }

    pub fn forward(&self, image: &ScalarImage2D) -> Result<Tensor4> {
        Ok(self.forward_train(image)?.0)
    }

    pub fn forward_train(&self, image: &ScalarImage2D) -> Result<(Tensor4, ForwardCache)> {
        let x = self.input_tensor(image)?;
        match self {
            Model::Fcn(m) => m.forward(&x).map(|(y, c)| (y, ForwardCache::Fcn(c))),
            Model::Atrous(m) => m.forward(&x).map(|(y, c)| (y, ForwardCache::Atrous(c))),
        }
    }

    /// Gradients for every trainable layer, aligned with [`layers`](Self::layers).
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor4) -> Result<Vec<LayerGrads>> {
        match (self, cache) {
            (Model::Fcn(m), ForwardCache::Fcn(c)) => m.backward(c, grad_logits),
            (Model::Atrous(m), ForwardCache::Atrous(c)) => m.backward(c, grad_logits),
            _ => Err(Error::invalid("forward cache belongs to a different architecture")),
        }
    }

    /// Per-pixel argmax over classes; ties go to the lower class index.
    pub fn predict(&self, image: &ScalarImage2D) -> Result<BinaryMask2D> {
        argmax_mask(&self.forward(image)?)
    }

    /// Flat copy of all parameters, weights then bias per layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            out.extend_from_slice(l.params.weights.data());
            out.extend_from_slice(&l.params.bias);
        }
        out
    }

    /// Inverse of [`flat_params`](Self::flat_params).
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut at = 0;
        for l in self.layers_mut() {
            let n = l.params.weights.len();
            l.params.weights.data_mut().copy_from_slice(&values[at..at + n]);
            at += n;
            let nb = l.params.bias.len();
            l.params.bias.copy_from_slice(&values[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

/// Flatten layer gradients in the order of [`Model::flat_params`].
pub fn flatten_grads(grads: &[LayerGrads]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.grad_w.data());
        out.extend_from_slice(&g.grad_b);
    }
    out
}

/// Worst finite-difference relative error of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub name: String,
    pub num_params: usize,
    pub max_rel_error: f64,
}

/// Central-difference check of every trainable parameter against
/// [`Model::backward`], on the pixel-summed cross-entropy of `mask`.
///
/// The two perturbed losses are differenced pixel by pixel before summing,
/// which keeps small gradient entries clear of cancellation error.
pub fn check_gradients(model: &Model, image: &ScalarImage2D, mask: &BinaryMask2D, eps: f64) -> Result<Vec<LayerCheck>> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let (logits, cache) = model.forward_train(image)?;
    let out = softmax_cross_entropy(&logits, std::slice::from_ref(mask))?;
    let mut grad_logits = out.grad_logits;
    grad_logits.scale((mask.width() * mask.height()) as f64);
    let grads = model.backward(&cache, &grad_logits)?;

    let mut params = model.flat_params();
    let mut probe = model.clone();
    let mut losses_at = |params: &[f64]| -> Result<Vec<f64>> {
        probe.set_flat_params(params)?;
        pixel_losses(&probe.forward(image)?, mask)
    };
    let mut offset = 0;
    let mut report = Vec::with_capacity(grads.len());
    for (layer, g) in model.layers().iter().zip(&grads) {
        let analytic = g.grad_w.data().iter().chain(&g.grad_b);
        let mut worst: f64 = 0.0;
        for (i, &a) in (offset..).zip(analytic) {
            let orig = params[i];
            params[i] = orig + eps;
            let plus = losses_at(&params)?;
            params[i] = orig - eps;
            let minus = losses_at(&params)?;
            params[i] = orig;
            let diff: f64 = plus.iter().zip(&minus).map(|(p, m)| p - m).sum();
            let numeric = diff / (2.0 * eps);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!("loss around `{}` parameter {}", layer.name, i - offset)));
            }
            worst = worst.max(relative_error(a, numeric));
        }
        let n = layer.params.num_params();
        report.push(LayerCheck {
            name: layer.name.clone(),
            num_params: n,
            max_rel_error: worst,
        });
        offset += n;
    }
    Ok(report)
}

/// Per-pixel `-log softmax(label)` for single-image logits.
fn pixel_losses(logits: &Tensor4, mask: &BinaryMask2D) -> Result<Vec<f64>> {
    let [_, c, h, w] = logits.dims();
    if mask.width() != w || mask.height() != h {
        return Err(Error::shape(format!("mask {}x{} vs logits {w}x{h}", mask.width(), mask.height())));
    }
    let plane = h * w;
    let d = logits.data();
    Ok((0..plane)
        .map(|p| {
            let max = (0..c).map(|ch| d[ch * plane + p]).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (0..c).map(|ch| (d[ch * plane + p] - max).exp()).sum();
            max + sum.ln() - d[usize::from(mask.labels()[p]) * plane + p]
        })
        .collect())
}

/// Class-1-vs-rest mask from `(1, c, h, w)` logits.
pub fn argmax_mask(logits: &Tensor4) -> Result<BinaryMask2D> {
    let [n, c, h, w] = logits.dims();
    if n != 1 || c < 2 {
        return Err(Error::shape(format!("expected (1, >=2, h, w) logits, got {:?}", logits.dims())));
    }
    let plane = h * w;
    let d = logits.data();
    let labels = (0..plane)
        .map(|p| {
            let mut best = 0;
            for ch in 1..c {
                if d[ch * plane + p] > d[best * plane + p] {
                    best = ch;
                }
            }
            u8::from(best != 0)
        })
        .collect();
    BinaryMask2D::new(w, h, labels)
}
