use super::Tensor4;
use crate::error::{Error, Result};
use crate::imaging::BinaryMask2D;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Mean cross-entropy per pixel.
    pub loss: f64,
    pub grad_logits: Tensor4,
}

/// Channel-wise softmax at every pixel, stabilised by subtracting the max.
pub fn softmax(logits: &Tensor4) -> Tensor4 {
    let [n, c, h, w] = logits.dims();
    let plane = h * w;
    let d = logits.data();
    let mut out = vec![0.0; d.len()];
    for b in 0..n {
        for p in 0..plane {
            let at = |ch: usize| (b * c + ch) * plane + p;
            let max = (0..c).map(|ch| d[at(ch)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for ch in 0..c {
                let e = (d[at(ch)] - max).exp();
                out[at(ch)] = e;
                sum += e;
            }
            for ch in 0..c {
                out[at(ch)] /= sum;
            }
        }
    }
    Tensor4::from_raw(logits.dims(), out)
}

/// Softmax followed by negative log-likelihood of the label class, averaged
/// over every pixel of the batch. `labels[b]` labels batch item `b`.
pub fn softmax_cross_entropy(logits: &Tensor4, labels: &[BinaryMask2D]) -> Result<LossOutput> {
    let [n, c, h, w] = logits.dims();
    if labels.len() != n {
        return Err(Error::shape(format!("{} label maps for batch of {n}", labels.len())));
    }
    for m in labels {
        if m.width() != w || m.height() != h {
            return Err(Error::shape(format!(
                "labels {}x{} vs logits {w}x{h}",
                m.width(),
                m.height()
            )));
        }
        if let Some(&l) = m.labels().iter().find(|&&l| usize::from(l) >= c) {
            return Err(Error::invalid(format!("label {l} out of range for {c} classes")));
        }
    }
    let plane = h * w;
    let count = (n * plane) as f64;
    let d = logits.data();
    let mut grad = softmax(logits).into_data();
    let mut total = 0.0;
    for (b, m) in labels.iter().enumerate() {
        for (p, &l) in m.labels().iter().enumerate() {
            let at = |ch: usize| (b * c + ch) * plane + p;
            let max = (0..c).map(|ch| d[at(ch)]).fold(f64::NEG_INFINITY, f64::max);
            let lse = max + (0..c).map(|ch| (d[at(ch)] - max).exp()).sum::<f64>().ln();
            total += lse - d[at(usize::from(l))];
            grad[at(usize::from(l))] -= 1.0;
        }
    }
    for g in &mut grad {
        *g /= count;
    }
    Ok(LossOutput {
        loss: total / count,
        grad_logits: Tensor4::from_raw(logits.dims(), grad),
    })
}
