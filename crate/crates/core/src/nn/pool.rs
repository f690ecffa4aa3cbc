use super::Tensor4;
use crate::error::{Error, Result};

/// Where each pooled value came from, as flat indices into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    pub input_dims: [usize; 4],
    pub argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2. Ties go to the first element of the
/// window in row-major order.
pub fn maxpool2(x: &Tensor4) -> Result<(Tensor4, PoolIndices)> {
    let [n, c, h, w] = x.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("max pooling needs even spatial dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let d = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let window = [top, top + 1, top + w, top + w + 1];
                let mut best = window[0];
                for &i in &window[1..] {
                    if d[i] > d[best] {
                        best = i;
                    }
                }
                out.push(d[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor4::from_raw([n, c, oh, ow], out),
        PoolIndices {
            input_dims: x.dims(),
            argmax,
        },
    ))
}

/// Route each output gradient to its recorded argmax.
pub fn maxpool2_backward(indices: &PoolIndices, grad_out: &Tensor4) -> Result<Tensor4> {
    if grad_out.len() != indices.argmax.len() {
        return Err(Error::shape(format!(
            "{} gradients for {} pooled values",
            grad_out.len(),
            indices.argmax.len()
        )));
    }
    let mut gx = Tensor4::zeros(indices.input_dims);
    let d = gx.data_mut();
    for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(gx)
}
