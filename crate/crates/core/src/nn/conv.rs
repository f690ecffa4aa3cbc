//! Standard, dilated and transposed 2-D convolution.
//!
//! Weights are stored `(out_c, in_c, kh, kw)`. A transposed convolution with
//! the same parameters maps `out_c` channels back to `in_c` channels and is
//! the exact adjoint of the convolution's input-gradient map.

use rayon::prelude::*;

use super::Tensor4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor4,
    /// One value per output channel of the operation the parameters are used
    /// with, or empty for no bias.
    pub bias: Vec<f64>,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(weights: Tensor4, bias: Vec<f64>, stride: usize, dilation: usize, padding: usize) -> Result<Self> {
        if stride == 0 || dilation == 0 {
            return Err(Error::invalid(format!(
                "stride ({stride}) and dilation ({dilation}) must be at least 1"
            )));
        }
        Ok(Self {
            weights,
            bias,
            stride,
            dilation,
            padding,
        })
    }

    /// `k x k` kernel with "same" padding `(k - 1) * dilation / 2`.
    pub fn same(weights: Tensor4, bias: Vec<f64>, stride: usize, dilation: usize) -> Result<Self> {
        let k = weights.dims()[2];
        Self::new(weights, bias, stride, dilation, (k - 1) * dilation / 2)
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        let d = self.weights.dims();
        (d[2], d[3])
    }

    /// Parameter count including bias.
    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn geom(&self) -> Geom {
        let (kh, kw) = self.kernel();
        Geom {
            kh,
            kw,
            stride: self.stride,
            dilation: self.dilation,
            padding: self.padding,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geom {
    kh: usize,
    kw: usize,
    stride: usize,
    dilation: usize,
    padding: usize,
}

impl Geom {
    /// Output positions `o` in `0..out` for which `o*stride + k*dilation - pad`
    /// lands inside `0..input`.
    #[inline]
    fn valid_range(&self, k: usize, input: usize, out: usize) -> (usize, usize) {
        let off = (k * self.dilation) as isize - self.padding as isize;
        let s = self.stride as isize;
        // smallest o with o*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest o with o*s + off <= input-1, exclusive bound
        let last = input as isize - 1 - off;
        let hi = if last < 0 { 0 } else { last / s + 1 };
        (lo.min(out as isize) as usize, (hi.min(out as isize)).max(0) as usize)
    }
}

/// `floor((input + 2 pad - ((k - 1) dil + 1)) / stride) + 1`, or `None` when
/// the kernel does not fit.
pub fn conv_output_size(input: usize, k: usize, stride: usize, dilation: usize, padding: usize) -> Option<usize> {
    let extent = (k - 1) * dilation + 1;
    let padded = input + 2 * padding;
    (padded >= extent && k > 0).then(|| (padded - extent) / stride + 1)
}

/// `(input - 1) stride + (k - 1) dil + 1 - 2 pad`, or `None` if non-positive.
pub fn transposed_output_size(input: usize, k: usize, stride: usize, dilation: usize, padding: usize) -> Option<usize> {
    let full = (input - 1) * stride + (k - 1) * dilation + 1;
    (full > 2 * padding).then(|| full - 2 * padding)
}

fn forward_raw(x: &Tensor4, w: &Tensor4, bias: &[f64], g: Geom, out_h: usize, out_w: usize) -> Tensor4 {
    let [n, in_c, h, wd] = x.dims();
    let out_c = w.dims()[0];
    let plane = out_h * out_w;
    let mut out = vec![0.0; n * out_c * plane];
    let xd = x.data();
    let wdt = w.data();

    out.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (b, oc) = (idx / out_c, idx % out_c);
        if let Some(&bv) = bias.get(oc) {
            dst.fill(bv);
        }
        for ic in 0..in_c {
            let src = &xd[(b * in_c + ic) * h * wd..(b * in_c + ic + 1) * h * wd];
            for ky in 0..g.kh {
                let (oy0, oy1) = g.valid_range(ky, h, out_h);
                for kx in 0..g.kw {
                    let wv = wdt[((oc * in_c + ic) * g.kh + ky) * g.kw + kx];
                    let (ox0, ox1) = g.valid_range(kx, wd, out_w);
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ky * g.dilation - g.padding;
                        let row = &src[iy * wd..(iy + 1) * wd];
                        let drow = &mut dst[oy * out_w..(oy + 1) * out_w];
                        for ox in ox0..ox1 {
                            let ix = ox * g.stride + kx * g.dilation - g.padding;
                            drow[ox] += wv * row[ix];
                        }
                    }
                }
            }
        }
    });
    Tensor4::from_raw([n, out_c, out_h, out_w], out)
}

/// Scatter `go` (shape `n, out_c, oh, ow`) back through the kernel into an
/// input-shaped tensor `n, in_c, in_h, in_w`.
fn input_grad_raw(go: &Tensor4, w: &Tensor4, g: Geom, in_h: usize, in_w: usize) -> Tensor4 {
    let [n, out_c, oh, ow] = go.dims();
    let in_c = w.dims()[1];
    let plane = in_h * in_w;
    let mut gx = vec![0.0; n * in_c * plane];
    let god = go.data();
    let wdt = w.data();

    gx.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (b, ic) = (idx / in_c, idx % in_c);
        for oc in 0..out_c {
            let src = &god[(b * out_c + oc) * oh * ow..(b * out_c + oc + 1) * oh * ow];
            for ky in 0..g.kh {
                let (oy0, oy1) = g.valid_range(ky, in_h, oh);
                for kx in 0..g.kw {
                    let wv = wdt[((oc * in_c + ic) * g.kh + ky) * g.kw + kx];
                    let (ox0, ox1) = g.valid_range(kx, in_w, ow);
                    for oy in oy0..oy1 {
                        let iy = oy * g.stride + ky * g.dilation - g.padding;
                        let srow = &src[oy * ow..(oy + 1) * ow];
                        let drow = &mut dst[iy * in_w..(iy + 1) * in_w];
                        for ox in ox0..ox1 {
                            let ix = ox * g.stride + kx * g.dilation - g.padding;
                            drow[ix] += wv * srow[ox];
                        }
                    }
                }
            }
        }
    });
    Tensor4::from_raw([n, in_c, in_h, in_w], gx)
}

/// `dL/dW[oc, ic, ky, kx] = sum_{b, oy, ox} go[b, oc, oy, ox] * x[b, ic, iy, ix]`.
fn weight_grad_raw(x: &Tensor4, go: &Tensor4, g: Geom, wdims: [usize; 4]) -> Tensor4 {
    let [n, in_c, h, wd] = x.dims();
    let [_, out_c, oh, ow] = go.dims();
    let per_oc = in_c * g.kh * g.kw;
    let mut gw = vec![0.0; out_c * per_oc];
    let xd = x.data();
    let god = go.data();

    gw.par_chunks_mut(per_oc).enumerate().for_each(|(oc, dst)| {
        for ic in 0..in_c {
            for ky in 0..g.kh {
                let (oy0, oy1) = g.valid_range(ky, h, oh);
                for kx in 0..g.kw {
                    let (ox0, ox1) = g.valid_range(kx, wd, ow);
                    let mut acc = 0.0;
                    for b in 0..n {
                        let src = &xd[(b * in_c + ic) * h * wd..(b * in_c + ic + 1) * h * wd];
                        let gsrc = &god[(b * out_c + oc) * oh * ow..(b * out_c + oc + 1) * oh * ow];
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky * g.dilation - g.padding;
                            for ox in ox0..ox1 {
                                let ix = ox * g.stride + kx * g.dilation - g.padding;
                                acc += gsrc[oy * ow + ox] * src[iy * wd + ix];
                            }
                        }
                    }
                    dst[(ic * g.kh + ky) * g.kw + kx] = acc;
                }
            }
        }
    });
    Tensor4::from_raw(wdims, gw)
}

fn channel_sums(t: &Tensor4) -> Vec<f64> {
    let [n, c, h, w] = t.dims();
    let plane = h * w;
    (0..c)
        .map(|ch| {
            (0..n)
                .map(|b| t.data()[(b * c + ch) * plane..(b * c + ch + 1) * plane].iter().sum::<f64>())
                .sum()
        })
        .collect()
}

fn check_bias(bias: &[f64], channels: usize) -> Result<()> {
    if !bias.is_empty() && bias.len() != channels {
        return Err(Error::shape(format!(
            "bias has {} entries for {channels} output channels",
            bias.len()
        )));
    }
    Ok(())
}

fn conv_out_dims(x: &Tensor4, p: &ConvParams) -> Result<(usize, usize)> {
    let [_, c, h, w] = x.dims();
    if c != p.in_channels() {
        return Err(Error::shape(format!(
            "input has {c} channels, kernel expects {}",
            p.in_channels()
        )));
    }
    let (kh, kw) = p.kernel();
    let oh = conv_output_size(h, kh, p.stride, p.dilation, p.padding);
    let ow = conv_output_size(w, kw, p.stride, p.dilation, p.padding);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(Error::shape(format!(
            "kernel {kh}x{kw} (dilation {}, padding {}) does not fit a {h}x{w} input",
            p.dilation, p.padding
        ))),
    }
}

/// Cross-correlation with stride, dilation and zero padding.
pub fn conv2d(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    let (oh, ow) = conv_out_dims(x, p)?;
    check_bias(&p.bias, p.out_channels())?;
    Ok(forward_raw(x, &p.weights, &p.bias, p.geom(), oh, ow))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub grad_x: Tensor4,
    pub grad_w: Tensor4,
    /// Empty when the parameters have no bias.
    pub grad_b: Vec<f64>,
}

pub fn conv2d_backward(x: &Tensor4, p: &ConvParams, grad_out: &Tensor4) -> Result<ConvGrads> {
    let (oh, ow) = conv_out_dims(x, p)?;
    let [n, _, h, w] = x.dims();
    let expected = [n, p.out_channels(), oh, ow];
    if grad_out.dims() != expected {
        return Err(Error::shape(format!(
            "gradient dims {:?}, expected {expected:?}",
            grad_out.dims()
        )));
    }
    let g = p.geom();
    Ok(ConvGrads {
        grad_x: input_grad_raw(grad_out, &p.weights, g, h, w),
        grad_w: weight_grad_raw(x, grad_out, g, p.weights.dims()),
        grad_b: if p.bias.is_empty() { Vec::new() } else { channel_sums(grad_out) },
    })
}

fn transposed_out_dims(x: &Tensor4, p: &ConvParams) -> Result<(usize, usize)> {
    let [_, c, h, w] = x.dims();
    if c != p.out_channels() {
        return Err(Error::shape(format!(
            "transposed convolution input has {c} channels, kernel expects {}",
            p.out_channels()
        )));
    }
    let (kh, kw) = p.kernel();
    match (
        transposed_output_size(h, kh, p.stride, p.dilation, p.padding),
        transposed_output_size(w, kw, p.stride, p.dilation, p.padding),
    ) {
        (Some(oh), Some(ow)) => Ok((oh, ow)),
        _ => Err(Error::shape(format!(
            "transposed convolution of {h}x{w} with padding {} is empty",
            p.padding
        ))),
    }
}

/// Each input value writes a scaled copy of the kernel into the output;
/// overlapping copies add up. Bias, if present, has `in_c` entries.
pub fn transposed_conv2d(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    let (oh, ow) = transposed_out_dims(x, p)?;
    check_bias(&p.bias, p.in_channels())?;
    let mut out = input_grad_raw(x, &p.weights, p.geom(), oh, ow);
    if !p.bias.is_empty() {
        let plane = oh * ow;
        for (idx, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let b = p.bias[idx % p.in_channels()];
            for v in chunk {
                *v += b;
            }
        }
    }
    Ok(out)
}

pub fn transposed_conv2d_backward(x: &Tensor4, p: &ConvParams, grad_out: &Tensor4) -> Result<ConvGrads> {
    let (oh, ow) = transposed_out_dims(x, p)?;
    let [n, _, h, w] = x.dims();
    let expected = [n, p.in_channels(), oh, ow];
    if grad_out.dims() != expected {
        return Err(Error::shape(format!(
            "gradient dims {:?}, expected {expected:?}",
            grad_out.dims()
        )));
    }
    let g = p.geom();
    let grad_x = forward_raw(grad_out, &p.weights, &[], g, h, w);
    Ok(ConvGrads {
        grad_x,
        grad_w: weight_grad_raw(grad_out, x, g, p.weights.dims()),
        grad_b: if p.bias.is_empty() { Vec::new() } else { channel_sums(grad_out) },
    })
}

/// `w[i] = 1 - |i - c| / factor` for `i` in `0..2f - f%2`, `c = (s - 1) / 2`.
pub fn bilinear_weights_1d(factor: usize) -> Vec<f64> {
    let size = 2 * factor - factor % 2;
    let centre = (size as f64 - 1.0) / 2.0;
    (0..size)
        .map(|i| 1.0 - (i as f64 - centre).abs() / factor as f64)
        .collect()
}

/// Fixed bilinear upsampling by `factor` for use with [`transposed_conv2d`]:
/// channel-diagonal, stride `factor`, padding chosen so the output is exactly
/// `factor` times the input size.
pub fn bilinear_kernel(factor: usize, channels: usize) -> Result<ConvParams> {
    if factor < 1 {
        return Err(Error::invalid("upsampling factor must be at least 1"));
    }
    if channels < 1 {
        return Err(Error::invalid("bilinear kernel needs at least one channel"));
    }
    let w1 = bilinear_weights_1d(factor);
    let s = w1.len();
    let mut weights = Tensor4::zeros([channels, channels, s, s]);
    for ch in 0..channels {
        for ky in 0..s {
            for kx in 0..s {
                let i = weights.index(ch, ch, ky, kx);
                weights.data_mut()[i] = w1[ky] * w1[kx];
            }
        }
    }
    ConvParams::new(weights, Vec::new(), factor, 1, (s - factor) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4 {
        let n = dims.iter().product();
        Tensor4::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct-sum oracle with every index spelled out.
    fn naive_conv(x: &Tensor4, p: &ConvParams) -> Tensor4 {
        let [n, ic_n, h, w] = x.dims();
        let [oc_n, _, kh, kw] = p.weights.dims();
        let oh = (h + 2 * p.padding - ((kh - 1) * p.dilation + 1)) / p.stride + 1;
        let ow = (w + 2 * p.padding - ((kw - 1) * p.dilation + 1)) / p.stride + 1;
        let mut out = Tensor4::zeros([n, oc_n, oh, ow]);
        for b in 0..n {
            for oc in 0..oc_n {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = p.bias.get(oc).copied().unwrap_or(0.0);
                        for ic in 0..ic_n {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * p.stride + ky * p.dilation) as isize - p.padding as isize;
                                    let ix = (ox * p.stride + kx * p.dilation) as isize - p.padding as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += p.weights.at(oc, ic, ky, kx) * x.at(b, ic, iy as usize, ix as usize);
                                }
                            }
                        }
                        let i = out.index(b, oc, oy, ox);
                        out.data_mut()[i] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn ones_give_nine() {
        let x = Tensor4::new([1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let p = ConvParams::new(Tensor4::new([1, 1, 3, 3], vec![1.0; 9]).unwrap(), vec![], 1, 1, 0).unwrap();
        assert_eq!(conv2d(&x, &p).unwrap().data(), &[9.0]);

        let x = Tensor4::new([1, 1, 5, 5], vec![1.0; 25]).unwrap();
        let p = ConvParams::new(p.weights.clone(), vec![], 1, 2, 0).unwrap();
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y.dims(), [1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn dilated_taps_are_spaced() {
        // only positions {0, 2, 4} contribute
        let mut x = Tensor4::zeros([1, 1, 5, 5]);
        for y in [0, 2, 4] {
            for xx in [0, 2, 4] {
                let i = x.index(0, 0, y, xx);
                x.data_mut()[i] = 1.0;
            }
        }
        x.data_mut()[6] = 100.0; // (1, 1) is not a tap
        let p = ConvParams::new(Tensor4::new([1, 1, 3, 3], vec![1.0; 9]).unwrap(), vec![], 1, 2, 0).unwrap();
        assert_eq!(conv2d(&x, &p).unwrap().data(), &[9.0]);
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(stride, dil, pad, k) in &[(1, 1, 1, 3), (2, 1, 1, 3), (1, 2, 2, 3), (1, 4, 4, 3), (2, 3, 0, 2), (3, 1, 2, 4)] {
            let x = random([2, 3, 11, 9], &mut rng);
            let w = random([4, 3, k, k], &mut rng);
            let bias: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = ConvParams::new(w, bias, stride, dil, pad).unwrap();
            let fast = conv2d(&x, &p).unwrap();
            let slow = naive_conv(&x, &p);
            assert_eq!(fast.dims(), slow.dims());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(stride, dil, pad) in &[(1, 1, 1), (2, 1, 1), (1, 2, 2), (1, 4, 4)] {
            let x = random([1, 2, 7, 8], &mut rng);
            let w = random([3, 2, 3, 3], &mut rng);
            let p = ConvParams::new(w, vec![0.1, -0.2, 0.3], stride, dil, pad).unwrap();
            let y = conv2d(&x, &p).unwrap();
            let probe = random(y.dims(), &mut rng);
            let g = conv2d_backward(&x, &p, &probe).unwrap();

            let loss_x = |v: &[f64]| {
                let xx = Tensor4::new(x.dims(), v.to_vec()).unwrap();
                conv2d(&xx, &p).unwrap().dot(&probe).unwrap()
            };
            assert!(grad_check(loss_x, x.data(), g.grad_x.data(), 1e-5).unwrap() <= 1e-6);

            let loss_w = |v: &[f64]| {
                let mut pp = p.clone();
                pp.weights = Tensor4::new(p.weights.dims(), v.to_vec()).unwrap();
                conv2d(&x, &pp).unwrap().dot(&probe).unwrap()
            };
            assert!(grad_check(loss_w, p.weights.data(), g.grad_w.data(), 1e-5).unwrap() <= 1e-6);

            let loss_b = |v: &[f64]| {
                let mut pp = p.clone();
                pp.bias = v.to_vec();
                conv2d(&x, &pp).unwrap().dot(&probe).unwrap()
            };
            assert!(grad_check(loss_b, &p.bias, &g.grad_b, 1e-5).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor4::zeros([1, 2, 4, 4]);
        let p = ConvParams::new(Tensor4::zeros([1, 3, 3, 3]), vec![], 1, 1, 0).unwrap();
        assert!(conv2d(&x, &p).is_err());
        let p = ConvParams::new(Tensor4::zeros([1, 2, 3, 3]), vec![], 1, 3, 0).unwrap();
        assert!(conv2d(&x, &p).is_err());
        assert!(ConvParams::new(Tensor4::zeros([1, 2, 3, 3]), vec![], 0, 1, 0).is_err());
        let p = ConvParams::new(Tensor4::zeros([1, 2, 3, 3]), vec![0.0, 0.0], 1, 1, 1).unwrap();
        assert!(conv2d(&x, &p).is_err());
    }

    #[test]
    fn transposed_single_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random([1, 1, 3, 3], &mut rng);
        let p = ConvParams::new(k.clone(), vec![], 2, 1, 0).unwrap();
        let x = Tensor4::new([1, 1, 1, 1], vec![2.5]).unwrap();
        let y = transposed_conv2d(&x, &p).unwrap();
        assert_eq!(y.dims(), [1, 1, 3, 3]);
        for (a, b) in y.data().iter().zip(k.data()) {
            assert_eq!(*a, 2.5 * b);
        }
    }

    #[test]
    fn transposed_overlap_sums() {
        // 2x1 input, 3x3 kernel, stride 2: copies at rows 0..3 and 2..5
        let k = Tensor4::new([1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let p = ConvParams::new(k, vec![], 2, 1, 0).unwrap();
        let x = Tensor4::new([1, 1, 2, 1], vec![1.0, 10.0]).unwrap();
        let y = transposed_conv2d(&x, &p).unwrap();
        assert_eq!(y.dims(), [1, 1, 5, 3]);
        let row = |r: usize| (0..3).map(|c| y.at(0, 0, r, c)).collect::<Vec<_>>();
        assert_eq!(row(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(row(1), vec![4.0, 5.0, 6.0]);
        // middle row: bottom of the first copy plus top of the second
        assert_eq!(row(2), vec![7.0 + 10.0, 8.0 + 20.0, 9.0 + 30.0]);
        assert_eq!(row(4), vec![70.0, 80.0, 90.0]);
    }

    #[test]
    fn transposed_is_conv_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(stride, dil, pad) in &[(1, 1, 1), (2, 1, 1), (2, 1, 0), (1, 2, 2), (3, 1, 1)] {
            let w = random([3, 2, 3, 3], &mut rng);
            let p = ConvParams::new(w, vec![], stride, dil, pad).unwrap();
            // pick an input size the transposed map reproduces exactly
            let small = random([1, 3, 4, 5], &mut rng);
            let t = transposed_conv2d(&small, &p).unwrap();
            let [_, _, h, wd] = t.dims();
            let x = random([1, 2, h, wd], &mut rng);
            let g = conv2d_backward(&x, &p, &small).unwrap();
            for (a, b) in t.data().iter().zip(g.grad_x.data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn transposed_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random([2, 3, 4, 4], &mut rng);
        let p = ConvParams::new(w, vec![0.5, -0.5, 0.25], 2, 1, 1).unwrap();
        let x = random([1, 2, 3, 4], &mut rng);
        let y = transposed_conv2d(&x, &p).unwrap();
        assert_eq!(y.dims(), [1, 3, 6, 8]);
        let probe = random(y.dims(), &mut rng);
        let g = transposed_conv2d_backward(&x, &p, &probe).unwrap();
        let fx = |v: &[f64]| {
            transposed_conv2d(&Tensor4::new(x.dims(), v.to_vec()).unwrap(), &p).unwrap().dot(&probe).unwrap()
        };
        assert!(grad_check(fx, x.data(), g.grad_x.data(), 1e-5).unwrap() <= 1e-6);
        let fw = |v: &[f64]| {
            let mut pp = p.clone();
            pp.weights = Tensor4::new(p.weights.dims(), v.to_vec()).unwrap();
            transposed_conv2d(&x, &pp).unwrap().dot(&probe).unwrap()
        };
        assert!(grad_check(fw, p.weights.data(), g.grad_w.data(), 1e-5).unwrap() <= 1e-6);
        let fb = |v: &[f64]| {
            let mut pp = p.clone();
            pp.bias = v.to_vec();
            transposed_conv2d(&x, &pp).unwrap().dot(&probe).unwrap()
        };
        assert!(grad_check(fb, &p.bias, &g.grad_b, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn bilinear_weights() {
        assert_eq!(bilinear_weights_1d(1), vec![1.0]);
        assert_eq!(bilinear_weights_1d(2), vec![0.25, 0.75, 0.75, 0.25]);
        let k = bilinear_kernel(1, 2).unwrap();
        assert_eq!(k.weights.dims(), [2, 2, 1, 1]);
        assert_eq!(k.weights.data(), &[1.0, 0.0, 0.0, 1.0]);
        assert!(bilinear_kernel(0, 1).is_err());
    }

    #[test]
    fn bilinear_preserves_constants() {
        for factor in 1..=8 {
            let k = bilinear_kernel(factor, 2).unwrap();
            assert!(k.weights.data().iter().all(|&v| v >= 0.0));
            let x = Tensor4::new([1, 2, 5, 6], vec![3.0; 60]).unwrap();
            let y = transposed_conv2d(&x, &k).unwrap();
            assert_eq!(y.dims(), [1, 2, 5 * factor, 6 * factor]);
            // interior: away from the outermost half-period
            let margin = factor;
            for c in 0..2 {
                for yy in margin..5 * factor - margin {
                    for xx in margin..6 * factor - margin {
                        assert!((y.at(0, c, yy, xx) - 3.0).abs() <= 1e-9, "factor {factor} at ({xx},{yy})");
                    }
                }
            }
        }
    }
}
