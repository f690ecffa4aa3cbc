//! End-to-end acceptance checks. Runs every criterion in order, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakseg::augmentation::{augment_dataset, enumerate_plan, AugmentationPlan, NoiseKind};
use weakseg::imaging::{BinaryMask2D, ScalarImage2D, Volume3D};
use weakseg::metrics::{confusion, directed_hausdorff, dsc, hausdorff, tnr, tpr, EvalSummary};
use weakseg::models::{
    check_gradients, AtrousMini, AtrousMiniConfig, FcnMini, FcnMiniConfig, ForwardCache, Model,
};
use weakseg::nn::{
    bilinear_kernel, bilinear_weights_1d, conv2d, conv2d_backward, grad_check, maxpool2, maxpool2_backward, relu,
    relu_backward, softmax_cross_entropy, transposed_conv2d, transposed_conv2d_backward, ConvParams, Tensor4,
};
use weakseg::train_eval::{evaluate, generate_phantoms, quantize_ct, train, PhantomSpec, TrainConfig};
use weakseg::weak_label::{binarize, compute_threshold, label_patient, patient_split, LabeledSlice, ThresholdConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} [{name}] {} ({:.1}s)",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        if !out.pass {
            failed.push(id);
        }
    };

    report(1, "metrics oracle equivalence", &mut metrics_oracle);
    report(2, "metric spot values", &mut metric_spot_values);
    report(3, "gradient checks", &mut gradient_checks);
    report(4, "structural equivalences", &mut structural_equivalences);
    report(5, "bilinear upsampling", &mut bilinear_upsampling);
    report(6, "topology contracts", &mut topology_contracts);
    report(7, "weak-label pipeline", &mut weak_label_pipeline);
    report(8, "augmentation", &mut augmentation);

    let mut first_run = None;
    report(9, "end-to-end training", &mut || {
        let (outcome, run) = end_to_end();
        first_run = run;
        outcome
    });
    report(10, "determinism", &mut || determinism(first_run.as_ref()));

    if failed.is_empty() {
        println!("all acceptance criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- 1

fn brute_counts(a: &BinaryMask2D, b: &BinaryMask2D) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&g, &p) in a.labels().iter().zip(b.labels()) {
        match (g, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    (tp, fp, tn, fn_)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Maximum over A of the minimum Euclidean distance to B, over every pair.
fn brute_directed(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    a.iter()
        .map(|&(ax, ay)| {
            b.iter()
                .map(|&(bx, by)| {
                    let dx = ax as f64 - bx as f64;
                    let dy = ay as f64 - by as f64;
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn brute_hausdorff(a: &BinaryMask2D, b: &BinaryMask2D) -> Option<f64> {
    let (pa, pb) = (a.foreground_points(), b.foreground_points());
    match (pa.is_empty(), pb.is_empty()) {
        (true, true) => Some(0.0),
        (false, false) => Some(brute_directed(&pa, &pb).max(brute_directed(&pb, &pa))),
        _ => None,
    }
}

fn same(x: Option<f64>, y: Option<f64>) -> bool {
    match (x, y) {
        (Some(x), Some(y)) => x == y || (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

fn check_pair(a: &BinaryMask2D, b: &BinaryMask2D) -> Result<(), String> {
    let (tp, fp, tn, fn_) = brute_counts(a, b);
    let c = confusion(a, b).map_err(|e| e.to_string())?;
    if (c.tp, c.fp, c.tn, c.fn_) != (tp, fp, tn, fn_) {
        return Err(format!("counts {c:?} vs ({tp}, {fp}, {tn}, {fn_})"));
    }
    let checks = [
        ("tpr", tpr(&c), ratio(tp, tp + fn_)),
        ("tnr", tnr(&c), ratio(tn, tn + fp)),
        ("dsc", dsc(a, b).map_err(|e| e.to_string())?, ratio(2 * tp, 2 * tp + fp + fn_)),
    ];
    for (name, got, want) in checks {
        if !same(got, want) {
            return Err(format!("{name} {got:?} vs {want:?}"));
        }
    }
    let hd = hausdorff(a, b).map_err(|e| e.to_string())?;
    if hd != brute_hausdorff(a, b) {
        return Err(format!("hd {hd:?} vs {:?}", brute_hausdorff(a, b)));
    }
    Ok(())
}

fn metrics_oracle() -> Outcome {
    let start = Instant::now();
    let small: Vec<BinaryMask2D> = (0u32..512)
        .map(|bits| BinaryMask2D::from_fn(3, 3, |x, y| bits >> (y * 3 + x) & 1 == 1).unwrap())
        .collect();
    let mut pairs = 0usize;
    for a in &small {
        for b in &small {
            if let Err(e) = check_pair(a, b) {
                return Outcome::new(false, format!("3x3 mismatch: {e}"));
            }
            pairs += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let pa = rng.random_range(0.0..1.0);
        let pb = rng.random_range(0.0..1.0);
        let a = BinaryMask2D::from_fn(16, 16, |_, _| rng.random_bool(pa)).unwrap();
        let b = BinaryMask2D::from_fn(16, 16, |_, _| rng.random_bool(pb)).unwrap();
        if let Err(e) = check_pair(&a, &b) {
            return Outcome::new(false, format!("16x16 pair {i}: {e}"));
        }
        pairs += 1;
    }
    let elapsed = start.elapsed();
    Outcome::new(
        elapsed < Duration::from_secs(30),
        format!("{pairs} pairs match brute force in {:.1}s (limit 30s)", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

fn metric_spot_values() -> Outcome {
    let m = BinaryMask2D::from_fn(5, 5, |x, y| x + y < 4).unwrap();
    let d = dsc(&m, &m).unwrap();
    let hd = directed_hausdorff(&[(0, 0)], &[(3, 4)]).unwrap().max(directed_hausdorff(&[(3, 4)], &[(0, 0)]).unwrap());
    let a = [(0, 0), (0, 3)];
    let b = [(0, 0)];
    let hab = directed_hausdorff(&a, &b).unwrap();
    let hba = directed_hausdorff(&b, &a).unwrap();
    let ma = BinaryMask2D::from_fn(6, 6, |x, y| x == 0 && (y == 0 || y == 3)).unwrap();
    let mb = BinaryMask2D::from_fn(6, 6, |x, y| x == 0 && y == 0).unwrap();
    let full = hausdorff(&ma, &mb).unwrap();
    let pass = d == Some(1.0) && hd == 5.0 && hab == 3.0 && hba == 0.0 && full == Some(3.0);
    Outcome::new(
        pass,
        format!("DSC(m,m)={d:?} HD={hd} h(A,B)={hab} h(B,A)={hba} HD(A,B)={full:?}"),
    )
}

// ---------------------------------------------------------------- 3

fn random_tensor(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4 {
    let n = dims.iter().product();
    Tensor4::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Inputs kept at least `gap` away from zero.
fn away_from_zero(dims: [usize; 4], gap: f64, rng: &mut ChaCha8Rng) -> Tensor4 {
    let n = dims.iter().product();
    let v = (0..n)
        .map(|_| {
            let m = rng.random_range(gap..1.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Tensor4::new(dims, v).unwrap()
}

fn with_data(t: &Tensor4, data: &[f64]) -> Tensor4 {
    Tensor4::new(t.dims(), data.to_vec()).unwrap()
}

fn gradient_checks() -> Outcome {
    const EPS: f64 = 1e-6;
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: Vec<(String, f64)> = Vec::new();

    for dilation in [1, 2, 4] {
        let x = random_tensor([1, 2, 11, 11], &mut rng);
        let w = random_tensor([3, 2, 3, 3], &mut rng);
        let bias: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = ConvParams::same(w.clone(), bias.clone(), 1, dilation).unwrap();
        let r = random_tensor(conv2d(&x, &p).unwrap().dims(), &mut rng);
        let g = conv2d_backward(&x, &p, &r).unwrap();
        let ex = grad_check(|v| conv2d(&with_data(&x, v), &p).unwrap().dot(&r).unwrap(), x.data(), g.grad_x.data(), EPS).unwrap();
        let ew = grad_check(
            |v| {
                let q = ConvParams::same(with_data(&w, v), bias.clone(), 1, dilation).unwrap();
                conv2d(&x, &q).unwrap().dot(&r).unwrap()
            },
            w.data(),
            g.grad_w.data(),
            EPS,
        )
        .unwrap();
        let eb = grad_check(
            |v| {
                let q = ConvParams::same(w.clone(), v.to_vec(), 1, dilation).unwrap();
                conv2d(&x, &q).unwrap().dot(&r).unwrap()
            },
            &bias,
            &g.grad_b,
            EPS,
        )
        .unwrap();
        worst.push((format!("conv d{dilation}"), ex.max(ew).max(eb)));
    }

    {
        // distinct values spaced well beyond EPS keep the argmax fixed
        let n = 2 * 8 * 8;
        let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        for i in (1..n).rev() {
            vals.swap(i, rng.random_range(0..=i));
        }
        let x = Tensor4::new([1, 2, 8, 8], vals).unwrap();
        let (y, idx) = maxpool2(&x).unwrap();
        let r = random_tensor(y.dims(), &mut rng);
        let gx = maxpool2_backward(&idx, &r).unwrap();
        let e = grad_check(|v| maxpool2(&with_data(&x, v)).unwrap().0.dot(&r).unwrap(), x.data(), gx.data(), EPS).unwrap();
        worst.push(("maxpool".into(), e));
    }

    {
        let x = away_from_zero([1, 3, 6, 6], 0.05, &mut rng);
        let r = random_tensor(x.dims(), &mut rng);
        let gx = relu_backward(&x, &r).unwrap();
        let e = grad_check(|v| relu(&with_data(&x, v)).dot(&r).unwrap(), x.data(), gx.data(), EPS).unwrap();
        worst.push(("relu".into(), e));
    }

    {
        let x = random_tensor([1, 2, 5, 5], &mut rng);
        let w = random_tensor([2, 3, 4, 4], &mut rng);
        let p = ConvParams::new(w.clone(), Vec::new(), 2, 1, 1).unwrap();
        let r = random_tensor(transposed_conv2d(&x, &p).unwrap().dims(), &mut rng);
        let g = transposed_conv2d_backward(&x, &p, &r).unwrap();
        let ex = grad_check(|v| transposed_conv2d(&with_data(&x, v), &p).unwrap().dot(&r).unwrap(), x.data(), g.grad_x.data(), EPS).unwrap();
        let ew = grad_check(
            |v| {
                let q = ConvParams::new(with_data(&w, v), Vec::new(), 2, 1, 1).unwrap();
                transposed_conv2d(&x, &q).unwrap().dot(&r).unwrap()
            },
            w.data(),
            g.grad_w.data(),
            EPS,
        )
        .unwrap();
        worst.push(("transposed conv".into(), ex.max(ew)));
    }

    {
        let logits = random_tensor([1, 2, 6, 6], &mut rng);
        let mask = BinaryMask2D::from_fn(6, 6, |_, _| rng.random_bool(0.5)).unwrap();
        let labels = [mask];
        let out = softmax_cross_entropy(&logits, &labels).unwrap();
        let e = grad_check(
            |v| softmax_cross_entropy(&with_data(&logits, v), &labels).unwrap().loss,
            logits.data(),
            out.grad_logits.data(),
            EPS,
        )
        .unwrap();
        worst.push(("softmax cross-entropy".into(), e));
    }

    // Full models. The FCN needs sides divisible by 32, so it runs at 32x32;
    // the atrous model runs at 16x16.
    let full = [
        (
            Model::Fcn(FcnMini::new(FcnMiniConfig { input_size: 32, base_channels: 2, num_classes: 2 }, 3).unwrap()),
            32,
        ),
        (
            Model::Atrous(
                AtrousMini::new(
                    AtrousMiniConfig { input_size: 16, base_channels: 2, blocks_per_stage: 1, ..AtrousMiniConfig::default() },
                    3,
                )
                .unwrap(),
            ),
            16,
        ),
    ];
    for (mut model, size) in full {
        // random score convs and biases: zero scores would hide the trunk
        // gradient, zero biases put ReLU inputs exactly on the kink
        for l in model.layers_mut() {
            for b in &mut l.params.bias {
                *b = rng.random_range(-0.1..0.1);
            }
            if l.params.weights.data().iter().all(|&w| w == 0.0) {
                for w in l.params.weights.data_mut() {
                    *w = rng.random_range(-1.0..1.0);
                }
            }
        }
        let img = ScalarImage2D::from_values(size, size, (0..size * size).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mask = BinaryMask2D::from_fn(size, size, |_, _| rng.random_bool(0.4)).unwrap();
        let report = check_gradients(&model, &img, &mask, 1e-5).unwrap();
        let e = report.iter().map(|l| l.max_rel_error).fold(0.0, f64::max);
        worst.push((format!("{:?} {size}x{size}", model.arch()).to_lowercase(), e));
    }

    let elapsed = start.elapsed();
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let summary: Vec<String> = worst.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    Outcome::new(
        max <= TOL && elapsed < Duration::from_secs(120),
        format!("max rel error {max:.2e} (tol 1e-5): {}", summary.join(", ")),
    )
}

// ---------------------------------------------------------------- 4

/// Undilated convolution with every index spelled out; same summation order
/// as the engine (bias, then input channel, kernel row, kernel column).
fn plain_conv(x: &Tensor4, w: &Tensor4, bias: &[f64], pad: usize) -> Tensor4 {
    let [_, ic_n, h, wd] = x.dims();
    let [oc_n, _, kh, kw] = w.dims();
    let (oh, ow) = (h + 2 * pad - kh + 1, wd + 2 * pad - kw + 1);
    let mut out = vec![0.0; oc_n * oh * ow];
    for oc in 0..oc_n {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[oc];
                for ic in 0..ic_n {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let (iy, ix) = ((oy + ky) as isize - pad as isize, (ox + kx) as isize - pad as isize);
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                acc += w.at(oc, ic, ky, kx) * x.at(0, ic, iy as usize, ix as usize);
                            }
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor4::new([1, oc_n, oh, ow], out).unwrap()
}

fn structural_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    let x = random_tensor([1, 3, 13, 9], &mut rng);
    let w = random_tensor([4, 3, 3, 3], &mut rng);
    let bias: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dilated = conv2d(&x, &ConvParams::new(w.clone(), bias.clone(), 1, 1, 1).unwrap()).unwrap();
    let a_ok = dilated == plain_conv(&x, &w, &bias, 1);

    let mut worst_adj: f64 = 0.0;
    for (stride, dilation, pad) in [(1, 1, 1), (2, 1, 1), (1, 2, 2), (2, 3, 0)] {
        let x = random_tensor([1, 3, 12, 12], &mut rng);
        let p = ConvParams::new(random_tensor([5, 3, 3, 3], &mut rng), Vec::new(), stride, dilation, pad).unwrap();
        let y = conv2d(&x, &p).unwrap();
        let r = random_tensor(y.dims(), &mut rng);
        let lhs = y.dot(&r).unwrap();
        let ty = transposed_conv2d(&r, &p).unwrap();
        let rhs = x.dot(&ty).unwrap_or(f64::NAN);
        worst_adj = worst_adj.max((lhs - rhs).abs());
    }
    let b_ok = worst_adj <= 1e-10;

    let count = |dilations| {
        Model::Atrous(AtrousMini::new(AtrousMiniConfig { dilations, ..AtrousMiniConfig::default() }, 0).unwrap()).num_params()
    };
    let counts = [count([1, 1]), count([2, 4]), count([4, 8])];
    let c_ok = counts.iter().all(|&c| c == counts[0]);

    Outcome::new(
        a_ok && b_ok && c_ok,
        format!(
            "(a) dilation-1 bit-exact: {a_ok}; (b) adjoint gap {worst_adj:.1e} (tol 1e-10); (c) parameter counts {counts:?}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn bilinear_upsampling() -> Outcome {
    let w2 = bilinear_weights_1d(2);
    let w_ok = w2 == vec![0.25, 0.75, 0.75, 0.25];
    let mut worst: f64 = 0.0;
    for f in [2usize, 4, 8] {
        let k = bilinear_kernel(f, 2).unwrap();
        let x = Tensor4::new([1, 2, 6, 6], vec![3.7; 72]).unwrap();
        let y = transposed_conv2d(&x, &k).unwrap();
        let [_, c, h, w] = y.dims();
        // interior: away from the border band the kernel does not fully cover
        for ch in 0..c {
            for yy in f..h - f {
                for xx in f..w - f {
                    worst = worst.max((y.at(0, ch, yy, xx) - 3.7).abs());
                }
            }
        }
    }
    Outcome::new(
        w_ok && worst <= 1e-9,
        format!("factor-2 weights {w2:?}; constant interior error {worst:.1e} for factors 2, 4, 8"),
    )
}

// ---------------------------------------------------------------- 6

fn topology_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let img = ScalarImage2D::from_values(64, 64, (0..4096).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();

    let fcn = Model::Fcn(FcnMini::new(FcnMiniConfig::default(), 1).unwrap());
    let (logits, cache) = fcn.forward_train(&img).unwrap();
    let ForwardCache::Fcn(c) = cache else { unreachable!() };
    let fcn_ok = c.score32.dims() == [1, 2, 2, 2]
        && c.score16.dims() == [1, 2, 4, 4]
        && c.score8.dims() == [1, 2, 8, 8]
        && logits.dims() == [1, 2, 64, 64];

    let atrous = Model::Atrous(AtrousMini::new(AtrousMiniConfig::default(), 1).unwrap());
    let (alogits, acache) = atrous.forward_train(&img).unwrap();
    let ForwardCache::Atrous(a) = acache else { unreachable!() };
    let [_, _, fh, fw] = a.features.dims();
    let atrous_ok = (fh, fw) == (8, 8) && alogits.dims() == [1, 2, 64, 64];

    Outcome::new(
        fcn_ok && atrous_ok,
        format!(
            "FCN scores {:?}/{:?}/{:?} -> logits {:?}; atrous features {fh}x{fw} (stride {}) -> logits {:?}",
            &c.score32.dims()[2..],
            &c.score16.dims()[2..],
            &c.score8.dims()[2..],
            logits.dims(),
            64 / fh,
            alogits.dims()
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Quadratic-form rasterisation of a rotated ellipse.
fn ellipse_oracle(cx: f64, cy: f64, a: f64, b: f64, theta: f64, n: usize) -> BinaryMask2D {
    let (s, c) = theta.sin_cos();
    let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
    let (m11, m22, m12) = (c * c * ia + s * s * ib, s * s * ia + c * c * ib, c * s * (ia - ib));
    BinaryMask2D::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        m11 * dx * dx + 2.0 * m12 * dx * dy + m22 * dy * dy <= 1.0
    })
    .unwrap()
}

fn weak_label_pipeline() -> Outcome {
    let spec = PhantomSpec {
        n_patients: 10,
        slices_per_patient: 5,
        seed: 77,
        ..PhantomSpec::default()
    };
    let n = spec.image_size;
    let mut exact = 0;
    let mut total = 0;
    let mut boundary_pixels = 0usize;
    for ph in generate_phantoms(&spec).unwrap() {
        let slices = label_patient(&ph.dataset, ThresholdConfig::default(), 1).unwrap();
        for s in &slices {
            let e = ph.ellipses[s.slice_index];
            let want = ellipse_oracle(e.cx, e.cy, e.a, e.b, e.theta, n);
            total += 1;
            if s.mask == want {
                exact += 1;
            } else {
                boundary_pixels += s.mask.labels().iter().zip(want.labels()).filter(|(a, b)| a != b).count();
            }
        }
        total += spec.slices_per_patient - slices.len();
    }

    let mut v = vec![0.5; 8];
    v[0] = 10.0;
    v[5] = 2.0; // exactly 0.2 * 10
    v[6] = 2.0 + 1e-12;
    let vol = Volume3D::new(2, 2, 2, v, (1.0, 1.0, 1.0)).unwrap();
    let t = compute_threshold(&vol, ThresholdConfig::default()).unwrap();
    let masks = binarize(&vol, t).unwrap();
    let boundary_ok = t == 2.0 && masks[1].get(1, 0) == 0 && masks[1].get(0, 1) == 1;

    Outcome::new(
        exact == total && boundary_ok,
        format!(
            "{exact}/{total} phantom slices match rasterised ellipses ({boundary_pixels} differing pixels); voxel == T is background: {boundary_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn augmentation() -> Outcome {
    let kinds = [NoiseKind::None, NoiseKind::Gaussian, NoiseKind::Uniform, NoiseKind::SaltPepper];
    let mut plans = 0;
    let mut len_ok = true;
    let mut doubling_ok = true;
    for r in 1..=10 {
        for sx in 0..=5 {
            for sy in 0..=5 {
                for kind in kinds {
                    for n_noisy in [1, 4, 10] {
                        let plan = AugmentationPlan {
                            n_rotations: r,
                            n_scales_x: sx,
                            n_scales_y: sy,
                            noise_kind: kind,
                            n_noisy,
                            ..AugmentationPlan::default()
                        };
                        let list = enumerate_plan(&plan).unwrap();
                        let base = 1 + r + sx + sy + r * (sx + sy);
                        let expected = if kind == NoiseKind::None { base } else { 2 * base };
                        len_ok &= list.len() == expected;
                        if kind != NoiseKind::None {
                            for i in 0..base {
                                let (clean, noisy) = (list[i], list[base + i]);
                                doubling_ok &= clean.noise.is_none()
                                    && noisy.noise.is_some_and(|s| s.kind == kind)
                                    && (clean.rotation_deg, clean.scale_x, clean.scale_y)
                                        == (noisy.rotation_deg, noisy.scale_x, noisy.scale_y);
                            }
                        }
                        plans += 1;
                    }
                }
            }
        }
    }

    // binary masks under every transform, plus seed determinism
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mask = BinaryMask2D::from_fn(32, 32, |x, y| (x as f64 - 14.0).powi(2) + (y as f64 - 17.0).powi(2) < 60.0).unwrap();
    let ct = ScalarImage2D::from_values(32, 32, (0..1024).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap();
    let slice = LabeledSlice::new("p", 0, ct, mask).unwrap();
    let mut binary_ok = true;
    let mut seeds_ok = true;
    let mut outputs = 0;
    for kind in kinds {
        for max_rotation_deg in [0.0, 33.0, 180.0] {
            let plan = AugmentationPlan {
                max_rotation_deg,
                noise_kind: kind,
                n_scales_x: 3,
                n_scales_y: 1,
                max_scale: 0.15,
                seed: 5,
                ..AugmentationPlan::default()
            };
            let a = augment_dataset(std::slice::from_ref(&slice), &plan).unwrap();
            let b = augment_dataset(std::slice::from_ref(&slice), &plan).unwrap();
            seeds_ok &= a == b;
            binary_ok &= a.iter().all(|s| s.slice.mask.labels().iter().all(|&l| l <= 1));
            outputs += a.len();
        }
    }
    let noisy = |seed| {
        let plan = AugmentationPlan { noise_kind: NoiseKind::Gaussian, seed, ..AugmentationPlan::default() };
        augment_dataset(std::slice::from_ref(&slice), &plan).unwrap()
    };
    let seed_matters = noisy(1) != noisy(2);

    Outcome::new(
        len_ok && doubling_ok && binary_ok && seeds_ok && seed_matters,
        format!(
            "{plans} plans obey the length formula: {len_ok}; noisy half mirrors clean half: {doubling_ok}; {outputs} masks binary: {binary_ok}; same seed identical: {seeds_ok}; seed changes noise: {seed_matters}"
        ),
    )
}

// ---------------------------------------------------------------- 9, 10

const WINDOW: (f64, f64) = (-160.0, 240.0);

struct Run {
    summary: EvalSummary,
    eval_csv: String,
    loss_csv: String,
    checkpoint: Vec<u8>,
    train_time: Duration,
}

fn datasets() -> (Vec<LabeledSlice>, Vec<LabeledSlice>) {
    let spec = PhantomSpec {
        n_patients: 28,
        slices_per_patient: 5,
        image_size: 64,
        seed: 1,
        ..PhantomSpec::default()
    };
    let phantoms = generate_phantoms(&spec).unwrap();
    let ids: Vec<String> = phantoms.iter().map(|p| p.dataset.patient_id.clone()).collect();
    let (train_ids, _) = patient_split(&ids, 20, 7).unwrap();
    let (mut train_set, mut test_set) = (Vec::new(), Vec::new());
    for ph in &phantoms {
        for s in label_patient(&ph.dataset, ThresholdConfig::default(), 1).unwrap() {
            let ct = quantize_ct(&s.ct, WINDOW.0, WINDOW.1).unwrap();
            let s = LabeledSlice::new(s.patient_id, s.slice_index, ct, s.mask).unwrap();
            if train_ids.contains(&s.patient_id) {
                train_set.push(s);
            } else {
                test_set.push(s);
            }
        }
    }
    let augmented = augment_dataset(&train_set, &AugmentationPlan::default())
        .unwrap()
        .into_iter()
        .map(|a| a.slice)
        .collect();
    (augmented, test_set)
}

fn run_pipeline(mut model: Model, train_set: &[LabeledSlice], test_set: &[LabeledSlice]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pseg");
    let cfg = TrainConfig {
        iterations: 2000,
        lr: 1e-4,
        seed: 3,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let report = train(&mut model, train_set, &cfg, Some(&path)).unwrap();
    let train_time = start.elapsed();
    let eval = evaluate(&model, test_set).unwrap();
    Run {
        summary: eval.summary,
        eval_csv: eval.csv,
        loss_csv: report.to_csv(),
        checkpoint: std::fs::read(&path).unwrap(),
        train_time,
    }
}

fn fcn_model() -> Model {
    Model::Fcn(FcnMini::new(FcnMiniConfig::default(), 1).unwrap())
}

fn fmt_summary(s: &EvalSummary) -> String {
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.1}"));
    format!(
        "TPR {}% TNR {}% DSC {}% HD {} px over {} slices ({} with undefined metrics)",
        f(s.mean_tpr),
        f(s.mean_tnr),
        f(s.mean_dsc),
        f(s.mean_hd),
        s.n,
        s.skipped
    )
}

fn end_to_end() -> (Outcome, Option<Run>) {
    let (train_set, test_set) = datasets();
    let threads = rayon::current_num_threads();
    let fcn = run_pipeline(fcn_model(), &train_set, &test_set);
    let atrous = run_pipeline(
        Model::Atrous(AtrousMini::new(AtrousMiniConfig::default(), 1).unwrap()),
        &train_set,
        &test_set,
    );
    println!("    atrous-mini (comparison only): {}, trained in {:.0}s", fmt_summary(&atrous.summary), atrous.train_time.as_secs_f64());

    let dsc = fcn.summary.mean_dsc.unwrap_or(0.0) / 100.0;
    let hd = fcn.summary.mean_hd.unwrap_or(f64::INFINITY);
    let time_ok = fcn.train_time < Duration::from_secs(600);
    let pass = dsc >= 0.85 && hd <= 5.0 && time_ok;
    let detail = format!(
        "FCN-mini on {} augmented / {} test slices, {threads} thread(s): {} (need DSC >= 85%, HD <= 5 px), trained in {:.0}s",
        train_set.len(),
        test_set.len(),
        fmt_summary(&fcn.summary),
        fcn.train_time.as_secs_f64()
    );
    (Outcome::new(pass, detail), Some(fcn))
}

fn determinism(first: Option<&Run>) -> Outcome {
    let Some(first) = first else {
        return Outcome::new(false, "no criterion-9 run to compare against");
    };
    let (train_set, test_set) = datasets();
    let first_threads = rayon::current_num_threads();
    let other_threads = if first_threads == 1 { 4 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(other_threads).build().unwrap();
    let second = pool.install(|| run_pipeline(fcn_model(), &train_set, &test_set));
    let ckpt = first.checkpoint == second.checkpoint;
    let eval = first.eval_csv == second.eval_csv;
    let loss = first.loss_csv == second.loss_csv;
    Outcome::new(
        ckpt && eval && loss,
        format!(
            "rerun with {other_threads} thread(s) vs {first_threads}: checkpoint bytes identical {ckpt} ({} bytes), evaluation CSV identical {eval}, loss CSV identical {loss}",
            first.checkpoint.len()
        ),
    )
}
