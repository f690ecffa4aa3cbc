//! Deterministic data augmentation: rotations, anisotropic scalings and
//! additive noise, enumerated from an [`AugmentationPlan`].
//!
//! Geometric transforms are inverse-mapped about the image centre
//! `((w-1)/2, (h-1)/2)`: each output pixel pulls its value from the source
//! through the inverse transform, and samples that fall outside the source
//! read as 0. The canvas size never changes.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask2D, ScalarImage2D};
use crate::weak_label::LabeledSlice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    SaltPepper,
    None,
}

impl NoiseKind {
    /// Largest accepted magnitude: sigma, amplitude or density.
    pub fn max_magnitude(self) -> f64 {
        match self {
            NoiseKind::Gaussian | NoiseKind::Uniform => 10.0,
            NoiseKind::SaltPepper => 0.5,
            NoiseKind::None => 0.0,
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            "salt_pepper" => Ok(NoiseKind::SaltPepper),
            "none" => Ok(NoiseKind::None),
            other => Err(Error::invalid(format!(
                "unknown noise kind `{other}` (expected gaussian, uniform, salt_pepper or none)"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::SaltPepper => "salt_pepper",
            NoiseKind::None => "none",
        })
    }
}

/// Images that can be resampled through a coordinate map.
pub trait Resample: Sized {
    /// `source_of(x, y)` returns the source coordinate an output pixel reads.
    fn resample(&self, source_of: impl Fn(f64, f64) -> (f64, f64), interp: Interpolation) -> Result<Self>;
}

fn sample_nearest(w: usize, h: usize, sx: f64, sy: f64) -> Option<usize> {
    let (x, y) = (sx.round(), sy.round());
    if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    Some(y as usize * w + x as usize)
}

fn sample_bilinear(values: &[f64], w: usize, h: usize, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let (fx, fy) = (sx - x0, sy - y0);
    let at = |x: f64, y: f64| {
        if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
            0.0
        } else {
            values[y as usize * w + x as usize]
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx;
    let bottom = at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

impl Resample for ScalarImage2D {
    fn resample(&self, source_of: impl Fn(f64, f64) -> (f64, f64), interp: Interpolation) -> Result<Self> {
        let (w, h) = (self.width(), self.height());
        let src = self.values();
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = source_of(x as f64, y as f64);
                out.push(match interp {
                    Interpolation::Bilinear => sample_bilinear(src, w, h, sx, sy),
                    Interpolation::Nearest => sample_nearest(w, h, sx, sy).map_or(0.0, |i| src[i]),
                });
            }
        }
        self.with_values(out)
    }
}

impl Resample for BinaryMask2D {
    fn resample(&self, source_of: impl Fn(f64, f64) -> (f64, f64), interp: Interpolation) -> Result<Self> {
        if interp != Interpolation::Nearest {
            return Err(Error::invalid("masks must be resampled with nearest interpolation"));
        }
        let (w, h) = (self.width(), self.height());
        let src = self.labels();
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = source_of(x as f64, y as f64);
                out.push(sample_nearest(w, h, sx, sy).map_or(0, |i| src[i]));
            }
        }
        BinaryMask2D::new(w, h, out)
    }
}

/// Inverse map of "scale by (fx, fy), then rotate by `angle_deg`", both
/// about the centre `(cx, cy)`.
fn affine_inverse(
    cx: f64,
    cy: f64,
    angle_deg: f64,
    fx: f64,
    fy: f64,
) -> impl Fn(f64, f64) -> (f64, f64) {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    move |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        // rotate by -angle, then undo the scaling
        let rx = dx * cos + dy * sin;
        let ry = -dx * sin + dy * cos;
        (rx / fx + cx, ry / fy + cy)
    }
}

fn centre(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

fn dims_of<T: Raster>(img: &T) -> (usize, usize) {
    (img.raster_width(), img.raster_height())
}

/// Width/height accessors shared by images and masks.
pub trait Raster {
    fn raster_width(&self) -> usize;
    fn raster_height(&self) -> usize;
}

impl Raster for ScalarImage2D {
    fn raster_width(&self) -> usize {
        self.width()
    }
    fn raster_height(&self) -> usize {
        self.height()
    }
}

impl Raster for BinaryMask2D {
    fn raster_width(&self) -> usize {
        self.width()
    }
    fn raster_height(&self) -> usize {
        self.height()
    }
}

/// Rotate about the image centre. A point at offset (dx, dy) from the centre
/// moves to (dx cos a - dy sin a, dx sin a + dy cos a) in pixel coordinates
/// (y pointing down).
pub fn rotate<T: Resample + Raster>(img: &T, angle_deg: f64, interp: Interpolation) -> Result<T> {
    if !angle_deg.is_finite() {
        return Err(Error::NonFinite(format!("rotation angle {angle_deg}")));
    }
    let (cx, cy) = centre(img.raster_width(), img.raster_height());
    img.resample(affine_inverse(cx, cy, angle_deg, 1.0, 1.0), interp)
}

/// Centre-anchored anisotropic scaling; the canvas keeps its size.
pub fn scale<T: Resample + Raster>(img: &T, fx: f64, fy: f64, interp: Interpolation) -> Result<T> {
    if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
        return Err(Error::invalid(format!("scale factors must be positive, got ({fx}, {fy})")));
    }
    let (cx, cy) = centre(img.raster_width(), img.raster_height());
    img.resample(affine_inverse(cx, cy, 0.0, fx, fy), interp)
}

/// Scale then rotate in a single resampling pass.
pub fn apply_geometry<T: Resample + Raster + Clone>(
    img: &T,
    desc: &TransformDescriptor,
    interp: Interpolation,
) -> Result<T> {
    if desc.is_geometric_identity() {
        return Ok(img.clone());
    }
    if !(desc.scale_x > 0.0 && desc.scale_y > 0.0) {
        return Err(Error::invalid(format!(
            "scale factors must be positive, got ({}, {})",
            desc.scale_x, desc.scale_y
        )));
    }
    let (w, h) = dims_of(img);
    let (cx, cy) = centre(w, h);
    img.resample(
        affine_inverse(cx, cy, desc.rotation_deg, desc.scale_x, desc.scale_y),
        interp,
    )
}

/// Additive Gaussian (`magnitude` = sigma) or uniform (`magnitude` =
/// amplitude) noise, or salt-and-pepper replacing a fraction `magnitude` of
/// the pixels with the image minimum or maximum.
pub fn add_noise(img: &ScalarImage2D, kind: NoiseKind, magnitude: f64, seed: u64) -> Result<ScalarImage2D> {
    if !(0.0..=kind.max_magnitude()).contains(&magnitude) {
        return Err(Error::invalid(format!(
            "{kind} noise magnitude {magnitude} outside [0, {}]",
            kind.max_magnitude()
        )));
    }
    if kind == NoiseKind::None || magnitude == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = img.values().to_vec();
    match kind {
        NoiseKind::Gaussian => {
            let normal = Normal::new(0.0, magnitude).map_err(|e| Error::invalid(e.to_string()))?;
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        NoiseKind::Uniform => {
            let uniform =
                Uniform::new_inclusive(-magnitude, magnitude).map_err(|e| Error::invalid(e.to_string()))?;
            for v in &mut values {
                *v += uniform.sample(&mut rng);
            }
        }
        NoiseKind::SaltPepper => {
            let (lo, hi) = img.min_max();
            for i in salt_pepper_indices(values.len(), magnitude, &mut rng) {
                values[i] = if rng.random_bool(0.5) { hi } else { lo };
            }
        }
        NoiseKind::None => unreachable!(),
    }
    img.with_values(values)
}

/// `round(density * n)` distinct pixel indices.
fn salt_pepper_indices(n: usize, density: f64, rng: &mut impl Rng) -> Vec<usize> {
    let count = ((density * n as f64).round() as usize).min(n);
    index::sample(rng, n, count).into_vec()
}

/// Table-of-parameters controlling [`enumerate_plan`]. Defaults are the
/// standard settings; every field is range-checked by [`validate`](Self::validate).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub max_rotation_deg: f64,
    pub n_rotations: usize,
    pub max_scale: f64,
    pub n_scales_x: usize,
    pub n_scales_y: usize,
    pub n_noisy: usize,
    pub gaussian_max_sigma: f64,
    pub uniform_max_amp: f64,
    pub saltpepper_max_density: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            max_rotation_deg: 45.0,
            n_rotations: 4,
            max_scale: 0.1,
            n_scales_x: 2,
            n_scales_y: 2,
            n_noisy: 4,
            gaussian_max_sigma: 5.0,
            uniform_max_amp: 5.0,
            saltpepper_max_density: 0.2,
            noise_kind: NoiseKind::None,
            seed: 0,
        }
    }
}

fn check_range<T: PartialOrd + fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<()> {
    if v < lo || v > hi {
        return Err(Error::invalid(format!("{name} = {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl AugmentationPlan {
    pub fn validate(&self) -> Result<()> {
        check_range("max_rotation_deg", self.max_rotation_deg, 0.0, 180.0)?;
        check_range("n_rotations", self.n_rotations, 1, 10)?;
        check_range("max_scale", self.max_scale, 0.05, 0.15)?;
        check_range("n_scales_x", self.n_scales_x, 0, 5)?;
        check_range("n_scales_y", self.n_scales_y, 0, 5)?;
        check_range("n_noisy", self.n_noisy, 1, 10)?;
        check_range("gaussian_max_sigma", self.gaussian_max_sigma, 1.0, 10.0)?;
        check_range("uniform_max_amp", self.uniform_max_amp, 1.0, 10.0)?;
        check_range("saltpepper_max_density", self.saltpepper_max_density, 0.05, 0.5)?;
        Ok(())
    }

    /// Plan that only emits the untouched input.
    pub fn identity_only() -> IdentityPlan {
        IdentityPlan
    }

    fn noise_max(&self) -> f64 {
        match self.noise_kind {
            NoiseKind::Gaussian => self.gaussian_max_sigma,
            NoiseKind::Uniform => self.uniform_max_amp,
            NoiseKind::SaltPepper => self.saltpepper_max_density,
            NoiseKind::None => 0.0,
        }
    }

    /// `(1 + R + Sx + Sy + R(Sx + Sy)) * (2 if noisy else 1)`.
    pub fn expected_len(&self) -> usize {
        let (r, sx, sy) = (self.n_rotations, self.n_scales_x, self.n_scales_y);
        let base = 1 + r + sx + sy + r * (sx + sy);
        if self.noise_kind == NoiseKind::None {
            base
        } else {
            2 * base
        }
    }
}

/// Marker for [`augment_identity`]; the plan ranges forbid zero rotations,
/// so "identity only" is not expressible as an [`AugmentationPlan`].
#[derive(Debug, Clone, Copy)]
pub struct IdentityPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub magnitude: f64,
    pub draw_seed: u64,
}

/// One enumerated augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformDescriptor {
    pub rotation_deg: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub noise: Option<NoiseSpec>,
}

impl TransformDescriptor {
    pub const IDENTITY: TransformDescriptor = TransformDescriptor {
        rotation_deg: 0.0,
        scale_x: 1.0,
        scale_y: 1.0,
        noise: None,
    };

    pub fn is_geometric_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.scale_x == 1.0 && self.scale_y == 1.0
    }
}

/// Enumerate the plan: identity, rotations at evenly spaced angles in
/// (0, max], x-scalings and y-scalings at factors evenly spaced in
/// (1, 1 + max_scale], then every rotation paired with every scaling. With
/// noise enabled the whole list is emitted a second time with noise; the
/// noisy copies cycle through `n_noisy` magnitude levels up to the kind's
/// maximum and each gets its own draw seed.
pub fn enumerate_plan(plan: &AugmentationPlan) -> Result<Vec<TransformDescriptor>> {
    plan.validate()?;
    let rotations: Vec<f64> = (1..=plan.n_rotations)
        .map(|i| plan.max_rotation_deg * i as f64 / plan.n_rotations as f64)
        .collect();
    let ladder = |n: usize| -> Vec<f64> {
        (1..=n).map(|j| 1.0 + plan.max_scale * j as f64 / n as f64).collect()
    };
    let scalings: Vec<(f64, f64)> = ladder(plan.n_scales_x)
        .into_iter()
        .map(|f| (f, 1.0))
        .chain(ladder(plan.n_scales_y).into_iter().map(|f| (1.0, f)))
        .collect();

    let mut list = vec![TransformDescriptor::IDENTITY];
    for &r in &rotations {
        list.push(TransformDescriptor { rotation_deg: r, ..TransformDescriptor::IDENTITY });
    }
    for &(fx, fy) in &scalings {
        list.push(TransformDescriptor { scale_x: fx, scale_y: fy, ..TransformDescriptor::IDENTITY });
    }
    for &r in &rotations {
        for &(fx, fy) in &scalings {
            list.push(TransformDescriptor { rotation_deg: r, scale_x: fx, scale_y: fy, noise: None });
        }
    }

    if plan.noise_kind != NoiseKind::None {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        let max = plan.noise_max();
        let noisy: Vec<_> = list
            .iter()
            .enumerate()
            .map(|(k, d)| TransformDescriptor {
                noise: Some(NoiseSpec {
                    kind: plan.noise_kind,
                    magnitude: max * ((k % plan.n_noisy) + 1) as f64 / plan.n_noisy as f64,
                    draw_seed: rng.next_u64(),
                }),
                ..*d
            })
            .collect();
        list.extend(noisy);
    }
    Ok(list)
}

/// An augmented slice with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSlice {
    pub slice: LabeledSlice,
    pub descriptor_index: usize,
    pub descriptor: TransformDescriptor,
}

impl AugmentedSlice {
    /// `<patient>_<slice>_<descriptor-index>`.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_{}",
            self.slice.patient_id, self.slice.slice_index, self.descriptor_index
        )
    }
}

/// Apply one descriptor: geometry to CT (bilinear) and mask (nearest), noise
/// to CT only.
pub fn apply_descriptor(slice: &LabeledSlice, desc: &TransformDescriptor) -> Result<LabeledSlice> {
    let mut ct = apply_geometry(&slice.ct, desc, Interpolation::Bilinear)?;
    let mask = apply_geometry(&slice.mask, desc, Interpolation::Nearest)?;
    if let Some(noise) = desc.noise {
        ct = add_noise(&ct, noise.kind, noise.magnitude, noise.draw_seed)?;
    }
    LabeledSlice::new(slice.patient_id.clone(), slice.slice_index, ct, mask)
}

/// One output per descriptor, in enumeration order.
pub fn augment_pair(slice: &LabeledSlice, plan: &AugmentationPlan) -> Result<Vec<AugmentedSlice>> {
    let descriptors = enumerate_plan(plan)?;
    descriptors
        .par_iter()
        .enumerate()
        .map(|(k, d)| {
            Ok(AugmentedSlice {
                slice: apply_descriptor(slice, d)?,
                descriptor_index: k,
                descriptor: *d,
            })
        })
        .collect()
}

/// The degenerate "no augmentation" case.
pub fn augment_identity(slice: &LabeledSlice, _plan: IdentityPlan) -> Vec<AugmentedSlice> {
    vec![AugmentedSlice {
        slice: slice.clone(),
        descriptor_index: 0,
        descriptor: TransformDescriptor::IDENTITY,
    }]
}

/// Augment every slice; output is grouped by input slice, each group in
/// enumeration order.
pub fn augment_dataset(slices: &[LabeledSlice], plan: &AugmentationPlan) -> Result<Vec<AugmentedSlice>> {
    let descriptors = enumerate_plan(plan)?;
    let jobs: Vec<(usize, usize)> = (0..slices.len())
        .flat_map(|s| (0..descriptors.len()).map(move |k| (s, k)))
        .collect();
    jobs.par_iter()
        .map(|&(s, k)| {
            Ok(AugmentedSlice {
                slice: apply_descriptor(&slices[s], &descriptors[k])?,
                descriptor_index: k,
                descriptor: descriptors[k],
            })
        })
        .collect()
}
