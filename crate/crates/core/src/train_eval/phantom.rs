use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask2D, Volume3D};
use crate::weak_label::PatientDataset;

/// Parameters of the synthetic PET/CT phantom set. CT values are in
/// Hounsfield-like units; PET values are arbitrary uptake units.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub n_patients: usize,
    pub slices_per_patient: usize,
    pub image_size: usize,
    /// Maximum offset of the ellipse centre from the image centre, per axis.
    pub center_jitter: f64,
    /// Range of both semi-axes, in pixels.
    pub semi_axis_range: (f64, f64),
    pub pet_fg_intensity: f64,
    pub pet_bg_intensity: f64,
    pub ct_background: f64,
    /// Lesion intensity above background.
    pub ct_contrast: f64,
    /// Amplitude of the smooth background pattern.
    pub ct_texture: f64,
    pub ct_noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            n_patients: 29,
            slices_per_patient: 5,
            image_size: 64,
            center_jitter: 10.0,
            semi_axis_range: (6.0, 14.0),
            pet_fg_intensity: 10.0,
            pet_bg_intensity: 0.0,
            ct_background: 40.0,
            ct_contrast: 80.0,
            ct_texture: 25.0,
            ct_noise_sigma: 10.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.slices_per_patient == 0 || self.image_size < 8 {
            return Err(Error::invalid(
                "phantoms need at least one patient, one slice and an 8 pixel image",
            ));
        }
        if !(self.pet_fg_intensity > self.pet_bg_intensity) || self.pet_bg_intensity < 0.0 {
            return Err(Error::invalid(format!(
                "PET foreground {} must exceed a non-negative background {}",
                self.pet_fg_intensity, self.pet_bg_intensity
            )));
        }
        let (lo, hi) = self.semi_axis_range;
        if !(lo >= 1.0 && hi >= lo) {
            return Err(Error::invalid(format!("semi-axis range {lo}..{hi} is invalid")));
        }
        let half = (self.image_size as f64 - 1.0) / 2.0;
        if self.center_jitter < 0.0 || self.center_jitter + hi > half {
            return Err(Error::invalid(format!(
                "ellipse (jitter {} + axis {hi}) does not fit a {} pixel image",
                self.center_jitter, self.image_size
            )));
        }
        if self.ct_noise_sigma < 0.0 || self.ct_texture < 0.0 {
            return Err(Error::invalid("CT noise and texture must be non-negative"));
        }
        Ok(())
    }
}

/// Rotated ellipse in pixel coordinates; a pixel belongs to it when its
/// centre `(x, y)` satisfies the implicit equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    /// Rotation of the `a` axis from +x, radians.
    pub theta: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.a;
        let v = (-dx * s + dy * c) / self.b;
        u * u + v * v <= 1.0
    }

    pub fn rasterize(&self, width: usize, height: usize) -> Result<BinaryMask2D> {
        BinaryMask2D::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }
}

/// One synthetic patient and the ellipse drawn in each slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub dataset: PatientDataset,
    pub ellipses: Vec<Ellipse>,
}

pub fn generate_phantoms(spec: &PhantomSpec) -> Result<Vec<Phantom>> {
    spec.validate()?;
    let n = spec.image_size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.ct_noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let centre = (n as f64 - 1.0) / 2.0;
    let (amin, amax) = spec.semi_axis_range;

    let mut out = Vec::with_capacity(spec.n_patients);
    for p in 0..spec.n_patients {
        // smooth per-patient background pattern
        let tau = std::f64::consts::TAU;
        let (fx, fy) = (rng.random_range(1.0..3.0) / n as f64, rng.random_range(1.0..3.0) / n as f64);
        let (px, py) = (rng.random_range(0.0..tau), rng.random_range(0.0..tau));

        let mut ct = Vec::with_capacity(n * n * spec.slices_per_patient);
        let mut pet = Vec::with_capacity(n * n * spec.slices_per_patient);
        let mut ellipses = Vec::with_capacity(spec.slices_per_patient);
        for _ in 0..spec.slices_per_patient {
            let e = Ellipse {
                cx: centre + rng.random_range(-1.0..=1.0) * spec.center_jitter,
                cy: centre + rng.random_range(-1.0..=1.0) * spec.center_jitter,
                a: rng.random_range(amin..=amax),
                b: rng.random_range(amin..=amax),
                theta: rng.random_range(0.0..std::f64::consts::PI),
            };
            for y in 0..n {
                for x in 0..n {
                    let inside = e.contains(x as f64, y as f64);
                    let texture = spec.ct_texture
                        * (tau * fx * x as f64 + px).sin()
                        * (tau * fy * y as f64 + py).cos();
                    let lesion = if inside { spec.ct_contrast } else { 0.0 };
                    ct.push(spec.ct_background + texture + lesion + noise.sample(&mut rng));
                    pet.push(if inside { spec.pet_fg_intensity } else { spec.pet_bg_intensity });
                }
            }
            ellipses.push(e);
        }
        let d = spec.slices_per_patient;
        let dataset = PatientDataset::new(
            format!("phantom{p:03}"),
            Volume3D::new(n, n, d, ct, (1.0, 1.0, 1.0))?,
            Volume3D::new(n, n, d, pet, (1.0, 1.0, 1.0))?,
        )?;
        out.push(Phantom { dataset, ellipses });
    }
    Ok(out)
}

/// Phantom volumes only; see [`generate_phantoms`] for the ground-truth shapes.
pub fn make_phantoms(spec: &PhantomSpec) -> Result<Vec<PatientDataset>> {
    Ok(generate_phantoms(spec)?.into_iter().map(|p| p.dataset).collect())
}
