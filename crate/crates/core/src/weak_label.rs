//! Ground-truth masks from PET by thresholding at a fixed fraction of the
//! volume maximum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{extract_slice, BinaryMask2D, ScalarImage2D, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    /// Fraction of the maximum PET intensity, strictly inside (0, 1).
    pub fraction: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { fraction: 0.2 }
    }
}

impl ThresholdConfig {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!(
                "threshold fraction must be in (0, 1), got {fraction}"
            )));
        }
        Ok(Self { fraction })
    }
}

/// One patient's co-registered CT and PET stacks on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientDataset {
    pub patient_id: String,
    pub ct: Volume3D,
    pub pet: Volume3D,
}

impl PatientDataset {
    pub fn new(patient_id: impl Into<String>, ct: Volume3D, pet: Volume3D) -> Result<Self> {
        let patient_id = patient_id.into();
        if ct.depth() != pet.depth() {
            return Err(Error::shape(format!(
                "patient {patient_id}: CT depth {} != PET depth {}",
                ct.depth(),
                pet.depth()
            )));
        }
        if ct.width() != pet.width() || ct.height() != pet.height() {
            return Err(Error::shape(format!(
                "patient {patient_id}: CT grid {}x{} != PET grid {}x{} (resample PET first)",
                ct.width(),
                ct.height(),
                pet.width(),
                pet.height()
            )));
        }
        Ok(Self { patient_id, ct, pet })
    }
}

/// A CT slice with its mask and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSlice {
    pub patient_id: String,
    pub slice_index: usize,
    pub ct: ScalarImage2D,
    pub mask: BinaryMask2D,
}

impl LabeledSlice {
    pub fn new(
        patient_id: impl Into<String>,
        slice_index: usize,
        ct: ScalarImage2D,
        mask: BinaryMask2D,
    ) -> Result<Self> {
        if ct.width() != mask.width() || ct.height() != mask.height() {
            return Err(Error::shape(format!(
                "CT {}x{} vs mask {}x{}",
                ct.width(),
                ct.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(Self {
            patient_id: patient_id.into(),
            slice_index,
            ct,
            mask,
        })
    }

    /// `<patient>_<slice>`, the stem used for prepared files.
    pub fn id(&self) -> String {
        format!("{}_{}", self.patient_id, self.slice_index)
    }
}

/// `T = fraction * max(pet)`, one value for the whole volume.
pub fn compute_threshold(pet: &Volume3D, cfg: ThresholdConfig) -> Result<f64> {
    let max = pet
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if pet.values().is_empty() {
        return Err(Error::invalid("empty volume"));
    }
    if max <= 0.0 {
        return Err(Error::invalid(format!(
            "PET volume has no positive activity (max = {max})"
        )));
    }
    Ok(cfg.fraction * max)
}

/// One mask per slice; a voxel is foreground iff it is strictly above `t`.
pub fn binarize(pet: &Volume3D, t: f64) -> Result<Vec<BinaryMask2D>> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("threshold {t}")));
    }
    (0..pet.depth())
        .map(|k| {
            let labels = pet.slice_values(k).iter().map(|&v| u8::from(v > t)).collect();
            BinaryMask2D::new(pet.width(), pet.height(), labels)
        })
        .collect()
}

/// Ascending indices of masks with at least `min_fg` foreground pixels.
pub fn select_foreground_slices(masks: &[BinaryMask2D], min_fg: usize) -> Result<Vec<usize>> {
    if min_fg == 0 {
        return Err(Error::invalid("min_fg must be at least 1"));
    }
    Ok(masks
        .iter()
        .enumerate()
        .filter(|(_, m)| m.foreground_count() >= min_fg)
        .map(|(k, _)| k)
        .collect())
}

/// Seeded shuffle of patient ids; the first `train_count` become training
/// patients, the rest test patients. Both lists keep the shuffled order.
pub fn patient_split(ids: &[String], train_count: usize, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if train_count == 0 || train_count >= ids.len() {
        return Err(Error::invalid(format!(
            "train_count must be in 1..{}, got {train_count}",
            ids.len()
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(train_count);
    Ok((shuffled, test))
}

/// Threshold a patient's PET, keep slices with enough foreground and pair
/// each with its CT slice.
pub fn label_patient(
    patient: &PatientDataset,
    cfg: ThresholdConfig,
    min_fg: usize,
) -> Result<Vec<LabeledSlice>> {
    let t = compute_threshold(&patient.pet, cfg)?;
    let masks = binarize(&patient.pet, t)?;
    let keep = select_foreground_slices(&masks, min_fg)?;
    keep.into_iter()
        .map(|k| {
            let ct = extract_slice(&patient.ct, k)?;
            LabeledSlice::new(patient.patient_id.clone(), k, ct, masks[k].clone())
        })
        .collect()
}
