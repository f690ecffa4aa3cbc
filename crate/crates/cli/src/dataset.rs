//! Prepared dataset directories: `<dir>/ct/<stem>.pgm` and `<dir>/mask/<stem>.pgm`.

use std::fs;
use std::path::{Path, PathBuf};

use weakseg::imaging::{read_mask_pgm, read_pgm, write_mask_pgm, write_pgm, BinaryMask2D, ScalarImage2D};
use weakseg::weak_label::LabeledSlice;

use crate::Failure;

pub fn create_dirs(dir: &Path) -> Result<(), Failure> {
    for sub in ["ct", "mask"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Failure::Io(format!("{}: {e}", d.display())))?;
    }
    Ok(())
}

pub fn write_pair(dir: &Path, stem: &str, ct: &ScalarImage2D, mask: &BinaryMask2D) -> Result<(), Failure> {
    write_pgm(ct, dir.join("ct").join(format!("{stem}.pgm")))?;
    write_mask_pgm(mask, dir.join("mask").join(format!("{stem}.pgm")))?;
    Ok(())
}

/// `<patient>_<index>`: the patient id is everything before the last `_`.
fn split_stem(stem: &str) -> Option<(&str, usize)> {
    let (p, k) = stem.rsplit_once('_')?;
    Some((p, k.parse().ok()?))
}

/// Load every CT/mask pair, sorted by file name.
pub fn load(dir: &Path) -> Result<Vec<LabeledSlice>, Failure> {
    let ct_dir = dir.join("ct");
    let entries = fs::read_dir(&ct_dir).map_err(|e| Failure::Io(format!("{}: {e}", ct_dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Invalid(format!("no .pgm slices in {}", ct_dir.display())));
    }
    paths
        .iter()
        .map(|ct_path| {
            let stem = ct_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let (patient, index) = split_stem(stem)
                .ok_or_else(|| Failure::Format(format!("{}: expected <patient>_<slice>.pgm", ct_path.display())))?;
            let ct = read_pgm(ct_path)?;
            let mask = read_mask_pgm(dir.join("mask").join(format!("{stem}.pgm")))?;
            Ok(LabeledSlice::new(patient, index, ct, mask)?)
        })
        .collect()
}
