//! Overlap and distance metrics between a ground-truth and a predicted mask.
//!
//! Ratios whose denominator vanishes, and Hausdorff distances against an
//! empty set, are `None` ("undefined") rather than a sentinel number. The
//! summary reports how many records had at least one undefined entry.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imaging::BinaryMask2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_dims(gt: &BinaryMask2D, pred: &BinaryMask2D) -> Result<()> {
    if !gt.same_dims(pred) {
        return Err(Error::shape(format!(
            "ground truth {}x{} vs prediction {}x{}",
            gt.width(),
            gt.height(),
            pred.width(),
            pred.height()
        )));
    }
    Ok(())
}

pub fn confusion(gt: &BinaryMask2D, pred: &BinaryMask2D) -> Result<ConfusionCounts> {
    check_dims(gt, pred)?;
    let mut c = ConfusionCounts::default();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        match (g, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Sensitivity, TP / (TP + FN).
pub fn tpr(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

/// Specificity, TN / (TN + FP).
pub fn tnr(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tn, c.tn + c.fp)
}

/// Dice from counts: 2TP / (2TP + FP + FN), i.e. 2|G ∩ P| / (|G| + |P|).
pub fn dsc_from_counts(c: &ConfusionCounts) -> Option<f64> {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn dsc(gt: &BinaryMask2D, pred: &BinaryMask2D) -> Result<Option<f64>> {
    Ok(dsc_from_counts(&confusion(gt, pred)?))
}

/// `max_{a in A} min_{b in B} ||a - b||_2`, exact.
pub fn directed_hausdorff(a: &[(usize, usize)], b: &[(usize, usize)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("directed Hausdorff distance of an empty point set"));
    }
    // Work in squared integer distances and take one square root at the end.
    let mut worst: u64 = 0;
    for &(ax, ay) in a {
        let mut best = u64::MAX;
        for &(bx, by) in b {
            let dx = ax.abs_diff(bx) as u64;
            let dy = ay.abs_diff(by) as u64;
            let d = dx * dx + dy * dy;
            if d < best {
                best = d;
                if d <= worst {
                    // cannot raise the running max
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    Ok((worst as f64).sqrt())
}

/// Symmetric Hausdorff distance in pixels over all foreground pixels.
///
/// Both masks empty gives 0; exactly one empty gives `None`.
pub fn hausdorff(gt: &BinaryMask2D, pred: &BinaryMask2D) -> Result<Option<f64>> {
    check_dims(gt, pred)?;
    let a = gt.foreground_points();
    let b = pred.foreground_points();
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok(Some(0.0)),
        (true, false) | (false, true) => Ok(None),
        _ => Ok(Some(directed_hausdorff(&a, &b)?.max(directed_hausdorff(&b, &a)?))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub slice_id: String,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub dsc: Option<f64>,
    pub hd: Option<f64>,
}

impl EvalRecord {
    pub fn compute(slice_id: impl Into<String>, gt: &BinaryMask2D, pred: &BinaryMask2D) -> Result<Self> {
        let c = confusion(gt, pred)?;
        Ok(Self {
            slice_id: slice_id.into(),
            tpr: tpr(&c),
            tnr: tnr(&c),
            dsc: dsc_from_counts(&c),
            hd: hausdorff(gt, pred)?,
        })
    }

    fn has_undefined(&self) -> bool {
        self.tpr.is_none() || self.tnr.is_none() || self.dsc.is_none() || self.hd.is_none()
    }
}

/// Dataset means; ratios in percent, Hausdorff in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub mean_tpr: Option<f64>,
    pub mean_tnr: Option<f64>,
    pub mean_dsc: Option<f64>,
    pub mean_hd: Option<f64>,
    pub n: usize,
    pub skipped: usize,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn summarize(records: &[EvalRecord]) -> Result<EvalSummary> {
    if records.is_empty() {
        return Err(Error::invalid("cannot summarize zero evaluation records"));
    }
    let pct = |v: f64| v * 100.0;
    Ok(EvalSummary {
        mean_tpr: mean_defined(records.iter().map(|r| r.tpr)).map(pct),
        mean_tnr: mean_defined(records.iter().map(|r| r.tnr)).map(pct),
        mean_dsc: mean_defined(records.iter().map(|r| r.dsc)).map(pct),
        mean_hd: mean_defined(records.iter().map(|r| r.hd)),
        n: records.len(),
        skipped: records.iter().filter(|r| r.has_undefined()).count(),
    })
}

fn fmt_opt(v: Option<f64>, precision: usize) -> String {
    match v {
        Some(x) => format!("{x:.precision$}"),
        None => "NA".to_string(),
    }
}

/// `slice_id,tpr,tnr,dsc,hd_px` rows followed by a `MEAN` row.
///
/// Per-slice ratios are written as fractions with 6 decimals; the MEAN row
/// carries percentages and pixels to one decimal.
pub fn report_csv(records: &[EvalRecord], summary: &EvalSummary) -> String {
    let mut out = String::from("slice_id,tpr,tnr,dsc,hd_px\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.slice_id,
            fmt_opt(r.tpr, 6),
            fmt_opt(r.tnr, 6),
            fmt_opt(r.dsc, 6),
            fmt_opt(r.hd, 6)
        );
    }
    let _ = writeln!(
        out,
        "MEAN,{},{},{},{}",
        fmt_opt(summary.mean_tpr, 1),
        fmt_opt(summary.mean_tnr, 1),
        fmt_opt(summary.mean_dsc, 1),
        fmt_opt(summary.mean_hd, 1)
    );
    out
}
