use rayon::prelude::*;

use super::network_input;
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask2D, ScalarImage2D};
use crate::metrics::{report_csv, summarize, EvalRecord, EvalSummary};
use crate::models::Model;
use crate::weak_label::LabeledSlice;

/// Anything that turns a stored CT slice into a predicted mask.
pub trait SlicePredictor: Sync {
    fn predict_mask(&self, ct: &ScalarImage2D) -> Result<BinaryMask2D>;
}

impl SlicePredictor for Model {
    fn predict_mask(&self, ct: &ScalarImage2D) -> Result<BinaryMask2D> {
        self.predict(&network_input(ct))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub records: Vec<EvalRecord>,
    pub summary: EvalSummary,
    pub csv: String,
}

/// Score every test slice; slices run in parallel and records keep input order.
pub fn evaluate<P: SlicePredictor + ?Sized>(model: &P, testset: &[LabeledSlice]) -> Result<Evaluation> {
    if testset.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let records = testset
        .par_iter()
        .map(|s| {
            let pred = model.predict_mask(&s.ct)?;
            EvalRecord::compute(s.id(), &s.mask, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records)?;
    let csv = report_csv(&records, &summary);
    Ok(Evaluation {
        records,
        summary,
        csv,
    })
}
