//! Interview-level predictions, per-gender F1 and fairness estimators.

mod fairness;
mod metrics;
pub mod report;

pub use fairness::{statistical_parity_difference, sufficiency_gap, FairnessReport, SufficiencyEstimate, DEFAULT_BINS};
pub use metrics::{
    aggregate_interview, breakdown, check_reported_average, f1, f1_from_counts, macro_f1, relative_difference,
    Confusion, F1Breakdown, F1Row, MacroCheck,
};
pub use report::{render_text, ClassF1, PerGender, ReportDocument, RunReport};

use std::collections::BTreeMap;

use crate::dataset::{Gender, Label, SegmentBatch};
use crate::{Error, Result};

/// Interviews with score `R >= DECISION_THRESHOLD` are predicted depressed.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub participant_id: u32,
    pub gender: Gender,
    pub truth: Label,
    /// Mean segment probability.
    pub score: f64,
    pub predicted: Label,
}

pub type PredictionSet = Vec<Prediction>;

/// Groups segment probabilities by participant (first-appearance order) and
/// aggregates each interview.
pub fn interview_predictions(batch: &SegmentBatch, probs: &[f64]) -> Result<PredictionSet> {
    if batch.len() != probs.len() {
        return Err(Error::InvalidArgument(format!("{} segments but {} probabilities", batch.len(), probs.len())));
    }
    let mut order = Vec::new();
    let mut groups: BTreeMap<u32, (Gender, Label, Vec<f64>)> = BTreeMap::new();
    for (seg, &p) in batch.examples.iter().zip(probs) {
        groups
            .entry(seg.participant_id)
            .or_insert_with(|| {
                order.push(seg.participant_id);
                (seg.gender, seg.label, Vec::new())
            })
            .2
            .push(p);
    }
    order
        .into_iter()
        .map(|id| {
            let (gender, truth, ps) = &groups[&id];
            let (score, predicted) = aggregate_interview(id, ps)?;
            Ok(Prediction { participant_id: id, gender: *gender, truth: *truth, score, predicted })
        })
        .collect()
}
