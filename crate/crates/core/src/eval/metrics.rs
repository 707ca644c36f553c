use super::{Prediction, DECISION_THRESHOLD};
use crate::dataset::{Gender, Label};
use crate::{Error, Result};

/// Mean segment probability and the thresholded label (ties go to depressed).
pub fn aggregate_interview(participant_id: u32, segment_probs: &[f64]) -> Result<(f64, Label)> {
    if segment_probs.is_empty() {
        return Err(Error::NoSegments(participant_id));
    }
    let score = segment_probs.iter().sum::<f64>() / segment_probs.len() as f64;
    let label = if score >= DECISION_THRESHOLD { Label::Depressed } else { Label::NotDepressed };
    Ok((score, label))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// Counts with `positive` as the positive class over `(truth, predicted)` pairs.
    pub fn count(pairs: impl IntoIterator<Item = (Label, Label)>, positive: Label) -> Self {
        let mut c = Confusion::default();
        for (truth, pred) in pairs {
            match (truth == positive, pred == positive) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }
}

/// `2PR / (P + R)`, with empty precision or recall treated as 0.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn f1(pairs: &[(Label, Label)], positive: Label) -> f64 {
    let c = Confusion::count(pairs.iter().copied(), positive);
    f1_from_counts(c.tp, c.fp, c.fn_)
}

pub fn macro_f1(f1_nd: f64, f1_d: f64) -> f64 {
    (f1_nd + f1_d) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Row {
    pub f1_nd: f64,
    pub f1_d: f64,
    pub f1_avg: f64,
}

impl F1Row {
    pub fn of(preds: &[&Prediction]) -> Self {
        let pairs: Vec<(Label, Label)> = preds.iter().map(|p| (p.truth, p.predicted)).collect();
        let f1_nd = f1(&pairs, Label::NotDepressed);
        let f1_d = f1(&pairs, Label::Depressed);
        F1Row { f1_nd, f1_d, f1_avg: macro_f1(f1_nd, f1_d) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Breakdown {
    pub female: Option<F1Row>,
    pub male: Option<F1Row>,
    pub all: F1Row,
    /// Macro F1 over the whole set, not the mean of the gendered rows.
    pub total_avg: f64,
}

impl F1Breakdown {
    pub fn gender(&self, g: Gender) -> Option<&F1Row> {
        match g {
            Gender::Female => self.female.as_ref(),
            Gender::Male => self.male.as_ref(),
        }
    }
}

pub fn breakdown(preds: &[Prediction]) -> F1Breakdown {
    let row_for = |g: Gender| {
        let subset: Vec<&Prediction> = preds.iter().filter(|p| p.gender == g).collect();
        if subset.is_empty() {
            log::warn!("no {g} participants in prediction set; omitting that row");
            None
        } else {
            Some(F1Row::of(&subset))
        }
    };
    let all = F1Row::of(&preds.iter().collect::<Vec<_>>());
    F1Breakdown { female: row_for(Gender::Female), male: row_for(Gender::Male), total_avg: all.f1_avg, all }
}

/// `100 * (balanced - unbalanced) / unbalanced`.
pub fn relative_difference(f1_unbalanced: f64, f1_balanced: f64) -> Result<f64> {
    if f1_unbalanced.is_nan() || f1_unbalanced <= 0.0 {
        return Err(Error::UndefinedBaseline(f1_unbalanced));
    }
    Ok(100.0 * (f1_balanced - f1_unbalanced) / f1_unbalanced)
}

/// Comparison of a published macro F1 against the mean of its per-class values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroCheck {
    pub computed: f64,
    pub reported: f64,
    /// True when no per-class values that round to the given 3-decimal inputs
    /// have a mean that rounds to the reported value.
    pub inconsistent: bool,
}

/// Inputs and the reported value are taken as 3-decimal roundings, so each
/// side contributes up to 0.0005 of slack.
pub fn check_reported_average(f1_nd: f64, f1_d: f64, reported: f64) -> MacroCheck {
    const SLACK: f64 = 0.0005 + 0.0005;
    let computed = macro_f1(f1_nd, f1_d);
    MacroCheck { computed, reported, inconsistent: (computed - reported).abs() > SLACK + 1e-9 }
}
