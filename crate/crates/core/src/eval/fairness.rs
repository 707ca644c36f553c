//! Group-fairness estimators over interview predictions, with gender as the
//! protected attribute.
//!
//! Statistical parity compares acceptance rates `P[Y_hat = 1 | A]` between
//! groups. Sufficiency asks that `P[Y = 1 | R, A]` not depend on `A`; exact
//! scores never repeat, so the conditioning is done on equal-width score bins.

use super::Prediction;
use crate::dataset::{Gender, Label};
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessReport {
    pub statistical_parity_difference: f64,
    pub sufficiency_gap: f64,
    pub bins: usize,
}

impl FairnessReport {
    pub fn compute(preds: &[Prediction], bins: usize) -> Result<Self> {
        Ok(FairnessReport {
            statistical_parity_difference: statistical_parity_difference(preds)?,
            sufficiency_gap: sufficiency_gap(preds, bins)?.gap,
            bins,
        })
    }
}

fn positive_rate(preds: &[Prediction], g: Gender) -> Option<f64> {
    let group: Vec<&Prediction> = preds.iter().filter(|p| p.gender == g).collect();
    if group.is_empty() {
        return None;
    }
    let pos = group.iter().filter(|p| p.predicted == Label::Depressed).count();
    Some(pos as f64 / group.len() as f64)
}

/// `P[Y_hat = D | F] - P[Y_hat = D | M]`.
pub fn statistical_parity_difference(preds: &[Prediction]) -> Result<f64> {
    match (positive_rate(preds, Gender::Female), positive_rate(preds, Gender::Male)) {
        (Some(f), Some(m)) => Ok(f - m),
        _ => Err(Error::InsufficientData("statistical parity needs predictions for both genders".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficiencyEstimate {
    /// Largest per-bin `|P[Y = D | bin, F] - P[Y = D | bin, M]|`; 0 when no bin has both genders.
    pub gap: f64,
    pub co_populated_bins: usize,
}

fn bin_of(score: f64, bins: usize) -> usize {
    ((score.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

pub fn sufficiency_gap(preds: &[Prediction], bins: usize) -> Result<SufficiencyEstimate> {
    if bins == 0 {
        return Err(Error::InvalidArgument("sufficiency needs at least one bin".into()));
    }
    if positive_rate(preds, Gender::Female).is_none() || positive_rate(preds, Gender::Male).is_none() {
        return Err(Error::InsufficientData("sufficiency needs predictions for both genders".into()));
    }
    // per bin, per gender: (depressed, total)
    let mut counts = vec![[(0usize, 0usize); 2]; bins];
    for p in preds {
        let g = usize::from(p.gender == Gender::Male);
        let cell = &mut counts[bin_of(p.score, bins)][g];
        cell.1 += 1;
        if p.truth == Label::Depressed {
            cell.0 += 1;
        }
    }
    let mut gap: f64 = 0.0;
    let mut co_populated = 0;
    for [(fd, fn_), (md, mn)] in counts {
        if fn_ > 0 && mn > 0 {
            co_populated += 1;
            gap = gap.max((fd as f64 / fn_ as f64 - md as f64 / mn as f64).abs());
        }
    }
    if co_populated == 0 {
        log::warn!("no score bin holds both genders; sufficiency gap is vacuously 0");
    }
    Ok(SufficiencyEstimate { gap, co_populated_bins: co_populated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(id: u32, g: Gender, truth: Label, score: f64) -> Prediction {
        Prediction {
            participant_id: id,
            gender: g,
            truth,
            score,
            predicted: if score >= 0.5 { Label::Depressed } else { Label::NotDepressed },
        }
    }

    fn from_flags(f: &[u8], m: &[u8]) -> Vec<Prediction> {
        let mut out = Vec::new();
        for (i, &v) in f.iter().enumerate() {
            out.push(p(i as u32, Gender::Female, Label::NotDepressed, if v == 1 { 0.9 } else { 0.1 }));
        }
        for (i, &v) in m.iter().enumerate() {
            out.push(p(100 + i as u32, Gender::Male, Label::NotDepressed, if v == 1 { 0.9 } else { 0.1 }));
        }
        out
    }

    #[test]
    fn parity_examples() {
        assert_abs_diff_eq!(
            statistical_parity_difference(&from_flags(&[1, 1, 0, 0], &[1, 0, 0, 0])).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert_eq!(statistical_parity_difference(&from_flags(&[1, 0], &[0, 1, 1, 0])).unwrap(), 0.0);
        assert_eq!(statistical_parity_difference(&from_flags(&[1, 1], &[1, 1, 1])).unwrap(), 0.0);
        assert!(matches!(statistical_parity_difference(&from_flags(&[1], &[])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn sufficiency_examples() {
        let preds = vec![
            p(1, Gender::Female, Label::Depressed, 0.5),
            p(2, Gender::Female, Label::Depressed, 0.5),
            p(3, Gender::Male, Label::NotDepressed, 0.5),
            p(4, Gender::Male, Label::NotDepressed, 0.5),
        ];
        let est = sufficiency_gap(&preds, 1).unwrap();
        assert_eq!((est.gap, est.co_populated_bins), (1.0, 1));

        let apart = vec![p(1, Gender::Female, Label::Depressed, 0.05), p(2, Gender::Male, Label::NotDepressed, 0.95)];
        let est = sufficiency_gap(&apart, 10).unwrap();
        assert_eq!((est.gap, est.co_populated_bins), (0.0, 0));
        assert!(sufficiency_gap(&apart, 0).is_err());
    }

    #[test]
    fn score_one_lands_in_last_bin() {
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.0, 10), 0);
        assert_eq!(bin_of(0.35, 10), 3);
    }

    fn arb_preds() -> impl Strategy<Value = Vec<(bool, bool, f64)>> {
        proptest::collection::vec((any::<bool>(), any::<bool>(), 0.0f64..=1.0), 2..40)
    }

    fn build(raw: &[(bool, bool, f64)]) -> Vec<Prediction> {
        raw.iter()
            .enumerate()
            .map(|(i, &(male, d, s))| {
                let g = if male || i == 0 { Gender::Male } else { Gender::Female };
                let g = if i == 1 { Gender::Female } else { g };
                p(i as u32, g, if d { Label::Depressed } else { Label::NotDepressed }, s)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn parity_is_antisymmetric(raw in arb_preds()) {
            let preds = build(&raw);
            let swapped: Vec<Prediction> = preds
                .iter()
                .map(|x| Prediction {
                    gender: if x.gender == Gender::Male { Gender::Female } else { Gender::Male },
                    ..x.clone()
                })
                .collect();
            let a = statistical_parity_difference(&preds).unwrap();
            let b = statistical_parity_difference(&swapped).unwrap();
            prop_assert!((a + b).abs() < 1e-12);
        }

        #[test]
        fn sufficiency_ignores_order(raw in arb_preds(), rot in 0usize..40) {
            let preds = build(&raw);
            let mut moved = preds.clone();
            let k = rot % moved.len();
            moved.rotate_left(k);
            prop_assert_eq!(sufficiency_gap(&preds, 10).unwrap(), sufficiency_gap(&moved, 10).unwrap());
        }

        #[test]
        fn mirrored_groups_are_fair(raw in proptest::collection::vec((any::<bool>(), 0.0f64..=1.0), 1..20)) {
            let mut preds = Vec::new();
            for (i, &(d, s)) in raw.iter().enumerate() {
                let truth = if d { Label::Depressed } else { Label::NotDepressed };
                preds.push(p(i as u32, Gender::Female, truth, s));
                preds.push(p(1000 + i as u32, Gender::Male, truth, s));
            }
            prop_assert_eq!(statistical_parity_difference(&preds).unwrap(), 0.0);
            prop_assert_eq!(sufficiency_gap(&preds, 10).unwrap().gap, 0.0);
        }
    }
}
