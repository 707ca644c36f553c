use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{
    crop_to_shortest, segment, subsample_class_balance, subsample_gender_balance, ParticipantRecord, SegmentBatch,
    SegmentSpec, Split,
};
use crate::dsp::FeatureTensor;
use crate::seed::{rng_for, stream};
use crate::{Error, Result};

/// Normalised features keyed by participant id.
pub type FeatureSet = BTreeMap<u32, FeatureTensor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BalanceMode {
    /// Equal D and ND interviews; gender proportions left as they fall.
    ClassBalance,
    /// Equal counts in all four gender x label quadrants.
    GenderBalance,
}

impl BalanceMode {
    pub fn from_gender_balance(on: bool) -> Self {
        if on {
            BalanceMode::GenderBalance
        } else {
            BalanceMode::ClassBalance
        }
    }

    pub fn is_gender_balanced(self) -> bool {
        self == BalanceMode::GenderBalance
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BalanceMode::ClassBalance => "class",
            BalanceMode::GenderBalance => "gender",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochSelection {
    pub batch: SegmentBatch,
    /// Interviews drawn this epoch, in manifest order.
    pub selected: Vec<u32>,
    /// Common length every selected feature was cropped to.
    pub crop_len: usize,
}

impl EpochSelection {
    /// One line for the selection log.
    pub fn log_line(&self, epoch: usize, mode: BalanceMode) -> String {
        let ids: Vec<String> = self.selected.iter().map(u32::to_string).collect();
        format!(
            "epoch={epoch} mode={} files={} crop_len={} segments={} ids={}",
            mode.as_str(),
            self.selected.len(),
            self.crop_len,
            self.batch.len(),
            ids.join(",")
        )
    }
}

fn lookup(features: &FeatureSet, id: u32) -> Result<&FeatureTensor> {
    features.get(&id).ok_or_else(|| Error::InsufficientData(format!("no features loaded for participant {id}")))
}

/// Builds one epoch of training segments from the training split:
/// sub-sample, crop to the shortest selected interview, segment, shuffle.
///
/// All randomness is derived from `(seed, epoch)`.
pub fn epoch_pipeline(
    records: &[ParticipantRecord],
    features: &FeatureSet,
    mode: BalanceMode,
    spec: &SegmentSpec,
    seed: u64,
    epoch: usize,
) -> Result<EpochSelection> {
    let train: Vec<ParticipantRecord> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    if train.is_empty() {
        return Err(Error::InsufficientData("no training records".into()));
    }
    let e = epoch as u64;
    let selected = match mode {
        BalanceMode::ClassBalance => subsample_class_balance(&train, &mut rng_for(seed, &[stream::CLASS_BALANCE, e]))?,
        BalanceMode::GenderBalance => {
            subsample_gender_balance(&train, &mut rng_for(seed, &[stream::GENDER_BALANCE, e]))?
        }
    };
    if selected.is_empty() {
        return Err(Error::InsufficientData("sub-sampling selected no interviews".into()));
    }
    let chosen: Vec<&FeatureTensor> = selected.iter().map(|r| lookup(features, r.id)).collect::<Result<_>>()?;
    let cropped = crop_to_shortest(&chosen, &mut rng_for(seed, &[stream::CROP, e]));
    let crop_len = cropped.first().map_or(0, |c| c.feature.len());
    let pairs: Vec<_> = cropped.iter().map(|c| &c.feature).zip(&selected).collect();
    let mut batch = segment(&pairs, spec);
    batch.examples.shuffle(&mut rng_for(seed, &[stream::SHUFFLE, e]));
    Ok(EpochSelection { batch, selected: selected.iter().map(|r| r.id).collect(), crop_len })
}

/// Every segment of every record in `split`, uncropped, in manifest order.
pub fn evaluation_batch(
    records: &[ParticipantRecord],
    split: Split,
    features: &FeatureSet,
    spec: &SegmentSpec,
) -> Result<SegmentBatch> {
    let pairs: Vec<_> = records
        .iter()
        .filter(|r| r.split == split)
        .map(|r| lookup(features, r.id).map(|f| (f, r)))
        .collect::<Result<_>>()?;
    Ok(segment(&pairs, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{partition_quadrants, Gender, Label};
    use crate::dsp::{FeatureKind, Normalization};
    use ndarray::Array2;
    use std::collections::HashSet;
    use std::path::PathBuf;

    fn corpus(counts: [usize; 4]) -> (Vec<ParticipantRecord>, FeatureSet) {
        let cells = [(Gender::Female, 2u8), (Gender::Female, 20), (Gender::Male, 5), (Gender::Male, 11)];
        let mut recs = Vec::new();
        let mut feats = FeatureSet::new();
        let mut id = 100;
        for (&(gender, phq8), &n) in cells.iter().zip(&counts) {
            for _ in 0..n {
                let cols = 250 + (id as usize * 37) % 300;
                recs.push(ParticipantRecord {
                    id,
                    gender,
                    phq8,
                    split: Split::Train,
                    audio_path: PathBuf::from("a.wav"),
                });
                feats.insert(
                    id,
                    FeatureTensor {
                        data: Array2::from_shape_fn((4, cols), |(r, c)| (id as usize * 1000 + r * 7 + c) as f64),
                        kind: FeatureKind::MelLog,
                        source_id: id,
                        norm: Normalization::PerSignal,
                    },
                );
                id += 1;
            }
        }
        (recs, feats)
    }

    #[test]
    fn gender_balanced_epoch_uses_56_files() {
        let (recs, feats) = corpus([27, 17, 49, 14]);
        let spec = SegmentSpec::default();
        let sel = epoch_pipeline(&recs, &feats, BalanceMode::GenderBalance, &spec, 11, 0).unwrap();
        assert_eq!(sel.selected.len(), 56);
        let chosen: Vec<ParticipantRecord> = recs.iter().filter(|r| sel.selected.contains(&r.id)).cloned().collect();
        assert_eq!(partition_quadrants(&chosen, Split::Train).counts(), [14; 4]);
        let ids: HashSet<u32> = sel.batch.examples.iter().map(|s| s.participant_id).collect();
        assert_eq!(ids.len(), 56);
        assert_eq!(sel.batch.len(), 56 * (sel.crop_len / 120));
    }

    #[test]
    fn class_balanced_epoch() {
        let (recs, feats) = corpus([27, 17, 49, 14]);
        let sel = epoch_pipeline(&recs, &feats, BalanceMode::ClassBalance, &SegmentSpec::default(), 11, 0).unwrap();
        assert_eq!(sel.selected.len(), 62);
        let d = sel.batch.examples.iter().filter(|s| s.label == Label::Depressed).count();
        assert_eq!(2 * d, sel.batch.len());
    }

    #[test]
    fn epochs_redraw_and_seeds_reproduce() {
        let (recs, feats) = corpus([5, 4, 6, 3]);
        let spec = SegmentSpec { n_seg: 50, hop: 1 };
        let e0 = epoch_pipeline(&recs, &feats, BalanceMode::GenderBalance, &spec, 3, 0).unwrap();
        let e0b = epoch_pipeline(&recs, &feats, BalanceMode::GenderBalance, &spec, 3, 0).unwrap();
        let e1 = epoch_pipeline(&recs, &feats, BalanceMode::GenderBalance, &spec, 3, 1).unwrap();
        assert_eq!(e0.batch, e0b.batch);
        assert_eq!(e0.selected, e0b.selected);
        assert_ne!(e0.batch, e1.batch);
        assert_eq!(e0.selected.len(), e1.selected.len());
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let feats = FeatureSet::new();
        assert!(matches!(
            epoch_pipeline(&[], &feats, BalanceMode::ClassBalance, &SegmentSpec::default(), 0, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn evaluation_keeps_every_segment() {
        let (mut recs, feats) = corpus([2, 1, 1, 1]);
        for r in &mut recs {
            r.split = Split::Validation;
        }
        let spec = SegmentSpec { n_seg: 120, hop: 512 };
        let b = evaluation_batch(&recs, Split::Validation, &feats, &spec).unwrap();
        let expected: usize = recs.iter().map(|r| feats[&r.id].len() / 120).sum();
        assert_eq!(b.len(), expected);
    }

    #[test]
    fn selection_log_line() {
        let (recs, feats) = corpus([2, 1, 1, 1]);
        let sel = epoch_pipeline(&recs, &feats, BalanceMode::GenderBalance, &SegmentSpec::default(), 1, 4).unwrap();
        let line = sel.log_line(4, BalanceMode::GenderBalance);
        assert!(line.starts_with("epoch=4 mode=gender files=4 "), "{line}");
    }
}
