use ndarray::{s, Array2};
use rand::Rng as _;

use super::{Gender, Label, ParticipantRecord};
use crate::dsp::{FeatureKind, FeatureTensor};
use crate::seed::Rng;

/// Fixed model input size: `n_seg` feature frames, or `n_seg * hop` raw samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSpec {
    pub n_seg: usize,
    pub hop: usize,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        SegmentSpec { n_seg: 120, hop: 512 }
    }
}

impl SegmentSpec {
    pub fn raw_len(&self) -> usize {
        self.n_seg * self.hop
    }

    /// Segment length in columns for a feature of `kind`.
    pub fn columns(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::MelLog => self.n_seg,
            FeatureKind::Raw => self.raw_len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub data: Array2<f64>,
    pub label: Label,
    pub gender: Gender,
    pub participant_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentBatch {
    pub examples: Vec<Segment>,
    /// Features skipped for being shorter than one segment.
    pub warnings: usize,
}

impl SegmentBatch {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.examples.first().map(|s| s.data.dim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cropped {
    pub feature: FeatureTensor,
    pub offset: usize,
}

/// Crops every feature to the shortest length with a uniform random offset.
pub fn crop_to_shortest(features: &[&FeatureTensor], rng: &mut Rng) -> Vec<Cropped> {
    let Some(shortest) = features.iter().map(|f| f.len()).min() else {
        return Vec::new();
    };
    features
        .iter()
        .map(|f| {
            let offset = rng.random_range(0..=f.len() - shortest);
            Cropped {
                feature: FeatureTensor {
                    data: f.data.slice(s![.., offset..offset + shortest]).to_owned(),
                    kind: f.kind,
                    source_id: f.source_id,
                    norm: f.norm.clone(),
                },
                offset,
            }
        })
        .collect()
}

/// Cuts each feature into consecutive non-overlapping segments; the remainder is dropped.
pub fn segment(inputs: &[(&FeatureTensor, &ParticipantRecord)], spec: &SegmentSpec) -> SegmentBatch {
    let mut batch = SegmentBatch::default();
    for &(feature, record) in inputs {
        let width = spec.columns(feature.kind);
        let count = feature.len() / width;
        if count == 0 {
            log::warn!(
                "participant {}: {} columns is shorter than one {width}-column segment",
                record.id,
                feature.len()
            );
            batch.warnings += 1;
            continue;
        }
        for k in 0..count {
            batch.examples.push(Segment {
                data: feature.data.slice(s![.., k * width..(k + 1) * width]).to_owned(),
                label: record.label(),
                gender: record.gender,
                participant_id: record.id,
            });
        }
    }
    batch
}
