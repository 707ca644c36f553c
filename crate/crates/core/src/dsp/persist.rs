//! Feature files: little-endian `f32`, row-major, plus a JSON sidecar.
//!
//! `<dir>/<id>.f32` holds `rows * cols` floats; `<dir>/<id>.json` holds the
//! descriptor. Values are narrowed to single precision on write, so a
//! load/save cycle after the first save is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureTensor, NormScope, NormStats, Normalization};
use crate::dataset::Gender;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub participant_id: u32,
    pub kind: FeatureKind,
    pub rows: usize,
    pub cols: usize,
    pub norm_scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
}

pub fn data_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("{id}.f32"))
}

pub fn descriptor_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("{id}.json"))
}

pub fn descriptor_of(t: &FeatureTensor) -> FeatureDescriptor {
    let (gender, mean, std) = match &t.norm {
        Normalization::PerGender(stats) => {
            let g = match stats.scope {
                NormScope::PerGenderCorpus(g) => Some(g),
                NormScope::PerSignal => None,
            };
            (g, Some(stats.mean.clone()), Some(stats.std.clone()))
        }
        _ => (None, None, None),
    };
    FeatureDescriptor {
        participant_id: t.source_id,
        kind: t.kind,
        rows: t.rows(),
        cols: t.len(),
        norm_scope: t.norm.scope_name().to_string(),
        gender,
        mean,
        std,
    }
}

pub fn encode(data: &Array2<f64>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &v in data.iter() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    bytes
}

pub fn save(dir: &Path, t: &FeatureTensor) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = data_path(dir, t.source_id);
    fs::write(&data, encode(&t.data)).map_err(|e| Error::io(&data, e))?;
    let desc = descriptor_path(dir, t.source_id);
    let json = serde_json::to_string_pretty(&descriptor_of(t)).expect("descriptor serialises");
    fs::write(&desc, json).map_err(|e| Error::io(&desc, e))
}

pub fn load_descriptor(dir: &Path, id: u32) -> Result<FeatureDescriptor> {
    let path = descriptor_path(dir, id);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

pub fn load(dir: &Path, id: u32) -> Result<FeatureTensor> {
    let desc = load_descriptor(dir, id)?;
    let dpath = descriptor_path(dir, id);
    if desc.participant_id != id {
        return Err(Error::format(&dpath, format!("descriptor names participant {}", desc.participant_id)));
    }
    let path = data_path(dir, id);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != desc.rows * desc.cols * 4 {
        return Err(Error::format(
            &path,
            format!("{} bytes, descriptor says {}x{} floats", bytes.len(), desc.rows, desc.cols),
        ));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
    let data =
        Array2::from_shape_vec((desc.rows, desc.cols), values).map_err(|e| Error::format(&path, e.to_string()))?;
    let norm = match desc.norm_scope.as_str() {
        "none" => Normalization::None,
        "per_signal" => Normalization::PerSignal,
        "per_gender" => match (desc.gender, desc.mean, desc.std) {
            (Some(g), Some(mean), Some(std)) if mean.len() == desc.rows && std.len() == desc.rows => {
                Normalization::PerGender(NormStats { mean, std, scope: NormScope::PerGenderCorpus(g) })
            }
            _ => return Err(Error::format(&dpath, "per_gender scope needs gender, mean and std per row")),
        },
        other => return Err(Error::format(&dpath, format!("unknown norm_scope `{other}`"))),
    };
    Ok(FeatureTensor { data, kind: desc.kind, source_id: id, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn per_gender_metadata_survives() {
        let dir = tempfile::tempdir().unwrap();
        let t = FeatureTensor {
            data: array![[0.1, -2.5e-3], [1e6, 3.0]],
            kind: FeatureKind::MelLog,
            source_id: 301,
            norm: Normalization::PerGender(NormStats {
                mean: vec![0.123456789012345, -4.0],
                std: vec![1.0 / 3.0, 2.0],
                scope: NormScope::PerGenderCorpus(Gender::Female),
            }),
        };
        save(dir.path(), &t).unwrap();
        let back = load(dir.path(), 301).unwrap();
        assert_eq!(back.norm, t.norm);
        assert_eq!(back.data, t.data.mapv(|v| f64::from(v as f32)));
        let desc = load_descriptor(dir.path(), 301).unwrap();
        assert_eq!(desc.norm_scope, "per_gender");
        assert_eq!(desc.gender, Some(Gender::Female));
    }

    #[test]
    fn truncated_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = FeatureTensor {
            data: array![[1.0, 2.0, 3.0]],
            kind: FeatureKind::Raw,
            source_id: 7,
            norm: Normalization::PerSignal,
        };
        save(dir.path(), &t).unwrap();
        fs::write(data_path(dir.path(), 7), [0u8; 8]).unwrap();
        assert!(matches!(load(dir.path(), 7), Err(Error::Format { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn second_save_is_bit_exact(rows in 1usize..4, cols in 1usize..50, vals in proptest::collection::vec(-1e4f64..1e4, 200)) {
            let dir = tempfile::tempdir().unwrap();
            let t = FeatureTensor {
                data: Array2::from_shape_fn((rows, cols), |(r, c)| vals[(r * cols + c) % vals.len()]),
                kind: FeatureKind::MelLog,
                source_id: 9,
                norm: Normalization::PerSignal,
            };
            save(dir.path(), &t).unwrap();
            let first = fs::read(data_path(dir.path(), 9)).unwrap();
            let back = load(dir.path(), 9).unwrap();
            prop_assert_eq!(back.data.dim(), (rows, cols));
            save(dir.path(), &back).unwrap();
            prop_assert_eq!(fs::read(data_path(dir.path(), 9)).unwrap(), first);
        }
    }
}
