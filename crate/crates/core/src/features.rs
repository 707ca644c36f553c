//! Corpus-level feature extraction: waveform to mel or raw features, then
//! per-signal or per-gender standardisation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{FeatureSet, Gender, ParticipantRecord, Split};
use crate::dsp::{
    compute_gender_stats, mel_spectrogram, raw_feature, znorm_per_gender, znorm_per_signal, FeatureKind, FeatureTensor,
    MelConfig, StftConfig,
};
use crate::exec::Execution;
use crate::{wav, Error, Result};

/// Standardisation applied after extraction. The modes are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormMode {
    None,
    PerSignal,
    /// Statistics pooled over the training split of each gender.
    PerGender,
}

impl NormMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::None => "none",
            NormMode::PerSignal => "per-signal",
            NormMode::PerGender => "per-gender",
        }
    }

    /// Name recorded in feature descriptors.
    pub fn scope_name(self) -> &'static str {
        match self {
            NormMode::None => "none",
            NormMode::PerSignal => "per_signal",
            NormMode::PerGender => "per_gender",
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMode::None),
            "per-signal" => Ok(NormMode::PerSignal),
            "per-gender" => Ok(NormMode::PerGender),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization `{other}` (expected none, per-signal or per-gender)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub norm: NormMode,
    pub stft: StftConfig,
    pub mel: MelConfig,
}

impl FeatureConfig {
    pub fn new(kind: FeatureKind, norm: NormMode) -> Self {
        FeatureConfig { kind, norm, stft: StftConfig::default(), mel: MelConfig::default() }
    }
}

/// Unnormalised features for one waveform.
pub fn extract(signal: &[f64], id: u32, cfg: &FeatureConfig) -> Result<FeatureTensor> {
    match cfg.kind {
        FeatureKind::MelLog => mel_spectrogram(signal, id, &cfg.stft, &cfg.mel),
        FeatureKind::Raw => Ok(raw_feature(signal, id)),
    }
}

/// Applies `mode` to every feature. Per-gender statistics come from the
/// training-split records only and are then applied to both splits.
pub fn normalize_set(
    records: &[ParticipantRecord],
    raw: FeatureSet,
    mode: NormMode,
    exec: Execution,
) -> Result<FeatureSet> {
    match mode {
        NormMode::None => Ok(raw),
        NormMode::PerSignal => {
            let items: Vec<(&u32, &FeatureTensor)> = raw.iter().collect();
            let out = exec.try_map(&items, |(id, f)| znorm_per_signal(f).map(|(t, _)| (**id, t)))?;
            Ok(out.into_iter().collect())
        }
        NormMode::PerGender => {
            let genders: BTreeMap<u32, Gender> = records.iter().map(|r| (r.id, r.gender)).collect();
            let training: Vec<(&FeatureTensor, Gender)> = records
                .iter()
                .filter(|r| r.split == Split::Train)
                .filter_map(|r| raw.get(&r.id).map(|f| (f, r.gender)))
                .collect();
            let stats = compute_gender_stats(&training)?;
            let items: Vec<(&u32, &FeatureTensor)> = raw.iter().collect();
            let out = exec.try_map(&items, |(id, f)| {
                let g = genders
                    .get(id)
                    .ok_or_else(|| Error::InsufficientData(format!("participant {id} is not in the manifest")))?;
                znorm_per_gender(f, *g, &stats[g]).map(|t| (**id, t))
            })?;
            Ok(out.into_iter().collect())
        }
    }
}

/// Extracts and normalises features for in-memory waveforms.
pub fn extract_signals(
    corpus: &[(ParticipantRecord, Vec<f64>)],
    cfg: &FeatureConfig,
    exec: Execution,
) -> Result<FeatureSet> {
    let raw = exec.try_map(corpus, |(r, x)| extract(x, r.id, cfg).map(|f| (r.id, f)))?;
    let records: Vec<ParticipantRecord> = corpus.iter().map(|(r, _)| r.clone()).collect();
    normalize_set(&records, raw.into_iter().collect(), cfg.norm, exec)
}

/// Reads one record's audio (relative paths resolve against `root`).
pub fn read_audio(record: &ParticipantRecord, root: &Path, sample_rate: u32) -> Result<Vec<f64>> {
    let path = root.join(&record.audio_path);
    let w = wav::read(&path)?;
    if w.sample_rate != sample_rate {
        return Err(Error::format(&path, format!("sample rate {} Hz, expected {sample_rate} Hz", w.sample_rate)));
    }
    Ok(w.samples)
}

/// Unnormalised features for one record read from disk.
pub fn extract_record(record: &ParticipantRecord, root: &Path, cfg: &FeatureConfig) -> Result<FeatureTensor> {
    let signal = read_audio(record, root, cfg.mel.sample_rate)?;
    extract(&signal, record.id, cfg)
}
