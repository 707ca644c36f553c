//! Signal-processing front end: STFT, mel filterbank, log-mel spectrogram,
//! z-normalisation and raw-waveform features.
//!
//! Everything here runs in double precision. Feature files on disk are
//! single precision; see [`persist`].

mod norm;
pub mod persist;
mod spectral;

pub use norm::{compute_gender_stats, znorm_per_gender, znorm_per_signal, NormScope, NormStats, STD_FLOOR};
pub use spectral::{
    frame_count, hann_window, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, raw_feature, stft_magnitude,
    MelConfig, MelFilterbank, StftConfig, WindowKind,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Log-compressed mel energies, `n_mels x frames`.
    #[serde(rename = "mel")]
    MelLog,
    /// Waveform samples, `1 x samples`.
    Raw,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::MelLog => "mel",
            FeatureKind::Raw => "raw",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "mel" => Ok(FeatureKind::MelLog),
            "raw" => Ok(FeatureKind::Raw),
            other => Err(crate::Error::InvalidConfig(format!("unknown feature kind `{other}` (expected mel or raw)"))),
        }
    }
}

/// How a feature's values were standardised.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    None,
    PerSignal,
    PerGender(NormStats),
}

impl Normalization {
    pub fn scope_name(&self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::PerSignal => "per_signal",
            Normalization::PerGender(_) => "per_gender",
        }
    }
}

/// A feature matrix for one participant. Columns are time (frames or samples).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub data: Array2<f64>,
    pub kind: FeatureKind,
    pub source_id: u32,
    pub norm: Normalization,
}

impl FeatureTensor {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// Length along the time axis.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
