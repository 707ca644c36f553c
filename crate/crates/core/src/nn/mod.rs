//! A small CNN + LSTM binary classifier with hand-written backward passes.
//!
//! Two architectures are provided: the mel-spectrogram model (one K=3
//! convolution over 40 mel channels) and the raw-waveform model, whose first
//! convolution has the STFT's window and hop as kernel and stride so that it
//! produces the same 40 x 120 activation a mel segment would. Both share the
//! tail: ReLU, max-pool, two stacked LSTMs and a sigmoid unit fed by the last
//! hidden state.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod loss;
mod model;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use loss::{bce, bce_grad, BCE_CLAMP};
pub use model::{backward, batch_loss_and_grad, forward, Network};
pub use train::{
    lr_schedule, predict_segments, train, validation_macro_f1, EpochMetrics, TrainConfig, TrainOutcome, TrainingData,
};

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// `floor((len + 2 pad - kernel) / stride) + 1`.
pub fn conv_out_len(in_len: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidConfig("kernel and stride must be positive".into()));
    }
    if in_len + 2 * pad < kernel {
        return Err(Error::InvalidConfig(format!("kernel {kernel} exceeds padded input length {}", in_len + 2 * pad)));
    }
    Ok((in_len + 2 * pad - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn out_len(&self, in_len: usize) -> Result<usize> {
        conv_out_len(in_len, self.kernel, self.stride, self.pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    DepAudioNet,
    RawAudio,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DepAudioNet => "depaudionet",
            ModelKind::RawAudio => "rawaudio",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depaudionet" => Ok(ModelKind::DepAudioNet),
            "rawaudio" => Ok(ModelKind::RawAudio),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}` (expected depaudionet or rawaudio)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Input rows (mel bins, or 1 for raw audio).
    pub input_channels: usize,
    /// Input columns per segment.
    pub input_len: usize,
    pub convs: Vec<ConvSpec>,
    pub pool: PoolSpec,
    pub lstm_layers: usize,
    pub hidden: usize,
}

pub const MEL_BINS: usize = 40;
pub const SEGMENT_FRAMES: usize = 120;
pub const HOP: usize = 512;
pub const WINDOW: usize = 1024;

impl ModelSpec {
    pub fn dep_audio_net() -> Self {
        ModelSpec {
            kind: ModelKind::DepAudioNet,
            input_channels: MEL_BINS,
            input_len: SEGMENT_FRAMES,
            convs: vec![ConvSpec { in_channels: MEL_BINS, out_channels: 128, kernel: 3, stride: 1, pad: 1 }],
            pool: PoolSpec { kernel: 3, stride: 3 },
            lstm_layers: 2,
            hidden: 128,
        }
    }

    /// Raw-waveform model with `conv_filters` (1 or 2) convolutions.
    pub fn raw_audio(conv_filters: usize) -> Result<Self> {
        if !(1..=2).contains(&conv_filters) {
            return Err(Error::InvalidConfig(format!(
                "raw audio model takes 1 or 2 convolutional filters, got {conv_filters}"
            )));
        }
        let mut convs =
            vec![ConvSpec { in_channels: 1, out_channels: MEL_BINS, kernel: WINDOW, stride: HOP, pad: 276 }];
        if conv_filters == 2 {
            convs.push(ConvSpec { in_channels: MEL_BINS, out_channels: MEL_BINS, kernel: 3, stride: 1, pad: 1 });
        }
        Ok(ModelSpec {
            kind: ModelKind::RawAudio,
            input_channels: 1,
            input_len: SEGMENT_FRAMES * HOP,
            convs,
            pool: PoolSpec { kernel: 3, stride: 3 },
            lstm_layers: 2,
            hidden: 128,
        })
    }

    pub fn build(kind: ModelKind, conv_filters: usize) -> Result<Self> {
        match kind {
            ModelKind::DepAudioNet if conv_filters == 1 => Ok(Self::dep_audio_net()),
            ModelKind::DepAudioNet => {
                Err(Error::InvalidConfig("the mel model has exactly one convolutional filter".into()))
            }
            ModelKind::RawAudio => Self::raw_audio(conv_filters),
        }
    }

    pub fn conv_count(&self) -> usize {
        self.convs.len()
    }

    /// Activation lengths after each convolution, then after pooling.
    pub fn shape_trace(&self) -> Result<(Vec<usize>, usize)> {
        if self.convs.is_empty() || self.lstm_layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("model needs a convolution and an LSTM layer".into()));
        }
        let mut channels = self.input_channels;
        let mut len = self.input_len;
        let mut lens = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            if c.in_channels != channels {
                return Err(Error::InvalidConfig(format!(
                    "conv {i} expects {} channels, receives {channels}",
                    c.in_channels
                )));
            }
            len = c.out_len(len)?;
            channels = c.out_channels;
            lens.push(len);
        }
        let pooled = conv_out_len(len, self.pool.kernel, self.pool.stride, 0)?;
        Ok((lens, pooled))
    }

    pub fn validate(&self) -> Result<()> {
        self.shape_trace().map(|_| ())
    }

    /// Stable textual description, hashed into checkpoints.
    pub fn descriptor(&self) -> String {
        let convs: Vec<String> = self
            .convs
            .iter()
            .map(|c| format!("conv({},{},{},{},{})", c.in_channels, c.out_channels, c.kernel, c.stride, c.pad))
            .collect();
        format!(
            "{};in={}x{};{};pool({},{});lstm({}x{})",
            self.kind,
            self.input_channels,
            self.input_len,
            convs.join(","),
            self.pool.kernel,
            self.pool.stride,
            self.lstm_layers,
            self.hidden
        )
    }
}
