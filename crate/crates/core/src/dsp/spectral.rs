use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FeatureKind, FeatureTensor, Normalization};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { window_len: 1024, hop: 512, window_kind: WindowKind::Hann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidConfig("window length must be positive".into()));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::InvalidConfig(format!("hop {} must be in 1..={}", self.hop, self.window_len)));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig { n_mels: 40, sample_rate: 16_000, f_min: 0.0, f_max: 8_000.0, log_floor: 1e-10 }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if self.n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be at least 1".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "mel range [{}, {}] must satisfy 0 <= f_min < f_max <= {nyquist}",
                self.f_min, self.f_max
            )));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(Error::InvalidConfig("log floor must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric Hann window, `0.5 - 0.5 cos(2 pi n / (w - 1))`.
///
/// A one-point window is defined as `[1.0]`.
pub fn hann_window(w: usize) -> Result<Vec<f64>> {
    match w {
        0 => Err(Error::InvalidConfig("window length must be positive".into())),
        1 => Ok(vec![1.0]),
        _ => {
            let denom = (w - 1) as f64;
            Ok((0..w).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / denom).cos()).collect())
        }
    }
}

/// Number of full frames; trailing samples that do not fill a window are dropped.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len < window_len {
        0
    } else {
        (len - window_len) / hop + 1
    }
}

/// Magnitude STFT without centre padding, shape `(w/2 + 1) x frames`.
pub fn stft_magnitude(signal: &[f64], cfg: &StftConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let w = cfg.window_len;
    if signal.len() < w {
        return Err(Error::SignalTooShort { len: signal.len(), needed: w });
    }
    let window = match cfg.window_kind {
        WindowKind::Hann => hann_window(w)?,
    };
    let frames = frame_count(signal.len(), w, cfg.hop);
    let bins = cfg.n_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(w);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); w];
    let mut out = Array2::<f64>::zeros((bins, frames));
    for f in 0..frames {
        let start = f * cfg.hop;
        for ((slot, &x), &win) in buf.iter_mut().zip(&signal[start..start + w]).zip(&window) {
            *slot = Complex::new(x * win, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf.iter().take(bins).enumerate() {
            out[[k, f]] = c.norm();
        }
    }
    Ok(out)
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x n_fft_bins`, unnormalised triangles with unit peak.
    pub weights: Array2<f64>,
    pub center_hz: Vec<f64>,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl MelFilterbank {
    /// Filter centres expressed in (fractional) FFT bins.
    pub fn center_bins(&self) -> Vec<f64> {
        let bin_hz = f64::from(self.sample_rate) / self.n_fft as f64;
        self.center_hz.iter().map(|f| f / bin_hz).collect()
    }
}

pub fn mel_filterbank(cfg: &MelConfig, n_fft_bins: usize) -> Result<MelFilterbank> {
    cfg.validate()?;
    if n_fft_bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 FFT bins, got {n_fft_bins}")));
    }
    let n_fft = 2 * (n_fft_bins - 1);
    let sr = f64::from(cfg.sample_rate);
    let (m_lo, m_hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let step = (m_hi - m_lo) / (cfg.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..cfg.n_mels + 2).map(|i| mel_to_hz(m_lo + step * i as f64)).collect();

    let mut weights = Array2::<f64>::zeros((cfg.n_mels, n_fft_bins));
    for m in 0..cfg.n_mels {
        let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut any = false;
        for k in 0..n_fft_bins {
            let f = k as f64 * sr / n_fft as f64;
            let v = ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0);
            if v > 0.0 {
                weights[[m, k]] = v;
                any = true;
            }
        }
        if !any {
            return Err(Error::InvalidConfig(format!(
                "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; \
                 n_mels {} is too large for {n_fft_bins} bins",
                cfg.n_mels
            )));
        }
    }
    Ok(MelFilterbank { weights, center_hz: edges[1..=cfg.n_mels].to_vec(), n_fft, sample_rate: cfg.sample_rate })
}

/// `log(max(filterbank . |STFT|, floor))`, shape `n_mels x frames`.
pub fn mel_spectrogram(
    signal: &[f64],
    source_id: u32,
    stft_cfg: &StftConfig,
    mel_cfg: &MelConfig,
) -> Result<FeatureTensor> {
    let mag = stft_magnitude(signal, stft_cfg)?;
    let bank = mel_filterbank(mel_cfg, mag.len_of(Axis(0)))?;
    let floor = mel_cfg.log_floor;
    let data = bank.weights.dot(&mag).mapv(|e| e.max(floor).ln());
    Ok(FeatureTensor { data, kind: FeatureKind::MelLog, source_id, norm: Normalization::None })
}

/// Wraps a waveform as a `1 x samples` feature.
pub fn raw_feature(signal: &[f64], source_id: u32) -> FeatureTensor {
    FeatureTensor {
        data: Array2::from_shape_vec((1, signal.len()), signal.to_vec()).expect("1 x n shape always matches"),
        kind: FeatureKind::Raw,
        source_id,
        norm: Normalization::None,
    }
}
