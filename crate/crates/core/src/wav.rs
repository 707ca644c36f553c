//! Mono WAV input and 16-bit PCM output.

use std::path::Path;

use crate::{Error, Result};

pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| Error::Wav { path: path.to_path_buf(), source }
}

/// Reads a mono file as samples in `[-1, 1]`. Accepts 8-32 bit integer PCM and 32-bit float.
pub fn read(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(path, format!("expected mono audio, found {} channels", spec.channels)));
    }
    let samples = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader.samples::<i32>().map(|s| s.map(|v| v as f64 / scale)).collect::<std::result::Result<Vec<_>, _>>()
        }
        hound::SampleFormat::Float => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<Vec<_>, _>>()
        }
    }
    .map_err(wav_err(path))?;
    Ok(Waveform { samples, sample_rate: spec.sample_rate })
}

/// Quantisation used by [`write_pcm16`]: clamp, scale by 32767, round.
pub fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn write_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec =
        hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err(path))?;
    for &x in samples {
        writer.write_sample(to_pcm16(x)).map_err(wav_err(path))?;
    }
    writer.finalize().map_err(wav_err(path))
}
