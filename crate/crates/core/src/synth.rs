//! Synthetic interview corpus.
//!
//! Each participant is a voiced signal made of three harmonics of a slowly
//! drifting fundamental, shaped by a random syllable-rate envelope over a
//! faint noise floor. Gender sets the pitch range. Depression contracts the
//! pitch drift and the envelope depth, giving a flatter, more monotone
//! voice. Quadrant counts default to the DAIC-WOZ training and validation
//! splits, so the corpus carries the same gender/label imbalance.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{write_manifest, Gender, Label, ParticipantRecord, Split};
use crate::exec::Execution;
use crate::seed::{rng_for, stream, Rng};
use crate::{wav, Error, Result};

/// How strongly depression flattens the voice; 1.0 means no effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepressionEffect {
    /// Multiplies the variance of the f0 drift.
    pub f0_variance_scale: f64,
    /// Multiplies the depth of the amplitude envelope.
    pub energy_scale: f64,
}

impl DepressionEffect {
    pub const NONE: DepressionEffect = DepressionEffect { f0_variance_scale: 1.0, energy_scale: 1.0 };
}

impl Default for DepressionEffect {
    fn default() -> Self {
        DepressionEffect { f0_variance_scale: 0.5, energy_scale: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub split: Split,
    /// Participants per quadrant: F-ND, F-D, M-ND, M-D.
    pub counts: [usize; 4],
    pub first_id: u32,
    /// Uniform duration range in seconds.
    pub duration_s: (f64, f64),
    pub f0_female: (f64, f64),
    pub f0_male: (f64, f64),
    /// Stationary standard deviation of the f0 drift for non-depressed speakers, Hz.
    pub f0_drift_hz: f64,
    /// Envelope depth for non-depressed speakers, in `[0, 1]`.
    pub envelope_depth: f64,
    /// Log-scale standard deviation of per-speaker multipliers on drift and depth.
    pub speaker_spread: f64,
    pub depression: DepressionEffect,
    /// Peak harmonic amplitude.
    pub gain: f64,
    /// Standard deviation of the additive noise floor.
    pub noise: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

pub const TRAIN_COUNTS: [usize; 4] = [27, 17, 49, 14];
pub const VALIDATION_COUNTS: [usize; 4] = [12, 7, 11, 5];
pub const HARMONICS: [f64; 3] = [1.0, 0.5, 0.25];

/// Control-point spacing for the f0 and envelope processes.
const CONTROL_HOP: usize = 80;
const F0_TIME_CONSTANT_S: f64 = 0.4;
const ENVELOPE_TIME_CONSTANT_S: f64 = 0.06;

impl SynthConfig {
    pub fn new(split: Split, counts: [usize; 4], first_id: u32, seed: u64) -> Self {
        SynthConfig {
            split,
            counts,
            first_id,
            duration_s: (10.0, 40.0),
            f0_female: (165.0, 255.0),
            f0_male: (85.0, 155.0),
            f0_drift_hz: 10.0,
            envelope_depth: 0.9,
            speaker_spread: 0.3,
            depression: DepressionEffect::default(),
            gain: 0.7,
            noise: 0.003,
            sample_rate: 16_000,
            seed,
        }
    }

    pub fn default_train(seed: u64) -> Self {
        Self::new(Split::Train, TRAIN_COUNTS, 300, seed)
    }

    pub fn default_validation(seed: u64) -> Self {
        let first = 300 + TRAIN_COUNTS.iter().sum::<usize>() as u32;
        Self::new(Split::Validation, VALIDATION_COUNTS, first, seed)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn f0_range(&self, g: Gender) -> (f64, f64) {
        match g {
            Gender::Female => self.f0_female,
            Gender::Male => self.f0_male,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (d0, d1) = self.duration_s;
        if !(d0 > 0.0 && d0 <= d1) {
            return bad(format!("duration range {d0}..{d1} s is empty"));
        }
        for (name, (lo, hi)) in [("female", self.f0_female), ("male", self.f0_male)] {
            if !(lo > 0.0 && lo < hi && hi < self.sample_rate as f64 / 2.0 / HARMONICS.len() as f64) {
                return bad(format!("{name} f0 range {lo}..{hi} Hz is invalid"));
            }
        }
        let DepressionEffect { f0_variance_scale: v, energy_scale: e } = self.depression;
        if !(v > 0.0 && v <= 1.0 && e > 0.0 && e <= 1.0) {
            return bad(format!("depression scales must lie in (0, 1], got {v} and {e}"));
        }
        if !(0.0..=1.0).contains(&self.envelope_depth)
            || self.f0_drift_hz < 0.0
            || self.noise < 0.0
            || self.speaker_spread < 0.0
        {
            return bad("envelope depth, drift, spread and noise must be non-negative (depth at most 1)".into());
        }
        if self.gain + 6.0 * self.noise > 1.0 {
            return bad(format!("gain {} with noise {} would clip", self.gain, self.noise));
        }
        Ok(())
    }

    /// `(id, gender, label)` for every participant, in id order. Quadrants are
    /// shuffled so ids carry no label information.
    pub fn plan(&self) -> Vec<(u32, Gender, Label)> {
        let cells = [
            (Gender::Female, Label::NotDepressed),
            (Gender::Female, Label::Depressed),
            (Gender::Male, Label::NotDepressed),
            (Gender::Male, Label::Depressed),
        ];
        let mut slots: Vec<(Gender, Label)> =
            cells.iter().zip(self.counts).flat_map(|(&cell, n)| std::iter::repeat_n(cell, n)).collect();
        let split_tag = match self.split {
            Split::Train => 0,
            Split::Validation => 1,
        };
        slots.shuffle(&mut rng_for(self.seed, &[stream::SYNTH_SPLIT, split_tag]));
        slots.into_iter().enumerate().map(|(i, (g, l))| (self.first_id + i as u32, g, l)).collect()
    }
}

/// Both default splits.
pub fn daicwoz_shape(seed: u64) -> Vec<SynthConfig> {
    vec![SynthConfig::default_train(seed), SynthConfig::default_validation(seed)]
}

pub fn audio_rel_path(id: u32) -> PathBuf {
    PathBuf::from("audio").join(format!("{id}.wav"))
}

/// Discrete Ornstein-Uhlenbeck walk with unit stationary variance.
fn ou_walk(rng: &mut Rng, steps: usize, dt: f64, tau: f64) -> Vec<f64> {
    let a = (-dt / tau).exp();
    let b = (1.0 - a * a).sqrt();
    let mut x: f64 = StandardNormal.sample(rng);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(x);
        let xi: f64 = StandardNormal.sample(rng);
        x = a * x + b * xi;
    }
    out
}

fn lerp(points: &[f64], i: usize) -> f64 {
    let k = i / CONTROL_HOP;
    let frac = (i % CONTROL_HOP) as f64 / CONTROL_HOP as f64;
    points[k] + (points[k + 1] - points[k]) * frac
}

/// One participant's record and waveform; deterministic in `(cfg.seed, id)`.
pub fn gen_participant(gender: Gender, label: Label, cfg: &SynthConfig, id: u32) -> (ParticipantRecord, Vec<f64>) {
    let mut rng = rng_for(cfg.seed, &[stream::SYNTH, u64::from(id)]);
    let sr = cfg.sample_rate as f64;
    let phq8 = match label {
        Label::Depressed => rng.random_range(10..=24),
        Label::NotDepressed => rng.random_range(0..=9),
    };
    let duration = rng.random_range(cfg.duration_s.0..=cfg.duration_s.1);
    let n = (duration * sr).round() as usize;

    let (lo, hi) = cfg.f0_range(gender);
    let (var_scale, energy_scale) = match label {
        Label::Depressed => (cfg.depression.f0_variance_scale, cfg.depression.energy_scale),
        Label::NotDepressed => (1.0, 1.0),
    };
    let spread = |rng: &mut Rng| {
        let z: f64 = StandardNormal.sample(rng);
        (cfg.speaker_spread * z).exp()
    };
    let drift = cfg.f0_drift_hz * var_scale.sqrt() * spread(&mut rng);
    let depth = (cfg.envelope_depth * energy_scale * spread(&mut rng)).min(1.0);
    let margin = (1.5 * cfg.f0_drift_hz).min((hi - lo) / 2.0 - 1.0).max(0.0);
    let center = rng.random_range(lo + margin..=hi - margin);

    let controls = n / CONTROL_HOP + 2;
    let dt = CONTROL_HOP as f64 / sr;
    let f0: Vec<f64> = ou_walk(&mut rng, controls, dt, F0_TIME_CONSTANT_S)
        .into_iter()
        .map(|x| (center + drift * x).clamp(lo, hi))
        .collect();
    let env: Vec<f64> = ou_walk(&mut rng, controls, dt, ENVELOPE_TIME_CONSTANT_S)
        .into_iter()
        .map(|x| 1.0 - depth * (1.0 - 1.0 / (1.0 + (-2.5 * x).exp())))
        .collect();

    let norm: f64 = HARMONICS.iter().sum();
    let mut phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = lerp(&f0, i);
        let voiced: f64 = HARMONICS.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * phase).sin()).sum();
        let noise: f64 = StandardNormal.sample(&mut rng);
        out.push((cfg.gain * lerp(&env, i) * voiced / norm + cfg.noise * noise).clamp(-1.0, 1.0));
        phase = (phase + std::f64::consts::TAU * f / sr) % std::f64::consts::TAU;
    }

    let record = ParticipantRecord { id, gender, phq8, split: cfg.split, audio_path: audio_rel_path(id) };
    (record, out)
}

/// All participants of the given splits, generated in memory.
pub fn gen_in_memory(cfgs: &[SynthConfig], exec: Execution) -> Result<Vec<(ParticipantRecord, Vec<f64>)>> {
    let jobs = jobs_for(cfgs)?;
    Ok(exec.map(&jobs, |(cfg, (id, g, l))| gen_participant(*g, *l, cfg, *id)))
}

type Job<'a> = (&'a SynthConfig, (u32, Gender, Label));

fn jobs_for(cfgs: &[SynthConfig]) -> Result<Vec<Job<'_>>> {
    let mut jobs = Vec::new();
    for cfg in cfgs {
        cfg.validate()?;
        jobs.extend(cfg.plan().into_iter().map(|p| (cfg, p)));
    }
    let mut ids: Vec<u32> = jobs.iter().map(|(_, (id, _, _))| *id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("split id ranges overlap".into()));
    }
    Ok(jobs)
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes the manifest at `manifest` and `audio/<id>.wav` files next to it.
pub fn gen_corpus(cfgs: &[SynthConfig], manifest: &Path, exec: Execution) -> Result<Vec<ParticipantRecord>> {
    let jobs = jobs_for(cfgs)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let audio = root.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let records = exec.try_map(&jobs, |(cfg, (id, g, l))| {
        let (record, samples) = gen_participant(*g, *l, cfg, *id);
        wav::write_pcm16(&root.join(&record.audio_path), &samples, cfg.sample_rate)?;
        Ok::<_, Error>(record)
    })?;
    write_manifest(manifest, &records)?;
    Ok(records)
}
