//! Training loop: per-epoch resampling, Adam over mini-batches, validation
//! macro F1 after every epoch, best-epoch retention and early stopping.

use ndarray::ArrayView2;

use super::{batch_loss_and_grad, forward, AdamConfig, AdamState, ModelSpec, Network};
use crate::dataset::{
    epoch_pipeline, evaluation_batch, BalanceMode, FeatureSet, ParticipantRecord, SegmentBatch, SegmentSpec, Split,
};
use crate::eval::{breakdown, interview_predictions};
use crate::exec::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay: f64,
    /// Epochs between learning-rate decays (lambda).
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub adam: AdamConfig,
    /// Examples per gradient work item.
    pub chunk: usize,
    pub exec: Execution,
}

impl TrainConfig {
    pub fn new(decay_every: usize, seed: u64) -> Self {
        TrainConfig {
            lr0: 0.001,
            decay: 0.9,
            decay_every,
            epochs: 100,
            batch_size: 20,
            seed,
            patience: 20,
            adam: AdamConfig::default(),
            chunk: 5,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.decay_every == 0 {
            return Err(Error::InvalidConfig("lambda must be at least 1".into()));
        }
        if self.batch_size == 0 || self.chunk == 0 {
            return Err(Error::InvalidConfig("batch size and chunk must be positive".into()));
        }
        if self.lr0.is_nan() || self.lr0 <= 0.0 || !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig("learning rate must be positive and decay in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `lr0 * decay^floor(epoch / lambda)`.
pub fn lr_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr0 * cfg.decay.powi((epoch / cfg.decay_every.max(1)) as i32)
}

#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub records: &'a [ParticipantRecord],
    /// Features for every record in both splits.
    pub features: &'a FeatureSet,
    pub segments: SegmentSpec,
    pub mode: BalanceMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_segments: usize,
    pub files: usize,
    pub val_macro_f1: f64,
}

impl EpochMetrics {
    pub fn log_line(&self) -> String {
        format!(
            "epoch={} lr={} files={} segments={} train_loss={} val_macro_f1={}",
            self.epoch, self.lr, self.files, self.train_segments, self.train_loss, self.val_macro_f1
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation macro F1.
    pub best: Network,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub history: Vec<EpochMetrics>,
    /// One selection-log line per epoch.
    pub selection_log: Vec<String>,
}

/// Probabilities for every segment in `batch`, in order.
pub fn predict_segments(net: &Network, batch: &SegmentBatch, chunk: usize, exec: Execution) -> Result<Vec<f64>> {
    let chunks: Vec<_> = batch.examples.chunks(chunk.max(1)).collect();
    let parts = exec.try_map(&chunks, |part| {
        let views: Vec<ArrayView2<f64>> = part.iter().map(|s| s.data.view()).collect();
        forward(net, &views)
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Validation macro F1 (over all interviews) for `net`.
pub fn validation_macro_f1(net: &Network, batch: &SegmentBatch, chunk: usize, exec: Execution) -> Result<f64> {
    let probs = predict_segments(net, batch, chunk, exec)?;
    let preds = interview_predictions(batch, &probs)?;
    Ok(breakdown(&preds).total_avg)
}

pub fn train(spec: &ModelSpec, cfg: &TrainConfig, data: &TrainingData<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    let val = evaluation_batch(data.records, Split::Validation, data.features, &data.segments)?;
    if val.is_empty() {
        return Err(Error::InsufficientData("validation split yields no segments".into()));
    }
    let mut net = Network::init(spec.clone(), cfg.seed)?;
    let mut adam = AdamState::new(&net, cfg.adam);
    let mut best = (net.clone(), 0usize, f64::NEG_INFINITY);
    let mut history = Vec::new();
    let mut selection_log = Vec::new();

    for epoch in 0..cfg.epochs {
        let selection = epoch_pipeline(data.records, data.features, data.mode, &data.segments, cfg.seed, epoch)?;
        selection_log.push(selection.log_line(epoch, data.mode));
        if selection.batch.is_empty() {
            return Err(Error::InsufficientData(format!("epoch {epoch} produced no training segments")));
        }
        let lr = lr_schedule(cfg, epoch);
        let mut loss_sum = 0.0;
        let refs: Vec<_> = selection.batch.examples.iter().collect();
        for mb in refs.chunks(cfg.batch_size) {
            let (loss, grad) = batch_loss_and_grad(&net, mb, cfg.chunk, cfg.exec)?;
            adam.step(&mut net, &grad, lr);
            loss_sum += loss * mb.len() as f64;
        }
        let val_f1 = validation_macro_f1(&net, &val, cfg.chunk, cfg.exec)?;
        let metrics = EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / refs.len() as f64,
            train_segments: refs.len(),
            files: selection.selected.len(),
            val_macro_f1: val_f1,
        };
        log::info!("{}", metrics.log_line());
        history.push(metrics);
        if val_f1 > best.2 {
            best = (net.clone(), epoch, val_f1);
        } else if epoch - best.1 >= cfg.patience {
            log::info!("early stop at epoch {epoch}; best epoch {}", best.1);
            break;
        }
    }
    Ok(TrainOutcome { best: best.0, best_epoch: best.1, best_val_macro_f1: best.2, history, selection_log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Gender, Label, Segment};
    use crate::dsp::{FeatureKind, FeatureTensor, Normalization};
    use crate::nn::{ConvSpec, ModelKind, PoolSpec};
    use crate::seed::rng_for;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng as _;
    use std::path::PathBuf;

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::DepAudioNet,
            input_channels: 3,
            input_len: 12,
            convs: vec![ConvSpec { in_channels: 3, out_channels: 4, kernel: 3, stride: 1, pad: 1 }],
            pool: PoolSpec { kernel: 3, stride: 3 },
            lstm_layers: 2,
            hidden: 6,
        }
    }

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::new(2, 0);
        let lrs: Vec<f64> = (0..5).map(|e| lr_schedule(&cfg, e)).collect();
        assert_abs_diff_eq!(lrs[0], 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(lrs[1], 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(lrs[2], 0.0009, epsilon = 1e-15);
        assert_abs_diff_eq!(lrs[3], 0.0009, epsilon = 1e-15);
        assert_abs_diff_eq!(lrs[4], 0.00081, epsilon = 1e-15);
        let cfg3 = TrainConfig::new(3, 0);
        assert_eq!(lr_schedule(&cfg3, 0), 0.001);
        assert_eq!(lr_schedule(&cfg3, 2), 0.001);
        assert!(TrainConfig::new(0, 0).validate().is_err());
    }

    #[test]
    fn overfits_a_tiny_batch() {
        let spec = tiny_spec();
        let mut rng = rng_for(11, &[]);
        let segs: Vec<Segment> = (0..4)
            .map(|i| Segment {
                data: Array2::from_shape_fn((3, 12), |_| rng.random_range(-1.0..1.0)),
                label: if i % 2 == 0 { Label::Depressed } else { Label::NotDepressed },
                gender: Gender::Male,
                participant_id: i,
            })
            .collect();
        let refs: Vec<&Segment> = segs.iter().collect();
        let mut net = Network::init(spec, 3).unwrap();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let mut loss = f64::INFINITY;
        for _ in 0..200 {
            let (l, g) = batch_loss_and_grad(&net, &refs, 4, Execution::Sequential).unwrap();
            loss = l;
            adam.step(&mut net, &g, 0.05);
        }
        assert!(loss < 0.01, "loss {loss}");
    }

    fn toy_corpus() -> (Vec<ParticipantRecord>, FeatureSet) {
        let mut recs = Vec::new();
        let mut feats = FeatureSet::new();
        let mut rng = rng_for(5, &[]);
        let mut id = 0;
        for (split, per) in [(Split::Train, [4, 2, 5, 2]), (Split::Validation, [2, 1, 2, 1])] {
            for (q, &n) in per.iter().enumerate() {
                let gender = if q < 2 { Gender::Female } else { Gender::Male };
                let phq8 = if q % 2 == 1 { 15 } else { 3 };
                for _ in 0..n {
                    id += 1;
                    let cols = 24 + 12 * rng.random_range(0..3usize);
                    let shift = if phq8 >= 10 { 0.5 } else { -0.5 };
                    let data = Array2::from_shape_fn((3, cols), |_| shift + rng.random_range(-1.0..1.0));
                    feats.insert(
                        id,
                        FeatureTensor { data, kind: FeatureKind::MelLog, source_id: id, norm: Normalization::None },
                    );
                    recs.push(ParticipantRecord {
                        id,
                        gender,
                        phq8,
                        split,
                        audio_path: PathBuf::from(format!("{id}.wav")),
                    });
                }
            }
        }
        (recs, feats)
    }

    fn toy_run(exec: Execution) -> TrainOutcome {
        let (recs, feats) = toy_corpus();
        let data = TrainingData {
            records: &recs,
            features: &feats,
            segments: SegmentSpec { n_seg: 12, hop: 512 },
            mode: BalanceMode::GenderBalance,
        };
        let mut cfg = TrainConfig::new(2, 9);
        cfg.epochs = 4;
        cfg.batch_size = 3;
        cfg.chunk = 2;
        cfg.lr0 = 0.01;
        cfg.exec = exec;
        train(&tiny_spec(), &cfg, &data).unwrap()
    }

    #[test]
    fn training_is_reproducible() {
        let a = toy_run(Execution::Parallel);
        let b = toy_run(Execution::Sequential);
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
        assert_eq!(a.selection_log, b.selection_log);
        assert_eq!(a.history.len(), 4);
        assert!(a.selection_log.iter().all(|l| l.contains("files=8")));
        assert_eq!(a.best_val_macro_f1, a.history[a.best_epoch].val_macro_f1);
    }

    #[test]
    fn predictions_follow_segment_count() {
        let (recs, feats) = toy_corpus();
        let spec = SegmentSpec { n_seg: 12, hop: 512 };
        let batch = evaluation_batch(&recs, Split::Validation, &feats, &spec).unwrap();
        let expected: usize =
            recs.iter().filter(|r| r.split == Split::Validation).map(|r| feats[&r.id].len() / 12).sum();
        let net = Network::init(tiny_spec(), 1).unwrap();
        let p = predict_segments(&net, &batch, 4, Execution::Parallel).unwrap();
        assert_eq!(p.len(), expected);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(p, predict_segments(&net, &batch, 1, Execution::Sequential).unwrap());
    }
}
