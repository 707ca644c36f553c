//! Trains the mel model with and without gender balancing on the synthetic
//! corpus and prints validation F1 and statistical parity per seed.
//!
//! `cargo run --release --example bias_experiment -- [epochs] [seeds]`

use std::time::Instant;

use depbias_core::dataset::{BalanceMode, SegmentSpec, Split};
use depbias_core::dsp::FeatureKind;
use depbias_core::eval::{breakdown, interview_predictions, statistical_parity_difference};
use depbias_core::features::{extract_signals, FeatureConfig, NormMode};
use depbias_core::nn::{predict_segments, train, ModelSpec, TrainConfig, TrainingData};
use depbias_core::synth::daicwoz_shape;
use depbias_core::{dataset, Execution};

fn main() -> depbias_core::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let epochs = args.first().copied().unwrap_or(20);
    let seeds = args.get(1).copied().unwrap_or(5);
    let exec = Execution::default();

    let t0 = Instant::now();
    let env = |k: &str| std::env::var(k).ok().and_then(|v| v.parse::<f64>().ok());
    let mut cfgs = daicwoz_shape(7);
    for c in &mut cfgs {
        c.depression.f0_variance_scale = env("F0_SCALE").unwrap_or(c.depression.f0_variance_scale);
        c.depression.energy_scale = env("ENERGY_SCALE").unwrap_or(c.depression.energy_scale);
        c.speaker_spread = env("SPREAD").unwrap_or(c.speaker_spread);
    }
    let corpus = depbias_core::synth::gen_in_memory(&cfgs, exec)?;
    let features = extract_signals(&corpus, &FeatureConfig::new(FeatureKind::MelLog, NormMode::PerSignal), exec)?;
    let records: Vec<_> = corpus.into_iter().map(|(r, _)| r).collect();
    eprintln!("corpus + features: {:.1}s", t0.elapsed().as_secs_f64());

    let spec = ModelSpec::dep_audio_net();
    let segs = SegmentSpec::default();
    let val = dataset::evaluation_batch(&records, Split::Validation, &features, &segs)?;
    for mode in [BalanceMode::ClassBalance, BalanceMode::GenderBalance] {
        let mut spds = Vec::new();
        for seed in 0..seeds as u64 {
            let t = Instant::now();
            let mut cfg = TrainConfig::new(2, seed);
            cfg.epochs = epochs;
            cfg.exec = exec;
            let data = TrainingData { records: &records, features: &features, segments: segs, mode };
            let out = train(&spec, &cfg, &data)?;
            let probs = predict_segments(&out.best, &val, cfg.chunk, exec)?;
            let preds = interview_predictions(&val, &probs)?;
            let spd = statistical_parity_difference(&preds)?;
            let f1 = breakdown(&preds);
            spds.push(spd.abs());
            println!(
                "mode={} seed={seed} best_epoch={} f1={:.3} F={:.3} M={:.3} spd={spd:+.3} time={:.0}s",
                mode.as_str(),
                out.best_epoch,
                f1.total_avg,
                f1.female.map_or(f64::NAN, |r| r.f1_avg),
                f1.male.map_or(f64::NAN, |r| r.f1_avg),
                t.elapsed().as_secs_f64()
            );
        }
        println!("mode={} mean|spd|={:.3}", mode.as_str(), spds.iter().sum::<f64>() / spds.len() as f64);
    }
    Ok(())
}
