use depbias_core::dataset::{evaluation_batch, load_manifest, BalanceMode, FeatureSet, SegmentSpec, Split};
use depbias_core::dsp::{persist, FeatureKind};
use depbias_core::eval::{breakdown, interview_predictions, render_text, FairnessReport, ReportDocument, RunReport};
use depbias_core::features::{extract_record, normalize_set, FeatureConfig, NormMode};
use depbias_core::nn::{checkpoint, predict_segments, train, ModelSpec, TrainConfig, TrainingData};
use depbias_core::synth::{gen_corpus, SynthConfig, MANIFEST_NAME};
use depbias_core::Execution;

fn small_corpus(seed: u64) -> Vec<SynthConfig> {
    let mut train = SynthConfig::new(Split::Train, [3, 2, 4, 2], 300, seed);
    let mut val = SynthConfig::new(Split::Validation, [2, 1, 2, 1], 320, seed);
    train.duration_s = (5.0, 8.0);
    val.duration_s = (5.0, 8.0);
    vec![train, val]
}

#[test]
fn disk_corpus_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let exec = Execution::default();
    let manifest = dir.path().join(MANIFEST_NAME);
    gen_corpus(&small_corpus(11), &manifest, exec).unwrap();
    let records = load_manifest(&manifest).unwrap();
    assert_eq!(records.len(), 17);

    let fc = FeatureConfig::new(FeatureKind::MelLog, NormMode::PerGender);
    let mut raw = FeatureSet::new();
    for r in &records {
        raw.insert(r.id, extract_record(r, dir.path(), &fc).unwrap());
    }
    let features = normalize_set(&records, raw, NormMode::PerGender, exec).unwrap();

    // persisted features load back unchanged
    let fdir = dir.path().join("features");
    for f in features.values() {
        persist::save(&fdir, f).unwrap();
    }
    let id = records[0].id;
    let back = persist::load(&fdir, id).unwrap();
    assert_eq!(back.data, features[&id].data.mapv(|v| v as f32 as f64));

    let spec = ModelSpec::dep_audio_net();
    let mut cfg = TrainConfig::new(2, 3);
    cfg.epochs = 3;
    cfg.exec = exec;
    let data = TrainingData {
        records: &records,
        features: &features,
        segments: SegmentSpec::default(),
        mode: BalanceMode::GenderBalance,
    };
    let outcome = train(&spec, &cfg, &data).unwrap();
    assert_eq!(outcome.history.len(), 3);
    assert!(outcome.history.iter().all(|m| m.files == 8));

    let ckpt = dir.path().join("model.dbck");
    checkpoint::save(&ckpt, &outcome.best).unwrap();
    let restored = checkpoint::load(&ckpt, &spec).unwrap();

    let val = evaluation_batch(&records, Split::Validation, &features, &SegmentSpec::default()).unwrap();
    let p1 = predict_segments(&outcome.best, &val, 5, exec).unwrap();
    let p2 = predict_segments(&restored, &val, 5, Execution::Sequential).unwrap();
    assert_eq!(p1, p2);

    let preds = interview_predictions(&val, &p1).unwrap();
    assert_eq!(preds.len(), 6);
    let fairness = FairnessReport::compute(&preds, 10).unwrap();
    let report = RunReport::new("r", "depaudionet", 2, 1, true, &breakdown(&preds), &fairness);
    let doc = ReportDocument::new(vec![report]);
    let json = doc.to_json();
    let again = ReportDocument::from_json(&json).unwrap();
    assert_eq!(again.to_json(), json);
    assert_eq!(render_text(&again), render_text(&doc));
}

#[test]
fn checkpoint_rejects_other_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let net = depbias_core::nn::Network::init(ModelSpec::raw_audio(1).unwrap(), 0).unwrap();
    let path = dir.path().join("raw.dbck");
    checkpoint::save(&path, &net).unwrap();
    assert!(checkpoint::load(&path, &ModelSpec::raw_audio(2).unwrap()).is_err());
    assert!(checkpoint::load(&path, &ModelSpec::raw_audio(1).unwrap()).is_ok());
}
