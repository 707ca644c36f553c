use std::fs;
use std::path::{Path, PathBuf};

use depbias_core::dataset::{evaluation_batch, load_manifest, FeatureSet, ParticipantRecord, SegmentSpec, Split};
use depbias_core::dsp::{persist, FeatureTensor};
use depbias_core::eval::{
    breakdown, interview_predictions, render_text, FairnessReport, ReportDocument, RunReport, DEFAULT_BINS,
};
use depbias_core::features::{extract_record, normalize_set, FeatureConfig, NormMode};
use depbias_core::nn::{checkpoint, predict_segments, train, TrainConfig, TrainingData};
use depbias_core::synth::{daicwoz_shape, gen_corpus, SynthConfig};
use depbias_core::{Error, Execution};

use crate::config::{load_file, run_dir, Layer, Preset, RunConfig};
use crate::error::CliError;

pub const CHECKPOINT: &str = "checkpoint.dbck";
pub const METRICS_LOG: &str = "metrics.log";
pub const SELECTION_LOG: &str = "selection.log";
pub const RUN_FILE: &str = "run.cfg";
pub const REPORT_JSON: &str = "report.json";

type CliResult<T> = Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }.into())
}

pub fn synth_configs(cfg: &RunConfig) -> Vec<SynthConfig> {
    let mut cfgs = match cfg.preset {
        Preset::DaicwozShape => daicwoz_shape(cfg.seed),
        Preset::Tiny => vec![
            SynthConfig::new(Split::Train, [2, 2, 2, 2], 300, cfg.seed),
            SynthConfig::new(Split::Validation, [1, 1, 1, 1], 308, cfg.seed),
        ],
    };
    if let Some(d) = cfg.duration {
        for c in &mut cfgs {
            c.duration_s = d;
        }
    }
    cfgs
}

pub fn synth(cfg: &RunConfig, exec: Execution) -> CliResult<String> {
    let records = gen_corpus(&synth_configs(cfg), &cfg.manifest_path(), exec)?;
    let train = records.iter().filter(|r| r.split == Split::Train).count();
    Ok(format!(
        "synth: wrote {} interviews ({train} train, {} validation) and {}",
        records.len(),
        records.len() - train,
        cfg.manifest_path().display()
    ))
}

fn modified(path: &Path) -> Option<std::time::SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Stored features exist, match the requested kind and normalisation, and are
/// newer than their audio.
fn up_to_date(record: &ParticipantRecord, root: &Path, dir: &Path, fc: &FeatureConfig) -> bool {
    let Ok(desc) = persist::load_descriptor(dir, record.id) else {
        return false;
    };
    let data = persist::data_path(dir, record.id);
    let size_ok = fs::metadata(&data).is_ok_and(|m| m.len() == (desc.rows * desc.cols * 4) as u64);
    let fresh = match (modified(&data), modified(&root.join(&record.audio_path))) {
        (Some(d), Some(a)) => d >= a,
        _ => false,
    };
    desc.kind == fc.kind && desc.norm_scope == fc.norm.scope_name() && size_ok && fresh
}

pub fn features(cfg: &RunConfig, exec: Execution) -> CliResult<String> {
    let records = load_manifest(&cfg.manifest_path())?;
    let root = cfg.corpus_root();
    let dir = cfg.features_dir();
    let fc = FeatureConfig::new(cfg.feature_kind, cfg.norm);
    let mut todo: Vec<&ParticipantRecord> = records.iter().filter(|r| !up_to_date(r, &root, &dir, &fc)).collect();
    if cfg.norm == NormMode::PerGender && !todo.is_empty() {
        // corpus statistics change whenever any input does
        todo = records.iter().collect();
    }
    let extracted = exec.map(&todo, |r| (r.id, extract_record(r, &root, &fc)));
    let mut failures = Vec::new();
    let mut raw = FeatureSet::new();
    for (id, res) in extracted {
        match res {
            Ok(f) => {
                raw.insert(id, f);
            }
            Err(e) => {
                log::error!("participant {id}: {e}");
                failures.push(id);
            }
        }
    }
    if cfg.norm == NormMode::PerGender && !failures.is_empty() {
        return Err(CliError::Data(format!(
            "{} of {} files failed; per-gender statistics need every training file",
            failures.len(),
            records.len()
        )));
    }
    let done = raw.len();
    let normalized = normalize_set(&records, raw, cfg.norm, exec)?;
    let items: Vec<&FeatureTensor> = normalized.values().collect();
    exec.try_map(&items, |f| persist::save(&dir, f))?;
    if !failures.is_empty() {
        return Err(CliError::Data(format!(
            "{} of {} files failed (participants {:?})",
            failures.len(),
            records.len(),
            failures
        )));
    }
    Ok(format!("features: {done} extracted, {} up to date, in {}", records.len() - done, dir.display()))
}

fn load_features(cfg: &RunConfig, records: &[ParticipantRecord], split: Option<Split>) -> CliResult<FeatureSet> {
    let dir = cfg.features_dir();
    let mut set = FeatureSet::new();
    for r in records.iter().filter(|r| split.is_none_or(|s| r.split == s)) {
        let f = persist::load(&dir, r.id)
            .map_err(|e| CliError::Data(format!("{e} (run `depbias features` with the same settings first)")))?;
        set.insert(r.id, f);
    }
    Ok(set)
}

pub fn train_cmd(cfg: &RunConfig, exec: Execution) -> CliResult<String> {
    let records = load_manifest(&cfg.manifest_path())?;
    let features = load_features(cfg, &records, None)?;
    let spec = cfg.model_spec();
    let mut tc = TrainConfig::new(cfg.lambda, cfg.seed);
    tc.epochs = cfg.epochs;
    tc.patience = cfg.patience;
    tc.batch_size = cfg.batch_size;
    tc.exec = exec;
    let data = TrainingData {
        records: &records,
        features: &features,
        segments: SegmentSpec::default(),
        mode: cfg.balance_mode(),
    };
    let outcome = train(&spec, &tc, &data)?;

    let dir = cfg.run_dir();
    let mut metrics: String = outcome.history.iter().map(|m| m.log_line() + "\n").collect();
    metrics.push_str(&format!("best_epoch={} best_val_macro_f1={}\n", outcome.best_epoch, outcome.best_val_macro_f1));
    write(&dir.join(METRICS_LOG), metrics)?;
    write(&dir.join(SELECTION_LOG), outcome.selection_log.join("\n") + "\n")?;
    write(&dir.join(RUN_FILE), cfg.run_file())?;
    write(&dir.join(CHECKPOINT), checkpoint::encode(&outcome.best))?;
    Ok(format!(
        "train: run {} best epoch {} of {} (validation macro F1 {:.3}), checkpoint in {}",
        cfg.run_id,
        outcome.best_epoch,
        outcome.history.len(),
        outcome.best_val_macro_f1,
        dir.display()
    ))
}

/// Settings of a stored run, with corpus location taken from the current invocation.
fn run_settings(cfg: &RunConfig, run_id: &str) -> CliResult<RunConfig> {
    let path = run_dir(&cfg.out, run_id).join(RUN_FILE);
    if !path.exists() {
        return Err(CliError::Data(format!("run `{run_id}` not found ({} missing)", path.display())));
    }
    let mut here = Layer::new();
    here.insert("out".into(), cfg.out.display().to_string());
    here.insert("manifest".into(), cfg.manifest.display().to_string());
    RunConfig::resolve(&[load_file(&path)?, here])
}

pub fn evaluate(cfg: &RunConfig, run_id: &str, exec: Execution) -> CliResult<RunReport> {
    let run = run_settings(cfg, run_id)?;
    let spec = run.model_spec();
    let net = checkpoint::load(&run.run_dir().join(CHECKPOINT), &spec)?;
    let records = load_manifest(&run.manifest_path())?;
    let features = load_features(&run, &records, Some(Split::Validation))?;
    let batch = evaluation_batch(&records, Split::Validation, &features, &SegmentSpec::default())?;
    let probs = predict_segments(&net, &batch, 5, exec)?;
    let preds = interview_predictions(&batch, &probs)?;
    let fairness = FairnessReport::compute(&preds, DEFAULT_BINS)?;
    Ok(RunReport::new(
        run_id,
        run.model.as_str(),
        run.lambda,
        run.conv_filters,
        run.gender_balance,
        &breakdown(&preds),
        &fairness,
    ))
}

fn emit(doc: &ReportDocument, stem: &Path) -> CliResult<String> {
    let text = render_text(doc);
    write(&stem.with_extension("json"), doc.to_json())?;
    write(&stem.with_extension("txt"), &text)?;
    Ok(text)
}

pub fn eval_cmd(cfg: &RunConfig, compare: Option<(String, String)>, exec: Execution) -> CliResult<String> {
    match compare {
        None => {
            let report = evaluate(cfg, &cfg.run_id, exec)?;
            emit(&ReportDocument::new(vec![report]), &cfg.run_dir().join("report"))
        }
        Some((a, b)) => {
            let ra = evaluate(cfg, &a, exec)?;
            let rb = evaluate(cfg, &b, exec)?;
            let doc = ReportDocument::new(vec![ra, rb]);
            if doc.runs.iter().all(|r| r.diff_percent.is_none()) {
                log::warn!("runs {a} and {b} are not an unbalanced/balanced pair of one configuration");
            }
            emit(&doc, &cfg.out.join("reports").join(format!("{a}--{b}")))
        }
    }
}

/// Collects every run's `report.json` into one paired table.
pub fn report_cmd(cfg: &RunConfig) -> CliResult<String> {
    let runs_dir = cfg.out.join("runs");
    let mut paths: Vec<PathBuf> = match fs::read_dir(&runs_dir) {
        Ok(entries) => {
            entries.filter_map(|e| e.ok().map(|e| e.path().join(REPORT_JSON))).filter(|p| p.exists()).collect()
        }
        Err(_) => Vec::new(),
    };
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no evaluated runs under {}", runs_dir.display())));
    }
    let mut runs = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
        let doc = ReportDocument::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        runs.extend(doc.runs);
    }
    runs.sort_by(|a, b| {
        (&a.model, a.lambda, a.conv_filters, a.gender_balance, &a.run_id).cmp(&(
            &b.model,
            b.lambda,
            b.conv_filters,
            b.gender_balance,
            &b.run_id,
        ))
    });
    emit(&ReportDocument::new(runs), &cfg.out.join("report"))
}
