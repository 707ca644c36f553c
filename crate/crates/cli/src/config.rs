//! Run configuration: `key = value` file, `DEPBIAS_*` environment variables
//! and command-line flags, merged in that order of increasing precedence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use depbias_core::dataset::BalanceMode;
use depbias_core::dsp::FeatureKind;
use depbias_core::features::NormMode;
use depbias_core::nn::{ModelKind, ModelSpec};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "DEPBIAS_";

pub const KEYS: &[&str] = &[
    "out",
    "manifest",
    "preset",
    "duration_min",
    "duration_max",
    "feature_kind",
    "norm",
    "model",
    "conv_filters",
    "lambda",
    "gender_balance",
    "seed",
    "epochs",
    "patience",
    "batch_size",
    "jobs",
    "run_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DaicwozShape,
    /// Two interviews per training quadrant, one per validation quadrant.
    Tiny,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Relative to `out` unless absolute.
    pub manifest: PathBuf,
    pub preset: Preset,
    pub duration: Option<(f64, f64)>,
    pub feature_kind: FeatureKind,
    pub norm: NormMode,
    pub model: ModelKind,
    pub conv_filters: usize,
    pub lambda: usize,
    pub gender_balance: bool,
    pub seed: u64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub jobs: usize,
    pub run_id: String,
}

pub type Layer = BTreeMap<String, String>;

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
pub fn parse_file_text(text: &str, origin: &str) -> Result<Layer, CliError> {
    let mut out = Layer::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("{origin}:{}: expected `key = value`", n + 1)));
        };
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("{origin}:{}: unknown key `{key}`", n + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load_file(path: &Path) -> Result<Layer, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_file_text(&text, &path.display().to_string())
}

/// `DEPBIAS_<KEY>` variables for the known keys.
pub fn env_layer(vars: impl IntoIterator<Item = (String, String)>) -> Layer {
    let mut out = Layer::new();
    for (name, value) in vars {
        if let Some(key) = name.strip_prefix(ENV_PREFIX) {
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                out.insert(key, value);
            }
        }
    }
    out
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" | "y" => Ok(true),
        "off" | "false" | "no" | "0" | "n" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}` expects on/off, got `{v}`"))),
    }
}

impl RunConfig {
    /// Merges layers (later layers win) and fills defaults.
    pub fn resolve(layers: &[Layer]) -> Result<Self, CliError> {
        let mut m = Layer::new();
        for layer in layers {
            for (k, v) in layer {
                if !KEYS.contains(&k.as_str()) {
                    return Err(CliError::Config(format!("unknown key `{k}`")));
                }
                m.insert(k.clone(), v.clone());
            }
        }
        let get = |k: &str| m.get(k).map(String::as_str);

        let model: ModelKind = get("model").unwrap_or("depaudionet").parse()?;
        let default_kind = match model {
            ModelKind::DepAudioNet => FeatureKind::MelLog,
            ModelKind::RawAudio => FeatureKind::Raw,
        };
        let feature_kind = match get("feature_kind") {
            Some(v) => v.parse()?,
            None => default_kind,
        };
        if feature_kind != default_kind {
            return Err(CliError::Config(format!(
                "model {model} takes {} features, not {}",
                default_kind.as_str(),
                feature_kind.as_str()
            )));
        }
        let conv_filters = get("conv_filters").map_or(Ok(1), |v| parse_num("conv_filters", v))?;
        ModelSpec::build(model, conv_filters)?;
        let lambda = get("lambda").map_or(Ok(2), |v| parse_num("lambda", v))?;
        if lambda == 0 {
            return Err(CliError::Config("`lambda` must be at least 1".into()));
        }
        let gender_balance = get("gender_balance").map_or(Ok(false), |v| parse_bool("gender_balance", v))?;
        let seed = get("seed").map_or(Ok(0), |v| parse_num("seed", v))?;
        let preset = match get("preset").unwrap_or("daicwoz-shape") {
            "daicwoz-shape" => Preset::DaicwozShape,
            "tiny" => Preset::Tiny,
            other => return Err(CliError::Config(format!("unknown preset `{other}` (daicwoz-shape or tiny)"))),
        };
        let duration = match (get("duration_min"), get("duration_max")) {
            (None, None) => None,
            (lo, hi) => {
                let lo: f64 = lo.map_or(Ok(10.0), |v| parse_num("duration_min", v))?;
                let hi: f64 = hi.map_or(Ok(lo.max(40.0)), |v| parse_num("duration_max", v))?;
                Some((lo, hi))
            }
        };
        let batch_size = get("batch_size").map_or(Ok(20), |v| parse_num("batch_size", v))?;
        if batch_size == 0 {
            return Err(CliError::Config("`batch_size` must be positive".into()));
        }
        let run_id = match get("run_id") {
            Some(id) if !id.is_empty() && !id.contains(['/', '\\']) => id.to_string(),
            Some(id) => return Err(CliError::Config(format!("invalid run id `{id}`"))),
            None => format!("{model}-l{lambda}-c{conv_filters}-{}-s{seed}", if gender_balance { "gb" } else { "ub" }),
        };
        Ok(RunConfig {
            out: PathBuf::from(get("out").unwrap_or("depbias-out")),
            manifest: PathBuf::from(get("manifest").unwrap_or("manifest.csv")),
            preset,
            duration,
            feature_kind,
            norm: get("norm").unwrap_or("per-signal").parse()?,
            model,
            conv_filters,
            lambda,
            gender_balance,
            seed,
            epochs: get("epochs").map_or(Ok(100), |v| parse_num("epochs", v))?,
            patience: get("patience").map_or(Ok(20), |v| parse_num("patience", v))?,
            batch_size,
            jobs: get("jobs").map_or(Ok(0), |v| parse_num("jobs", v))?,
            run_id,
        })
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out.join(&self.manifest)
    }

    /// Directory holding the manifest; audio paths are relative to it.
    pub fn corpus_root(&self) -> PathBuf {
        self.manifest_path().parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out.join("features").join(format!("{}-{}", self.feature_kind.as_str(), self.norm.as_str()))
    }

    pub fn run_dir(&self) -> PathBuf {
        run_dir(&self.out, &self.run_id)
    }

    pub fn balance_mode(&self) -> BalanceMode {
        BalanceMode::from_gender_balance(self.gender_balance)
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec::build(self.model, self.conv_filters).expect("validated in resolve")
    }

    /// The settings that define a trained run, in config-file syntax.
    pub fn run_file(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# resolved settings of run {}", self.run_id);
        let _ = writeln!(s, "run_id = {}", self.run_id);
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "conv_filters = {}", self.conv_filters);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "gender_balance = {}", if self.gender_balance { "on" } else { "off" });
        let _ = writeln!(s, "feature_kind = {}", self.feature_kind.as_str());
        let _ = writeln!(s, "norm = {}", self.norm);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        s
    }
}

pub fn run_dir(out: &Path, run_id: &str) -> PathBuf {
    out.join("runs").join(run_id)
}
