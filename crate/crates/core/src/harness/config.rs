use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bias::{BiasSpec, CleanThresholds, Geometry};
use crate::deploy::DeploymentProfile;
use crate::fairness::{Metric, ALL_METRICS};
use crate::snn::{FairPenaltyConfig, Hyper, LifConfig, LossMode};
use crate::trajectory::DEFAULT_COLLAPSE_DELTA;

/// A full experiment description. Everything except `seed` and `dataset`
/// has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub deployment: DeploymentConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic(SyntheticDataset),
    Directory(DirectoryDataset),
}

/// Bias knobs plus sizes. The generator seeds come from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    pub group_proportions: Vec<f64>,
    pub spurious_strength: f64,
    #[serde(default)]
    pub cue_channel: usize,
    #[serde(default = "one")]
    pub cue_class: usize,
    #[serde(default)]
    pub cue_groups: Option<Vec<u32>>,
    #[serde(default)]
    pub label_balance: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default = "default_split_size")]
    pub train_size: usize,
    #[serde(default = "default_split_size")]
    pub test_size: usize,
}

fn one() -> usize {
    1
}

fn default_noise() -> f64 {
    0.1
}

fn default_split_size() -> usize {
    2000
}

impl SyntheticDataset {
    pub fn bias_spec(&self, seed: u64) -> BiasSpec {
        BiasSpec {
            group_proportions: self.group_proportions.clone(),
            spurious_strength: self.spurious_strength,
            cue_channel: self.cue_channel,
            cue_class: self.cue_class,
            cue_groups: self.cue_groups.clone(),
            label_balance: self.label_balance.clone(),
            noise_std: self.noise_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectorySplit {
    pub root: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectoryDataset {
    pub train: DirectorySplit,
    pub test: DirectorySplit,
    pub classes: usize,
}

impl DatasetConfig {
    pub fn classes(&self) -> usize {
        match self {
            DatasetConfig::Synthetic(s) => s.geometry.classes,
            DatasetConfig::Directory(d) => d.classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub lif: LifConfig,
    pub timesteps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            lif: LifConfig::default(),
            timesteps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub loss: LossMode,
    pub fairness: Option<FairPenaltyConfig>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let h = Hyper::default();
        Self {
            epochs: 20,
            learning_rate: h.learning_rate,
            batch_size: h.batch_size,
            momentum: h.momentum,
            loss: h.loss,
            fairness: None,
        }
    }
}

impl TrainingConfig {
    pub fn hyper(&self, timesteps: usize) -> Hyper {
        Hyper {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            momentum: self.momentum,
            loss: self.loss,
            fairness: self.fairness,
            timesteps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// `None` reports every orientation.
    pub positive_class: Option<usize>,
    pub metrics: Vec<Metric>,
    /// Collapse threshold as a fraction of accuracy.
    pub collapse_delta: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            positive_class: None,
            metrics: ALL_METRICS.to_vec(),
            collapse_delta: DEFAULT_COLLAPSE_DELTA,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeploymentConfig {
    pub profiles: Vec<DeploymentProfile>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    Grayscale,
    ColorShift { hue_delta: f64, saturation_scale: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    #[default]
    Test,
    Both,
}

impl Split {
    pub fn covers_train(self) -> bool {
        matches!(self, Split::Train | Split::Both)
    }

    pub fn covers_test(self) -> bool {
        matches!(self, Split::Test | Split::Both)
    }
}

/// Cleaning runs first, then the transform, on the selected splits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub transform: Transform,
    pub apply_to: Split,
    pub clean: Option<CleanThresholds>,
}

/// One problem found in a config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    /// Dotted path into the document, e.g. `dataset.group_proportions`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        path: path.into(),
        message: message.into(),
    }
}

const SECTIONS: [&str; 8] = [
    "seed",
    "output_dir",
    "dataset",
    "model",
    "training",
    "evaluation",
    "deployment",
    "perturbation",
];

fn join(prefix: &str, inner: &str) -> String {
    if inner.is_empty() || inner == "." {
        prefix.to_string()
    } else if inner.starts_with('[') {
        format!("{prefix}{inner}")
    } else {
        format!("{prefix}.{inner}")
    }
}

/// Deserializes one top-level section, recording a type error with its path.
fn section<T: DeserializeOwned>(doc: &Map<String, Value>, key: &str, issues: &mut Vec<ConfigIssue>) -> Option<Option<T>> {
    let Some(v) = doc.get(key) else {
        return Some(None);
    };
    match serde_path_to_error::deserialize::<_, T>(v.clone()) {
        Ok(t) => Some(Some(t)),
        Err(e) => {
            issues.push(issue(join(key, &e.path().to_string()), e.inner().to_string()));
            None
        }
    }
}

/// Parses and checks a JSON config. On failure every problem found is
/// returned: one type error per section at most, plus all semantic checks on
/// sections that parsed.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| vec![issue("", format!("invalid JSON: {e}"))])?;
    let Value::Object(doc) = doc else {
        return Err(vec![issue("", "config must be a JSON object")]);
    };
    let mut issues = Vec::new();
    for key in doc.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            issues.push(issue(key.clone(), "unknown section"));
        }
    }
    let seed = section::<u64>(&doc, "seed", &mut issues);
    let output_dir = section::<Option<PathBuf>>(&doc, "output_dir", &mut issues);
    let dataset = section::<DatasetConfig>(&doc, "dataset", &mut issues);
    let model = section::<ModelConfig>(&doc, "model", &mut issues);
    let training = section::<TrainingConfig>(&doc, "training", &mut issues);
    let evaluation = section::<EvaluationConfig>(&doc, "evaluation", &mut issues);
    let deployment = section::<DeploymentConfig>(&doc, "deployment", &mut issues);
    let perturbation = section::<PerturbationConfig>(&doc, "perturbation", &mut issues);
    if matches!(seed, Some(None)) {
        issues.push(issue("seed", "missing; a seed is mandatory"));
    }
    if matches!(dataset, Some(None)) {
        issues.push(issue("dataset", "missing"));
    }

    let model = model.map(Option::unwrap_or_default);
    let training = training.map(Option::unwrap_or_default);
    let evaluation = evaluation.map(Option::unwrap_or_default);
    let deployment = deployment.map(Option::unwrap_or_default);
    let perturbation = perturbation.map(Option::unwrap_or_default);
    let dataset = dataset.flatten();
    let classes = dataset.as_ref().map(DatasetConfig::classes);

    if let Some(d) = &dataset {
        check_dataset(d, &mut issues);
    }
    if let Some(m) = &model {
        check_model(m, &mut issues);
    }
    if let Some(t) = &training {
        check_training(t, classes, &mut issues);
    }
    if let Some(e) = &evaluation {
        check_evaluation(e, classes, &mut issues);
    }
    if let (Some(d), Some(m)) = (&deployment, &model) {
        for (i, p) in d.profiles.iter().enumerate() {
            for (field, msg) in p.violations(m.timesteps) {
                issues.push(issue(format!("deployment.profiles[{i}].{field}"), msg));
            }
        }
    }
    if let Some(p) = &perturbation {
        check_perturbation(p, &mut issues);
    }

    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(ExperimentConfig {
        seed: seed.flatten().expect("checked above"),
        output_dir: output_dir.flatten().flatten(),
        dataset: dataset.expect("checked above"),
        model: model.expect("no issues"),
        training: training.expect("no issues"),
        evaluation: evaluation.expect("no issues"),
        deployment: deployment.expect("no issues"),
        perturbation: perturbation.expect("no issues"),
    })
}

fn check_dataset(d: &DatasetConfig, issues: &mut Vec<ConfigIssue>) {
    match d {
        DatasetConfig::Synthetic(s) => {
            if let Err(e) = s.geometry.validate() {
                issues.push(issue("dataset.geometry", e.to_string()));
            }
            for (field, msg) in s.bias_spec(0).violations(s.geometry.classes) {
                issues.push(issue(format!("dataset.{field}"), msg));
            }
            for (name, n) in [("train_size", s.train_size), ("test_size", s.test_size)] {
                if n == 0 {
                    issues.push(issue(format!("dataset.{name}"), "must be at least 1"));
                }
            }
        }
        DatasetConfig::Directory(d) => {
            if d.classes < 2 {
                issues.push(issue("dataset.classes", "at least 2 classes are required"));
            }
        }
    }
}

fn check_model(m: &ModelConfig, issues: &mut Vec<ConfigIssue>) {
    if m.timesteps == 0 {
        issues.push(issue("model.timesteps", "must be at least 1"));
    }
    for (i, &h) in m.hidden.iter().enumerate() {
        if h == 0 {
            issues.push(issue(format!("model.hidden[{i}]"), "layer width must be positive"));
        }
    }
    if let Err(e) = m.lif.validate() {
        issues.push(issue("model.lif", e.to_string()));
    }
}

fn check_training(t: &TrainingConfig, classes: Option<usize>, issues: &mut Vec<ConfigIssue>) {
    if !(t.learning_rate >= 0.0) || !t.learning_rate.is_finite() {
        issues.push(issue("training.learning_rate", "must be a non-negative number"));
    }
    if t.batch_size == 0 {
        issues.push(issue("training.batch_size", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&t.momentum) {
        issues.push(issue("training.momentum", "must be in [0, 1)"));
    }
    if let Some(f) = &t.fairness {
        if let Err(e) = f.validate() {
            issues.push(issue("training.fairness", e.to_string()));
        }
        if classes.is_some_and(|c| f.positive_class >= c) {
            issues.push(issue("training.fairness.positive_class", "no such class"));
        }
    }
}

fn check_evaluation(e: &EvaluationConfig, classes: Option<usize>, issues: &mut Vec<ConfigIssue>) {
    if let (Some(k), Some(c)) = (e.positive_class, classes) {
        if k >= c {
            issues.push(issue("evaluation.positive_class", format!("class {k} >= {c} classes")));
        }
    }
    if e.metrics.is_empty() {
        issues.push(issue("evaluation.metrics", "at least one metric is required"));
    }
    if !(e.collapse_delta >= 0.0) {
        issues.push(issue("evaluation.collapse_delta", "must be non-negative"));
    }
}

fn check_perturbation(p: &PerturbationConfig, issues: &mut Vec<ConfigIssue>) {
    if let Transform::ColorShift {
        hue_delta,
        saturation_scale,
    } = p.transform
    {
        if !hue_delta.is_finite() {
            issues.push(issue("perturbation.transform.hue_delta", "must be finite"));
        }
        if !(saturation_scale >= 0.0) || !saturation_scale.is_finite() {
            issues.push(issue("perturbation.transform.saturation_scale", "must be non-negative"));
        }
    }
    if let Some(c) = &p.clean {
        if let Err(e) = c.validate() {
            issues.push(issue("perturbation.clean", e.to_string()));
        }
    }
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Built-in configurations.
pub mod bundled {
    /// ρ = 0.95 cue planted in the majority group only; 0.8/0.2 split, T = 4,
    /// TET loss, 20 epochs, deployment sweep over T' in {4, 2, 1}.
    pub const SHORTCUT: &str = include_str!("../../configs/shortcut.json");

    pub fn get(name: &str) -> Option<&'static str> {
        match name {
            "shortcut" => Some(SHORTCUT),
            _ => None,
        }
    }
}
