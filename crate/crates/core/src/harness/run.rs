use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DatasetConfig, ExperimentConfig, PerturbationConfig, Transform};
use crate::bias::{clean_filter, color_shift_dataset, gen_synthetic, grayscale_dataset, load_directory_dataset, Dataset};
use crate::deploy::{degradation_report, DegradationTable, EvalSpec};
use crate::error::{Error, Result};
use crate::fairness::{fairness_reports, write_reports_csv, FairnessReport};
use crate::snn::{checkpoint, cosine_lr, evaluate, train_epoch, Evaluation, Model, Sgd};
use crate::trajectory::{AsymmetryReport, Trajectory};

/// Independent substreams of the experiment seed.
pub mod streams {
    pub const TRAIN_DATA: u64 = 1;
    pub const TEST_DATA: u64 = 2;
    pub const MODEL: u64 = 3;
    pub const EVAL: u64 = 4;
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Setup,
    Generate,
    Perturb,
    Train,
    Evaluate,
    Deploy,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        write!(f, "{}", s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn at<T>(stage: Stage, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|source| StageError { stage, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub mean_penalty: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Everything a run computes, kept in memory.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub model: Model,
    pub train: Dataset,
    pub test: Dataset,
    pub evaluation: Evaluation,
    pub fairness: Vec<FairnessReport>,
    pub trajectory: Trajectory,
    pub asymmetry: AsymmetryReport,
    pub degradation: Option<DegradationTable>,
    pub log: Vec<EpochLog>,
}

fn with_classes(d: Dataset, classes: usize) -> Result<Dataset> {
    let (len, shape) = (d.feature_len(), d.shape());
    Dataset::new(d.samples().to_vec(), len, shape, classes)
}

/// Generates or loads both splits (no perturbation).
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.dataset {
        DatasetConfig::Synthetic(s) => {
            let train = gen_synthetic(
                &s.bias_spec(derive_seed(cfg.seed, streams::TRAIN_DATA)),
                s.train_size,
                &s.geometry,
            )?;
            let test = gen_synthetic(
                &s.bias_spec(derive_seed(cfg.seed, streams::TEST_DATA)),
                s.test_size,
                &s.geometry,
            )?;
            Ok((train, test))
        }
        DatasetConfig::Directory(d) => {
            let train = with_classes(load_directory_dataset(&d.train.root, &d.train.manifest)?, d.classes)?;
            let test = with_classes(load_directory_dataset(&d.test.root, &d.test.manifest)?, d.classes)?;
            if train.feature_len() != test.feature_len() {
                return Err(Error::dim("test features", train.feature_len(), test.feature_len()));
            }
            Ok((train, test))
        }
    }
}

/// Cleaning, then the transform.
pub fn perturb(data: &Dataset, p: &PerturbationConfig) -> Result<Dataset> {
    let cleaned = match &p.clean {
        Some(th) => clean_filter(data, th)?.kept,
        None => data.clone(),
    };
    match p.transform {
        Transform::None => Ok(cleaned),
        Transform::Grayscale => grayscale_dataset(&cleaned),
        Transform::ColorShift {
            hue_delta,
            saturation_scale,
        } => color_shift_dataset(&cleaned, hue_delta, saturation_scale),
    }
}

/// Generate, perturb, train, evaluate and degrade, all in memory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> std::result::Result<RunResult, StageError> {
    let (mut train, mut test) = at(Stage::Generate, load_data(cfg))?;
    let p = &cfg.perturbation;
    if p.apply_to.covers_train() {
        train = at(Stage::Perturb, perturb(&train, p))?;
    }
    if p.apply_to.covers_test() {
        test = at(Stage::Perturb, perturb(&test, p))?;
    }

    let t = cfg.model.timesteps;
    let eval_seed = derive_seed(cfg.seed, streams::EVAL);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::MODEL));
    let mut sizes = vec![train.feature_len()];
    sizes.extend(&cfg.model.hidden);
    sizes.push(cfg.dataset.classes());
    let mut model = at(Stage::Train, Model::new(&sizes, cfg.model.lif, &mut rng))?;
    let mut trajectory = at(Stage::Evaluate, Trajectory::new(test.roster()))?;
    let hyper = cfg.training.hyper(t);
    let mut opt = Sgd::new(&model, hyper.momentum);
    let mut log = Vec::with_capacity(cfg.training.epochs);

    let epochs = cfg.training.epochs;
    let evaluation = if epochs == 0 {
        let ev = at(Stage::Evaluate, evaluate(&model, &test, t, eval_seed))?;
        at(Stage::Evaluate, trajectory.record_epoch(0, &ev.acc_by_group))?;
        ev
    } else {
        let mut last = None;
        for e in 0..epochs {
            let lr = cosine_lr(hyper.learning_rate, e, epochs);
            let st = at(
                Stage::Train,
                train_epoch(&mut model, &mut opt, &train, &test, &hyper, lr, eval_seed, &mut rng),
            )?;
            at(Stage::Evaluate, trajectory.record_epoch(e, &st.holdout.acc_by_group))?;
            log.push(EpochLog {
                epoch: e,
                learning_rate: lr,
                mean_loss: st.mean_loss,
                mean_penalty: st.mean_penalty,
                train_accuracy: st.train_accuracy.to_f64(),
                test_accuracy: st.holdout.accuracy.to_f64(),
            });
            last = Some(st.holdout);
        }
        last.expect("at least one epoch")
    };

    let ev_cfg = &cfg.evaluation;
    let mut fairness = at(
        Stage::Evaluate,
        fairness_reports(
            &evaluation.predictions,
            &test.labels(),
            &test.groups(),
            test.classes(),
            ev_cfg.positive_class,
            &ev_cfg.metrics,
        ),
    )?;
    if let Some(f) = &cfg.training.fairness {
        fairness = fairness.into_iter().map(|r| r.with_tolerances(f)).collect();
    }
    let asymmetry = at(Stage::Evaluate, trajectory.analyze(ev_cfg.collapse_delta))?;

    let degradation = if cfg.deployment.profiles.is_empty() {
        None
    } else {
        let spec = EvalSpec {
            train_timesteps: t,
            seed: eval_seed,
            positive_class: ev_cfg.positive_class,
            metrics: &ev_cfg.metrics,
        };
        Some(at(
            Stage::Deploy,
            degradation_report(&model, &test, &cfg.deployment.profiles, &spec),
        )?)
    };

    Ok(RunResult {
        config: cfg.clone(),
        model,
        train,
        test,
        evaluation,
        fairness,
        trajectory,
        asymmetry,
        degradation,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub role: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub manifest: Vec<ManifestEntry>,
    pub result: RunResult,
}

impl RunArtifacts {
    /// Hash of the manifest file itself.
    pub fn manifest_sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(fs::read(self.dir.join(MANIFEST_FILE))?)))
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    stage: Stage,
    message: String,
    causes: Vec<String>,
    seed: u64,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
    manifest: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, role: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, bytes)?;
        self.manifest.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            role: role.to_string(),
        });
        Ok(())
    }

    fn rollback(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_all(w: &mut Writer<'_>, r: &RunResult) -> Result<()> {
    // The echoed config omits the output location so that the same
    // experiment hashes identically wherever it is written.
    let echoed = ExperimentConfig {
        output_dir: None,
        ..r.config.clone()
    };
    w.put("config.resolved.json", "config", echoed.to_json().as_bytes())?;
    w.put(
        "fairness_report.json",
        "fairness",
        serde_json::to_string_pretty(&r.fairness)?.as_bytes(),
    )?;
    w.put(
        "fairness_report.csv",
        "fairness",
        &csv_bytes(|b| write_reports_csv(&r.fairness, b))?,
    )?;
    w.put("trajectory.csv", "trajectory", &csv_bytes(|b| r.trajectory.write_csv(b))?)?;
    w.put("asymmetry_report.json", "asymmetry", r.asymmetry.to_json()?.as_bytes())?;
    w.put("training_log.csv", "plot", &csv_bytes(|b| write_log(&r.log, b))?)?;
    if let Some(d) = &r.degradation {
        w.put("degradation.json", "degradation", d.to_json()?.as_bytes())?;
        w.put("degradation.csv", "degradation", &csv_bytes(|b| d.write_csv(b))?)?;
    }
    w.put("model.sfck", "model", &checkpoint::encode(&r.model))?;
    let manifest = serde_json::to_string_pretty(&w.manifest)?;
    w.written.push(w.dir.join(MANIFEST_FILE));
    fs::write(w.dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

fn write_log(log: &[EpochLog], out: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "epoch",
        "learning_rate",
        "mean_loss",
        "mean_penalty",
        "train_accuracy",
        "test_accuracy",
    ])?;
    for l in log {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the pipeline and writes its artifacts into `dir`, which must be
/// absent or empty. On failure partial outputs are removed and only
/// `error.json` is left behind.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> std::result::Result<RunArtifacts, StageError> {
    let setup = || -> Result<()> {
        if dir.exists() {
            if fs::read_dir(dir)?.next().is_some() {
                return Err(Error::Config(format!("output directory {} is not empty", dir.display())));
            }
        } else {
            fs::create_dir_all(dir)?;
        }
        Ok(())
    };
    // A non-empty directory belongs to someone else: do not write into it.
    at(Stage::Setup, setup())?;

    let outcome = run_pipeline(cfg).and_then(|result| {
        let mut w = Writer {
            dir,
            written: Vec::new(),
            manifest: Vec::new(),
        };
        match write_all(&mut w, &result) {
            Ok(()) => Ok(RunArtifacts {
                dir: dir.to_path_buf(),
                manifest: w.manifest,
                result,
            }),
            Err(source) => {
                w.rollback();
                Err(StageError {
                    stage: Stage::Report,
                    source,
                })
            }
        }
    });
    if let Err(e) = &outcome {
        let mut causes = Vec::new();
        let mut src = std::error::Error::source(&e.source);
        while let Some(s) = src {
            causes.push(s.to_string());
            src = s.source();
        }
        let record = ErrorRecord {
            stage: e.stage,
            message: e.source.to_string(),
            causes,
            seed: cfg.seed,
        };
        let _ = fs::write(
            dir.join(ERROR_FILE),
            serde_json::to_string_pretty(&record).expect("error record serializes"),
        );
    }
    outcome
}

/// Reads a run directory back, checking every manifest hash.
pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let manifest: Vec<ManifestEntry> = serde_json::from_slice(&fs::read(&path)?)?;
    for m in &manifest {
        let bytes = fs::read(dir.join(&m.path)).map_err(|_| Error::MissingFile(dir.join(&m.path)))?;
        let actual = hex::encode(Sha256::digest(&bytes));
        if actual != m.sha256 {
            return Err(Error::Malformed {
                path: dir.join(&m.path),
                line: 0,
                message: format!("sha256 {actual} does not match the manifest"),
            });
        }
    }
    Ok(manifest)
}

/// The reports of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fairness: Vec<FairnessReport>,
    pub asymmetry: AsymmetryReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationTable>,
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    let manifest = read_manifest(dir)?;
    let read = |name: &str| -> Result<Vec<u8>> { Ok(fs::read(dir.join(name))?) };
    let has = |name: &str| manifest.iter().any(|m| m.path == name);
    Ok(RunSummary {
        fairness: serde_json::from_slice(&read("fairness_report.json")?)?,
        asymmetry: serde_json::from_slice(&read("asymmetry_report.json")?)?,
        degradation: if has("degradation.json") {
            Some(serde_json::from_slice(&read("degradation.json")?)?)
        } else {
            None
        },
    })
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per positive-class orientation: the fairness columns plus
    /// the trajectory diagnostics.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        if let Some(first) = self.fairness.first() {
            let mut h = first.csv_header();
            h.extend(["epoch0_gap", "collapse_events", "effort_ratio"].map(String::from));
            w.write_record(h)?;
        }
        let a = &self.asymmetry;
        for r in &self.fairness {
            let mut row = r.csv_fields();
            row.push(a.epoch0_gap.to_string());
            row.push(a.collapse_events.len().to_string());
            row.push(a.effort_ratio.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
