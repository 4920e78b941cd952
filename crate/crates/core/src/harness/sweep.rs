use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{validate_config, ConfigIssue};
use super::run::{run_experiment, StageError};

/// Splits `path=v1,v2,...`. Each value is read as JSON when it parses and as
/// a plain string otherwise.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<Value>), ConfigIssue> {
    let bad = |m: &str| ConfigIssue {
        path: "--vary".into(),
        message: m.into(),
    };
    let (path, list) = spec.split_once('=').ok_or_else(|| bad("expected <path>=<list>"))?;
    if path.trim().is_empty() {
        return Err(bad("empty path"));
    }
    let values: Vec<Value> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect();
    if values.is_empty() {
        return Err(bad("no values"));
    }
    Ok((path.trim().to_string(), values))
}

/// Sets `doc[path] = value` for a dotted path with optional `[i]` indices,
/// creating intermediate objects as needed.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = doc;
    for part in path.split('.') {
        let (key, indices) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !key.is_empty() {
            let obj = cur.as_object_mut().ok_or_else(|| format!("{path}: {key} is not inside an object"))?;
            cur = obj.entry(key.to_string()).or_insert(Value::Object(Default::default()));
        }
        for idx in indices.split('[').skip(1) {
            let i: usize = idx
                .strip_suffix(']')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("{path}: bad index [{idx}"))?;
            let arr = cur.as_array_mut().ok_or_else(|| format!("{path}: not an array"))?;
            let len = arr.len();
            cur = arr.get_mut(i).ok_or_else(|| format!("{path}: index {i} out of range ({len})"))?;
        }
    }
    *cur = value;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: Value,
    pub seed: u64,
    pub dir: PathBuf,
    pub accuracy: f64,
    pub delta_acc: f64,
    pub epoch0_gap: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("point {index}: invalid configuration")]
    Config { index: usize, issues: Vec<ConfigIssue> },
    #[error("point {index}: {source}")]
    Run {
        index: usize,
        #[source]
        source: StageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const SWEEP_SUMMARY: &str = "sweep.csv";

/// Runs one experiment per value under `out/point_NNN`, with seed
/// `base seed + index`, and writes `out/sweep.csv`.
pub fn sweep(base: &Value, path: &str, values: &[Value], out: &Path) -> Result<Vec<SweepPoint>, SweepError> {
    let base_seed = base.get("seed").and_then(Value::as_u64);
    let mut points = Vec::with_capacity(values.len());
    for (index, v) in values.iter().enumerate() {
        let mut doc = base.clone();
        let path_issue = |message: String| SweepError::Config {
            index,
            issues: vec![ConfigIssue {
                path: path.to_string(),
                message,
            }],
        };
        set_path(&mut doc, path, v.clone()).map_err(path_issue)?;
        if let Some(s) = base_seed {
            doc["seed"] = Value::from(s.wrapping_add(index as u64));
        }
        let cfg = validate_config(&doc.to_string()).map_err(|issues| SweepError::Config { index, issues })?;
        let dir = out.join(format!("point_{index:03}"));
        let art = run_experiment(&cfg, &dir).map_err(|source| SweepError::Run { index, source })?;
        let r = &art.result;
        points.push(SweepPoint {
            index,
            value: v.clone(),
            seed: cfg.seed,
            dir,
            accuracy: r.evaluation.accuracy.to_f64(),
            delta_acc: r.fairness.first().map_or(0.0, |f| f.delta_acc),
            epoch0_gap: r.asymmetry.epoch0_gap,
        });
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = w.write_record(["index", "value", "seed", "accuracy", "delta_acc", "epoch0_gap"]);
    for p in &points {
        let _ = w.write_record([
            p.index.to_string(),
            p.value.to_string(),
            p.seed.to_string(),
            p.accuracy.to_string(),
            p.delta_acc.to_string(),
            p.epoch0_gap.to_string(),
        ]);
    }
    fs::write(out.join(SWEEP_SUMMARY), w.into_inner().map_err(|e| e.into_error())?)?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn vary_parsing() {
        let (p, v) = parse_vary("dataset.spurious_strength=0.5,0.95").unwrap();
        assert_eq!(p, "dataset.spurious_strength");
        assert_eq!(v, vec![json!(0.5), json!(0.95)]);
        let (_, v) = parse_vary("training.loss=tet,mean_ce").unwrap();
        assert_eq!(v, vec![json!("tet"), json!("mean_ce")]);
        assert!(parse_vary("nothing").is_err());
        assert!(parse_vary("a=").is_err());
    }

    #[test]
    fn nested_set() {
        let mut doc = json!({"deployment": {"profiles": [{"timesteps": 4}, {"timesteps": 2}]}});
        set_path(&mut doc, "deployment.profiles[1].timesteps", json!(1)).unwrap();
        assert_eq!(doc["deployment"]["profiles"][1]["timesteps"], 1);
        set_path(&mut doc, "model.timesteps", json!(2)).unwrap();
        assert_eq!(doc["model"]["timesteps"], 2);
        assert!(set_path(&mut doc, "deployment.profiles[5].timesteps", json!(1)).is_err());
    }

    #[test]
    fn sweep_points_get_offset_seeds() {
        let base = json!({
            "seed": 10,
            "dataset": {"kind": "synthetic", "group_proportions": [0.5, 0.5], "spurious_strength": 0.5,
                        "train_size": 40, "test_size": 40},
            "model": {"hidden": [4]},
            "training": {"epochs": 1}
        });
        let dir = tempfile::tempdir().unwrap();
        let pts = sweep(&base, "dataset.spurious_strength", &[json!(0.5), json!(0.9)], dir.path()).unwrap();
        assert_eq!(pts.iter().map(|p| p.seed).collect::<Vec<_>>(), vec![10, 11]);
        assert!(dir.path().join("point_001/manifest.json").is_file());
        assert_eq!(fs::read_to_string(dir.path().join(SWEEP_SUMMARY)).unwrap().lines().count(), 3);
    }
}
