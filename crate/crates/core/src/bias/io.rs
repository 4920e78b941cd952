//! On-disk datasets: a manifest CSV (`path,Y,A,provenance`) next to one
//! feature file per sample.
//!
//! Feature files are either PNG images or raw blobs:
//!
//! ```text
//! "SFFB" | version u32 | height u32 | width u32 | channels u32 | f64 values (LE)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::dataset::{Dataset, ImageShape, LabeledSample, Provenance};
use crate::error::{Error, Result};
use crate::fairness::GroupId;

const BLOB_MAGIC: &[u8; 4] = b"SFFB";
const BLOB_VERSION: u32 = 1;
pub const MANIFEST_HEADER: [&str; 4] = ["path", "Y", "A", "provenance"];

pub fn write_blob(path: &Path, shape: ImageShape, features: &[f64]) -> Result<()> {
    if features.len() != shape.len() {
        return Err(Error::dim("blob features", shape.len(), features.len()));
    }
    let mut buf = Vec::with_capacity(20 + 8 * features.len());
    buf.extend_from_slice(BLOB_MAGIC);
    for v in [BLOB_VERSION, shape.height as u32, shape.width as u32, shape.channels as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in features {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_blob(path: &Path) -> Result<(ImageShape, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| Error::Malformed {
        path: path.to_path_buf(),
        line: 0,
        message: m.to_string(),
    };
    if bytes.len() < 20 || &bytes[..4] != BLOB_MAGIC {
        return Err(bad("not a feature blob"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    if word(0) != BLOB_VERSION {
        return Err(bad("unsupported blob version"));
    }
    let shape = ImageShape {
        height: word(1) as usize,
        width: word(2) as usize,
        channels: word(3) as usize,
    };
    let body = &bytes[20..];
    if body.len() != 8 * shape.len() {
        return Err(bad("blob length does not match its header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((shape, values))
}

fn read_features(path: &Path) -> Result<(ImageShape, Vec<f64>)> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let img = image::open(path)?.to_rgb8();
        let shape = ImageShape {
            height: img.height() as usize,
            width: img.width() as usize,
            channels: 3,
        };
        Ok((shape, img.as_raw().iter().map(|&b| b as f64 / 255.0).collect()))
    } else {
        read_blob(path)
    }
}

/// Loads every manifest row in order. Fails without returning partial data if
/// any row is malformed or references a missing or unreadable file.
pub fn load_directory_dataset(root: &Path, manifest: &Path) -> Result<Dataset> {
    let manifest_path = if manifest.is_absolute() {
        manifest.to_path_buf()
    } else {
        root.join(manifest)
    };
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(&manifest_path)?;
    let malformed = |line: usize, message: String| Error::Malformed {
        path: manifest_path.clone(),
        line,
        message,
    };

    let mut rows: Vec<(PathBuf, usize, u32)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != 3 && record.len() != 4 {
            return Err(malformed(line, format!("expected 3 or 4 fields, found {}", record.len())));
        }
        let label = record[1]
            .trim()
            .parse::<usize>()
            .map_err(|e| malformed(line, format!("label {:?}: {e}", &record[1])))?;
        let group = record[2]
            .trim()
            .parse::<u32>()
            .map_err(|e| malformed(line, format!("group {:?}: {e}", &record[2])))?;
        if record.len() == 4 && Provenance::parse(record[3].trim()).is_none() {
            return Err(malformed(line, format!("unknown provenance {:?}", &record[3])));
        }
        let path = root.join(record[0].trim());
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        rows.push((path, label, group));
    }

    let Some(classes) = rows.iter().map(|r| r.1 + 1).max() else {
        return Ok(Dataset::empty(0, None, 0));
    };
    let mut shape: Option<ImageShape> = None;
    let mut samples = Vec::with_capacity(rows.len());
    for (path, label, group) in rows {
        let (s, mut features) = read_features(&path)?;
        match shape {
            None => shape = Some(s),
            Some(expected) if expected != s => {
                return Err(Error::Malformed {
                    path,
                    line: 0,
                    message: format!("shape {s:?} differs from {expected:?}"),
                })
            }
            _ => {}
        }
        features.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        samples.push(LabeledSample {
            features,
            label,
            group: GroupId(group),
            provenance: Provenance::Ingested,
        });
    }
    let shape = shape.expect("at least one row");
    Dataset::new(samples, shape.len(), Some(shape), classes)
}

/// Writes `data` as blobs under `root/samples/` plus `root/manifest.csv`.
pub fn save_directory_dataset(data: &Dataset, root: &Path) -> Result<PathBuf> {
    let shape = data.shape().unwrap_or(ImageShape {
        height: 1,
        width: data.feature_len(),
        channels: 1,
    });
    fs::create_dir_all(root.join("samples"))?;
    let manifest = root.join("manifest.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(fs::File::create(&manifest)?));
    w.write_record(MANIFEST_HEADER)?;
    for (i, s) in data.samples().iter().enumerate() {
        let rel = format!("samples/{i:06}.sfb");
        write_blob(&root.join(&rel), shape, &s.features)?;
        w.write_record([rel, s.label.to_string(), s.group.to_string(), s.provenance.as_str().to_string()])?;
    }
    w.flush()?;
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(manifest)
}
