//! On-disk formats.
//!
//! * Grid: `<id>.f32`, 4096 little-endian IEEE-754 `f32`, row-major (16384 bytes).
//! * Stack: `n` grids concatenated in the same layout.
//! * Manifest: UTF-8 JSON Lines, one [`ManifestRecord`] per line. Grid paths
//!   are resolved relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PressureGrid, GRID_PIXELS};
use crate::sample::{validate_id, Condition, OutlierLabel, Sample, Side, Source};

pub const GRID_BYTES: usize = GRID_PIXELS * 4;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub subject_id: String,
    pub side: Side,
    pub condition: Condition,
    pub label: OutlierLabel,
    pub source: Source,
    pub grid_path: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            validate_id(&r.id)?;
            if r.subject_id.is_empty() {
                return Err(Error::Validation(format!("record {} has empty subject_id", r.id)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id {}", r.id)));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::DataFormat(format!("manifest line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetManifest { records })
    }
}

pub fn encode_grid_values(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_grid_values(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn write_grid(path: &Path, grid: &PressureGrid) -> Result<()> {
    fs::write(path, encode_grid_values(grid.as_slice())).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<PressureGrid> {
    let values = read_field(path)?;
    PressureGrid::from_values(values)
        .map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))
}

/// Reads a raw 64×64 `f32` field without range checks (attribution maps are signed).
pub fn read_field(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != GRID_BYTES {
        return Err(Error::DataFormat(format!(
            "{}: expected {GRID_BYTES} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values = decode_grid_values(&bytes);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataFormat(format!("{}: non-finite value", path.display())));
    }
    Ok(values)
}

pub fn write_field(path: &Path, values: &[f32]) -> Result<()> {
    if values.len() != GRID_PIXELS {
        return Err(Error::DataFormat(format!("field has {} values", values.len())));
    }
    fs::write(path, encode_grid_values(values)).map_err(|e| Error::io(path, e))
}

pub fn write_stack(path: &Path, grids: &[PressureGrid]) -> Result<()> {
    let mut bytes = Vec::with_capacity(grids.len() * GRID_BYTES);
    for g in grids {
        bytes.extend(encode_grid_values(g.as_slice()));
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_stack(path: &Path) -> Result<Vec<PressureGrid>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % GRID_BYTES != 0 {
        return Err(Error::DataFormat(format!(
            "{}: stack size {} is not a positive multiple of {GRID_BYTES}",
            path.display(),
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(GRID_BYTES)
        .map(|c| PressureGrid::from_values(decode_grid_values(c)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))
}

/// Writes `<id>.f32` for every sample plus `manifest.jsonl` into `dir`.
pub fn save_dataset(samples: &[Sample], dir: &Path) -> Result<DatasetManifest> {
    let manifest = DatasetManifest {
        records: samples
            .iter()
            .map(|s| ManifestRecord {
                id: s.id.clone(),
                subject_id: s.subject_id.clone(),
                side: s.side,
                condition: s.condition,
                label: s.label,
                source: s.source,
                grid_path: format!("{}.f32", s.id),
            })
            .collect(),
    };
    manifest.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in samples {
        write_grid(&dir.join(format!("{}.f32", s.id)), &s.grid)?;
    }
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(manifest.to_jsonl()?.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
            Error::DataFormat(format!("{} line {}: {e}", path.display(), n + 1))
        })?;
        records.push(rec);
    }
    let manifest = DatasetManifest { records };
    manifest.validate()?;
    Ok(manifest)
}

/// Loads a manifest file and all grids it references.
pub fn load_manifest(path: &Path) -> Result<Vec<Sample>> {
    let manifest = read_manifest(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest
        .records
        .into_iter()
        .map(|r| {
            let grid_path: PathBuf = base.join(&r.grid_path);
            let grid = read_grid(&grid_path).map_err(|e| match e {
                Error::Io { source, .. } => Error::DataFormat(format!(
                    "sample {}: cannot read {}: {source}",
                    r.id,
                    grid_path.display()
                )),
                other => Error::DataFormat(format!("sample {}: {other}", r.id)),
            })?;
            Ok(Sample {
                id: r.id,
                subject_id: r.subject_id,
                side: r.side,
                condition: r.condition,
                label: r.label,
                source: r.source,
                grid,
            })
        })
        .collect()
}

/// Loads `dir/manifest.jsonl` and its grids.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    load_manifest(&dir.join(MANIFEST_FILE))
}
