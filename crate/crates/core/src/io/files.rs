//! CSV and JSON file formats.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Mesh, Zone};
use crate::model::{InsituObs, SatelliteObs};

pub const INSITU_HEADER: &[&str] = &["site_id", "x", "y", "t", "value"];
pub const SATELLITE_HEADER: &[&str] = &["block_id", "t", "value"];
pub const GRID_HEADER: &[&str] = &["x0", "y0", "dx", "dy", "nx", "ny"];
pub const TRUTH_HEADER: &[&str] = &["location_id", "x", "y", "t", "value"];
pub const TARGET_HEADER: &[&str] = &["x", "y", "t"];
pub const PREDICTION_HEADER: &[&str] = &["kind", "id", "x", "y", "t", "mean", "sd", "q025", "q975"];

/// Latent surface value at a held-out location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub location_id: usize,
    pub x: f64,
    pub y: f64,
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub x: f64,
    pub y: f64,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionKind {
    /// Latent surface at a mesh vertex.
    Vertex,
    /// Latent surface at a held-out or requested point.
    Point,
    /// Satellite value for a block-day with no observation.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub kind: PredictionKind,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub t: usize,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Maps a `csv` error to a file/line/column error.
pub fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let (column, message) = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => (err.field().map(|f| f + 1).unwrap_or(0), err.kind().to_string()),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => (
            (*len).min(*expected_len) + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => (0, e.to_string()),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        _ => Error::Parse {
            file: path.to_path_buf(),
            line,
            column,
            message,
        },
    }
}

/// Reads all rows, requiring exactly `header`.
pub fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    for (k, want) in header.iter().enumerate() {
        if found.get(k) != Some(want) {
            return Err(Error::Parse {
                file: path.to_path_buf(),
                line: 1,
                column: k as u64 + 1,
                message: format!("expected header '{}'", header.join(",")),
            });
        }
    }
    if found.len() != header.len() {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line: 1,
            column: header.len() as u64 + 1,
            message: format!("expected header '{}'", header.join(",")),
        });
    }
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

/// Writes rows under `header`. Floats use the shortest representation that
/// reads back to the same value.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_insitu(path: &Path) -> Result<Vec<InsituObs>> {
    read_csv(path, INSITU_HEADER)
}

pub fn write_insitu(path: &Path, rows: &[InsituObs]) -> Result<()> {
    write_csv(path, INSITU_HEADER, rows)
}

pub fn read_satellite(path: &Path) -> Result<Vec<SatelliteObs>> {
    read_csv(path, SATELLITE_HEADER)
}

pub fn write_satellite(path: &Path, rows: &[SatelliteObs]) -> Result<()> {
    write_csv(path, SATELLITE_HEADER, rows)
}

pub fn read_grid(path: &Path) -> Result<GridSpec> {
    let rows: Vec<GridSpec> = read_csv(path, GRID_HEADER)?;
    match rows.as_slice() {
        [g] if g.nx > 0 && g.ny > 0 && g.dx > 0.0 && g.dy > 0.0 => Ok(*g),
        [_] => Err(Error::Parse {
            file: path.to_path_buf(),
            line: 2,
            column: 0,
            message: "grid needs positive cell sizes and counts".into(),
        }),
        _ => Err(Error::Parse {
            file: path.to_path_buf(),
            line: 2,
            column: 0,
            message: format!("expected exactly one grid row, found {}", rows.len()),
        }),
    }
}

pub fn write_grid(path: &Path, grid: &GridSpec) -> Result<()> {
    write_csv(path, GRID_HEADER, &[*grid])
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    read_csv(path, TRUTH_HEADER)
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<()> {
    write_csv(path, TRUTH_HEADER, rows)
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetRow>> {
    read_csv(path, TARGET_HEADER)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    read_csv(path, PREDICTION_HEADER)
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_csv(path, PREDICTION_HEADER, rows)
}

/// Triangulation as written by `mesh` and `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    pub outer_pad: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub zone: Vec<Zone>,
}

impl MeshFile {
    pub fn from_mesh(m: &Mesh) -> Self {
        MeshFile {
            max_edge_inner: m.max_edge_inner(),
            max_edge_outer: m.max_edge_outer(),
            outer_pad: m.outer_pad(),
            vertices: m.vertices().to_vec(),
            triangles: m.triangles().to_vec(),
            zone: m.zone().to_vec(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })
}
