//! Raw binary dumps: little-endian `f64`, row-major (time-major), with a JSON
//! sidecar next to the data file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, FieldPath, GridSpec};
use crate::noise::WhiteNoiseLattice;
use crate::scalar::Real;

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpMeta {
    pub format_version: u32,
    /// `white_noise` or `field_path`.
    pub kind: String,
    pub length: f64,
    pub points: usize,
    pub dt: f64,
    pub steps: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub replica_id: u64,
    /// Free-form solver description (variant, level, options).
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl DumpMeta {
    fn new<T: Real>(
        kind: &str,
        grid: &GridSpec<T>,
        rows: usize,
        seed: u64,
        replica_id: u64,
        extra: serde_json::Value,
    ) -> Self {
        DumpMeta {
            format_version: DUMP_FORMAT_VERSION,
            kind: kind.into(),
            length: grid.length().as_f64(),
            points: grid.points(),
            dt: grid.dt().as_f64(),
            steps: grid.steps(),
            rows,
            cols: grid.points(),
            seed,
            replica_id,
            extra,
        }
    }

    pub fn grid(&self) -> Result<GridSpec<f64>> {
        make_grid(self.length, self.points, self.dt, self.steps)
    }
}

/// `data.bin` -> `data.bin.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_raw<T: Real>(path: &Path, values: &[T], meta: &DumpMeta) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fs::write(path, bytes).map_err(io(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta).map_err(|source| Error::Metadata {
        path: side.clone(),
        source,
    })?;
    fs::write(&side, json + "\n").map_err(io(&side))
}

pub fn write_noise_dump<T: Real>(path: &Path, noise: &WhiteNoiseLattice<T>) -> Result<()> {
    let meta = DumpMeta::new(
        "white_noise",
        noise.grid(),
        noise.grid().steps(),
        noise.seed(),
        noise.replica_id(),
        serde_json::Value::Null,
    );
    write_raw(path, noise.increments(), &meta)
}

pub fn write_path_dump<T: Real>(
    path: &Path,
    field: &FieldPath<T>,
    seed: u64,
    replica_id: u64,
    extra: serde_json::Value,
) -> Result<()> {
    let meta = DumpMeta::new(
        "field_path",
        field.grid(),
        field.grid().steps() + 1,
        seed,
        replica_id,
        extra,
    );
    write_raw(path, field.values(), &meta)
}

/// Reads a dump and its sidecar.
pub fn read_dump(path: &Path) -> Result<(DumpMeta, Vec<f64>)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io(&side))?;
    let meta: DumpMeta = serde_json::from_str(&text).map_err(|source| Error::Metadata {
        path: side.clone(),
        source,
    })?;
    let bytes = fs::read(path).map_err(io(path))?;
    if bytes.len() != meta.rows * meta.cols * 8 {
        return Err(Error::shape(meta.rows * meta.cols * 8, bytes.len()));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((meta, values))
}

/// Reloads a white-noise dump.
pub fn read_noise_dump(path: &Path) -> Result<WhiteNoiseLattice<f64>> {
    let (meta, values) = read_dump(path)?;
    WhiteNoiseLattice::from_increments(&meta.grid()?, meta.seed, meta.replica_id, values)
}
