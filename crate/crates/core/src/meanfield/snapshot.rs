//! Raw wavefunction dumps: a little-endian `f64` payload of interleaved
//! `(re, im)` pairs plus a JSON sidecar describing the grid.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, GridWavefunction, MeanFieldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub points: usize,
    pub extent: f64,
    pub t: f64,
    pub norm: f64,
    pub layout: String,
}

const LAYOUT: &str = "row-major, f64 little-endian, interleaved re/im";

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn write_snapshot(psi: &GridWavefunction, stem: &Path) -> Result<(), MeanFieldError> {
    let (bin, json) = paths(stem);
    let mut bytes = Vec::with_capacity(psi.psi.len() * 16);
    for z in &psi.psi {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    fs::write(bin, bytes)?;
    let header = SnapshotHeader {
        dim: psi.grid.dim(),
        points: psi.grid.points(),
        extent: psi.grid.extent(),
        t: psi.t,
        norm: psi.norm(),
        layout: LAYOUT.to_string(),
    };
    let text = serde_json::to_string_pretty(&header).map_err(|e| MeanFieldError::Io(e.to_string()))?;
    fs::write(json, text)?;
    Ok(())
}

pub fn read_snapshot(stem: &Path) -> Result<GridWavefunction, MeanFieldError> {
    let (bin, json) = paths(stem);
    let header: SnapshotHeader =
        serde_json::from_str(&fs::read_to_string(json)?).map_err(|e| MeanFieldError::Io(e.to_string()))?;
    let grid = GridSpec::new(header.dim, header.extent, header.points)?;
    let bytes = fs::read(bin)?;
    if bytes.len() != grid.len() * 16 {
        return Err(MeanFieldError::GridMismatch(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            grid.len() * 16
        )));
    }
    let psi = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    GridWavefunction::new(grid, psi, header.t)
}
