//! On-disk dataset format: a flat binary series file plus a JSON sidecar.
//!
//! Series file layout: 8-byte magic `GPVARTS1`, little-endian `u32` T,
//! `u32` N, then `T * N` little-endian `f64` values in row-major order.
//! The sidecar records everything needed to reproduce and consume the
//! series: seeds, the generating graph's edge list, the filter
//! coefficients and the split boundaries.

use std::fs;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpvar::{GpvarParams, TimeSeries};
use crate::graph::BinaryAdjacency;

pub const SERIES_MAGIC: &[u8; 8] = b"GPVARTS1";
pub const SERIES_FILE: &str = "data.bin";
pub const SIDECAR_FILE: &str = "sidecar.json";

/// Contiguous index ranges of the train/validation/test splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: [usize; 2],
    pub val: [usize; 2],
    pub test: [usize; 2],
}

impl SplitBounds {
    /// Split `[0, length)` by fractions (train, val); the test split takes
    /// the remainder.
    pub fn from_fractions(length: usize, train_frac: f64, val_frac: f64) -> Self {
        let train_end = (length as f64 * train_frac).round() as usize;
        let val_end = (length as f64 * (train_frac + val_frac)).round() as usize;
        Self {
            train: [0, train_end],
            val: [train_end, val_end],
            test: [val_end, length],
        }
    }

    pub fn train_range(&self) -> Range<usize> {
        self.train[0]..self.train[1]
    }

    pub fn val_range(&self) -> Range<usize> {
        self.val[0]..self.val[1]
    }

    pub fn test_range(&self) -> Range<usize> {
        self.test[0]..self.test[1]
    }
}

/// JSON sidecar accompanying the binary series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub graph_seed: u64,
    pub series_seed: u64,
    pub n_nodes: usize,
    pub length: usize,
    /// Directed `(target, source)` pairs of the generating graph.
    pub edges: Vec<(usize, usize)>,
    /// Filter coefficients, `(L + 1) x Q` nested rows.
    pub theta: Vec<Vec<f64>>,
    pub splits: SplitBounds,
}

impl Sidecar {
    pub fn graph(&self) -> Result<BinaryAdjacency> {
        BinaryAdjacency::from_edges(self.n_nodes, &self.edges)
    }

    pub fn params(&self) -> Result<GpvarParams> {
        let rows = self.theta.len();
        let cols = self.theta.first().map(Vec::len).unwrap_or(0);
        if rows == 0 || cols == 0 || self.theta.iter().any(|r| r.len() != cols) {
            return Err(Error::Data("sidecar theta is not rectangular".into()));
        }
        let flat: Vec<f64> = self.theta.iter().flatten().copied().collect();
        let theta = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| Error::Data(e.to_string()))?;
        GpvarParams::new(theta)
    }
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let t = series.len();
    let n = series.n_nodes();
    if t > u32::MAX as usize || n > u32::MAX as usize {
        return Err(Error::Data("series dimensions exceed the u32 header".into()));
    }
    let mut buf = Vec::with_capacity(16 + 8 * t * n);
    buf.extend_from_slice(SERIES_MAGIC);
    buf.extend_from_slice(&(t as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for v in series.values.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != SERIES_MAGIC {
        return Err(Error::Data(format!("{} is not a series file", path.display())));
    }
    let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + 8 * t * n;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "series file length {} does not match header ({expected} expected)",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(t * n);
    for chunk in bytes[16..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let values = Array2::from_shape_vec((t, n), values).map_err(|e| Error::Data(e.to_string()))?;
    Ok(TimeSeries { values })
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad sidecar: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_roundtrip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SERIES_FILE);
        let series = TimeSeries {
            values: Array2::from_shape_fn((30, 4), |(t, i)| (t as f64) + 0.25 * i as f64),
        };
        write_series(&path, &series).unwrap();
        let on_disk = fs::metadata(&path).unwrap().len();
        assert_eq!(on_disk, 8 + 8 + 30 * 4 * 8);
        let back = read_series(&path).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        fs::write(&path, b"not a series").unwrap();
        assert!(read_series(&path).is_err());
    }

    #[test]
    fn split_fractions() {
        let splits = SplitBounds::from_fractions(30_000, 0.7, 0.1);
        assert_eq!(splits.train, [0, 21_000]);
        assert_eq!(splits.val, [21_000, 24_000]);
        assert_eq!(splits.test, [24_000, 30_000]);
    }
}
