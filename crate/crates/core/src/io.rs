//! Artifact formats: CSV tables with fixed float formatting and the `LDL1`
//! binary field dump.
//!
//! Floats are written as `{:.16e}` (17 significant digits) and lines end in
//! `\n`, so identical inputs produce identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::Grid;
use crate::scan::ScanReport;
use crate::stone::ComparisonRow;
use crate::wave::EnergyTrace;
use crate::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"LDL1";

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

pub fn scan_table(report: &ScanReport) -> CsvTable {
    let mut t = CsvTable::new(&[
        "re_lambda",
        "im_lambda",
        "norm",
        "grad_norm",
        "pole_flag",
        "cond",
        "method",
    ]);
    for s in &report.samples {
        t.push(vec![
            format_float(s.re_lambda),
            format_float(s.im_lambda),
            format_float(s.norm),
            s.grad_norm.map(format_float).unwrap_or_default(),
            s.pole_flag.to_string(),
            format_float(s.cond),
            s.method.name().to_string(),
        ]);
    }
    t
}

pub fn trace_table(trace: &EnergyTrace) -> CsvTable {
    let mut t = CsvTable::new(&["t", "local_energy", "global_energy"]);
    for ((time, l), g) in trace.times.iter().zip(&trace.local).zip(&trace.global) {
        t.push(vec![format_float(*time), format_float(*l), format_float(*g)]);
    }
    t
}

pub fn comparison_table(rows: &[ComparisonRow]) -> CsvTable {
    let mut t = CsvTable::new(&["t", "l2_discrepancy", "energy_discrepancy", "eps", "lambda_window"]);
    for r in rows {
        t.push(vec![
            format_float(r.t),
            format_float(r.l2_discrepancy),
            format_float(r.energy_discrepancy),
            format_float(r.eps),
            format_float(r.lambda_window),
        ]);
    }
    t
}

/// JSON written next to a field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub grid: Grid,
    pub t: f64,
    pub profile: String,
    pub component: String,
}

/// `LDL1`, then `u32` dimension, `dim × u64` shape, then `(re, im)` pairs of
/// `f64` in row-major order; all little-endian.
pub fn encode_field(grid: &Grid, values: &[Complex64]) -> Result<Vec<u8>> {
    if values.len() != grid.len() {
        return Err(Error::Length {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(8 + 8 * grid.dim() + 16 * values.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.per_axis() as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

/// Inverse of [`encode_field`]: the shape and the values.
pub fn decode_field(mut bytes: &[u8]) -> Result<(Vec<usize>, Vec<Complex64>)> {
    let bad = |what: &str| Error::Argument(format!("malformed field dump: {what}"));
    let mut magic = [0u8; 4];
    bytes.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != FIELD_MAGIC {
        return Err(bad("magic bytes"));
    }
    let mut word = [0u8; 4];
    bytes.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let dim = u32::from_le_bytes(word) as usize;
    if dim == 0 || dim > 3 {
        return Err(bad("dimension"));
    }
    let mut shape = Vec::with_capacity(dim);
    let mut long = [0u8; 8];
    for _ in 0..dim {
        bytes.read_exact(&mut long).map_err(|_| bad("truncated shape"))?;
        shape.push(u64::from_le_bytes(long) as usize);
    }
    let count: usize = shape.iter().product();
    if bytes.len() != 16 * count {
        return Err(bad("payload length"));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok((shape, values))
}

/// Writes `<stem>.ldl` and `<stem>.json`; returns both paths.
pub fn write_field(
    dir: &Path,
    stem: &str,
    grid: &Grid,
    values: &[Complex64],
    sidecar: &FieldSidecar,
) -> Result<[std::path::PathBuf; 2]> {
    let bin = dir.join(format!("{stem}.ldl"));
    let json = dir.join(format!("{stem}.json"));
    let bytes = encode_field(grid, values)?;
    let mut f = fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&bin, e))?;
    write_json(&json, sidecar)?;
    Ok([bin, json])
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Argument(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
