//! Config-driven experiment runner. Each run writes its CSV tables and field
//! dumps, a `report.json` with gates and fitted quantities, and a
//! `manifest.json` hashing every other file in the output directory.
//!
//! Nothing time- or host-dependent enters the artifacts, so a fixed config
//! and seed give byte-identical output.

mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{
    parse_config, DataSection, ExperimentConfig, ExperimentKind, GridSection, MaskSection, ProfileSection,
    ScanSection, SimulateSection, StoneSection, StripSection, Tolerances, VerifySection,
};

use crate::io::{write_json, CsvTable};
use crate::{Error, Result};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_GATE_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Pass/fail check on one measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Gate {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub kind: ExperimentKind,
    pub gates: Vec<Gate>,
    /// Every file written, manifest last.
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_SUCCESS
        } else {
            EXIT_GATE_FAILED
        }
    }
}

/// Exit code for an error that stopped a run: bad input, geometry or I/O is
/// a configuration error, anything numerical counts as a failed gate.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } | Error::Singular | Error::NeumannRegime(_) | Error::Quadrature(_) => {
            EXIT_GATE_FAILED
        }
        _ => EXIT_CONFIG,
    }
}

/// Collects artifacts in write order for the manifest.
pub(crate) struct ArtifactSink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactSink {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
        if !meta.is_dir() {
            return Err(Error::Config(format!("output path {} is not a directory", dir.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }

    pub(crate) fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.written.push(path);
        Ok(())
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }

    pub(crate) fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.written.extend(paths);
    }

    fn entries(&self) -> Result<Vec<ArtifactEntry>> {
        self.written
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                Ok(ArtifactEntry {
                    file: p
                        .strip_prefix(&self.dir)
                        .unwrap_or(p)
                        .to_string_lossy()
                        .replace('\\', "/"),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                    bytes: bytes.len() as u64,
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    artifacts: Vec<ArtifactEntry>,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    logdecay: &'static str,
    field_format: &'static str,
    csv_float_format: &'static str,
}

/// Runs `cfg` and writes its artifacts into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut sink = ArtifactSink::new(&cfg.output)?;
    let gates = run::dispatch(cfg, &mut sink)?;
    let manifest = Manifest {
        config: cfg,
        artifacts: sink.entries()?,
        versions: Versions {
            logdecay: env!("CARGO_PKG_VERSION"),
            field_format: "LDL1",
            csv_float_format: "{:.16e}",
        },
    };
    let path = sink.dir.join("manifest.json");
    write_json(&path, &manifest)?;
    let mut files = sink.written;
    files.push(path);
    Ok(RunOutcome {
        kind: cfg.kind,
        gates,
        files,
    })
}
