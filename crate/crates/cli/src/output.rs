//! Failure classification, atomic output staging and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Usage errors exit 1, data errors exit 2.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) => e,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

macro_rules! data_errors {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Data(e.into())
            }
        })*
    };
}

data_errors!(
    anyhow::Error,
    std::io::Error,
    serde_json::Error,
    csv::Error,
    mobpat::ingest::IngestError,
    mobpat::matrices::MatrixError,
    mobpat::som::SomError,
    mobpat::predict::PredictError,
    mobpat::synth::SynthError,
    mobpat::viz::VizError,
);

pub type Result<T> = std::result::Result<T, Failure>;

/// Everything a run writes. Nothing touches the disk until [`Outputs::commit`].
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(path, text);
        Ok(())
    }

    pub fn paths(&self) -> Vec<String> {
        self.files.iter().map(|(p, _)| p.display().to_string()).collect()
    }

    /// Writes each file to a temporary sibling, then renames it into place.
    pub fn commit(self) -> Result<()> {
        for (path, bytes) in self.files {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("staging in {}", dir.display()))?;
            tmp.write_all(&bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&path)
                .map_err(|e| anyhow::anyhow!("writing {}: {}", path.display(), e.error))?;
            log::debug!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// What produced a set of outputs, sufficient to reproduce them.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    pub params: serde_json::Value,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<P: Serialize>(subcommand: &'static str, seed: u64, params: &P) -> Result<Self> {
        Ok(Self {
            tool: "mobpat",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            params: serde_json::to_value(params)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    /// Reads an input file, recording its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), digest(&bytes));
        Ok(bytes)
    }

    /// Adds the manifest itself at `path`, listing every staged output.
    pub fn finish(mut self, outputs: &mut Outputs, path: PathBuf) -> Result<()> {
        self.outputs = outputs.paths();
        outputs.add_json(path, &self)
    }
}

/// Hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<stem><suffix>` next to `path`, e.g. `d.csv` → `d.truth.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}
