//! Manifest and config files (TOML). Paths inside a manifest are relative
//! to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use sdremu_core::cluster::ClusterConfig;
use sdremu_core::emu::LatencyTable;
use sdremu_core::kernel::Variant;

use crate::harness::{CycleSpec, SweepConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
}

impl ConfigFileError {
    fn invalid(path: &Path, msg: impl ToString) -> Self {
        ConfigFileError::Invalid {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigFileError> {
    fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigFileError> {
    toml::from_str(&read(path)?).map_err(|e| ConfigFileError::invalid(path, e.message()))
}

/// Missing keys take their defaults.
pub fn load_cluster(path: &Path) -> Result<ClusterConfig, ConfigFileError> {
    let c: ClusterConfig = parse_toml(path)?;
    c.validate().map_err(|e| ConfigFileError::invalid(path, e))?;
    Ok(c)
}

pub fn load_latency(path: &Path) -> Result<LatencyTable, ConfigFileError> {
    LatencyTable::parse(&read(path)?).map_err(|e| ConfigFileError::invalid(path, e))
}

pub fn load_sweep(path: &Path) -> Result<SweepConfig, ConfigFileError> {
    let s: SweepConfig = parse_toml(path)?;
    s.validate().map_err(|e| ConfigFileError::invalid(path, e))?;
    Ok(s)
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub cluster: Option<PathBuf>,
    pub latency: Option<PathBuf>,
    /// Assembly source (`.s`) or binary image.
    pub program: Option<PathBuf>,
    /// Harts for `program`.
    pub harts: Option<u32>,
    pub kernel: Option<CycleSpec>,
    /// Variants measured side by side by `cycles`, first one is the baseline.
    pub compare: Option<Vec<Variant>>,
    pub sweep: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub max_steps: Option<u64>,
    pub quantum: Option<u64>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let mut m: Manifest = parse_toml(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.cluster, &mut m.latency, &mut m.program, &mut m.sweep, &mut m.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn cluster_config(&self) -> Result<ClusterConfig, ConfigFileError> {
        self.cluster
            .as_deref()
            .map_or(Ok(ClusterConfig::default()), load_cluster)
    }

    pub fn latency_table(&self) -> Result<LatencyTable, ConfigFileError> {
        self.latency
            .as_deref()
            .map_or(Ok(LatencyTable::default()), load_latency)
    }
}
