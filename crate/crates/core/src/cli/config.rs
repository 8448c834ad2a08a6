use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentConfig;
use crate::chemdata::PairKind;
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};

/// Environment variable naming the directory that holds default run dirs.
pub const RUN_ROOT_ENV: &str = "BINDCORE_RUN_ROOT";
pub const RUN_CONFIG_FILE: &str = "config.toml";

/// Fully resolved training configuration; a copy is written into every
/// run directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alignment: AlignmentConfig,
    pub encoders: EncoderConfig,
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pairs: Option<Vec<PairKind>>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub temperature: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Defaults, then the file, then flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::read(p)?,
            None => RunConfig::default(),
        };
        let a = &mut cfg.alignment;
        if let Some(v) = overrides.seed {
            a.seed = v;
        }
        if let Some(v) = &overrides.pairs {
            a.active_pairs = v.clone();
        }
        if let Some(v) = overrides.max_epochs {
            a.max_epochs = v;
        }
        if let Some(v) = overrides.batch_size {
            a.batch_size = v;
        }
        if let Some(v) = overrides.learning_rate {
            a.learning_rate = v;
        }
        if let Some(v) = overrides.temperature {
            a.temperature = v;
        }
        cfg.alignment.validate()?;
        cfg.encoders.validate()?;
        Ok(cfg)
    }
}

/// Comma-separated pair kinds, e.g. `language-graph,graph-conformation`.
pub fn parse_pairs(s: &str) -> Result<Vec<PairKind>> {
    let kinds = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<PairKind>>>()?;
    if kinds.is_empty() {
        return Err(Error::Config("--pairs lists no pair kinds".into()));
    }
    Ok(kinds)
}

/// `$BINDCORE_RUN_ROOT/<name>`, or `runs/<name>` when the variable is unset.
pub fn default_run_dir(name: &str) -> PathBuf {
    let root = std::env::var_os(RUN_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    configuration: Vec<GridRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRow {
    pairs: Vec<PairKind>,
}

/// Ablation grid: `[[configuration]] pairs = [...]` tables, in file order.
pub fn parse_grid(text: &str) -> Result<Vec<Vec<PairKind>>> {
    let grid: GridFile = toml::from_str(text).map_err(|e| Error::Config(format!("grid: {e}")))?;
    if grid.configuration.is_empty() {
        return Err(Error::Config("ablation grid has no configurations".into()));
    }
    grid.configuration
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.pairs.is_empty() {
                Err(Error::Config(format!("grid configuration {} has no pairs", i + 1)))
            } else {
                Ok(row.pairs)
            }
        })
        .collect()
}
