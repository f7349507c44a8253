//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aavi::AaviConfig;
use crate::abstraction::{self, AbstractSpec};
use crate::env::{build_env, EnvName, RoomEnv, RoomOverrides};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "AVI_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub name: EnvName,
    pub geometry: RoomOverrides,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            name: EnvName::NineRooms,
            geometry: RoomOverrides::default(),
        }
    }
}

impl EnvSection {
    pub fn build(&self) -> Result<RoomEnv> {
        build_env(self.name, &self.geometry)
    }
}

fn default_n() -> usize {
    20
}

fn default_k() -> usize {
    7
}

fn default_half_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSource {
    Doorways,
    RoomCenters,
    FullRooms,
    Random {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
    File {
        path: PathBuf,
    },
}

impl RegionSource {
    pub fn label(&self) -> String {
        match self {
            RegionSource::Doorways => "doorways".into(),
            RegionSource::RoomCenters => "room_centers".into(),
            RegionSource::FullRooms => "full_rooms".into(),
            RegionSource::Random { n, k, .. } => format!("random_n{n}_k{k}"),
            RegionSource::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }

    /// Builds the spec; random layouts are drawn from a stream of `seed`.
    pub fn build(&self, env: &RoomEnv, seed: u64) -> Result<AbstractSpec> {
        let spec = match self {
            RegionSource::Doorways => abstraction::doorway_spec(env),
            RegionSource::RoomCenters => abstraction::room_center_spec(env),
            RegionSource::FullRooms => abstraction::full_room_spec(env),
            RegionSource::Random { n, k, half_width } => {
                abstraction::random_spec(env, *n, *k, *half_width, derive_seed(seed, &[0x5e]))?
            }
            RegionSource::File { path } => AbstractSpec::load(path)?,
        };
        let report = abstraction::validate(&spec);
        if !report.is_valid() {
            return Err(Error::Structural(report.to_string()));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub regions: RegionSource,
    pub aavi: AaviConfig,
    pub seeds: Vec<u64>,
    /// Output directory; defaults to `$AVI_OUTPUT_ROOT/<env>_<regions>`.
    pub output: Option<PathBuf>,
    /// Save options after every iteration.
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSection::default(),
            regions: RegionSource::Doorways,
            aavi: AaviConfig::default(),
            seeds: vec![0],
            output: None,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("experiment config", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("experiment config", e))
    }

    pub fn validate(&self) -> Result<()> {
        self.aavi.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let RegionSource::File { path } = &self.regions {
            if !path.exists() {
                return Err(Error::Config(format!("region file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Explicit output, else `root/<env>_<regions>` with `root` from the
    /// environment variable or [`DEFAULT_OUTPUT_ROOT`].
    pub fn output_dir(&self) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        root.join(format!("{}_{}", self.env.name, self.regions.label()))
    }
}
