//! Run configuration shared by every command, and the run manifest.
//!
//! Every field has a default and unknown keys are rejected, so a config
//! file only needs the values it changes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentConfig, Algorithm};
use crate::datasets::{GeometrySpec, MazeCollector};
use crate::envs::{Env, PointMaze2d, RandomWalk1d, Rect};
use crate::error::{Error, Result};
use crate::experiments::{AblationParam, ProbeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    RandomWalk(RandomWalk1d),
    Maze(PointMaze2d),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::RandomWalk(RandomWalk1d::default())
    }
}

impl EnvConfig {
    pub fn as_env(&self) -> &dyn Env {
        match self {
            EnvConfig::RandomWalk(e) => e,
            EnvConfig::Maze(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Random-walk geometry.
    pub geometry: GeometrySpec,
    /// Maze collector episodes.
    pub maze_episodes: usize,
    pub collector: MazeCollector,
    /// Regions `[x0, y0, x1, y1]` cut out after generation.
    pub remove: Vec<[f64; 4]>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { geometry: GeometrySpec::default(), maze_episodes: 200, collector: MazeCollector::default(), remove: Vec::new() }
    }
}

pub fn rects(raw: &[[f64; 4]]) -> Result<Vec<Rect>> {
    raw.iter()
        .map(|&[x0, y0, x1, y1]| {
            if x0 <= x1 && y0 <= y1 && [x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
                Ok(Rect::new(x0, y0, x1, y1))
            } else {
                Err(Error::InvalidConfig(format!("bad rectangle [{x0}, {y0}, {x1}, {y1}]")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Cells along the state and action axes.
    pub resolution: [usize; 2],
    pub rollouts: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: [100, 50], rollouts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub param: AblationParam,
    /// Empty means the standard grid for `param`.
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { param: AblationParam::G, values: Vec::new(), seeds: vec![0, 1, 2], eval_episodes: 10 }
    }
}

/// One algorithm of a study, with its own `α` when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArm {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub seeds: Vec<u64>,
    pub arms: Vec<StudyArm>,
    pub eval_episodes: usize,
    pub remove: Vec<[f64; 4]>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            arms: vec![
                StudyArm { algorithm: Algorithm::Doge, alpha: None },
                StudyArm { algorithm: Algorithm::Td3bc, alpha: Some(2.5) },
            ],
            eval_episodes: 100,
            remove: vec![[4.0, 2.0, 5.0, 2.75]],
        }
    }
}

impl StudyConfig {
    /// `(label, config)` per arm, derived from `base`.
    pub fn arm_configs(&self, base: &AgentConfig) -> Result<Vec<(String, AgentConfig)>> {
        self.arms
            .iter()
            .map(|arm| {
                let mut cfg = base.clone();
                cfg.algorithm = arm.algorithm;
                if let Some(a) = arm.alpha {
                    cfg.alpha = a;
                }
                cfg.validate()?;
                Ok((arm.algorithm.to_string(), cfg))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads for sweeps and studies.
    pub jobs: Option<usize>,
    pub env: EnvConfig,
    pub dataset: DatasetConfig,
    pub agent: AgentConfig,
    pub eval: EvalConfig,
    pub grid: GridConfig,
    pub probe: ProbeConfig,
    pub ablate: AblateConfig,
    pub study: StudyConfig,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.probe.validate()?;
        rects(&self.dataset.remove)?;
        rects(&self.study.remove)?;
        if let EnvConfig::Maze(m) = &self.env {
            m.layout.validate()?;
        }
        self.dataset.geometry.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Written next to every command's outputs, on success and on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub wall_time_s: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}
