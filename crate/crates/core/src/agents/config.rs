use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::distance::DistanceConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// TD3 critics with the distance-constrained actor.
    Doge,
    /// TD3 critics with a mean-squared behavior-cloning actor penalty.
    Td3bc,
    /// Unconstrained TD3 actor.
    Td3,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doge" => Ok(Self::Doge),
            "td3bc" | "td3+bc" => Ok(Self::Td3bc),
            "td3" => Ok(Self::Td3),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Doge => "doge",
            Self::Td3bc => "td3bc",
            Self::Td3 => "td3",
        })
    }
}

/// How the constraint threshold `G` is read off the batch of distances
/// at dataset actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GMode {
    Mean,
    /// Percentile in `(0, 100]`.
    Quantile(f64),
}

impl GMode {
    pub fn aggregate(&self, values: &[f64]) -> f64 {
        match *self {
            GMode::Mean => values.iter().sum::<f64>() / values.len() as f64,
            GMode::Quantile(q) => quantile(values, q / 100.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GMode::Quantile(q) if !(q > 0.0 && q <= 100.0) => {
                Err(Error::InvalidConfig(format!("G quantile {q} outside (0, 100]")))
            }
            _ => Ok(()),
        }
    }
}

/// Linear-interpolated quantile, `p ∈ [0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl std::str::FromStr for GMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mean" {
            return Ok(GMode::Mean);
        }
        let q: f64 = s.trim_end_matches('%').parse().map_err(|_| Error::InvalidConfig(format!("bad G mode {s:?}")))?;
        let mode = GMode::Quantile(q);
        mode.validate()?;
        Ok(mode)
    }
}

impl std::fmt::Display for GMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GMode::Mean => f.write_str("mean"),
            GMode::Quantile(q) => write!(f, "{q}"),
        }
    }
}

impl Serialize for GMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GMode::Mean => s.serialize_str("mean"),
            GMode::Quantile(q) => s.serialize_f64(*q),
        }
    }
}

impl<'de> Deserialize<'de> for GMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => {
                let mode = GMode::Quantile(q);
                mode.validate().map_err(de::Error::custom)?;
                Ok(mode)
            }
            Raw::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

/// Which actions enter the denominator of the Q rescaling `β = α / mean|Q|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    PolicyAction,
    DataAction,
}

/// Hyperparameters of one training run. Defaults are the full-scale
/// reference settings; desk-scale experiments override sizes and lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Target-policy smoothing noise std, as a fraction of `a_max`.
    pub policy_noise: f64,
    /// Clip of the smoothing noise, as a fraction of `a_max`.
    pub noise_clip: f64,
    pub policy_update_freq: u64,
    pub batch_size: usize,
    pub total_steps: u64,
    pub alpha: f64,
    pub lambda_init: f64,
    pub lambda_lr: f64,
    pub lambda_bounds: [f64; 2],
    pub g_mode: GMode,
    pub beta_source: BetaSource,
    /// Distance network settings; `distance.steps` is `N_g`.
    pub distance: DistanceConfig,
    /// Minibatch rows fed to each distance step (a prefix of the agent batch).
    pub distance_batch: usize,
    pub normalize_states: bool,
    pub log_every: u64,
    /// Evaluation period in steps; 0 disables periodic evaluation.
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Doge,
            hidden: vec![256, 256, 256],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_update_freq: 2,
            batch_size: 256,
            total_steps: 1_000_000,
            alpha: 7.5,
            lambda_init: 1.0,
            lambda_lr: 3e-4,
            lambda_bounds: [1.0, 100.0],
            g_mode: GMode::Mean,
            beta_source: BetaSource::PolicyAction,
            distance: DistanceConfig::default(),
            distance_batch: 256,
            normalize_states: false,
            log_every: 1000,
            eval_every: 5000,
            eval_episodes: 10,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("tau", self.tau),
            ("lambda_lr", self.lambda_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.tau > 1.0 {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1] and tau in (0, 1]".into()));
        }
        if self.policy_update_freq == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("policy_update_freq and batch_size must be positive".into()));
        }
        let [lo, hi] = self.lambda_bounds;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig(format!("lambda bounds [{lo}, {hi}] not ordered")));
        }
        if self.alpha < 0.0 || self.policy_noise < 0.0 || self.noise_clip < 0.0 {
            return Err(Error::InvalidConfig("alpha and noise settings must be non-negative".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        self.g_mode.validate()?;
        if self.algorithm == Algorithm::Doge {
            self.distance.validate()?;
            if self.distance_batch == 0 {
                return Err(Error::InvalidConfig("distance_batch must be positive".into()));
            }
        }
        Ok(())
    }
}
