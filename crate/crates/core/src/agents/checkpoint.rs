//! Agent checkpoints: one parameter file per network plus `agent.json`.
//!
//! Optimizer moments are not stored; a reloaded agent acts identically
//! but restarts Adam from zero if trained further.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig};
use crate::datasets::NormStats;
use crate::distance::DistanceModel;
use crate::error::{Error, Result};
use crate::nn::{io as nn_io, Adam, AdamConfig, Mlp};

pub const MANIFEST: &str = "agent.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentManifest {
    pub config: AgentConfig,
    pub step: u64,
    pub actor_updates: u64,
    pub lambda: f64,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub norm: Option<NormStats>,
    pub files: Vec<String>,
}

const NETS: [&str; 6] = ["actor", "actor_target", "critic1", "critic2", "critic1_target", "critic2_target"];

impl Agent {
    fn nets(&self) -> [&Mlp; 6] {
        [
            &self.actor,
            &self.actor_target,
            &self.critics[0],
            &self.critics[1],
            &self.critic_targets[0],
            &self.critic_targets[1],
        ]
    }

    /// Writes the checkpoint into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (name, net) in NETS.iter().zip(self.nets()) {
            let file = format!("{name}.bin");
            nn_io::save(net, &dir.join(&file))?;
            files.push(file);
        }
        if let Some(d) = &self.distance {
            d.save(&dir.join("distance"))?;
            files.push("distance.bin".into());
            files.push("distance.json".into());
        }
        let manifest = AgentManifest {
            config: self.cfg.clone(),
            step: self.step,
            actor_updates: self.actor_updates,
            lambda: self.lambda,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            action_bound: self.action_bound,
            norm: self.norm.clone(),
            files,
        };
        std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Err(Error::MissingFile(manifest_path));
        }
        let m: AgentManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        m.config.validate()?;
        let mut nets = Vec::with_capacity(NETS.len());
        for name in NETS {
            let path = dir.join(format!("{name}.bin"));
            if !path.exists() {
                return Err(Error::MissingFile(path));
            }
            nets.push(nn_io::load(&path)?);
        }
        let mut nets = nets.into_iter();
        let mut next = || nets.next().expect("six networks");
        let (actor, actor_target) = (next(), next());
        let critics = [next(), next()];
        let critic_targets = [next(), next()];
        if actor.layer_dims() != actor_target.layer_dims() {
            return Err(Error::ArchitectureMismatch {
                target: actor_target.layer_dims().to_vec(),
                online: actor.layer_dims().to_vec(),
            });
        }
        if actor.input_dim() != m.state_dim || actor.output_dim() != m.action_dim {
            return Err(Error::Format("actor shape disagrees with manifest".into()));
        }
        for (c, t) in critics.iter().zip(&critic_targets) {
            if c.layer_dims() != t.layer_dims() {
                return Err(Error::ArchitectureMismatch { target: t.layer_dims().to_vec(), online: c.layer_dims().to_vec() });
            }
            if c.input_dim() != m.state_dim + m.action_dim || c.output_dim() != 1 {
                return Err(Error::Format("critic shape disagrees with manifest".into()));
            }
        }
        let distance = if m.files.iter().any(|f| f == "distance.bin") {
            Some(DistanceModel::load(&dir.join("distance"))?)
        } else {
            None
        };
        Ok(Agent {
            actor_opt: Adam::new(&actor, AdamConfig::with_lr(m.config.actor_lr)),
            critic_opts: [
                Adam::new(&critics[0], AdamConfig::with_lr(m.config.critic_lr)),
                Adam::new(&critics[1], AdamConfig::with_lr(m.config.critic_lr)),
            ],
            cfg: m.config,
            actor,
            actor_target,
            critics,
            critic_targets,
            distance,
            lambda: m.lambda,
            step: m.step,
            actor_updates: m.actor_updates,
            state_dim: m.state_dim,
            action_dim: m.action_dim,
            action_bound: m.action_bound,
            norm: m.norm,
        })
    }
}
