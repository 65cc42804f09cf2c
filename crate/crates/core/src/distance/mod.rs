//! State-conditioned distance functions.
//!
//! A distance network `g(s, â)` is regressed onto `‖a − â‖` for dataset pairs
//! `(s, a)` and noise actions `â` drawn uniformly from a box wider than the
//! action space. Its population optimum at an in-dataset state is the mean
//! distance from `â` to the actions recorded at that state, which
//! [`oracle::DistanceOracle`] computes exactly. [`checks`] verifies the
//! convexity, centroid-bound and hull-attraction properties of either.

pub mod checks;
pub mod oracle;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{Batch, OfflineDataset};
use crate::error::{Error, Result};
use crate::nn::{io as nn_io, Adam, AdamConfig, Matrix, Mlp, Tape, Var};
use crate::Rng64;

pub use checks::{check_centroid_bound, check_convexity, check_gradient_direction};
pub use oracle::DistanceOracle;

/// Loss above which distance training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Noise actions per dataset pair.
    pub n_noise: usize,
    /// Noise actions are drawn from `[-m·a_max, m·a_max]` per dimension.
    pub noise_multiplier: f64,
    pub batch_size: usize,
    /// Training steps `N_g`.
    pub steps: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self { hidden: vec![256, 256, 256], lr: 1e-3, n_noise: 20, noise_multiplier: 3.0, batch_size: 256, steps: 100_000 }
    }
}

impl DistanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_noise == 0 {
            return Err(Error::InvalidConfig("need at least one noise action".into()));
        }
        if !(self.lr > 0.0) || !(self.noise_multiplier > 0.0) || self.batch_size == 0 {
            return Err(Error::InvalidConfig("distance lr, noise multiplier and batch must be positive".into()));
        }
        Ok(())
    }
}

/// Learned `g(s, â)` with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceModel {
    pub net: Mlp,
    pub opt: Adam,
    pub action_bound: f64,
    pub noise_multiplier: f64,
    pub n_noise: usize,
    pub trained_steps: u64,
    state_dim: usize,
    action_dim: usize,
}

/// JSON header stored next to a distance network's parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceHeader {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub n_noise: usize,
    pub noise_multiplier: f64,
    pub trained_steps: u64,
    pub lr: f64,
}

impl DistanceModel {
    pub fn new(state_dim: usize, action_dim: usize, action_bound: f64, cfg: &DistanceConfig, rng: &mut Rng64) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![state_dim + action_dim];
        dims.extend(&cfg.hidden);
        dims.push(1);
        let net = Mlp::new(&dims, rng)?;
        let opt = Adam::new(&net, AdamConfig::with_lr(cfg.lr));
        Ok(Self {
            net,
            opt,
            action_bound,
            noise_multiplier: cfg.noise_multiplier,
            n_noise: cfg.n_noise,
            trained_steps: 0,
            state_dim,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// `[-m·a_max, m·a_max]`, the noise-action range.
    pub fn noise_range(&self) -> (f64, f64) {
        let w = self.noise_multiplier * self.action_bound;
        (-w, w)
    }

    pub fn eval(&self, s: &[f64], a: &[f64]) -> f64 {
        let mut x = s.to_vec();
        x.extend_from_slice(a);
        self.net.forward_one(&x).expect("distance input width")[0]
    }

    /// `g` for each row pair of `states` and `actions`.
    pub fn eval_batch(&self, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward(&states.concat_cols(actions)?)?.into_vec())
    }

    /// Records `g(s, a)` on a tape; the network parameters enter as constants
    /// whose gradients are never read.
    pub fn forward_tape(&self, tape: &mut Tape, states: Var, actions: Var) -> Var {
        let x = tape.concat_cols(states, actions);
        self.net.forward_tape(tape, x).0
    }

    /// Builds the regression problem for one batch: each pair is repeated
    /// with `n_noise` fresh noise actions and target `‖a − â‖`.
    pub fn noise_targets(&self, states: &Matrix, actions: &Matrix, rng: &mut Rng64) -> (Matrix, Matrix) {
        let b = states.rows();
        let rows = b * self.n_noise;
        let width = self.state_dim + self.action_dim;
        let (lo, hi) = self.noise_range();
        let mut inputs = Vec::with_capacity(rows * width);
        let mut targets = Vec::with_capacity(rows);
        for i in 0..b {
            let (s, a) = (states.row(i), actions.row(i));
            for _ in 0..self.n_noise {
                inputs.extend_from_slice(s);
                let mut d2 = 0.0;
                for &ai in a {
                    let noise: f64 = rng.random_range(lo..=hi);
                    inputs.push(noise);
                    d2 += (ai - noise).powi(2);
                }
                targets.push(d2.sqrt());
            }
        }
        (Matrix::from_vec(rows, width, inputs).expect("sized"), Matrix::from_vec(rows, 1, targets).expect("sized"))
    }

    /// One Adam step on the noise-action regression loss. Returns the loss.
    pub fn train_step(&mut self, batch: &Batch, rng: &mut Rng64) -> Result<f64> {
        let (inputs, targets) = self.noise_targets(&batch.states, &batch.actions, rng);
        let (loss, grads) = self.net.mse_grad(&inputs, &targets).map_err(|e| Error::Diverged {
            step: self.trained_steps,
            detail: format!("distance gradient: {e}"),
        })?;
        if loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step: self.trained_steps, detail: format!("distance loss {loss:.3e}") });
        }
        self.opt.step(&mut self.net, &grads)?;
        self.trained_steps += 1;
        Ok(loss)
    }

    pub fn header(&self) -> DistanceHeader {
        DistanceHeader {
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            action_bound: self.action_bound,
            n_noise: self.n_noise,
            noise_multiplier: self.noise_multiplier,
            trained_steps: self.trained_steps,
            lr: self.opt.config.lr,
        }
    }

    /// Writes `<stem>.bin` (parameters) and `<stem>.json` (header).
    pub fn save(&self, stem: &Path) -> Result<()> {
        nn_io::save(&self.net, &stem.with_extension("bin"))?;
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&self.header())? + "\n")?;
        Ok(())
    }

    /// Loads a checkpoint written by [`DistanceModel::save`]. Optimizer
    /// moments are not persisted and restart from zero.
    pub fn load(stem: &Path) -> Result<Self> {
        let header: DistanceHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let net = nn_io::load(&stem.with_extension("bin"))?;
        if net.input_dim() != header.state_dim + header.action_dim || net.output_dim() != 1 {
            return Err(Error::Format("distance network shape disagrees with header".into()));
        }
        let opt = Adam::new(&net, AdamConfig::with_lr(header.lr));
        Ok(Self {
            net,
            opt,
            action_bound: header.action_bound,
            noise_multiplier: header.noise_multiplier,
            n_noise: header.n_noise,
            trained_steps: header.trained_steps,
            state_dim: header.state_dim,
            action_dim: header.action_dim,
        })
    }
}

/// Trains a fresh distance network on `ds` for `cfg.steps` minibatch steps.
/// Returns the model and the per-step loss trace.
pub fn train_distance(ds: &OfflineDataset, action_bound: f64, cfg: &DistanceConfig, rng: &mut Rng64) -> Result<(DistanceModel, Vec<f64>)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("distance training".into()));
    }
    let mut model = DistanceModel::new(ds.state_dim, ds.action_dim, action_bound, cfg, rng)?;
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let batch = ds.sample_batch(rng, cfg.batch_size);
        losses.push(model.train_step(&batch, rng)?);
    }
    Ok((model, losses))
}
