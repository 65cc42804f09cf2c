//! Offline actor-critic agents.
//!
//! All three algorithms share TD3's twin critics, target-policy smoothing,
//! delayed actor updates and Polyak-averaged targets. They differ only in
//! the actor objective, each a loss to minimize over a minibatch:
//!
//! - `doge`:  `−β·mean Q₁(s, π(s)) + λ·(mean g(s, π(s)) − G)`, with `λ`
//!   moved by projected dual ascent on the constraint violation.
//! - `td3bc`: `−β·mean Q₁(s, π(s)) + mean ‖π(s) − a‖²`.
//! - `td3`:   `−β·mean Q₁(s, π(s))`.
//!
//! `β = α / mean|Q₁|` is recomputed from every batch.

pub mod checkpoint;
pub mod config;
pub mod train;

use rand_distr::{Distribution, Normal};

use crate::datasets::{Batch, NormStats};
use crate::distance::DistanceModel;
use crate::envs::Policy;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Matrix, Mlp, MlpGrads, Tape, Var};
use crate::Rng64;

pub use config::{AgentConfig, Algorithm, BetaSource, GMode};
pub use train::{train, TrainFailure, TrainingLog, TrainingRow};

/// `α / mean|q|`; zero when every `q` is zero.
pub fn beta_scale(alpha: f64, q: &[f64]) -> f64 {
    let mean_abs = q.iter().map(|v| v.abs()).sum::<f64>() / q.len() as f64;
    if mean_abs == 0.0 {
        0.0
    } else {
        alpha / mean_abs
    }
}

/// One projected dual-ascent step on the multiplier.
pub fn lambda_step(lambda: f64, lr: f64, violation: f64, [lo, hi]: [f64; 2]) -> f64 {
    (lambda + lr * violation).clamp(lo, hi)
}

/// Everything computed for one actor update before any parameter moves.
#[derive(Debug, Clone)]
pub struct ActorStep {
    pub grads: MlpGrads,
    pub loss: f64,
    pub beta: f64,
    /// Mean distance at policy actions (DOGE only).
    pub mean_g: Option<f64>,
    /// Constraint threshold (DOGE only).
    pub threshold: Option<f64>,
}

/// Actor, twin critics, their targets, the optional distance network and
/// the Lagrange multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub cfg: AgentConfig,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub actor_opt: Adam,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    pub critic_opts: [Adam; 2],
    pub distance: Option<DistanceModel>,
    pub lambda: f64,
    /// Completed training iterations.
    pub step: u64,
    pub actor_updates: u64,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    /// Applied to raw environment states before they reach any network.
    pub norm: Option<NormStats>,
}

impl Agent {
    pub fn new(cfg: AgentConfig, state_dim: usize, action_dim: usize, action_bound: f64, rng: &mut Rng64) -> Result<Self> {
        cfg.validate()?;
        let dims = |input: usize, output: usize| {
            let mut d = vec![input];
            d.extend(&cfg.hidden);
            d.push(output);
            d
        };
        let actor = Mlp::new(&dims(state_dim, action_dim), rng)?;
        let critics = [
            Mlp::new(&dims(state_dim + action_dim, 1), rng)?,
            Mlp::new(&dims(state_dim + action_dim, 1), rng)?,
        ];
        let distance = match cfg.algorithm {
            Algorithm::Doge => Some(DistanceModel::new(state_dim, action_dim, action_bound, &cfg.distance, rng)?),
            _ => None,
        };
        let actor_opt = Adam::new(&actor, AdamConfig::with_lr(cfg.actor_lr));
        let critic_opts = [
            Adam::new(&critics[0], AdamConfig::with_lr(cfg.critic_lr)),
            Adam::new(&critics[1], AdamConfig::with_lr(cfg.critic_lr)),
        ];
        Ok(Self {
            lambda: cfg.lambda_init.clamp(cfg.lambda_bounds[0], cfg.lambda_bounds[1]),
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            actor_opt,
            critics,
            critic_opts,
            distance,
            step: 0,
            actor_updates: 0,
            state_dim,
            action_dim,
            action_bound,
            norm: None,
            cfg,
        })
    }

    /// Deterministic, bounded actions for already-normalized states.
    pub fn policy_actions(&self, states: &Matrix) -> Result<Matrix> {
        Ok(squash(&self.actor.forward(states)?, self.action_bound))
    }

    fn target_policy_actions(&self, states: &Matrix) -> Result<Matrix> {
        Ok(squash(&self.actor_target.forward(states)?, self.action_bound))
    }

    /// Records `a_max · tanh(actor(s))` on the tape.
    fn actor_tape(&self, tape: &mut Tape, states: Var) -> (Var, crate::nn::ParamVars) {
        let (pre, params) = self.actor.forward_tape(tape, states);
        let t = tape.tanh(pre);
        (tape.scale(t, self.action_bound), params)
    }

    /// Q-values of critic `i` (online) at row pairs.
    pub fn q_values(&self, i: usize, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        Ok(self.critics[i].forward(&states.concat_cols(actions)?)?.into_vec())
    }

    /// Critic-1 values for raw environment states.
    pub fn q_raw(&self, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        self.q_values(0, &self.normalize(states), actions)
    }

    pub fn normalize(&self, states: &Matrix) -> Matrix {
        match &self.norm {
            Some(n) => n.normalize_rows(states),
            None => states.clone(),
        }
    }

    /// TD targets `r + γ·(1−done)·min_i Q'_i(s', clip(π'(s') + ε))`.
    pub fn td_targets(&self, batch: &Batch, rng: &mut Rng64) -> Result<Matrix> {
        let mut next_actions = self.target_policy_actions(&batch.next_states)?;
        let std = self.cfg.policy_noise * self.action_bound;
        let clip = self.cfg.noise_clip * self.action_bound;
        if std > 0.0 {
            let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for v in next_actions.as_mut_slice() {
                let eps = normal.sample(rng).clamp(-clip, clip);
                *v = (*v + eps).clamp(-self.action_bound, self.action_bound);
            }
        }
        let x = batch.next_states.concat_cols(&next_actions)?;
        let q1 = self.critic_targets[0].forward(&x)?;
        let q2 = self.critic_targets[1].forward(&x)?;
        let gamma = self.cfg.gamma;
        let mut y = Matrix::zeros(batch.len(), 1);
        for i in 0..batch.len() {
            let q = q1.get(i, 0).min(q2.get(i, 0));
            y.set(i, 0, batch.rewards.get(i, 0) + gamma * batch.not_done.get(i, 0) * q);
        }
        if !y.is_finite() {
            return Err(Error::Diverged { step: self.step, detail: "non-finite TD target".into() });
        }
        Ok(y)
    }

    /// One Adam step for both critics toward shared TD targets. Targets are
    /// left untouched. Returns the summed MSE.
    pub fn critic_update(&mut self, batch: &Batch, rng: &mut Rng64) -> Result<f64> {
        let y = self.td_targets(batch, rng)?;
        let x = batch.states.concat_cols(&batch.actions)?;
        let mut total = 0.0;
        for i in 0..2 {
            let (loss, grads) = self.critics[i]
                .mse_grad(&x, &y)
                .map_err(|e| Error::Diverged { step: self.step, detail: format!("critic {i}: {e}") })?;
            self.critic_opts[i].step(&mut self.critics[i], &grads)?;
            total += loss;
        }
        Ok(total)
    }

    /// Actor loss and gradient for the configured algorithm, without
    /// mutating anything. `lambda_override` replaces the multiplier.
    pub fn actor_step(&self, batch: &Batch, lambda_override: Option<f64>) -> Result<ActorStep> {
        let mut tape = Tape::new();
        let s = tape.leaf(batch.states.clone());
        let (a_pi, params) = self.actor_tape(&mut tape, s);
        let x = tape.concat_cols(s, a_pi);
        let (q, _) = self.critics[0].forward_tape(&mut tape, x);
        let q_values = tape.value(q).as_slice().to_vec();
        let beta = match self.cfg.beta_source {
            BetaSource::PolicyAction => beta_scale(self.cfg.alpha, &q_values),
            BetaSource::DataAction => beta_scale(self.cfg.alpha, &self.q_values(0, &batch.states, &batch.actions)?),
        };
        let mean_q = tape.mean(q);
        let q_term = tape.scale(mean_q, -beta);
        let (root, mean_g, threshold) = match self.cfg.algorithm {
            Algorithm::Td3 => (q_term, None, None),
            Algorithm::Td3bc => {
                let data = tape.leaf(batch.actions.clone());
                let diff = tape.sub(a_pi, data);
                let sq = tape.square(diff);
                let total = tape.sum(sq);
                let bc = tape.scale(total, 1.0 / batch.len() as f64);
                (tape.add(q_term, bc), None, None)
            }
            Algorithm::Doge => {
                let dist = self.distance.as_ref().ok_or_else(|| Error::Precondition("DOGE agent without distance network".into()))?;
                let g_data = dist.eval_batch(&batch.states, &batch.actions)?;
                let threshold = self.cfg.g_mode.aggregate(&g_data);
                let g_pi = dist.forward_tape(&mut tape, s, a_pi);
                let mean_g_var = tape.mean(g_pi);
                let mean_g = tape.value(mean_g_var).get(0, 0);
                let lambda = lambda_override.unwrap_or(self.lambda);
                let penalty = tape.scale(mean_g_var, lambda);
                (tape.add(q_term, penalty), Some(mean_g), Some(threshold))
            }
        };
        let mut loss = tape.value(root).get(0, 0);
        if let (Some(_), Some(th)) = (mean_g, threshold) {
            loss -= lambda_override.unwrap_or(self.lambda) * th;
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { step: self.step, detail: format!("actor loss {loss}") });
        }
        tape.backward(root);
        let grads = params.grads(&tape);
        if !grads.is_finite() {
            return Err(Error::Diverged { step: self.step, detail: "actor gradient".into() });
        }
        Ok(ActorStep { grads, loss, beta, mean_g, threshold })
    }

    /// Actor step, multiplier update (DOGE) and Polyak averaging of all targets.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<ActorStep> {
        let step = self.actor_step(batch, None)?;
        self.actor_opt.step(&mut self.actor, &step.grads)?;
        if let (Some(mean_g), Some(threshold)) = (step.mean_g, step.threshold) {
            self.lambda = lambda_step(self.lambda, self.cfg.lambda_lr, mean_g - threshold, self.cfg.lambda_bounds);
        }
        self.update_targets()?;
        self.actor_updates += 1;
        Ok(step)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        let tau = self.cfg.tau;
        self.actor_target.soft_update_from(&self.actor, tau)?;
        for i in 0..2 {
            self.critic_targets[i].soft_update_from(&self.critics[i], tau)?;
        }
        Ok(())
    }

    /// Deterministic action for a raw environment state.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        let s = match &self.norm {
            Some(n) => n.normalize(state),
            None => state.to_vec(),
        };
        self.policy_actions(&Matrix::row_vector(&s)).expect("state width").into_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critics.iter().all(Mlp::is_finite) && self.lambda.is_finite()
    }
}

impl Policy for Agent {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        Agent::act(self, state)
    }

    fn act_batch(&self, states: &Matrix) -> Matrix {
        self.policy_actions(&self.normalize(states)).expect("state width")
    }
}

fn squash(pre: &Matrix, bound: f64) -> Matrix {
    pre.map(|v| bound * v.tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{OfflineDataset, Transition};
    use crate::rng::seeded;

    fn small_cfg(algorithm: Algorithm) -> AgentConfig {
        AgentConfig {
            algorithm,
            hidden: vec![16, 16],
            batch_size: 8,
            distance: crate::distance::DistanceConfig { hidden: vec![16], ..Default::default() },
            ..Default::default()
        }
    }

    fn batch() -> Batch {
        let transitions = (0..8)
            .map(|i| {
                let s = -1.0 + 0.25 * i as f64;
                Transition { s: vec![s], a: vec![0.1 * i as f64 - 0.3], r: 0.5 + 0.1 * s, s_next: vec![s + 0.1], done: i == 7 }
            })
            .collect();
        OfflineDataset::new(transitions, "random_walk_1d", "t").unwrap().full_batch()
    }

    #[test]
    fn beta_arithmetic() {
        assert!((beta_scale(7.5, &[75.0, -75.0, 75.0]) - 0.1).abs() < 1e-15);
        assert_eq!(beta_scale(7.5, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn lambda_is_projected() {
        assert_eq!(lambda_step(100.0, 3e-4, 5.0, [1.0, 100.0]), 100.0);
        assert_eq!(lambda_step(1.0, 3e-4, -5.0, [1.0, 100.0]), 1.0);
        assert!(lambda_step(10.0, 0.1, 2.0, [1.0, 100.0]) > 10.0);
        assert!(lambda_step(10.0, 0.1, -2.0, [1.0, 100.0]) < 10.0);
    }

    #[test]
    fn myopic_targets_are_rewards() {
        let mut cfg = small_cfg(Algorithm::Td3);
        cfg.gamma = 0.0;
        let agent = Agent::new(cfg, 1, 1, 1.0, &mut seeded(0)).unwrap();
        let b = batch();
        let y = agent.td_targets(&b, &mut seeded(1)).unwrap();
        assert_eq!(y, b.rewards);
    }

    #[test]
    fn terminal_transitions_do_not_bootstrap() {
        let agent = Agent::new(small_cfg(Algorithm::Td3), 1, 1, 1.0, &mut seeded(0)).unwrap();
        let b = batch();
        let y = agent.td_targets(&b, &mut seeded(1)).unwrap();
        assert_eq!(y.get(7, 0), b.rewards.get(7, 0));
        assert_ne!(y.get(0, 0), b.rewards.get(0, 0));
    }

    #[test]
    fn identical_critics_reduce_to_single_critic() {
        let mut agent = Agent::new(small_cfg(Algorithm::Td3), 1, 1, 1.0, &mut seeded(0)).unwrap();
        agent.critic_targets[1] = agent.critic_targets[0].clone();
        let b = batch();
        let y = agent.td_targets(&b, &mut seeded(5)).unwrap();
        // Recompute with a single critic and the same noise stream.
        let mut rng = seeded(5);
        let mut next = agent.target_policy_actions(&b.next_states).unwrap();
        let normal = Normal::new(0.0, 0.2_f64).unwrap();
        for v in next.as_mut_slice() {
            let eps: f64 = normal.sample(&mut rng);
            *v = (*v + eps.clamp(-0.5, 0.5)).clamp(-1.0, 1.0);
        }
        let q = agent.critic_targets[0].forward(&b.next_states.concat_cols(&next).unwrap()).unwrap();
        for i in 0..b.len() {
            let expected = b.rewards.get(i, 0) + 0.99 * b.not_done.get(i, 0) * q.get(i, 0);
            assert_eq!(y.get(i, 0), expected);
        }
    }

    #[test]
    fn critic_update_leaves_targets() {
        let mut agent = Agent::new(small_cfg(Algorithm::Td3), 1, 1, 1.0, &mut seeded(0)).unwrap();
        let before = agent.critic_targets.clone();
        let critics_before = agent.critics.clone();
        agent.critic_update(&batch(), &mut seeded(2)).unwrap();
        assert_eq!(agent.critic_targets, before);
        assert_ne!(agent.critics, critics_before);
    }

    #[test]
    fn td3bc_with_exact_actions_has_no_bc_term() {
        let mut cfg = small_cfg(Algorithm::Td3bc);
        cfg.alpha = 0.0;
        let mut agent = Agent::new(cfg, 1, 1, 1.0, &mut seeded(0)).unwrap();
        // Zero actor → π(s) = 0 everywhere; make the data actions zero too.
        agent.actor = Mlp::zeros(agent.actor.layer_dims()).unwrap();
        let mut b = batch();
        b.actions = Matrix::zeros(b.len(), 1);
        let step = agent.actor_step(&b, None).unwrap();
        assert_eq!(step.loss, 0.0);
        assert!(step.grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn td3bc_unit_error_costs_one_per_sample() {
        let mut cfg = small_cfg(Algorithm::Td3bc);
        cfg.alpha = 0.0;
        let mut agent = Agent::new(cfg, 1, 1, 1.0, &mut seeded(0)).unwrap();
        agent.actor = Mlp::zeros(agent.actor.layer_dims()).unwrap();
        let mut b = batch();
        b.actions = Matrix::filled(b.len(), 1, 1.0);
        let step = agent.actor_step(&b, None).unwrap();
        assert!((step.loss - 1.0).abs() < 1e-15);
        assert_eq!(step.beta, 0.0);
    }

    #[test]
    fn zero_actor_acts_zero_and_actions_are_bounded() {
        let mut agent = Agent::new(small_cfg(Algorithm::Td3), 1, 1, 2.0, &mut seeded(0)).unwrap();
        for s in [-10.0, 0.0, 3.3, 1e6] {
            let a = agent.act(&[s]);
            assert!(a[0].abs() <= 2.0);
            assert_eq!(a, agent.act(&[s]));
        }
        agent.actor = Mlp::zeros(agent.actor.layer_dims()).unwrap();
        assert_eq!(agent.act(&[4.0]), vec![0.0]);
    }

    #[test]
    fn doge_threshold_uses_g_mode() {
        let agent = Agent::new(small_cfg(Algorithm::Doge), 1, 1, 1.0, &mut seeded(0)).unwrap();
        let b = batch();
        let g_data = agent.distance.as_ref().unwrap().eval_batch(&b.states, &b.actions).unwrap();
        let step = agent.actor_step(&b, None).unwrap();
        let mean = g_data.iter().sum::<f64>() / g_data.len() as f64;
        assert!((step.threshold.unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn zero_lambda_reduces_doge_to_td3() {
        let doge = Agent::new(small_cfg(Algorithm::Doge), 1, 1, 1.0, &mut seeded(7)).unwrap();
        let mut td3 = doge.clone();
        td3.cfg.algorithm = Algorithm::Td3;
        td3.distance = None;
        let b = batch();
        let a = doge.actor_step(&b, Some(0.0)).unwrap();
        let t = td3.actor_step(&b, None).unwrap();
        assert_eq!(a.grads, t.grads);
        assert_eq!(a.beta, t.beta);
    }

    #[test]
    fn saturated_lambda_follows_distance_gradient() {
        let mut cfg = small_cfg(Algorithm::Doge);
        cfg.alpha = 1e-9;
        let mut agent = Agent::new(cfg, 1, 1, 1.0, &mut seeded(8)).unwrap();
        agent.lambda = 100.0;
        let b = batch();
        let full = agent.actor_step(&b, None).unwrap().grads.flatten();
        // Pure descent direction of mean g(s, π(s)) with respect to the actor.
        let mut tape = Tape::new();
        let s = tape.leaf(b.states.clone());
        let (a_pi, params) = agent.actor_tape(&mut tape, s);
        let g = agent.distance.as_ref().unwrap().forward_tape(&mut tape, s, a_pi);
        let m = tape.mean(g);
        tape.backward(m);
        let pure = params.grads(&tape).flatten();
        let dot: f64 = full.iter().zip(&pure).map(|(x, y)| x * y).sum();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = dot / (norm(&full) * norm(&pure));
        assert!(cos > 1.0 - 1e-9, "{cos}");
    }

    #[test]
    fn lambda_moves_with_constraint_violation() {
        let mut agent = Agent::new(small_cfg(Algorithm::Doge), 1, 1, 1.0, &mut seeded(3)).unwrap();
        agent.lambda = 50.0;
        let b = batch();
        let step = agent.actor_step(&b, None).unwrap();
        let violation = step.mean_g.unwrap() - step.threshold.unwrap();
        agent.actor_update(&b).unwrap();
        assert!((agent.lambda - (50.0 + 3e-4 * violation)).abs() < 1e-12);
        assert_eq!(agent.actor_updates, 1);
    }
}
