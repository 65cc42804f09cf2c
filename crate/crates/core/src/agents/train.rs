//! The offline training loop.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig, Algorithm};
use crate::datasets::OfflineDataset;
use crate::error::{Error, Result};
use crate::Rng64;

/// One row of the training log. Actor fields hold the most recent actor
/// update inside the logging window; losses are window means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub step: u64,
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub mean_g: Option<f64>,
    /// Constraint threshold `G`.
    #[serde(rename = "G")]
    pub threshold: Option<f64>,
    pub eval_return: Option<f64>,
    pub distance_loss: Option<f64>,
}

/// Column names, also written for an empty log.
pub const HEADER: [&str; 9] =
    ["step", "critic_loss", "actor_loss", "lambda", "beta", "mean_g", "G", "eval_return", "distance_loss"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<TrainingRow>,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if self.rows.is_empty() {
            w.write_record(HEADER)?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<TrainingRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn last_eval(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.eval_return)
    }
}

/// A run that stopped early, with everything logged up to the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub log: TrainingLog,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted after {} log rows: {}", self.log.rows.len(), self.error)
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Periodic policy evaluation, given the agent and returning a score.
pub type Evaluator<'a> = dyn FnMut(&Agent) -> Result<f64> + 'a;

/// Builds an agent for `ds` and trains it for `cfg.total_steps` iterations.
pub fn train(
    ds: &OfflineDataset,
    action_bound: f64,
    cfg: &AgentConfig,
    rng: &mut Rng64,
    evaluator: Option<&mut Evaluator<'_>>,
) -> std::result::Result<(Agent, TrainingLog), TrainFailure> {
    let fail = |error| TrainFailure { error, log: TrainingLog::default() };
    if ds.is_empty() {
        return Err(fail(Error::EmptyDataset(ds.geometry_id.clone())));
    }
    let (train_ds, norm) = if cfg.normalize_states {
        let (n, stats) = ds.normalize_states().map_err(fail)?;
        (n, Some(stats))
    } else {
        (ds.clone(), None)
    };
    let mut agent = Agent::new(cfg.clone(), ds.state_dim, ds.action_dim, action_bound, rng).map_err(fail)?;
    agent.norm = norm;
    let log = run(&mut agent, &train_ds, cfg.total_steps, rng, evaluator)?;
    Ok((agent, log))
}

/// Continues training `agent` for `steps` more iterations on an already
/// prepared (normalized if required) dataset.
pub fn run(
    agent: &mut Agent,
    ds: &OfflineDataset,
    steps: u64,
    rng: &mut Rng64,
    mut evaluator: Option<&mut Evaluator<'_>>,
) -> std::result::Result<TrainingLog, TrainFailure> {
    let mut log = TrainingLog::default();
    let mut window = Window::default();
    for _ in 0..steps {
        if let Err(error) = iteration(agent, ds, rng, &mut window) {
            return Err(TrainFailure { error, log });
        }
        let t = agent.step;
        let cfg = &agent.cfg;
        let eval_due = cfg.eval_every > 0 && t.is_multiple_of(cfg.eval_every);
        let log_due = (cfg.log_every > 0 && t.is_multiple_of(cfg.log_every)) || eval_due;
        if !log_due {
            continue;
        }
        let eval_return = match (&mut evaluator, eval_due) {
            (Some(eval), true) => match eval(agent) {
                Ok(v) => Some(v),
                Err(error) => return Err(TrainFailure { error, log }),
            },
            _ => None,
        };
        log.rows.push(window.flush(agent, eval_return));
    }
    Ok(log)
}

#[derive(Default)]
struct Window {
    critic_sum: f64,
    critic_n: u64,
    distance_sum: f64,
    distance_n: u64,
    actor_loss: Option<f64>,
    beta: Option<f64>,
    mean_g: Option<f64>,
    threshold: Option<f64>,
}

impl Window {
    fn flush(&mut self, agent: &Agent, eval_return: Option<f64>) -> TrainingRow {
        let row = TrainingRow {
            step: agent.step,
            critic_loss: self.critic_sum / self.critic_n.max(1) as f64,
            actor_loss: self.actor_loss,
            lambda: agent.lambda,
            beta: self.beta,
            mean_g: self.mean_g,
            threshold: self.threshold,
            eval_return,
            distance_loss: (self.distance_n > 0).then(|| self.distance_sum / self.distance_n as f64),
        };
        *self = Window::default();
        row
    }
}

/// One iteration: sample, optional distance step, critic step and, every
/// `policy_update_freq` iterations, the actor step with target updates.
fn iteration(agent: &mut Agent, ds: &OfflineDataset, rng: &mut Rng64, window: &mut Window) -> Result<()> {
    let t = agent.step + 1;
    let batch = ds.sample_batch(rng, agent.cfg.batch_size);
    if agent.cfg.algorithm == Algorithm::Doge && t - 1 < agent.cfg.distance.steps as u64 {
        let sub = batch.head(agent.cfg.distance_batch);
        let dist = agent.distance.as_mut().ok_or_else(|| Error::Precondition("DOGE agent without distance network".into()))?;
        window.distance_sum += dist.train_step(&sub, rng).map_err(|e| at_step(e, t))?;
        window.distance_n += 1;
    }
    window.critic_sum += agent.critic_update(&batch, rng).map_err(|e| at_step(e, t))?;
    window.critic_n += 1;
    if t.is_multiple_of(agent.cfg.policy_update_freq) {
        let step = agent.actor_update(&batch).map_err(|e| at_step(e, t))?;
        window.actor_loss = Some(step.loss);
        window.beta = Some(step.beta);
        window.mean_g = step.mean_g;
        window.threshold = step.threshold;
    }
    agent.step = t;
    if !agent.is_finite() {
        return Err(Error::Diverged { step: t, detail: "non-finite parameters".into() });
    }
    Ok(())
}

fn at_step(e: Error, t: u64) -> Error {
    match e {
        Error::Diverged { detail, .. } => Error::Diverged { step: t, detail },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Transition;
    use crate::rng::seeded;

    fn dataset() -> OfflineDataset {
        let transitions = (0..40)
            .map(|i| {
                let s = -5.0 + 0.25 * i as f64;
                let a = ((i * 7) % 11) as f64 / 5.0 - 1.0;
                let sn = (s + a).clamp(-10.0, 10.0);
                Transition { s: vec![s], a: vec![a], r: (400.0 - (sn - 10.0).powi(2)) / 400.0, s_next: vec![sn], done: false }
            })
            .collect();
        OfflineDataset::new(transitions, "random_walk_1d", "t").unwrap()
    }

    fn cfg(algorithm: Algorithm, steps: u64) -> AgentConfig {
        AgentConfig {
            algorithm,
            hidden: vec![8, 8],
            batch_size: 16,
            total_steps: steps,
            distance: crate::distance::DistanceConfig { hidden: vec![8], steps: 4, n_noise: 3, ..Default::default() },
            distance_batch: 8,
            log_every: 2,
            eval_every: 0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_steps_returns_initial_agent() {
        let c = cfg(Algorithm::Doge, 0);
        let (agent, log) = train(&dataset(), 1.0, &c, &mut seeded(3), None).unwrap();
        let fresh = Agent::new(c, 1, 1, 1.0, &mut seeded(3)).unwrap();
        assert_eq!(agent, fresh);
        assert!(log.rows.is_empty());
    }

    #[test]
    fn actor_updates_every_second_step() {
        for algo in [Algorithm::Doge, Algorithm::Td3bc, Algorithm::Td3] {
            let (agent, _) = train(&dataset(), 1.0, &cfg(algo, 10), &mut seeded(0), None).unwrap();
            assert_eq!(agent.actor_updates, 5);
            assert_eq!(agent.step, 10);
            assert_eq!(agent.critic_opts[0].step_count(), 10);
        }
    }

    #[test]
    fn distance_trains_only_for_first_window() {
        let (agent, log) = train(&dataset(), 1.0, &cfg(Algorithm::Doge, 10), &mut seeded(0), None).unwrap();
        assert_eq!(agent.distance.as_ref().unwrap().trained_steps, 4);
        assert!(log.rows[0].distance_loss.is_some());
        assert!(log.rows.last().unwrap().distance_loss.is_none());
    }

    #[test]
    fn same_seed_same_parameters() {
        let c = cfg(Algorithm::Doge, 12);
        let (a, la) = train(&dataset(), 1.0, &c, &mut seeded(9), None).unwrap();
        let (b, lb) = train(&dataset(), 1.0, &c, &mut seeded(9), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (other, _) = train(&dataset(), 1.0, &c, &mut seeded(10), None).unwrap();
        assert_ne!(a.actor, other.actor);
    }

    #[test]
    fn lambda_stays_in_bounds() {
        let mut c = cfg(Algorithm::Doge, 40);
        c.lambda_lr = 10.0;
        c.log_every = 1;
        let (_, log) = train(&dataset(), 1.0, &c, &mut seeded(1), None).unwrap();
        assert!(log.rows.iter().all(|r| (1.0..=100.0).contains(&r.lambda)));
    }

    #[test]
    fn evaluator_runs_on_schedule_and_log_round_trips() {
        let mut c = cfg(Algorithm::Td3, 6);
        c.eval_every = 3;
        let mut calls = 0;
        let mut eval = |_: &Agent| -> Result<f64> {
            calls += 1;
            Ok(calls as f64)
        };
        let (_, log) = train(&dataset(), 1.0, &c, &mut seeded(1), Some(&mut eval)).unwrap();
        assert_eq!(calls, 2);
        assert_eq!(log.last_eval(), Some(2.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        log.write_csv(&path).unwrap();
        assert_eq!(TrainingLog::read_csv(&path).unwrap(), log);
    }

    #[test]
    fn evaluator_error_keeps_partial_log() {
        let mut c = cfg(Algorithm::Td3, 10);
        c.eval_every = 6;
        let mut eval = |_: &Agent| -> Result<f64> { Err(Error::Precondition("boom".into())) };
        let err = train(&dataset(), 1.0, &c, &mut seeded(1), Some(&mut eval)).unwrap_err();
        assert_eq!(err.log.rows.len(), 2);
    }

    #[test]
    fn exploding_critic_reports_divergence() {
        let mut ds = dataset();
        ds.transitions.iter_mut().for_each(|t| t.r = 1e200);
        let c = cfg(Algorithm::Td3, 20);
        match train(&ds, 1.0, &c, &mut seeded(1), None) {
            Err(TrainFailure { error: Error::Diverged { .. }, .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|(a, _)| a.step)),
        }
    }
}
