use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Env, Step};
use crate::Rng64;

pub const STATE_LOW: f64 = -10.0;
pub const STATE_HIGH: f64 = 10.0;
pub const DESTINATION: f64 = 10.0;

/// One-dimensional walk on `[-10, 10]` toward a destination at `s = 10`.
///
/// `s' = clip(s + a, -10, 10)` with `a ∈ [-1, 1]`, and the reward
/// `(400 - (s' - 10)²) / 400` lies in `[0, 1]`, peaking at the destination.
/// Episodes last a fixed number of steps and never terminate early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomWalk1d {
    pub horizon: usize,
    pub gamma: f64,
    /// Start state for every episode; `None` samples uniformly over the line.
    pub fixed_start: Option<f64>,
}

impl Default for RandomWalk1d {
    fn default() -> Self {
        Self { horizon: 50, gamma: 0.9, fixed_start: None }
    }
}

impl RandomWalk1d {
    pub fn reward(next_state: f64) -> f64 {
        let d = next_state - DESTINATION;
        (400.0 - d * d) / 400.0
    }

    pub fn transition(state: f64, action: f64) -> f64 {
        (state + action.clamp(-1.0, 1.0)).clamp(STATE_LOW, STATE_HIGH)
    }
}

impl Env for RandomWalk1d {
    fn id(&self) -> &'static str {
        "random_walk_1d"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        1.0
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn reset(&self, rng: &mut Rng64) -> Vec<f64> {
        match self.fixed_start {
            Some(s) => vec![s.clamp(STATE_LOW, STATE_HIGH)],
            None => vec![rng.random_range(STATE_LOW..=STATE_HIGH)],
        }
    }

    fn step(&self, state: &[f64], action: &[f64], _rng: &mut Rng64) -> Step {
        let next = Self::transition(state[0], action[0]);
        Step { next_state: vec![next], reward: Self::reward(next), terminal: false, success: false }
    }
}
