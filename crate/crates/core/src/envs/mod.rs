//! Synthetic environments and ground-truth value estimates.

pub mod maze;
pub mod random_walk;
pub mod rollout;

use crate::Rng64;

pub use maze::{MazeLayout, PointMaze2d, Rect};
pub use random_walk::RandomWalk1d;
pub use rollout::{mc_q, mc_q_batch, rollout, FnPolicy, Policy, Rollout, Step};

/// A continuous-control task with box-bounded actions.
pub trait Env: Send + Sync {
    fn id(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Per-dimension action bound `a_max`; actions live in `[-a_max, a_max]`.
    fn action_bound(&self) -> f64;
    fn horizon(&self) -> usize;
    fn gamma(&self) -> f64;
    fn is_deterministic(&self) -> bool;
    fn reset(&self, rng: &mut Rng64) -> Vec<f64>;
    /// Applies `action` (clipped to the action box) in `state`.
    fn step(&self, state: &[f64], action: &[f64], rng: &mut Rng64) -> Step;

    fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        let b = self.action_bound();
        action.iter().map(|a| a.clamp(-b, b)).collect()
    }
}
