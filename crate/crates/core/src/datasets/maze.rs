//! Point-maze datasets from scripted waypoint-following collectors.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{OfflineDataset, Transition};
use crate::envs::{Env, PointMaze2d};
use crate::error::{Error, Result};
use crate::Rng64;

/// Mixture of scripted controllers that walk the corridor centerline.
///
/// A fraction `goal_fraction` of episodes heads straight for the goal. The
/// rest wander between random targets along the centerline, forward and
/// backward, which spreads coverage over the whole corridor without always
/// demonstrating success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MazeCollector {
    pub goal_fraction: f64,
    /// Standard deviation of Gaussian noise added to each action before clipping.
    pub action_noise: f64,
    /// Distance at which an intermediate waypoint counts as reached.
    pub waypoint_tolerance: f64,
}

impl Default for MazeCollector {
    fn default() -> Self {
        Self { goal_fraction: 0.3, action_noise: 0.3, waypoint_tolerance: 0.25 }
    }
}

/// Arc-length parametrized polyline.
struct Polyline {
    points: Vec<[f64; 2]>,
    /// Cumulative arc length at each vertex.
    cum: Vec<f64>,
}

impl Polyline {
    fn new(points: Vec<[f64; 2]>) -> Self {
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            cum.push(cum.last().unwrap() + d);
        }
        Self { points, cum }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn at(&self, u: f64) -> [f64; 2] {
        let u = u.clamp(0.0, self.length());
        for i in 0..self.points.len() - 1 {
            if u <= self.cum[i + 1] || i == self.points.len() - 2 {
                let seg = self.cum[i + 1] - self.cum[i];
                let t = if seg > 0.0 { (u - self.cum[i]) / seg } else { 0.0 };
                let (a, b) = (self.points[i], self.points[i + 1]);
                return [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            }
        }
        self.points[0]
    }

    /// Arc-length parameter of the closest point on the polyline to `p`.
    fn locate(&self, p: [f64; 2]) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = [a[0] + t * dx, a[1] + t * dy];
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if d < best.0 {
                best = (d, self.cum[i] + t * (self.cum[i + 1] - self.cum[i]));
            }
        }
        best.1
    }

    /// Next point to steer toward when travelling from parameter `u` to `v`.
    fn next_point(&self, u: f64, v: f64, tol: f64) -> [f64; 2] {
        if v > u {
            for (i, &c) in self.cum.iter().enumerate() {
                if c > u + tol && c < v {
                    return self.points[i];
                }
            }
        } else {
            for (i, &c) in self.cum.iter().enumerate().rev() {
                if c < u - tol && c > v {
                    return self.points[i];
                }
            }
        }
        self.at(v)
    }
}

/// Rolls out `n_episodes` collector episodes and records every transition.
pub fn generate_maze(
    env: &PointMaze2d,
    n_episodes: usize,
    rng: &mut Rng64,
    collector: &MazeCollector,
) -> Result<OfflineDataset> {
    if n_episodes == 0 {
        return Err(Error::EmptyDataset("maze dataset needs at least one episode".into()));
    }
    let layout = &env.layout;
    let mut waypoints = layout.waypoints.clone();
    if waypoints.len() < 2 {
        waypoints = vec![layout.start, layout.goal];
    }
    let path = Polyline::new(waypoints);
    let goal_u = path.locate(layout.goal);
    let noise = Normal::new(0.0, collector.action_noise.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let a_max = env.action_bound();
    let mut transitions = Vec::new();
    for _ in 0..n_episodes {
        let to_goal = rng.random_bool(collector.goal_fraction.clamp(0.0, 1.0));
        let mut state = env.reset(rng);
        let mut target_u = if to_goal { goal_u } else { rng.random_range(0.0..=path.length()) };
        for _ in 0..env.horizon() {
            let pos = [state[0], state[1]];
            let u = path.locate(pos);
            let target = path.at(target_u);
            let dist_to_target = ((pos[0] - target[0]).powi(2) + (pos[1] - target[1]).powi(2)).sqrt();
            if !to_goal && dist_to_target < collector.waypoint_tolerance {
                target_u = rng.random_range(0.0..=path.length());
            }
            let aim = path.next_point(u, target_u, collector.waypoint_tolerance);
            let mut action = [(aim[0] - pos[0]) / env.step_size, (aim[1] - pos[1]) / env.step_size];
            let norm = action[0].abs().max(action[1].abs());
            if norm > a_max {
                action = [action[0] / norm * a_max, action[1] / norm * a_max];
            }
            if collector.action_noise > 0.0 {
                action[0] += noise.sample(rng);
                action[1] += noise.sample(rng);
            }
            let action = env.clip_action(&action);
            let step = env.step(&state, &action, rng);
            transitions.push(Transition {
                s: state.clone(),
                a: action,
                r: step.reward,
                s_next: step.next_state.clone(),
                done: step.terminal,
            });
            state = step.next_state;
            if step.terminal {
                break;
            }
        }
    }
    OfflineDataset::new(transitions, env.id(), "maze_collector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_episodes_is_an_error() {
        assert!(generate_maze(&PointMaze2d::default(), 0, &mut seeded(0), &MazeCollector::default()).is_err());
    }

    #[test]
    fn noiseless_goal_collectors_succeed() {
        let env = PointMaze2d::default();
        let collector = MazeCollector { goal_fraction: 1.0, action_noise: 0.0, ..Default::default() };
        let ds = generate_maze(&env, 50, &mut seeded(2), &collector).unwrap();
        let successes = ds.transitions.iter().filter(|t| t.done).count();
        assert!(successes as f64 >= 0.9 * 50.0, "{successes} successes");
    }

    #[test]
    fn transitions_avoid_walls() {
        let env = PointMaze2d::default();
        let ds = generate_maze(&env, 40, &mut seeded(3), &MazeCollector::default()).unwrap();
        for t in &ds.transitions {
            assert!(env.layout.is_free(t.s[0], t.s[1]) && env.layout.is_free(t.s_next[0], t.s_next[1]));
            assert!(t.a.iter().all(|a| a.abs() <= 1.0));
        }
    }

    #[test]
    fn polyline_navigation() {
        let p = Polyline::new(vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0]]);
        assert_eq!(p.length(), 8.0);
        assert_eq!(p.at(6.0), [4.0, 2.0]);
        assert!((p.locate([3.9, 3.0]) - 7.0).abs() < 1e-12);
        assert_eq!(p.next_point(1.0, 6.0, 0.1), [4.0, 0.0]);
        assert_eq!(p.next_point(6.0, 1.0, 0.1), [4.0, 0.0]);
        assert_eq!(p.next_point(5.0, 7.0, 0.1), [4.0, 3.0]);
    }
}
