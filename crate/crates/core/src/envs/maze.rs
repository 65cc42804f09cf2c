//! A point mass moving through a walled arena toward a goal disk.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Env, Step};
use crate::error::{Error, Result};
use crate::Rng64;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0: x0.min(x1), y0: y0.min(y1), x1: x0.max(x1), y1: y0.max(y1) }
    }

    /// Closed containment.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Open containment; points on the faces are outside.
    pub fn contains_strict(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Static geometry of a maze, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeLayout {
    pub arena: Rect,
    pub walls: Vec<Rect>,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    pub horizon: usize,
    /// Corridor centerline from start to goal, used by scripted data collectors.
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
}

fn default_goal_radius() -> f64 {
    0.5
}

impl MazeLayout {
    /// Five-by-five-cell U corridor: along the bottom row, up the right
    /// column, back along the top row to a goal above the start.
    pub fn u_maze() -> Self {
        Self {
            arena: Rect::new(0.0, 0.0, 5.0, 5.0),
            walls: vec![Rect::new(0.0, 1.0, 4.0, 4.0)],
            start: [0.5, 0.5],
            goal: [0.5, 4.5],
            goal_radius: 0.5,
            horizon: 100,
            waypoints: vec![[0.5, 0.5], [4.5, 0.5], [4.5, 4.5], [0.5, 4.5]],
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let layout: Self = serde_json::from_str(text)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arena.area() <= 0.0 {
            return Err(Error::InvalidConfig("maze arena has no area".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("maze horizon must be positive".into()));
        }
        for p in [self.start, self.goal] {
            if !self.arena.contains(p[0], p[1]) || self.in_wall(p[0], p[1]) {
                return Err(Error::InvalidConfig(format!("point {p:?} is outside the free space")));
            }
        }
        Ok(())
    }

    pub fn in_wall(&self, x: f64, y: f64) -> bool {
        self.walls.iter().any(|w| w.contains_strict(x, y))
    }

    pub fn is_free(&self, x: f64, y: f64) -> bool {
        self.arena.contains(x, y) && !self.in_wall(x, y)
    }

    /// Moves from `pos` by `delta`, one axis at a time. Motion into a wall
    /// stops at the wall face; motion out of the arena is clamped.
    pub fn advance(&self, pos: [f64; 2], delta: [f64; 2]) -> [f64; 2] {
        let a = &self.arena;
        let mut x = (pos[0] + delta[0]).clamp(a.x0, a.x1);
        for w in &self.walls {
            if w.contains_strict(x, pos[1]) {
                x = if delta[0] > 0.0 { w.x0 } else { w.x1 };
            }
        }
        let mut y = (pos[1] + delta[1]).clamp(a.y0, a.y1);
        for w in &self.walls {
            if w.contains_strict(x, y) {
                y = if delta[1] > 0.0 { w.y0 } else { w.y1 };
            }
        }
        [x, y]
    }

    pub fn at_goal(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.goal[0], y - self.goal[1]);
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }
}

/// Point-mass navigation with velocity actions in `[-a_max, a_max]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointMaze2d {
    pub layout: MazeLayout,
    /// Displacement per unit action per step.
    pub step_size: f64,
    pub action_bound: f64,
    /// Standard deviation of Gaussian position noise per step; 0 disables it.
    pub position_noise: f64,
    /// Half-width of the uniform box around the start point used by `reset`.
    pub start_spread: f64,
    /// Subtracts one from every reward (sparse 0/1 becomes -1/0).
    pub step_penalty: bool,
    pub gamma: f64,
}

impl Default for PointMaze2d {
    fn default() -> Self {
        Self {
            layout: MazeLayout::u_maze(),
            step_size: 0.5,
            action_bound: 1.0,
            position_noise: 0.0,
            start_spread: 0.25,
            step_penalty: false,
            gamma: 0.99,
        }
    }
}

impl PointMaze2d {
    pub fn with_layout(layout: MazeLayout) -> Self {
        Self { layout, ..Self::default() }
    }
}

impl Env for PointMaze2d {
    fn id(&self) -> &'static str {
        "point_maze_2d"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_bound(&self) -> f64 {
        self.action_bound
    }

    fn horizon(&self) -> usize {
        self.layout.horizon
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn is_deterministic(&self) -> bool {
        self.position_noise == 0.0
    }

    fn reset(&self, rng: &mut Rng64) -> Vec<f64> {
        let [sx, sy] = self.layout.start;
        let spread = self.start_spread;
        let (x, y) = if spread > 0.0 {
            (sx + rng.random_range(-spread..=spread), sy + rng.random_range(-spread..=spread))
        } else {
            (sx, sy)
        };
        let a = &self.layout.arena;
        let (x, y) = (x.clamp(a.x0, a.x1), y.clamp(a.y0, a.y1));
        if self.layout.in_wall(x, y) {
            vec![sx, sy]
        } else {
            vec![x, y]
        }
    }

    fn step(&self, state: &[f64], action: &[f64], rng: &mut Rng64) -> Step {
        let a = self.clip_action(action);
        let mut delta = [a[0] * self.step_size, a[1] * self.step_size];
        if self.position_noise > 0.0 {
            let noise = Normal::new(0.0, self.position_noise).expect("positive std");
            delta[0] += noise.sample(rng);
            delta[1] += noise.sample(rng);
        }
        let [x, y] = self.layout.advance([state[0], state[1]], delta);
        let success = self.layout.at_goal(x, y);
        let mut reward = if success { 1.0 } else { 0.0 };
        if self.step_penalty {
            reward -= 1.0;
        }
        Step { next_state: vec![x, y], reward, terminal: success, success }
    }
}
