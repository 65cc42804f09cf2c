//! Offline transition datasets.

pub mod io;
pub mod maze;
pub mod projection;
pub mod random_walk;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Rect;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::Rng64;

pub use maze::{generate_maze, MazeCollector};
pub use projection::{project, Projector};
pub use random_walk::{generate_randomwalk, GeometrySpec, Region};

/// Minimum per-dimension standard deviation used by normalization.
pub const STD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Per-dimension affine state normalization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }

    /// Normalizes every row of a matrix of states.
    pub fn normalize_rows(&self, states: &Matrix) -> Matrix {
        let mut out = states.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// An immutable batch of transitions from one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub transitions: Vec<Transition>,
    pub env_id: String,
    pub geometry_id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Present iff the stored states are normalized.
    pub norm_stats: Option<NormStats>,
}

impl OfflineDataset {
    pub fn new(
        transitions: Vec<Transition>,
        env_id: impl Into<String>,
        geometry_id: impl Into<String>,
    ) -> Result<Self> {
        let first = transitions.first().ok_or_else(|| Error::EmptyDataset("no transitions".into()))?;
        let (state_dim, action_dim) = (first.s.len(), first.a.len());
        for t in &transitions {
            if t.s.len() != state_dim || t.s_next.len() != state_dim || t.a.len() != action_dim {
                return Err(Error::DimensionMismatch { expected: state_dim, got: t.s.len() });
            }
            let finite = t.s.iter().chain(&t.a).chain(&t.s_next).all(|v| v.is_finite()) && t.r.is_finite();
            if !finite {
                return Err(Error::NonFinite("transition entry".into()));
            }
        }
        Ok(Self {
            transitions,
            env_id: env_id.into(),
            geometry_id: geometry_id.into(),
            state_dim,
            action_dim,
            norm_stats: None,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// States in the original (unnormalized) coordinates.
    pub fn raw_state(&self, i: usize) -> Vec<f64> {
        let s = &self.transitions[i].s;
        match &self.norm_stats {
            Some(stats) => stats.denormalize(s),
            None => s.clone(),
        }
    }

    /// Concatenated `(s, a)` of transition `i`.
    pub fn state_action(&self, i: usize, raw: bool) -> Vec<f64> {
        let t = &self.transitions[i];
        let mut x = if raw { self.raw_state(i) } else { t.s.clone() };
        x.extend_from_slice(&t.a);
        x
    }

    /// Drops every transition whose state or next state lies in any of `rects`.
    ///
    /// Rectangles live in the raw state space; for one-dimensional states only
    /// the x-extent is tested. Returns the filtered dataset and the fraction
    /// of transitions removed.
    pub fn remove_regions(&self, rects: &[Rect]) -> Result<(OfflineDataset, f64)> {
        let inside = |s: &[f64]| {
            rects.iter().any(|r| match s.len() {
                1 => s[0] >= r.x0 && s[0] <= r.x1,
                _ => r.contains(s[0], s[1]),
            })
        };
        let stats = self.norm_stats.clone();
        let raw = |s: &Vec<f64>| match &stats {
            Some(st) => st.denormalize(s),
            None => s.clone(),
        };
        let kept: Vec<Transition> = self
            .transitions
            .iter()
            .filter(|t| !inside(&raw(&t.s)) && !inside(&raw(&t.s_next)))
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyDataset("region removal dropped every transition".into()));
        }
        let fraction = 1.0 - kept.len() as f64 / self.len() as f64;
        let ds = OfflineDataset { transitions: kept, ..self.clone_meta() };
        Ok((ds, fraction))
    }

    fn clone_meta(&self) -> OfflineDataset {
        OfflineDataset {
            transitions: Vec::new(),
            env_id: self.env_id.clone(),
            geometry_id: self.geometry_id.clone(),
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            norm_stats: self.norm_stats.clone(),
        }
    }

    /// Per-dimension standardization of `s` and `s_next` with the std floored
    /// at [`STD_FLOOR`]. Statistics are computed over `s`.
    pub fn normalize_states(&self) -> Result<(OfflineDataset, NormStats)> {
        if self.is_empty() {
            return Err(Error::EmptyDataset("cannot normalize".into()));
        }
        if self.norm_stats.is_some() {
            return Err(Error::Precondition("dataset is already normalized".into()));
        }
        let n = self.len() as f64;
        let d = self.state_dim;
        let mut mean = vec![0.0; d];
        for t in &self.transitions {
            for (m, v) in mean.iter_mut().zip(&t.s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for t in &self.transitions {
            for ((acc, v), m) in var.iter_mut().zip(&t.s).zip(&mean) {
                *acc += (v - m).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        let stats = NormStats { mean, std };
        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                s: stats.normalize(&t.s),
                a: t.a.clone(),
                r: t.r,
                s_next: stats.normalize(&t.s_next),
                done: t.done,
            })
            .collect();
        let mut ds = OfflineDataset { transitions, ..self.clone_meta() };
        ds.norm_stats = Some(stats.clone());
        Ok((ds, stats))
    }

    /// Undoes [`OfflineDataset::normalize_states`].
    pub fn denormalize_states(&self) -> OfflineDataset {
        let Some(stats) = &self.norm_stats else { return self.clone() };
        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                s: stats.denormalize(&t.s),
                a: t.a.clone(),
                r: t.r,
                s_next: stats.denormalize(&t.s_next),
                done: t.done,
            })
            .collect();
        let mut ds = OfflineDataset { transitions, ..self.clone_meta() };
        ds.norm_stats = None;
        ds
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample_indices(&self, rng: &mut Rng64, batch: usize) -> Vec<usize> {
        let n = self.len();
        (0..batch).map(|_| rng.random_range(0..n)).collect()
    }

    /// A minibatch drawn uniformly with replacement.
    pub fn sample_minibatch(&self, rng: &mut Rng64, batch: usize) -> Vec<Transition> {
        self.sample_indices(rng, batch).into_iter().map(|i| self.transitions[i].clone()).collect()
    }

    /// Stacks the given transitions into matrices.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let b = indices.len();
        let (ds, da) = (self.state_dim, self.action_dim);
        let mut s = Vec::with_capacity(b * ds);
        let mut a = Vec::with_capacity(b * da);
        let mut s_next = Vec::with_capacity(b * ds);
        let mut r = Vec::with_capacity(b);
        let mut not_done = Vec::with_capacity(b);
        for &i in indices {
            let t = &self.transitions[i];
            s.extend_from_slice(&t.s);
            a.extend_from_slice(&t.a);
            s_next.extend_from_slice(&t.s_next);
            r.push(t.r);
            not_done.push(if t.done { 0.0 } else { 1.0 });
        }
        Batch {
            states: Matrix::from_vec(b, ds, s).expect("sized"),
            actions: Matrix::from_vec(b, da, a).expect("sized"),
            rewards: Matrix::from_vec(b, 1, r).expect("sized"),
            next_states: Matrix::from_vec(b, ds, s_next).expect("sized"),
            not_done: Matrix::from_vec(b, 1, not_done).expect("sized"),
        }
    }

    pub fn sample_batch(&self, rng: &mut Rng64, batch: usize) -> Batch {
        let idx = self.sample_indices(rng, batch);
        self.gather(&idx)
    }

    /// Every transition as one batch, in dataset order.
    pub fn full_batch(&self) -> Batch {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.gather(&idx)
    }
}

/// Column-stacked minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Matrix,
    pub next_states: Matrix,
    /// `1 - done` per row.
    pub not_done: Matrix,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    /// The first `n` rows (all rows when `n >= len`).
    pub fn head(&self, n: usize) -> Batch {
        let n = n.min(self.len());
        let take = |m: &Matrix| Matrix::from_vec(n, m.cols(), m.as_slice()[..n * m.cols()].to_vec()).expect("sized");
        Batch {
            states: take(&self.states),
            actions: take(&self.actions),
            rewards: take(&self.rewards),
            next_states: take(&self.next_states),
            not_done: take(&self.not_done),
        }
    }
}
