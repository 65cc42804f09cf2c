use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::datasets::OfflineDataset;
use crate::envs::random_walk::{STATE_HIGH, STATE_LOW};
use crate::envs::{mc_q_batch, Env, RandomWalk1d};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Hull};
use crate::nn::Matrix;
use crate::Rng64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub s: f64,
    pub a: f64,
    pub q_hat: f64,
    pub q_mc: f64,
    /// `q_hat − q_mc`.
    pub error: f64,
    /// `error` minus its minimum over the cell's state row.
    pub relative_error: f64,
    pub in_hull: bool,
}

/// Critic error over a regular `(s, a)` grid, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGrid {
    pub n_states: usize,
    pub n_actions: usize,
    pub cells: Vec<GridCell>,
}

/// Cell centers of `n` equal cells over `[lo, hi]`.
pub fn centers(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let w = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * w).collect()
}

/// Subtracts each row's minimum from every entry of the row.
pub fn relative_errors(errors: &[f64], n_actions: usize) -> Vec<f64> {
    errors
        .chunks(n_actions)
        .flat_map(|row| {
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.iter().map(move |e| e - m)
        })
        .collect()
}

/// Raw `(s, a)` points of a 1D-state, 1D-action dataset as a hull.
pub fn dataset_hull(ds: &OfflineDataset) -> Result<Hull> {
    if ds.state_dim != 1 || ds.action_dim != 1 {
        return Err(Error::Precondition("exact hulls need a 1D state and a 1D action".into()));
    }
    let pts: Vec<[f64; 2]> = (0..ds.len())
        .map(|i| {
            let x = ds.state_action(i, true);
            [x[0], x[1]]
        })
        .collect();
    Ok(convex_hull(&pts))
}

/// Evaluates critic 1 of `agent` against Monte-Carlo returns of its own
/// actor on a `n_states × n_actions` grid of cell centers.
pub fn error_grid(
    env: &RandomWalk1d,
    agent: &Agent,
    ds: &OfflineDataset,
    (n_states, n_actions): (usize, usize),
    n_rollouts: usize,
    rng: &mut Rng64,
) -> Result<ErrorGrid> {
    if n_states == 0 || n_actions == 0 || n_rollouts == 0 {
        return Err(Error::InvalidConfig("grid resolution and rollouts must be positive".into()));
    }
    let hull = dataset_hull(ds)?;
    let bound = env.action_bound();
    let ss = centers(STATE_LOW, STATE_HIGH, n_states);
    let aa = centers(-bound, bound, n_actions);
    let mut s_col = Vec::with_capacity(n_states * n_actions);
    let mut a_col = Vec::with_capacity(n_states * n_actions);
    for &s in &ss {
        for &a in &aa {
            s_col.push(s);
            a_col.push(a);
        }
    }
    let states = Matrix::column(&s_col);
    let actions = Matrix::column(&a_col);
    let q_hat = agent.q_raw(&states, &actions)?;
    let q_mc = mc_q_batch(env, agent, &states, &actions, env.gamma(), n_rollouts, rng);
    let errors: Vec<f64> = q_hat.iter().zip(&q_mc).map(|(h, m)| h - m).collect();
    let rel = relative_errors(&errors, n_actions);
    let cells = (0..s_col.len())
        .map(|i| GridCell {
            s: s_col[i],
            a: a_col[i],
            q_hat: q_hat[i],
            q_mc: q_mc[i],
            error: errors[i],
            relative_error: rel[i],
            in_hull: hull.contains([s_col[i], a_col[i]]),
        })
        .collect();
    Ok(ErrorGrid { n_states, n_actions, cells })
}

impl ErrorGrid {
    /// Mean relative error over cells inside and outside the hull. `None`
    /// for a side with no cells.
    pub fn hull_means(&self) -> (Option<f64>, Option<f64>) {
        let mut sums = [0.0; 2];
        let mut counts = [0usize; 2];
        for c in &self.cells {
            let k = usize::from(!c.in_hull);
            sums[k] += c.relative_error;
            counts[k] += 1;
        }
        let m = |k: usize| (counts[k] > 0).then(|| sums[k] / counts[k] as f64);
        (m(0), m(1))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Relative errors as a dense matrix: one line per state, one column per action.
    pub fn write_matrix_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.cells.chunks(self.n_actions) {
            let line: Vec<String> = row.iter().map(|c| c.relative_error.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}
