//! The analytic optimum of the distance regression for an empirical dataset.

use crate::datasets::OfflineDataset;
use crate::error::{Error, Result};

/// Default state-match tolerance: exact matching up to float noise.
pub const EXACT_MATCH: f64 = 1e-9;

/// `g*(s, â)`: mean distance from `â` to the actions recorded at states
/// within `tolerance` of `s`. Defined only for states that match the data.
#[derive(Debug, Clone)]
pub struct DistanceOracle<'a> {
    ds: &'a OfflineDataset,
    tolerance: f64,
}

impl<'a> DistanceOracle<'a> {
    pub fn new(ds: &'a OfflineDataset, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!("match tolerance {tolerance} must be >= 0")));
        }
        Ok(Self { ds, tolerance })
    }

    pub fn exact(ds: &'a OfflineDataset) -> Self {
        Self { ds, tolerance: EXACT_MATCH }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Actions recorded at states within tolerance of `s`, in dataset order.
    pub fn matched_actions(&self, s: &[f64]) -> Result<Vec<&'a [f64]>> {
        let tol2 = self.tolerance * self.tolerance;
        let ds: &'a OfflineDataset = self.ds;
        let out: Vec<&'a [f64]> = ds
            .transitions
            .iter()
            .filter(|t| t.s.iter().zip(s).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() <= tol2)
            .map(|t| t.a.as_slice())
            .collect();
        if out.is_empty() {
            return Err(Error::StateNotInDataset);
        }
        Ok(out)
    }

    pub fn g(&self, s: &[f64], a_hat: &[f64]) -> Result<f64> {
        let actions = self.matched_actions(s)?;
        Ok(mean_distance(&actions, a_hat))
    }

    /// Mean of the matched actions, the state-conditioned centroid.
    pub fn centroid(&self, s: &[f64]) -> Result<Vec<f64>> {
        let actions = self.matched_actions(s)?;
        Ok(centroid_of(&actions))
    }
}

/// `(1/n) Σ ‖â − a_i‖`.
pub fn mean_distance(actions: &[&[f64]], a_hat: &[f64]) -> f64 {
    let total: f64 = actions
        .iter()
        .map(|a| a.iter().zip(a_hat).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .sum();
    total / actions.len() as f64
}

pub fn centroid_of(actions: &[&[f64]]) -> Vec<f64> {
    let dim = actions[0].len();
    let mut c = vec![0.0; dim];
    for a in actions {
        for (ci, ai) in c.iter_mut().zip(a.iter()) {
            *ci += ai;
        }
    }
    c.iter_mut().for_each(|v| *v /= actions.len() as f64);
    c
}

/// Centroid of the dataset actions at state `s` (exact state match).
pub fn centroid(ds: &OfflineDataset, s: &[f64]) -> Result<Vec<f64>> {
    DistanceOracle::exact(ds).centroid(s)
}

/// `g*` at `(s, â)` with exact state matching.
pub fn oracle_g(ds: &OfflineDataset, s: &[f64], a_hat: &[f64]) -> Result<f64> {
    DistanceOracle::exact(ds).g(s, a_hat)
}
