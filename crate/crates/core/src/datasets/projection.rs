//! Nearest-neighbor projection onto a dataset's `(s, a)` points.

use super::OfflineDataset;
use crate::error::{Error, Result};

/// Exact linear-scan nearest neighbor over concatenated `(s, a)` vectors.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    points: Vec<f64>,
}

/// Result of a projection: the nearest point, its index and the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub index: usize,
    pub nearest: Vec<f64>,
    pub distance: f64,
}

impl Projector {
    /// Indexes `ds`. With `normalized = false` the states are mapped back to
    /// raw coordinates first; with `true` the stored states are used as is.
    pub fn new(ds: &OfflineDataset, normalized: bool) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset("nothing to project onto".into()));
        }
        let dim = ds.state_dim + ds.action_dim;
        let mut points = Vec::with_capacity(ds.len() * dim);
        for i in 0..ds.len() {
            points.extend(ds.state_action(i, !normalized));
        }
        Ok(Self { dim, points })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().ok_or_else(|| Error::EmptyDataset("no points".into()))?.len();
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            flat.extend_from_slice(p);
        }
        Ok(Self { dim, points: flat })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Nearest point to `x`; ties go to the lowest index.
    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("projection query".into()));
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Ok(Projection { index: best.0, nearest: self.point(best.0).to_vec(), distance: best.1.sqrt() })
    }

    /// Largest pairwise distance between indexed points.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }
}

/// One-shot projection of `x` onto the raw `(s, a)` points of `ds`.
pub fn project(x: &[f64], ds: &OfflineDataset) -> Result<Projection> {
    Projector::new(ds, false)?.project(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn points(ps: &[[f64; 2]]) -> Projector {
        Projector::from_points(&ps.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn dataset_point_projects_to_itself() {
        let p = points(&[[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]]);
        let out = p.project(&[1.0, 3.0]).unwrap();
        assert_eq!((out.index, out.distance), (2, 0.0));
    }

    #[test]
    fn nearest_of_two() {
        let p = points(&[[0.0, 0.0], [2.0, 0.0]]);
        let out = p.project(&[0.9, 0.0]).unwrap();
        assert_eq!(out.nearest, vec![0.0, 0.0]);
        assert!((out.distance - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let p = points(&[[0.0, 0.0], [2.0, 0.0]]);
        assert_eq!(p.project(&[1.0, 0.0]).unwrap().index, 0);
        let q = points(&[[2.0, 0.0], [0.0, 0.0]]);
        assert_eq!(q.project(&[1.0, 0.0]).unwrap().index, 0);
    }

    #[test]
    fn bad_queries_are_rejected() {
        let p = points(&[[0.0, 0.0]]);
        assert!(p.project(&[0.0]).is_err());
        assert!(p.project(&[f64::NAN, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_global_minimum(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..25),
            x in prop::collection::vec(-6.0f64..6.0, 3),
        ) {
            let proj = Projector::from_points(&pts).unwrap();
            let out = proj.project(&x).unwrap();
            for p in &pts {
                let d = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(out.distance <= d + 1e-12);
            }
        }
    }
}
