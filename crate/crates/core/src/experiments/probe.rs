use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::datasets::{OfflineDataset, Projector};
use crate::error::{Error, Result};
use crate::geometry::Hull;
use crate::nn::Matrix;
use crate::Rng64;

use super::grid::dataset_hull;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Interpolated,
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub n_samples: usize,
    /// Dataset points combined per probe.
    pub k: usize,
    /// Share of probes that are extrapolated.
    pub extrapolated_fraction: f64,
    /// Probability that an extrapolated weight vector is rescaled by `u`.
    pub scale_probability: f64,
    pub scale_range: [f64; 2],
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { n_samples: 2000, k: 3, extrapolated_fraction: 0.5, scale_probability: 0.5, scale_range: [0.5, 1.5] }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("probe needs n_samples > 0 and k > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.extrapolated_fraction) || !(0.0..=1.0).contains(&self.scale_probability) {
            return Err(Error::InvalidConfig("probe fractions must lie in [0, 1]".into()));
        }
        if self.extrapolated_fraction > 0.0 && self.k < 2 {
            return Err(Error::InvalidConfig("extrapolation needs k >= 2".into()));
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig("scale range must be positive and ordered".into()));
        }
        Ok(())
    }
}

/// One synthesized `(s, a)` point with its distance to the nearest dataset
/// point and the critic's value gap to that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub kind: ProbeKind,
    /// Concatenated `(s, a)`, `;`-separated in CSV form.
    #[serde(with = "semicolon")]
    pub x: Vec<f64>,
    pub d: f64,
    pub dq: f64,
    pub g_value: Option<f64>,
    /// Index of the negated weight (extrapolated probes).
    pub negated: Option<usize>,
    /// Factor applied to all weights (1 when unscaled).
    pub scale: f64,
    /// Exact hull membership, 2D `(s, a)` only.
    pub in_hull: Option<bool>,
    pub hull_distance: Option<f64>,
}

mod semicolon {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<String> = x.iter().map(f64::to_string).collect();
        s.serialize_str(&parts.join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        text.split(';').map(|p| p.parse().map_err(serde::de::Error::custom)).collect()
    }
}

/// Uniform Dirichlet weights via normalized unit exponentials.
pub fn dirichlet(k: usize, rng: &mut Rng64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Negates weight `j` and rescales the others so the weights still sum to one.
pub fn extrapolation_weights(alpha: &[f64], j: usize) -> Vec<f64> {
    let aj = alpha[j];
    let c = (1.0 + aj) / (1.0 - aj);
    alpha.iter().enumerate().map(|(i, &a)| if i == j { -a } else { c * a }).collect()
}

/// Generates probe points from `ds` and measures them with `agent`'s first
/// critic (and distance network, when present).
pub fn interp_extrap_probe(ds: &OfflineDataset, agent: &Agent, cfg: &ProbeConfig, rng: &mut Rng64) -> Result<Vec<ProbeRecord>> {
    cfg.validate()?;
    let projector = Projector::new(ds, false)?;
    let n = projector.len();
    let hull: Option<Hull> = dataset_hull(ds).ok();
    let sd = ds.state_dim;
    let mut points = Vec::with_capacity(cfg.n_samples);
    let mut meta = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let k = cfg.k.min(n);
        let idx: Vec<usize> = sample(rng, n, k).into_vec();
        let alpha = dirichlet(k, rng);
        let extrapolate = k >= 2 && rng.random::<f64>() < cfg.extrapolated_fraction;
        let (weights, negated, scale) = if extrapolate {
            let j = rng.random_range(0..k);
            let mut w = extrapolation_weights(&alpha, j);
            let scale = if rng.random::<f64>() < cfg.scale_probability {
                rng.random_range(cfg.scale_range[0]..=cfg.scale_range[1])
            } else {
                1.0
            };
            w.iter_mut().for_each(|v| *v *= scale);
            (w, Some(j), scale)
        } else {
            (alpha, None, 1.0)
        };
        let mut x = vec![0.0; sd + ds.action_dim];
        for (&i, &w) in idx.iter().zip(&weights) {
            for (xi, pi) in x.iter_mut().zip(projector.point(i)) {
                *xi += w * pi;
            }
        }
        let kind = if extrapolate { ProbeKind::Extrapolated } else { ProbeKind::Interpolated };
        meta.push((kind, negated, scale));
        points.push(x);
    }
    let projections = points.iter().map(|x| projector.project(x)).collect::<Result<Vec<_>>>()?;
    let split = |rows: &mut dyn Iterator<Item = &Vec<f64>>| -> Result<(Matrix, Matrix)> {
        let (s, a): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.map(|x| (x[..sd].to_vec(), x[sd..].to_vec())).unzip();
        Ok((Matrix::from_rows(&s)?, Matrix::from_rows(&a)?))
    };
    let (s, a) = split(&mut points.iter())?;
    let nearest: Vec<Vec<f64>> = projections.iter().map(|p| p.nearest.clone()).collect();
    let (ps, pa) = split(&mut nearest.iter())?;
    let q = agent.q_raw(&s, &a)?;
    let q_proj = agent.q_raw(&ps, &pa)?;
    let g = match &agent.distance {
        Some(dist) => Some(dist.eval_batch(&agent.normalize(&s), &a)?),
        None => None,
    };
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let (kind, negated, scale) = meta[i];
            let (in_hull, hull_distance) = match &hull {
                Some(h) => (Some(h.contains([x[0], x[1]])), Some(h.distance([x[0], x[1]]))),
                None => (None, None),
            };
            ProbeRecord {
                kind,
                d: projections[i].distance,
                dq: (q[i] - q_proj[i]).abs(),
                g_value: g.as_ref().map(|g| g[i]),
                negated,
                scale,
                in_hull,
                hull_distance,
                x,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub d_lo: f64,
    pub d_hi: f64,
    pub count: usize,
    pub max_dq: f64,
}

/// Empirical upper envelope of `dq` against `d`: `n_bins` equal-width bins
/// over the observed `d` range, each bin with fewer than `min_count`
/// samples merged into its right neighbor (the last one into its left).
pub fn binned_max(d: &[f64], dq: &[f64], n_bins: usize, min_count: usize) -> Vec<DistanceBin> {
    assert_eq!(d.len(), dq.len());
    if d.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut raw: Vec<DistanceBin> = (0..n_bins)
        .map(|b| DistanceBin {
            d_lo: lo + b as f64 * width,
            d_hi: if b + 1 == n_bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
            max_dq: f64::NEG_INFINITY,
        })
        .collect();
    for (&di, &qi) in d.iter().zip(dq) {
        let b = if width > 0.0 { (((di - lo) / width) as usize).min(n_bins - 1) } else { 0 };
        raw[b].count += 1;
        raw[b].max_dq = raw[b].max_dq.max(qi);
    }
    let mut merged: Vec<DistanceBin> = Vec::new();
    let mut pending: Option<DistanceBin> = None;
    for bin in raw {
        let cur = match pending.take() {
            Some(p) => DistanceBin { d_lo: p.d_lo, d_hi: bin.d_hi, count: p.count + bin.count, max_dq: p.max_dq.max(bin.max_dq) },
            None => bin,
        };
        if cur.count < min_count {
            pending = Some(cur);
        } else {
            merged.push(cur);
        }
    }
    if let Some(p) = pending {
        match merged.last_mut() {
            Some(last) => {
                last.d_hi = p.d_hi;
                last.count += p.count;
                last.max_dq = last.max_dq.max(p.max_dq);
            }
            None if p.count > 0 => merged.push(p),
            None => {}
        }
    }
    merged
}

pub fn write_records(records: &[ProbeRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bins(bins: &[DistanceBin], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentConfig, Algorithm};
    use crate::datasets::Transition;
    use crate::rng::seeded;

    fn dataset() -> OfflineDataset {
        let transitions = (0..30)
            .map(|i| {
                let s = -6.0 + 0.4 * i as f64;
                Transition { s: vec![s], a: vec![((i * 5) % 9) as f64 / 4.0 - 1.0], r: 0.0, s_next: vec![s], done: false }
            })
            .collect();
        OfflineDataset::new(transitions, "random_walk_1d", "t").unwrap()
    }

    fn agent() -> Agent {
        Agent::new(AgentConfig { algorithm: Algorithm::Td3, hidden: vec![8], ..Default::default() }, 1, 1, 1.0, &mut seeded(0)).unwrap()
    }

    #[test]
    fn dirichlet_weights_are_a_simplex_point() {
        let w = dirichlet(6, &mut seeded(1));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn extrapolation_weights_sum_to_one_with_one_negative() {
        let w = extrapolation_weights(&[0.2, 0.5, 0.3], 1);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w.iter().filter(|&&v| v < 0.0).count(), 1);
        assert_eq!(w[1], -0.5);
    }

    #[test]
    fn single_point_interpolation_hits_the_dataset() {
        let cfg = ProbeConfig { n_samples: 50, k: 1, extrapolated_fraction: 0.0, ..Default::default() };
        let recs = interp_extrap_probe(&dataset(), &agent(), &cfg, &mut seeded(2)).unwrap();
        assert!(recs.iter().all(|r| r.d == 0.0 && r.dq == 0.0));
    }

    #[test]
    fn interpolated_points_are_inside_and_bounded() {
        let ds = dataset();
        let cfg = ProbeConfig { n_samples: 400, k: 4, ..Default::default() };
        let recs = interp_extrap_probe(&ds, &agent(), &cfg, &mut seeded(3)).unwrap();
        let b = Projector::new(&ds, false).unwrap().diameter();
        for r in &recs {
            assert!(r.d >= 0.0 && r.dq >= 0.0);
            // Membership and hull distance agree.
            assert_eq!(r.in_hull.unwrap(), r.hull_distance.unwrap() <= 1e-9, "{r:?}");
            if r.kind == ProbeKind::Interpolated {
                assert!(r.in_hull.unwrap());
                assert!(r.d <= b);
            }
        }
        assert!(recs.iter().any(|r| r.kind == ProbeKind::Extrapolated && !r.in_hull.unwrap()));
    }

    #[test]
    fn records_round_trip_through_csv() {
        let cfg = ProbeConfig { n_samples: 20, ..Default::default() };
        let recs = interp_extrap_probe(&dataset(), &agent(), &cfg, &mut seeded(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_records(&recs, &path).unwrap();
        let back: Vec<ProbeRecord> = csv::Reader::from_path(&path).unwrap().deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn bins_merge_sparse_ranges() {
        // 10 samples near 0, 1 near 0.5, 10 near 1.
        let mut d: Vec<f64> = (0..10).map(|i| i as f64 * 0.001).collect();
        d.push(0.5);
        d.extend((0..10).map(|i| 1.0 - i as f64 * 0.001));
        let dq: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
        let bins = binned_max(&d, &dq, 20, 5);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 21);
        assert!(bins.iter().all(|b| b.count >= 5));
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[1].max_dq, 2.0);
        assert_eq!(bins[0].d_lo, 0.0);
        assert_eq!(bins[1].d_hi, 1.0);
    }

    #[test]
    fn constant_distances_fall_in_one_bin() {
        let bins = binned_max(&[0.3; 7], &[1.0, 2.0, 0.5, 0.0, 0.0, 0.0, 0.0], 20, 5);
        assert_eq!(bins.len(), 1);
        assert_eq!((bins[0].count, bins[0].max_dq), (7, 2.0));
    }
}
