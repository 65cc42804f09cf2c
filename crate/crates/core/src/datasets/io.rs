//! Dataset files: one CSV of transitions plus a JSON sidecar.
//!
//! CSV columns, in order: `s0..s{d-1}`, `a0..a{k-1}`, `r`, `sn0..sn{d-1}`,
//! `done` (0 or 1). Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces every value bit for bit. The sidecar sits
//! next to the CSV with a `.json` extension and records the column order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NormStats, OfflineDataset, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub env_id: String,
    pub geometry_id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub n_transitions: usize,
    pub columns: Vec<String>,
    pub norm_stats: Option<NormStats>,
}

pub fn columns(state_dim: usize, action_dim: usize) -> Vec<String> {
    let mut cols: Vec<String> = (0..state_dim).map(|i| format!("s{i}")).collect();
    cols.extend((0..action_dim).map(|i| format!("a{i}")));
    cols.push("r".into());
    cols.extend((0..state_dim).map(|i| format!("sn{i}")));
    cols.push("done".into());
    cols
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_dataset(ds: &OfflineDataset, csv_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(columns(ds.state_dim, ds.action_dim))?;
    let mut row: Vec<String> = Vec::with_capacity(2 * ds.state_dim + ds.action_dim + 2);
    for t in &ds.transitions {
        row.clear();
        row.extend(t.s.iter().map(f64::to_string));
        row.extend(t.a.iter().map(f64::to_string));
        row.push(t.r.to_string());
        row.extend(t.s_next.iter().map(f64::to_string));
        row.push(if t.done { "1".into() } else { "0".into() });
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = Sidecar {
        env_id: ds.env_id.clone(),
        geometry_id: ds.geometry_id.clone(),
        state_dim: ds.state_dim,
        action_dim: ds.action_dim,
        n_transitions: ds.len(),
        columns: columns(ds.state_dim, ds.action_dim),
        norm_stats: ds.norm_stats.clone(),
    };
    fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

pub fn read_dataset(csv_path: &Path) -> Result<OfflineDataset> {
    let side_path = sidecar_path(csv_path);
    for p in [csv_path, side_path.as_path()] {
        if !p.exists() {
            return Err(Error::MissingFile(p.to_path_buf()));
        }
    }
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&side_path)?)?;
    let (ds_dim, da_dim) = (sidecar.state_dim, sidecar.action_dim);
    let expected = columns(ds_dim, da_dim);
    if sidecar.columns != expected {
        return Err(Error::Format("sidecar column list does not match dimensions".into()));
    }
    let mut r = csv::Reader::from_path(csv_path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    let parse = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}"))) };
    let mut transitions = Vec::with_capacity(sidecar.n_transitions);
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<&str> = rec.iter().collect();
        let mut it = vals.iter();
        let mut take = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| parse(it.next().unwrap())).collect() };
        let s = take(ds_dim)?;
        let a = take(da_dim)?;
        let rew = take(1)?[0];
        let s_next = take(ds_dim)?;
        let done = match vals[vals.len() - 1] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format(format!("bad done flag {other:?}"))),
        };
        transitions.push(Transition { s, a, r: rew, s_next, done });
    }
    if transitions.len() != sidecar.n_transitions {
        return Err(Error::Format(format!(
            "sidecar promises {} transitions, CSV has {}",
            sidecar.n_transitions,
            transitions.len()
        )));
    }
    let mut ds = OfflineDataset::new(transitions, sidecar.env_id, sidecar.geometry_id)?;
    ds.norm_stats = sidecar.norm_stats;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_randomwalk, GeometrySpec};
    use crate::envs::RandomWalk1d;
    use crate::rng::seeded;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn csv_round_trip_is_bit_exact(seed in any::<u64>(), normalize in any::<bool>()) {
            let mut ds = generate_randomwalk(&RandomWalk1d::default(), &GeometrySpec::default(), &mut seeded(seed)).unwrap();
            ds.transitions[3].done = true;
            if normalize {
                ds = ds.normalize_states().unwrap().0;
            }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("data.csv");
            write_dataset(&ds, &path).unwrap();
            let back = read_dataset(&path).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn missing_sidecar_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "s0,a0,r,sn0,done\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::MissingFile(_))));
    }
}
