use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{train, AgentConfig, GMode};
use crate::datasets::OfflineDataset;
use crate::envs::{Env, Rect};
use crate::error::{Error, Result};
use crate::rng::{seeded, stream};
use crate::stats;

use super::eval::{eval_policy, EvalSummary};

/// Which evaluation statistic a run is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    SuccessRate,
    Return,
}

impl Score {
    pub fn pick(&self, e: &EvalSummary) -> f64 {
        match self {
            Score::SuccessRate => e.success_rate,
            Score::Return => e.mean_return,
        }
    }
}

/// Trains one agent with `seed` and scores its final policy.
pub fn train_and_score(
    env: &dyn Env,
    ds: &OfflineDataset,
    cfg: &AgentConfig,
    seed: u64,
    eval_episodes: usize,
    score: Score,
) -> Result<f64> {
    let (agent, _) = train(ds, env.action_bound(), cfg, &mut seeded(seed), None).map_err(|f| f.error)?;
    let summary = eval_policy(env, &agent, eval_episodes, None, &mut stream(seed, 1))?;
    Ok(score.pick(&summary))
}

/// Runs `f` over `items` on `jobs` worker threads, preserving order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub algorithm: String,
    pub variant: Variant,
    pub seed: u64,
    pub score: f64,
    /// Set when training failed; the score is then 0.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub algorithm: String,
    pub full_mean: f64,
    pub full_std: f64,
    pub removed_mean: f64,
    pub removed_std: f64,
    /// `100·(full − removed)/full`; absent when `full ≤ 0`.
    pub drop_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub removed_fraction: f64,
    pub runs: Vec<StudyRun>,
    pub summary: Vec<StudySummary>,
}

pub fn drop_pct(full: f64, removed: f64) -> Option<f64> {
    (full > 0.0).then(|| 100.0 * (full - removed) / full)
}

/// Aggregates per-seed runs into per-algorithm means, in first-seen order.
pub fn summarize(runs: &[StudyRun]) -> Vec<StudySummary> {
    let mut names: Vec<&str> = Vec::new();
    for r in runs {
        if !names.contains(&r.algorithm.as_str()) {
            names.push(&r.algorithm);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let scores = |v: Variant| -> Vec<f64> {
                runs.iter().filter(|r| r.algorithm == name && r.variant == v).map(|r| r.score).collect()
            };
            let (full, removed) = (scores(Variant::Full), scores(Variant::Removed));
            let (fm, rm) = (stats::mean(&full), stats::mean(&removed));
            StudySummary {
                algorithm: name.to_string(),
                full_mean: fm,
                full_std: stats::std(&full),
                removed_mean: rm,
                removed_std: stats::std(&removed),
                drop_pct: drop_pct(fm, rm),
            }
        })
        .collect()
}

/// Trains every `(label, config)` on the full dataset and on the dataset
/// with `removal` cut out, once per seed, and compares the scores.
pub fn generalization_study(
    env: &dyn Env,
    full: &OfflineDataset,
    removal: &[Rect],
    algorithms: &[(String, AgentConfig)],
    seeds: &[u64],
    eval_episodes: usize,
    score: Score,
    jobs: usize,
) -> Result<StudyReport> {
    if algorithms.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("study needs at least one algorithm and one seed".into()));
    }
    let (removed, removed_fraction) = full.remove_regions(removal)?;
    let mut jobs_list = Vec::new();
    for (name, cfg) in algorithms {
        for variant in [Variant::Full, Variant::Removed] {
            for &seed in seeds {
                jobs_list.push((name.clone(), cfg.clone(), variant, seed));
            }
        }
    }
    let runs = parallel_map(&jobs_list, jobs, |(name, cfg, variant, seed)| {
        let ds = match variant {
            Variant::Full => full,
            Variant::Removed => &removed,
        };
        let outcome = train_and_score(env, ds, cfg, *seed, eval_episodes, score);
        StudyRun {
            algorithm: name.clone(),
            variant: *variant,
            seed: *seed,
            score: *outcome.as_ref().unwrap_or(&0.0),
            failed: outcome.is_err(),
        }
    })?;
    Ok(StudyReport { removed_fraction, summary: summarize(&runs), runs })
}

/// Hyperparameter varied by an ablation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationParam {
    Alpha,
    /// Quantile (percent) of the data-action distances used as `G`.
    G,
    /// Noise actions per pair in distance training.
    N,
}

impl std::str::FromStr for AblationParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(Self::Alpha),
            "g" | "g_quantile" => Ok(Self::G),
            "n" => Ok(Self::N),
            other => Err(Error::InvalidConfig(format!("unknown ablation parameter {other:?}"))),
        }
    }
}

impl AblationParam {
    /// The standard sweep values around `base`.
    pub fn default_values(&self, base: &AgentConfig) -> Vec<f64> {
        match self {
            Self::Alpha => vec![base.alpha - 2.5, base.alpha, base.alpha + 2.5],
            Self::G => vec![30.0, 50.0, 70.0, 90.0, 100.0],
            Self::N => vec![10.0, 20.0, 30.0],
        }
    }

    pub fn apply(&self, base: &AgentConfig, value: f64) -> Result<AgentConfig> {
        let mut cfg = base.clone();
        match self {
            Self::Alpha => cfg.alpha = value,
            Self::G => cfg.g_mode = GMode::Quantile(value),
            Self::N => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!("N must be a positive integer, got {value}")));
                }
                cfg.distance.n_noise = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub value: f64,
    pub completed: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: AblationParam,
    pub runs: Vec<SweepRun>,
    pub summary: Vec<SweepSummary>,
}

impl SweepReport {
    pub fn all_completed(&self) -> bool {
        self.runs.iter().all(|r| r.error.is_none())
    }
}

/// Full-factorial `values × seeds` sweep. Failed runs are recorded and the
/// sweep continues.
pub fn ablation_sweep(
    env: &dyn Env,
    ds: &OfflineDataset,
    base: &AgentConfig,
    param: AblationParam,
    values: &[f64],
    seeds: &[u64],
    eval_episodes: usize,
    score: Score,
    jobs: usize,
) -> Result<SweepReport> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("ablation needs values and seeds".into()));
    }
    let grid: Vec<(f64, u64)> = values.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let runs = parallel_map(&grid, jobs, |&(value, seed)| {
        let outcome = param.apply(base, value).and_then(|cfg| train_and_score(env, ds, &cfg, seed, eval_episodes, score));
        match outcome {
            Ok(s) => SweepRun { value, seed, score: Some(s), error: None },
            Err(e) => SweepRun { value, seed, score: None, error: Some(e.to_string()) },
        }
    })?;
    let summary = values
        .iter()
        .map(|&value| {
            let scores: Vec<f64> = runs.iter().filter(|r| r.value == value).filter_map(|r| r.score).collect();
            SweepSummary {
                value,
                completed: scores.len(),
                mean: if scores.is_empty() { f64::NAN } else { stats::mean(&scores) },
                std: stats::std(&scores),
            }
        })
        .collect();
    Ok(SweepReport { param, runs, summary })
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::datasets::Transition;
    use crate::envs::RandomWalk1d;

    fn run(algorithm: &str, variant: Variant, seed: u64, score: f64) -> StudyRun {
        StudyRun { algorithm: algorithm.into(), variant, seed, score, failed: false }
    }

    #[test]
    fn drop_matches_recomputation_from_seeds() {
        let runs = vec![
            run("doge", Variant::Full, 0, 0.8),
            run("doge", Variant::Full, 1, 0.6),
            run("doge", Variant::Removed, 0, 0.7),
            run("doge", Variant::Removed, 1, 0.5),
            run("td3bc", Variant::Full, 0, 0.0),
            run("td3bc", Variant::Removed, 0, 0.0),
        ];
        let s = summarize(&runs);
        assert_eq!(s[0].algorithm, "doge");
        let expected = 100.0 * (0.7 - 0.6) / 0.7;
        assert!((s[0].drop_pct.unwrap() - expected).abs() < 1e-12);
        assert_eq!(s[1].drop_pct, None);
    }

    #[test]
    fn ablation_values_follow_the_standard_grid() {
        let base = AgentConfig::default();
        assert_eq!(AblationParam::Alpha.default_values(&base), vec![5.0, 7.5, 10.0]);
        assert_eq!(AblationParam::G.default_values(&base), vec![30.0, 50.0, 70.0, 90.0, 100.0]);
        assert_eq!(AblationParam::N.default_values(&base), vec![10.0, 20.0, 30.0]);
        assert_eq!(AblationParam::G.apply(&base, 70.0).unwrap().g_mode, GMode::Quantile(70.0));
        assert!(AblationParam::N.apply(&base, 2.5).is_err());
    }

    fn tiny() -> (RandomWalk1d, OfflineDataset, AgentConfig) {
        let transitions = (0..20)
            .map(|i| {
                let s = -3.0 + 0.3 * i as f64;
                Transition { s: vec![s], a: vec![0.5], r: 0.1, s_next: vec![s + 0.5], done: false }
            })
            .collect();
        let ds = OfflineDataset::new(transitions, "random_walk_1d", "t").unwrap();
        let cfg = AgentConfig {
            algorithm: Algorithm::Doge,
            hidden: vec![4],
            batch_size: 4,
            total_steps: 4,
            distance: crate::distance::DistanceConfig { hidden: vec![4], steps: 2, n_noise: 2, ..Default::default() },
            distance_batch: 4,
            eval_every: 0,
            ..Default::default()
        };
        (RandomWalk1d::default(), ds, cfg)
    }

    #[test]
    fn empty_removal_changes_nothing() {
        let (env, ds, cfg) = tiny();
        let report =
            generalization_study(&env, &ds, &[], &[("doge".into(), cfg)], &[0, 1], 2, Score::Return, 2).unwrap();
        assert_eq!(report.removed_fraction, 0.0);
        let s = &report.summary[0];
        assert_eq!(s.full_mean, s.removed_mean);
        assert_eq!(report.runs.len(), 4);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let (env, ds, cfg) = tiny();
        let report = ablation_sweep(&env, &ds, &cfg, AblationParam::G, &[50.0, 250.0], &[3], 1, Score::Return, 1).unwrap();
        assert!(!report.all_completed());
        assert!(report.runs[0].score.is_some());
        assert!(report.runs[1].error.is_some());
        assert_eq!(report.summary[1].completed, 0);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let (env, ds, cfg) = tiny();
        let a = ablation_sweep(&env, &ds, &cfg, AblationParam::Alpha, &[5.0, 7.5], &[0, 1], 1, Score::Return, 1).unwrap();
        let b = ablation_sweep(&env, &ds, &cfg, AblationParam::Alpha, &[5.0, 7.5], &[0, 1], 1, Score::Return, 3).unwrap();
        assert_eq!(a, b);
    }
}
