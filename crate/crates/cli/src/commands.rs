use std::path::Path;
use std::time::SystemTime;

use serde::Serialize;

use doge_core::agents::{train, Agent};
use doge_core::config::{rects, EnvConfig, RunConfig};
use doge_core::datasets::io::{read_dataset, sidecar_path, write_dataset};
use doge_core::datasets::{generate_maze, generate_randomwalk, GeometrySpec, OfflineDataset, Projector};
use doge_core::envs::{Env, PointMaze2d, RandomWalk1d};
use doge_core::experiments::probe::{write_bins, write_records};
use doge_core::experiments::study::write_rows;
use doge_core::experiments::{
    ablation_sweep, binned_max, error_grid, eval_policy, generalization_study, interp_extrap_probe, ProbeKind, Score,
};
use doge_core::rng::{seeded, stream};
use doge_core::stats;

use crate::args::{Cli, Command, EnvKind};
use crate::output::{runtime, OutDir};
use crate::CliError;

/// Resolves the configuration, runs the command and always leaves a manifest.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = Some(jobs);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    apply_overrides(&cli.command, &mut cfg)?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let root = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?;
    let mut out = OutDir::prepare(&root, cli.force)?;
    let started = SystemTime::now();
    let result = execute(&cli.command, &cfg, &mut out);
    let error = result.as_ref().err().map(|e| e.to_string());
    out.write_manifest(cli.command.name(), &cfg, started, error)?;
    result
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    Ok(cfg)
}

fn apply_overrides(command: &Command, cfg: &mut RunConfig) -> Result<(), CliError> {
    match command {
        Command::GenData(a) => {
            match (a.env, &cfg.env) {
                (Some(EnvKind::RandomWalk), EnvConfig::Maze(_)) => cfg.env = EnvConfig::RandomWalk(RandomWalk1d::default()),
                (Some(EnvKind::Maze), EnvConfig::RandomWalk(_)) => cfg.env = EnvConfig::Maze(PointMaze2d::default()),
                _ => {}
            }
            if let Some(g) = &a.geometry {
                cfg.dataset.geometry = GeometrySpec::preset(g).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            if let Some(n) = a.episodes {
                cfg.dataset.maze_episodes = n;
            }
            cfg.dataset.remove.extend(&a.remove);
        }
        Command::Train(a) => {
            if let Some(algo) = a.algorithm {
                cfg.agent.algorithm = algo;
            }
            if let Some(s) = a.steps {
                cfg.agent.total_steps = s;
            }
        }
        Command::Eval(a) => {
            if let Some(n) = a.episodes {
                cfg.eval.episodes = n;
            }
        }
        Command::Grid(a) => {
            if let Some(r) = a.resolution {
                cfg.grid.resolution = r;
            }
        }
        Command::Probe(a) => {
            if let Some(n) = a.samples {
                cfg.probe.n_samples = n;
            }
            if let Some(k) = a.k {
                cfg.probe.k = k;
            }
        }
        Command::Ablate(a) => {
            if let Some(p) = a.param {
                cfg.ablate.param = p;
            }
            if let Some(v) = &a.values {
                cfg.ablate.values = v.clone();
            }
            if let Some(s) = &a.seeds {
                cfg.ablate.seeds = s.clone();
            }
            if let Some(s) = a.steps {
                cfg.agent.total_steps = s;
            }
        }
        Command::Study(a) => {
            if !a.remove.is_empty() {
                cfg.study.remove = a.remove.clone();
            }
            if let Some(s) = &a.seeds {
                cfg.study.seeds = s.clone();
            }
            if let Some(s) = a.steps {
                cfg.agent.total_steps = s;
            }
        }
    }
    Ok(())
}

fn execute(command: &Command, cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    match command {
        Command::GenData(_) => gen_data(cfg, out),
        Command::Train(a) => train_cmd(cfg, &a.data, out),
        Command::Eval(a) => eval_cmd(cfg, &a.checkpoint, out),
        Command::Grid(a) => grid_cmd(cfg, &a.checkpoint, &a.data, out),
        Command::Probe(a) => probe_cmd(cfg, &a.checkpoint, &a.data, out),
        Command::Ablate(a) => ablate_cmd(cfg, &a.data, out),
        Command::Study(a) => study_cmd(cfg, &a.data, out),
    }
}

fn jobs(cfg: &RunConfig) -> usize {
    cfg.jobs.unwrap_or(1)
}

fn score_for(env: &dyn Env) -> Score {
    if env.id() == "point_maze_2d" {
        Score::SuccessRate
    } else {
        Score::Return
    }
}

fn load_dataset(path: &Path, env: &dyn Env) -> Result<OfflineDataset, CliError> {
    let ds = read_dataset(path).map_err(runtime)?;
    if ds.env_id != env.id() {
        return Err(CliError::Runtime(format!(
            "{} was generated for {} but the configured env is {}",
            path.display(),
            ds.env_id,
            env.id()
        )));
    }
    Ok(ds)
}

fn load_agent(dir: &Path, env: &dyn Env) -> Result<Agent, CliError> {
    let agent = Agent::load(dir).map_err(runtime)?;
    if agent.state_dim != env.state_dim() || agent.action_dim != env.action_dim() {
        return Err(CliError::Runtime(format!("checkpoint {} does not match the configured env", dir.display())));
    }
    Ok(agent)
}

fn gen_data(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let mut rng = seeded(cfg.seed);
    let ds = match &cfg.env {
        EnvConfig::RandomWalk(e) => generate_randomwalk(e, &cfg.dataset.geometry, &mut rng),
        EnvConfig::Maze(m) => generate_maze(m, cfg.dataset.maze_episodes, &mut rng, &cfg.dataset.collector),
    }
    .map_err(runtime)?;
    let cut = rects(&cfg.dataset.remove).map_err(runtime)?;
    let ds = if cut.is_empty() { ds } else { ds.remove_regions(&cut).map_err(runtime)?.0 };
    let csv = out.file("dataset.csv");
    out.file(&sidecar_path(&csv).file_name().expect("file name").to_string_lossy());
    write_dataset(&ds, &csv).map_err(runtime)
}

fn train_cmd(cfg: &RunConfig, data: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let env = cfg.env.as_env();
    let ds = load_dataset(data, env)?;
    let mut evaluations = 0u64;
    let mut evaluator = |agent: &Agent| {
        evaluations += 1;
        eval_policy(env, agent, cfg.agent.eval_episodes, None, &mut stream(cfg.seed, evaluations)).map(|e| e.mean_return)
    };
    let result = train(&ds, env.action_bound(), &cfg.agent, &mut seeded(cfg.seed), Some(&mut evaluator));
    let log_path = out.file("train_log.csv");
    match result {
        Ok((agent, log)) => {
            log.write_csv(&log_path).map_err(runtime)?;
            agent.save(&out.file("checkpoints")).map_err(runtime)
        }
        Err(failure) => {
            failure.log.write_csv(&log_path).map_err(runtime)?;
            Err(CliError::Runtime(failure.to_string()))
        }
    }
}

fn eval_cmd(cfg: &RunConfig, checkpoint: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let env = cfg.env.as_env();
    let agent = load_agent(checkpoint, env)?;
    let summary = eval_policy(env, &agent, cfg.eval.episodes, None, &mut seeded(cfg.seed)).map_err(runtime)?;
    write_rows(&[summary], &out.file("eval.csv")).map_err(runtime)
}

#[derive(Serialize)]
struct GridSummary {
    cells: usize,
    in_hull_cells: usize,
    in_hull_mean: Option<f64>,
    out_hull_mean: Option<f64>,
}

fn grid_cmd(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let EnvConfig::RandomWalk(env) = &cfg.env else {
        return Err(CliError::Usage("grid needs the random-walk env".into()));
    };
    let agent = load_agent(checkpoint, env)?;
    let ds = load_dataset(data, env)?;
    let [n, m] = cfg.grid.resolution;
    let grid = error_grid(env, &agent, &ds, (n, m), cfg.grid.rollouts, &mut seeded(cfg.seed)).map_err(runtime)?;
    grid.write_csv(&out.file("grid.csv")).map_err(runtime)?;
    grid.write_matrix_csv(&out.file("grid_matrix.csv")).map_err(runtime)?;
    let (in_hull_mean, out_hull_mean) = grid.hull_means();
    let summary = GridSummary {
        cells: grid.cells.len(),
        in_hull_cells: grid.cells.iter().filter(|c| c.in_hull).count(),
        in_hull_mean,
        out_hull_mean,
    };
    write_rows(&[summary], &out.file("grid_summary.csv")).map_err(runtime)
}

#[derive(Serialize)]
struct ProbeSummary {
    samples: usize,
    spearman_d_dq: f64,
    bin_inversions: usize,
    dataset_diameter: f64,
    max_interpolated_d: f64,
}

fn probe_cmd(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let env = cfg.env.as_env();
    let agent = load_agent(checkpoint, env)?;
    let ds = load_dataset(data, env)?;
    let records = interp_extrap_probe(&ds, &agent, &cfg.probe, &mut seeded(cfg.seed)).map_err(runtime)?;
    let d: Vec<f64> = records.iter().map(|r| r.d).collect();
    let dq: Vec<f64> = records.iter().map(|r| r.dq).collect();
    let bins = binned_max(&d, &dq, 20, 5);
    write_records(&records, &out.file("probe.csv")).map_err(runtime)?;
    write_bins(&bins, &out.file("probe_bins.csv")).map_err(runtime)?;
    let maxes: Vec<f64> = bins.iter().map(|b| b.max_dq).collect();
    let summary = ProbeSummary {
        samples: records.len(),
        spearman_d_dq: stats::spearman(&d, &dq),
        bin_inversions: stats::inversions(&maxes),
        dataset_diameter: Projector::new(&ds, false).map_err(runtime)?.diameter(),
        max_interpolated_d: records
            .iter()
            .filter(|r| r.kind == ProbeKind::Interpolated)
            .map(|r| r.d)
            .fold(0.0, f64::max),
    };
    write_rows(&[summary], &out.file("probe_summary.csv")).map_err(runtime)
}

fn ablate_cmd(cfg: &RunConfig, data: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let env = cfg.env.as_env();
    let ds = load_dataset(data, env)?;
    let param = cfg.ablate.param;
    let values = if cfg.ablate.values.is_empty() { param.default_values(&cfg.agent) } else { cfg.ablate.values.clone() };
    let report = ablation_sweep(
        env,
        &ds,
        &cfg.agent,
        param,
        &values,
        &cfg.ablate.seeds,
        cfg.ablate.eval_episodes,
        score_for(env),
        jobs(cfg),
    )
    .map_err(runtime)?;
    write_rows(&report.runs, &out.file("ablate_runs.csv")).map_err(runtime)?;
    write_rows(&report.summary, &out.file("ablate_summary.csv")).map_err(runtime)?;
    if report.all_completed() {
        Ok(())
    } else {
        let failed = report.runs.iter().filter(|r| r.error.is_some()).count();
        Err(CliError::Runtime(format!("{failed} of {} sweep runs failed", report.runs.len())))
    }
}

#[derive(Serialize)]
struct StudyRow {
    algorithm: String,
    full_mean: f64,
    full_std: f64,
    removed_mean: f64,
    removed_std: f64,
    drop_pct: Option<f64>,
    removed_fraction: f64,
}

fn study_cmd(cfg: &RunConfig, data: &Path, out: &mut OutDir) -> Result<(), CliError> {
    let env = cfg.env.as_env();
    let ds = load_dataset(data, env)?;
    let arms = cfg.study.arm_configs(&cfg.agent).map_err(runtime)?;
    let cut = rects(&cfg.study.remove).map_err(runtime)?;
    let report = generalization_study(
        env,
        &ds,
        &cut,
        &arms,
        &cfg.study.seeds,
        cfg.study.eval_episodes,
        score_for(env),
        jobs(cfg),
    )
    .map_err(runtime)?;
    write_rows(&report.runs, &out.file("study_runs.csv")).map_err(runtime)?;
    let rows: Vec<StudyRow> = report
        .summary
        .iter()
        .map(|s| StudyRow {
            algorithm: s.algorithm.clone(),
            full_mean: s.full_mean,
            full_std: s.full_std,
            removed_mean: s.removed_mean,
            removed_std: s.removed_std,
            drop_pct: s.drop_pct,
            removed_fraction: report.removed_fraction,
        })
        .collect();
    write_rows(&rows, &out.file("study_summary.csv")).map_err(runtime)?;
    let failed = report.runs.iter().filter(|r| r.failed).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} study runs failed and were scored 0")));
    }
    Ok(())
}
