use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use doge_core::agents::Algorithm;
use doge_core::experiments::AblationParam;

/// Distance-constrained offline RL at desk scale.
#[derive(Debug, Parser)]
#[command(name = "doge", version, about, propagate_version = true)]
pub struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for sweeps and studies.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an offline dataset.
    GenData(GenDataArgs),
    /// Train an agent on a dataset.
    Train(TrainArgs),
    /// Roll out a trained policy.
    Eval(EvalArgs),
    /// Critic error grid with hull membership (random walk).
    Grid(GridArgs),
    /// Interpolation/extrapolation probe of a trained critic.
    Probe(ProbeArgs),
    /// Hyperparameter ablation sweep.
    Ablate(AblateArgs),
    /// Full versus region-removed dataset study.
    Study(StudyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Grid(_) => "grid",
            Command::Probe(_) => "probe",
            Command::Ablate(_) => "ablate",
            Command::Study(_) => "study",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    RandomWalk,
    Maze,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub env: Option<EnvKind>,
    /// Random-walk geometry preset.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Maze collector episodes.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Cut out a region "x0,y0,x1,y1"; repeatable.
    #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
    pub remove: Vec<[f64; 4]>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Cells as "STATESxACTIONS", e.g. 100x50.
    #[arg(long, value_parser = parse_resolution)]
    pub resolution: Option<[usize; 2]>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// alpha, G or N.
    #[arg(long)]
    pub param: Option<AblationParam>,
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Region "x0,y0,x1,y1" to remove; repeatable. Replaces the configured list.
    #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
    pub remove: Vec<[f64; 4]>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub steps: Option<u64>,
}

pub fn parse_rect(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x0, y0, x1, y1] if x0 <= x1 && y0 <= y1 => Ok([x0, y0, x1, y1]),
        [_, _, _, _] => Err("expected x0 <= x1 and y0 <= y1".into()),
        _ => Err(format!("expected four comma-separated numbers, got {}", parts.len())),
    }
}

pub fn parse_resolution(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected STATESxACTIONS")?;
    let n: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let m: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if n == 0 || m == 0 {
        return Err("resolution must be positive".into());
    }
    Ok([n, m])
}
