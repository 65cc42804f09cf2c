//! Desk-scale studies: critic error grids, interpolation/extrapolation
//! probes, data-removal generalization studies and ablation sweeps.

pub mod eval;
pub mod grid;
pub mod probe;
pub mod study;

pub use eval::{eval_policy, EvalSummary};
pub use grid::{error_grid, ErrorGrid, GridCell};
pub use probe::{binned_max, interp_extrap_probe, DistanceBin, ProbeConfig, ProbeKind, ProbeRecord};
pub use study::{
    ablation_sweep, generalization_study, AblationParam, Score, StudyReport, StudyRun, StudySummary, SweepReport,
    SweepRun, Variant,
};
