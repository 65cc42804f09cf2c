//! Dense networks and their training substrate: matrices, a reverse-mode
//! tape, ReLU MLPs, Adam, target-network averaging and parameter files.

pub mod adam;
pub mod io;
pub mod matrix;
pub mod mlp;
pub mod tape;

pub use adam::{Adam, AdamConfig};
pub use matrix::Matrix;
pub use mlp::{soft_update, Dense, Mlp, MlpGrads, ParamVars};
pub use tape::{Tape, Var};
