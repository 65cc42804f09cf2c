//! Benchmark fixtures. The benchmarks live in `benches/`.

use doge_core::datasets::{generate_randomwalk, GeometrySpec, OfflineDataset};
use doge_core::envs::RandomWalk1d;
use doge_core::rng::seeded;

/// The default random-walk dataset used by every benchmark.
pub fn fixture_dataset() -> OfflineDataset {
    generate_randomwalk(&RandomWalk1d::default(), &GeometrySpec::default(), &mut seeded(0)).expect("fixture dataset")
}
