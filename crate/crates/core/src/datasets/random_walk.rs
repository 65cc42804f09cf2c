//! Random-walk datasets with prescribed state-action geometry.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{OfflineDataset, Transition};
use crate::envs::random_walk::{STATE_HIGH, STATE_LOW};
use crate::envs::{Env, RandomWalk1d};
use crate::error::{Error, Result};
use crate::Rng64;

/// A region of the `(s, a)` plane with a number of uniform samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// `s ∈ [s0, s1]`, `a ∈ [a0, a1]`.
    Rect { s: [f64; 2], a: [f64; 2], count: usize },
    /// Points within `half_width` (in `a`) of the line `a = slope·s + intercept`
    /// for `s ∈ [s0, s1]`.
    Band { s: [f64; 2], slope: f64, intercept: f64, half_width: f64, count: usize },
    /// Uniform in the ellipse centered at `(s, a)` with the given radii.
    Cluster { center: [f64; 2], radius: [f64; 2], count: usize },
}

impl Region {
    pub fn count(&self) -> usize {
        match self {
            Region::Rect { count, .. } | Region::Band { count, .. } | Region::Cluster { count, .. } => *count,
        }
    }

    fn validate(&self) -> Result<()> {
        let in_s = |v: f64| (STATE_LOW..=STATE_HIGH).contains(&v);
        let in_a = |v: f64| (-1.0..=1.0).contains(&v);
        let ok = match self {
            Region::Rect { s, a, .. } => in_s(s[0]) && in_s(s[1]) && in_a(a[0]) && in_a(a[1]) && s[0] <= s[1] && a[0] <= a[1],
            Region::Band { s, half_width, .. } => in_s(s[0]) && in_s(s[1]) && s[0] <= s[1] && *half_width >= 0.0,
            Region::Cluster { center, radius, .. } => {
                in_s(center[0] - radius[0])
                    && in_s(center[0] + radius[0])
                    && in_a(center[1] - radius[1])
                    && in_a(center[1] + radius[1])
                    && radius[0] >= 0.0
                    && radius[1] >= 0.0
            }
        };
        if !ok {
            return Err(Error::InvalidConfig(format!("region {self:?} leaves [-10,10]x[-1,1]")));
        }
        if self.count() == 0 {
            return Err(Error::InvalidConfig("region sample count must be positive".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng64) -> (f64, f64) {
        let uniform = |rng: &mut Rng64, lo: f64, hi: f64| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        match *self {
            Region::Rect { s, a, .. } => (uniform(rng, s[0], s[1]), uniform(rng, a[0], a[1])),
            Region::Band { s, slope, intercept, half_width, .. } => {
                let sv = uniform(rng, s[0], s[1]);
                let av = slope * sv + intercept + uniform(rng, -half_width, half_width);
                (sv, av.clamp(-1.0, 1.0))
            }
            Region::Cluster { center, radius, .. } => {
                // Rejection sampling in the bounding box.
                loop {
                    let u = uniform(rng, -1.0, 1.0);
                    let v = uniform(rng, -1.0, 1.0);
                    if u * u + v * v <= 1.0 {
                        return (center[0] + u * radius[0], center[1] + v * radius[1]);
                    }
                }
            }
        }
    }
}

/// Named collection of regions defining a random-walk dataset.
///
/// Deserializes from a preset name or from an explicit `{id, regions}` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr")]
pub struct GeometrySpec {
    pub id: String,
    pub regions: Vec<Region>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GeometryRepr {
    Preset(String),
    Explicit(ExplicitGeometry),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitGeometry {
    id: String,
    regions: Vec<Region>,
}

impl TryFrom<GeometryRepr> for GeometrySpec {
    type Error = Error;

    fn try_from(repr: GeometryRepr) -> Result<Self> {
        match repr {
            GeometryRepr::Preset(name) => Self::preset(&name),
            GeometryRepr::Explicit(ExplicitGeometry { id, regions }) => Ok(Self { id, regions }),
        }
    }
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self::preset("full").expect("built-in preset")
    }
}

impl GeometrySpec {
    pub const PRESETS: [&'static str; 5] = ["full", "band", "clusters", "left_half", "cross"];

    /// Built-in geometries, 200 transitions each.
    pub fn preset(name: &str) -> Result<Self> {
        let regions = match name {
            "full" => vec![Region::Rect { s: [-10.0, 10.0], a: [-1.0, 1.0], count: 200 }],
            "band" => vec![Region::Band { s: [-10.0, 10.0], slope: 0.08, intercept: 0.0, half_width: 0.15, count: 200 }],
            "clusters" => vec![
                Region::Cluster { center: [-5.0, -0.3], radius: [3.0, 0.5], count: 100 },
                Region::Cluster { center: [5.0, 0.3], radius: [3.0, 0.5], count: 100 },
            ],
            "left_half" => vec![Region::Rect { s: [-10.0, 2.0], a: [-1.0, 1.0], count: 200 }],
            "cross" => vec![
                Region::Rect { s: [-10.0, 10.0], a: [-0.15, 0.15], count: 120 },
                Region::Rect { s: [-1.5, 1.5], a: [-1.0, 1.0], count: 80 },
            ],
            other => return Err(Error::InvalidConfig(format!("unknown geometry preset {other:?}"))),
        };
        Ok(Self { id: name.to_string(), regions })
    }

    pub fn total(&self) -> usize {
        self.regions.iter().map(Region::count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::InvalidConfig("geometry has no regions".into()));
        }
        self.regions.iter().try_for_each(Region::validate)
    }
}

/// Samples `(s, a)` uniformly inside each region and completes each pair
/// with the environment's reward and next state.
pub fn generate_randomwalk(env: &RandomWalk1d, spec: &GeometrySpec, rng: &mut Rng64) -> Result<OfflineDataset> {
    spec.validate()?;
    let mut transitions = Vec::with_capacity(spec.total());
    for region in &spec.regions {
        for _ in 0..region.count() {
            let (s, a) = region.sample(rng);
            let step = env.step(&[s], &[a], rng);
            transitions.push(Transition { s: vec![s], a: vec![a], r: step.reward, s_next: step.next_state, done: false });
        }
    }
    OfflineDataset::new(transitions, env.id(), spec.id.clone())
}
