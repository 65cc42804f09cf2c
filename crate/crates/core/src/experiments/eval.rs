use serde::{Deserialize, Serialize};

use crate::envs::{rollout, Env, Policy};
use crate::error::{Error, Result};
use crate::stats;
use crate::Rng64;

/// Summary of deterministic-policy rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    /// Mean discounted return.
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_undiscounted: f64,
    pub success_rate: f64,
}

/// Rolls `policy` out `n_episodes` times from `start` (or fresh resets).
pub fn eval_policy<E: Env + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    n_episodes: usize,
    start: Option<&[f64]>,
    rng: &mut Rng64,
) -> Result<EvalSummary> {
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(n_episodes);
    let mut undiscounted = Vec::with_capacity(n_episodes);
    let mut successes = 0usize;
    for _ in 0..n_episodes {
        let r = rollout(env, policy, start.map(<[f64]>::to_vec), rng);
        returns.push(r.discounted_return);
        undiscounted.push(r.undiscounted_return());
        successes += r.success as usize;
    }
    Ok(EvalSummary {
        episodes: n_episodes,
        mean_return: stats::mean(&returns),
        std_return: stats::std(&returns),
        mean_undiscounted: stats::mean(&undiscounted),
        success_rate: successes as f64 / n_episodes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{FnPolicy, RandomWalk1d};
    use crate::rng::seeded;

    #[test]
    fn zero_episodes_is_an_error() {
        let env = RandomWalk1d::default();
        let p = FnPolicy(|_: &[f64]| vec![0.0]);
        assert!(eval_policy(&env, &p, 0, None, &mut seeded(0)).is_err());
    }

    #[test]
    fn fixed_start_is_deterministic() {
        let env = RandomWalk1d::default();
        let p = FnPolicy(|s: &[f64]| vec![(0.3 * s[0]).sin()]);
        let e = eval_policy(&env, &p, 5, Some(&[-2.0]), &mut seeded(0)).unwrap();
        assert_eq!(e.std_return, 0.0);
    }

    #[test]
    fn greedy_right_from_far_left_matches_hand_simulation() {
        let env = RandomWalk1d::default();
        let p = FnPolicy(|_: &[f64]| vec![1.0]);
        let e = eval_policy(&env, &p, 1, Some(&[-10.0]), &mut seeded(0)).unwrap();
        // s_t = −10 + t until 10 is reached at t = 20, then stays.
        let mut expected = 0.0;
        let mut discount = 1.0;
        for t in 1..=50 {
            let s = (-10.0 + t as f64).min(10.0);
            expected += discount * (400.0 - (s - 10.0) * (s - 10.0)) / 400.0;
            discount *= 0.9;
        }
        assert!((e.mean_return - expected).abs() < 1e-12);
    }
}
