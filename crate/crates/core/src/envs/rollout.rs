//! Policies, rollouts and Monte-Carlo action values.

use super::Env;
use crate::nn::Matrix;
use crate::Rng64;

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// True terminal state: bootstrapping stops here. Time limits are not terminal.
    pub terminal: bool,
    pub success: bool,
}

/// A deterministic state → action map.
pub trait Policy: Sync {
    fn act(&self, state: &[f64]) -> Vec<f64>;

    /// Acts on every row of `states`. Override for vectorized policies.
    fn act_batch(&self, states: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..states.rows()).map(|r| self.act(states.row(r))).collect();
        Matrix::from_rows(&rows).expect("policy returned ragged actions")
    }
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Policy for FnPolicy<F> {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        (self.0)(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// Discounted sum of rewards, `Σ γ^t r_t`.
    pub discounted_return: f64,
    pub success: bool,
}

impl Rollout {
    pub fn undiscounted_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Runs `policy` from `start` (or a fresh reset) until termination or the horizon.
pub fn rollout<E: Env + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    start: Option<Vec<f64>>,
    rng: &mut Rng64,
) -> Rollout {
    let mut state = start.unwrap_or_else(|| env.reset(rng));
    let gamma = env.gamma();
    let mut discount = 1.0;
    let mut ret = 0.0;
    let mut success = false;
    let mut transitions = Vec::with_capacity(env.horizon());
    for _ in 0..env.horizon() {
        let action = env.clip_action(&policy.act(&state));
        let step = env.step(&state, &action, rng);
        ret += discount * step.reward;
        discount *= gamma;
        success |= step.success;
        transitions.push(Transition {
            state: std::mem::replace(&mut state, step.next_state.clone()),
            action,
            reward: step.reward,
            next_state: step.next_state,
            terminal: step.terminal,
        });
        if step.terminal {
            break;
        }
    }
    Rollout { transitions, discounted_return: ret, success }
}

/// Monte-Carlo estimate of `Q^π(s, a)`: take `action` in `state`, then follow
/// `policy` until the horizon (counting the first step) or termination.
/// Returns the mean discounted return over `n_rollouts`.
pub fn mc_q<E: Env + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    state: &[f64],
    action: &[f64],
    gamma: f64,
    n_rollouts: usize,
    rng: &mut Rng64,
) -> f64 {
    assert!(n_rollouts >= 1, "need at least one rollout");
    let mut total = 0.0;
    for _ in 0..n_rollouts {
        let mut s = state.to_vec();
        let mut a = env.clip_action(action);
        let mut discount = 1.0;
        let mut ret = 0.0;
        for t in 0..env.horizon() {
            if t > 0 {
                a = env.clip_action(&policy.act(&s));
            }
            let step = env.step(&s, &a, rng);
            ret += discount * step.reward;
            discount *= gamma;
            if step.terminal {
                break;
            }
            s = step.next_state;
        }
        total += ret;
    }
    total / n_rollouts as f64
}

/// [`mc_q`] for many `(state, action)` pairs at once, querying the policy in
/// batches. Rollouts for pair `i` are summed in the same order as `mc_q`.
pub fn mc_q_batch<E: Env + ?Sized, P: Policy + ?Sized>(
    env: &E,
    policy: &P,
    states: &Matrix,
    actions: &Matrix,
    gamma: f64,
    n_rollouts: usize,
    rng: &mut Rng64,
) -> Vec<f64> {
    assert!(n_rollouts >= 1, "need at least one rollout");
    assert_eq!(states.rows(), actions.rows());
    let n = states.rows();
    let mut totals = vec![0.0; n];
    for _ in 0..n_rollouts {
        let mut s = states.clone();
        let mut a = actions.clone();
        let mut alive = vec![true; n];
        let mut discount = 1.0;
        let mut ret = vec![0.0; n];
        for t in 0..env.horizon() {
            if t > 0 {
                a = policy.act_batch(&s);
            }
            for i in 0..n {
                if !alive[i] {
                    continue;
                }
                let act = env.clip_action(a.row(i));
                let step = env.step(s.row(i), &act, rng);
                ret[i] += discount * step.reward;
                if step.terminal {
                    alive[i] = false;
                }
                s.row_mut(i).copy_from_slice(&step.next_state);
            }
            discount *= gamma;
            if !alive.iter().any(|&x| x) {
                break;
            }
        }
        for (tot, r) in totals.iter_mut().zip(&ret) {
            *tot += r;
        }
    }
    totals.into_iter().map(|t| t / n_rollouts as f64).collect()
}
