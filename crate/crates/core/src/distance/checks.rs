//! Numerical verifiers for distance functions at a fixed state.
//!
//! Each check takes `g` as a closure over actions so that the analytic
//! optimum, a trained network, or any test function can be plugged in.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::hull_distance;
use crate::Rng64;

/// Step used for central-difference gradients.
pub const FD_STEP: f64 = 1e-6;

fn sample_action(rng: &mut Rng64, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Largest observed convexity gap
/// `g(λa₁ + (1−λ)a₂) − [λg(a₁) + (1−λ)g(a₂)]` over random triples with
/// actions uniform in `[lo, hi]^dim`. Non-positive for convex `g`.
pub fn check_convexity(
    g: impl Fn(&[f64]) -> f64,
    dim: usize,
    (lo, hi): (f64, f64),
    trials: usize,
    rng: &mut Rng64,
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a1 = sample_action(rng, dim, lo, hi);
        let a2 = sample_action(rng, dim, lo, hi);
        let lam: f64 = rng.random_range(0.0..=1.0);
        let mix: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        let gap = g(&mix) - (lam * g(&a1) + (1.0 - lam) * g(&a2));
        worst = worst.max(gap);
    }
    worst
}

/// Smallest margin `g(â) − ‖â − centroid‖` over the given samples.
/// Non-negative when `g` upper-bounds the distance to the centroid.
pub fn check_centroid_bound(g: impl Fn(&[f64]) -> f64, centroid: &[f64], samples: &[Vec<f64>]) -> f64 {
    samples
        .iter()
        .map(|a| {
            let d = a.iter().zip(centroid).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt();
            g(a) - d
        })
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference gradient of `g` at `a`.
pub fn numerical_gradient(g: &impl Fn(&[f64]) -> f64, a: &[f64]) -> Vec<f64> {
    let mut x = a.to_vec();
    (0..a.len())
        .map(|i| {
            x[i] = a[i] + FD_STEP;
            let up = g(&x);
            x[i] = a[i] - FD_STEP;
            let down = g(&x);
            x[i] = a[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Whether a step of length `step` along `−∇g(â)` strictly reduces the
/// distance from `â` to the convex hull of `actions`.
///
/// `â` must lie strictly outside the hull (1D or 2D actions).
pub fn check_gradient_direction(
    g: impl Fn(&[f64]) -> f64,
    actions: &[Vec<f64>],
    a_hat: &[f64],
    step: f64,
) -> Result<bool> {
    let before = hull_distance(actions, a_hat)?;
    if before <= 0.0 {
        return Err(Error::Precondition("query action lies inside the action hull".into()));
    }
    let grad = numerical_gradient(&g, a_hat);
    let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Ok(false);
    }
    let moved: Vec<f64> = a_hat.iter().zip(&grad).map(|(a, d)| a - step * d / norm).collect();
    Ok(hull_distance(actions, &moved)? < before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::oracle::mean_distance;
    use crate::rng::seeded;

    fn oracle(actions: &[Vec<f64>]) -> impl Fn(&[f64]) -> f64 + '_ {
        move |a: &[f64]| {
            let refs: Vec<&[f64]> = actions.iter().map(Vec::as_slice).collect();
            mean_distance(&refs, a)
        }
    }

    #[test]
    fn oracle_is_convex() {
        let actions = vec![vec![-0.3, 0.2], vec![0.9, -0.1], vec![0.1, 0.8]];
        let v = check_convexity(oracle(&actions), 2, (-3.0, 3.0), 2000, &mut seeded(0));
        assert!(v <= 1e-9, "{v}");
    }

    #[test]
    fn constant_has_no_violation() {
        let v = check_convexity(|_: &[f64]| 0.5, 1, (-1.0, 1.0), 500, &mut seeded(1));
        assert!(v.abs() <= 1e-15);
    }

    #[test]
    fn concave_function_is_flagged() {
        let v = check_convexity(|a: &[f64]| -a[0] * a[0], 1, (-1.0, 1.0), 200, &mut seeded(2));
        assert!(v > 0.01);
    }

    #[test]
    fn centroid_margin_cases() {
        let single = vec![vec![0.4]];
        let m = check_centroid_bound(oracle(&single), &[0.4], &[vec![0.4]]);
        assert_eq!(m, 0.0);
        let pair = vec![vec![-1.0], vec![1.0]];
        let m = check_centroid_bound(oracle(&pair), &[0.0], &[vec![0.0]]);
        assert_eq!(m, 1.0);
    }

    #[test]
    fn gradient_points_back_toward_interval() {
        let actions = vec![vec![-0.5], vec![0.5]];
        let g = oracle(&actions);
        let grad = numerical_gradient(&g, &[2.0]);
        assert!((grad[0] - 1.0).abs() < 1e-6);
        assert!(check_gradient_direction(&g, &actions, &[2.0], 1e-3).unwrap());
        let grad = numerical_gradient(&g, &[-2.0]);
        assert!((grad[0] + 1.0).abs() < 1e-6);
        assert!(check_gradient_direction(&g, &actions, &[-2.0], 1e-3).unwrap());
    }

    #[test]
    fn gradient_points_back_toward_triangle() {
        let actions = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = oracle(&actions);
        for probe in [[2.0, 2.0], [-1.0, 0.3], [0.5, -0.8], [3.0, -2.0]] {
            assert!(check_gradient_direction(&g, &actions, &probe, 1e-3).unwrap(), "{probe:?}");
        }
    }

    #[test]
    fn inside_hull_is_a_precondition_error() {
        let actions = vec![vec![-0.5], vec![0.5]];
        assert!(matches!(
            check_gradient_direction(oracle(&actions), &actions, &[0.0], 1e-3),
            Err(Error::Precondition(_))
        ));
    }
}
