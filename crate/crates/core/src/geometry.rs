//! Exact planar convex hulls, membership and point-to-hull distance.
//!
//! Hulls are built with Andrew's monotone chain. Degenerate inputs collapse
//! to a segment or a single point, and membership/distance are defined for
//! every variant. Membership is inclusive of the boundary.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Relative slack for boundary tests.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Hull {
    Empty,
    Point(Point),
    Segment(Point, Point),
    /// Counter-clockwise vertices, no collinear triples.
    Polygon(Vec<Point>),
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Convex hull of a planar point set.
pub fn convex_hull(points: &[Point]) -> Hull {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    match pts.len() {
        0 => return Hull::Empty,
        1 => return Hull::Point(pts[0]),
        _ => {}
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() <= 2 {
        // All points collinear: the extreme pair spans the segment.
        Hull::Segment(pts[0], pts[pts.len() - 1])
    } else {
        Hull::Polygon(lower)
    }
}

impl Hull {
    fn scale(&self) -> f64 {
        let pts: Vec<Point> = match self {
            Hull::Empty => return 1.0,
            Hull::Point(p) => vec![*p],
            Hull::Segment(a, b) => vec![*a, *b],
            Hull::Polygon(v) => v.clone(),
        };
        pts.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max)
    }

    /// Closed membership test.
    pub fn contains(&self, p: Point) -> bool {
        let tol = EPS * self.scale();
        match self {
            Hull::Empty => false,
            Hull::Point(q) => dist(p, *q) <= tol,
            Hull::Segment(a, b) => segment_distance(p, *a, *b) <= tol,
            Hull::Polygon(v) => {
                let n = v.len();
                (0..n).all(|i| {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    cross(a, b, p) >= -tol * dist(a, b)
                })
            }
        }
    }

    /// Euclidean distance from `p` to the hull; zero inside.
    pub fn distance(&self, p: Point) -> f64 {
        match self {
            Hull::Empty => f64::INFINITY,
            Hull::Point(q) => dist(p, *q),
            Hull::Segment(a, b) => segment_distance(p, *a, *b),
            Hull::Polygon(v) => {
                if self.contains(p) {
                    return 0.0;
                }
                let n = v.len();
                (0..n).map(|i| segment_distance(p, v[i], v[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Hull::Empty => vec![],
            Hull::Point(p) => vec![*p],
            Hull::Segment(a, b) => vec![*a, *b],
            Hull::Polygon(v) => v.clone(),
        }
    }
}

/// Distance from `x` to the convex hull of `points` for 1D or 2D vectors.
pub fn hull_distance(points: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    match x.len() {
        1 => {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[0]), hi.max(p[0]))
            });
            if lo > hi {
                return Err(Error::EmptyDataset("no points for hull".into()));
            }
            Ok((lo - x[0]).max(x[0] - hi).max(0.0))
        }
        2 => {
            if points.is_empty() {
                return Err(Error::EmptyDataset("no points for hull".into()));
            }
            let pts: Vec<Point> = points.iter().map(|p| [p[0], p[1]]).collect();
            Ok(convex_hull(&pts).distance([x[0], x[1]]))
        }
        d => Err(Error::Precondition(format!("exact hull distance supports 1 or 2 dimensions, got {d}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force: inside iff inside some triangle of input points (Carathéodory),
    /// or on some segment between two of them.
    fn brute_contains(points: &[Point], p: Point) -> bool {
        let n = points.len();
        let tol = 1e-10;
        for i in 0..n {
            for j in (i + 1)..n {
                if segment_distance(p, points[i], points[j]) <= tol {
                    return true;
                }
                for k in (j + 1)..n {
                    let (a, b, c) = (points[i], points[j], points[k]);
                    let d = cross(a, b, c);
                    if d.abs() < 1e-15 {
                        continue;
                    }
                    let l1 = cross(b, c, p) / d;
                    let l2 = cross(c, a, p) / d;
                    let l3 = 1.0 - l1 - l2;
                    if l1 >= -tol && l2 >= -tol && l3 >= -tol {
                        return true;
                    }
                }
            }
        }
        false
    }

    #[test]
    fn unit_square() {
        let hull = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(hull, Hull::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
        assert!(hull.contains([0.5, 0.5]));
        assert!(hull.contains([1.0, 0.3]));
        assert!(!hull.contains([2.0, 0.0]));
        assert!((hull.distance([2.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_points_form_a_segment() {
        let hull = convex_hull(&[[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]]);
        assert_eq!(hull, Hull::Segment([0.0, 0.0], [2.0, 2.0]));
        assert!(hull.contains([1.5, 1.5]));
        assert!(!hull.contains([1.5, 1.0]));
        assert!(!hull.contains([3.0, 3.0]));
    }

    #[test]
    fn single_point_hull() {
        let hull = convex_hull(&[[1.0, 2.0], [1.0, 2.0]]);
        assert_eq!(hull, Hull::Point([1.0, 2.0]));
        assert!(hull.contains([1.0, 2.0]));
        assert_eq!(hull.distance([4.0, 6.0]), 5.0);
    }

    #[test]
    fn membership_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let pts: Vec<Point> =
                (0..50).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let hull = convex_hull(&pts);
            for _ in 0..100 {
                let p = [rng.random_range(-1.3..1.3), rng.random_range(-1.3..1.3)];
                assert_eq!(hull.contains(p), brute_contains(&pts, p), "probe {p:?}");
            }
        }
    }

    #[test]
    fn one_dimensional_hull_distance() {
        let pts = vec![vec![-0.5], vec![0.5]];
        assert_eq!(hull_distance(&pts, &[2.0]).unwrap(), 1.5);
        assert_eq!(hull_distance(&pts, &[0.1]).unwrap(), 0.0);
        assert!(hull_distance(&pts, &[0.0, 0.0, 0.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn input_points_are_members(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30)) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let hull = convex_hull(&pts);
            for p in &pts {
                proptest::prop_assert!(hull.contains(*p));
                proptest::prop_assert!(hull.distance(*p) == 0.0 || hull.distance(*p) < 1e-9);
            }
        }
    }
}
