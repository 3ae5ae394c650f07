//! Planar geometry helpers: vectors, polygons and query domains.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// z-component of the cross product.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counter-clockwise rotation by `theta`.
pub fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

/// Matrix with columns `a` and `b`.
#[inline]
pub fn columns(a: Vec2, b: Vec2) -> Mat2 {
    Mat2::new(a.x, b.x, a.y, b.y)
}

/// Largest and smallest singular values.
pub fn singular_values(m: &Mat2) -> (f64, f64) {
    // closed form for 2x2: s1^2 + s2^2 = |M|_F^2, s1 s2 = |det M|
    let f2 = m.norm_squared();
    let d = m.determinant().abs();
    let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
    let s1 = ((f2 + disc) / 2.0).sqrt();
    let s2 = if s1 > 0.0 { d / s1 } else { 0.0 };
    (s1, s2)
}

pub fn spectral_norm(m: &Mat2) -> f64 {
    singular_values(m).0
}

pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross(poly[i], poly[(i + 1) % n]);
    }
    s / 2.0
}

pub fn triangle_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (cross(b - a, c - a) / 2.0).abs()
}

pub fn diameter(points: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// True when the polygon is strictly convex in either orientation.
pub fn is_strictly_convex(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let scale = diameter(poly).powi(2);
    let mut sign = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let z = cross(b - a, c - b);
        if z.abs() <= 1e-12 * scale {
            return false;
        }
        if sign == 0.0 {
            sign = z.signum();
        } else if z.signum() != sign {
            return false;
        }
    }
    true
}

/// Returns the polygon in counter-clockwise order.
pub fn ccw(poly: &[Vec2]) -> Vec<Vec2> {
    let mut p = poly.to_vec();
    if signed_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

/// Signed distance from `p` to the boundary of a counter-clockwise convex polygon,
/// positive inside.
pub fn convex_inner_distance(p: Vec2, poly_ccw: &[Vec2]) -> f64 {
    let n = poly_ccw.len();
    let mut d = f64::INFINITY;
    for i in 0..n {
        let a = poly_ccw[i];
        let b = poly_ccw[(i + 1) % n];
        let e = b - a;
        d = d.min(cross(e, p - a) / e.norm());
    }
    d
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let l2 = e.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&e) / l2).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

/// Euclidean distance from `p` to a counter-clockwise convex polygon (0 inside).
pub fn convex_distance(p: Vec2, poly_ccw: &[Vec2]) -> f64 {
    if convex_inner_distance(p, poly_ccw) >= 0.0 {
        return 0.0;
    }
    let n = poly_ccw.len();
    (0..n)
        .map(|i| point_segment_distance(p, poly_ccw[i], poly_ccw[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Separating-axis test for two triangles.
pub fn triangles_overlap(t1: &[Vec2; 3], t2: &[Vec2; 3], tol: f64) -> bool {
    convex_polygons_overlap(t1, t2, tol)
}

/// Separating-axis test for convex polygons; true when their interiors overlap by
/// more than `tol` along every edge normal.
pub fn convex_polygons_overlap(p1: &[Vec2], p2: &[Vec2], tol: f64) -> bool {
    for poly in [p1, p2] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let axis = Vec2::new(-e.y, e.x).normalize();
            let range = |q: &[Vec2]| {
                q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let t = p.dot(&axis);
                    (lo.min(t), hi.max(t))
                })
            };
            let (a0, a1) = range(p1);
            let (b0, b1) = range(p2);
            if a1.min(b1) - a0.max(b0) <= tol {
                return false;
            }
        }
    }
    true
}

/// A query region: an axis-aligned box or a convex polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Domain {
    Box { min: [f64; 2], max: [f64; 2] },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Domain {
    pub fn square(side: f64) -> Self {
        Domain::Box { min: [0.0, 0.0], max: [side, side] }
    }

    pub fn rect(min: [f64; 2], max: [f64; 2]) -> Self {
        Domain::Box { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) || min.iter().chain(max).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDomain("box needs min < max with finite corners".into()));
                }
            }
            Domain::Polygon { vertices } => {
                let p: Vec<Vec2> = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
                if !is_strictly_convex(&p) {
                    return Err(Error::InvalidDomain("polygon domain must be strictly convex".into()));
                }
            }
        }
        Ok(())
    }

    /// Vertices in counter-clockwise order.
    pub fn vertices(&self) -> Vec<Vec2> {
        match self {
            Domain::Box { min, max } => vec![
                Vec2::new(min[0], min[1]),
                Vec2::new(max[0], min[1]),
                Vec2::new(max[0], max[1]),
                Vec2::new(min[0], max[1]),
            ],
            Domain::Polygon { vertices } => {
                ccw(&vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect::<Vec<_>>())
            }
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices()).abs()
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices())
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let v = self.vertices();
        let mut lo = v[0];
        let mut hi = v[0];
        for p in &v[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Signed distance to the boundary, positive inside.
    pub fn inner_distance(&self, p: Vec2) -> f64 {
        convex_inner_distance(p, &self.vertices())
    }

    /// Strict containment with the boundary band `1e-12 * diam` counted as outside.
    pub fn contains_strictly(&self, p: Vec2) -> bool {
        self.inner_distance(p) > 1e-12 * self.diameter()
    }

    pub fn translated(&self, t: Vec2) -> Domain {
        match self {
            Domain::Box { min, max } => Domain::Box {
                min: [min[0] + t.x, min[1] + t.y],
                max: [max[0] + t.x, max[1] + t.y],
            },
            Domain::Polygon { vertices } => Domain::Polygon {
                vertices: vertices.iter().map(|v| [v[0] + t.x, v[1] + t.y]).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_match_svd() {
        let m = Mat2::new(1.0, 2.0, -0.5, 3.0);
        let svd = m.svd(false, false);
        let (a, b) = singular_values(&m);
        let s = svd.singular_values;
        assert!((a - s.max()).abs() < 1e-12);
        assert!((b - s.min()).abs() < 1e-12);
    }

    #[test]
    fn convexity() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        assert!(is_strictly_convex(&sq));
        let dart = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.2), Vec2::new(1.0, 1.0)];
        assert!(!is_strictly_convex(&dart));
    }

    #[test]
    fn box_containment_excludes_boundary() {
        let d = Domain::square(1.0);
        assert!(d.contains_strictly(Vec2::new(0.5, 0.5)));
        assert!(!d.contains_strictly(Vec2::new(1.0, 0.5)));
        assert!(!d.contains_strictly(Vec2::new(0.0, 0.0)));
    }

    #[test]
    fn shared_edge_is_not_overlap() {
        let t1 = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        let t2 = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        assert!(!triangles_overlap(&t1, &t2, 1e-12));
        let t3 = [Vec2::new(0.2, 0.1), Vec2::new(0.9, 0.1), Vec2::new(0.5, 0.8)];
        assert!(triangles_overlap(&t1, &t3, 1e-12));
    }

    #[test]
    fn distance_to_square() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        assert_eq!(convex_distance(Vec2::new(0.5, 0.5), &sq), 0.0);
        assert!((convex_distance(Vec2::new(2.0, 0.5), &sq) - 1.0).abs() < 1e-15);
        assert!((convex_inner_distance(Vec2::new(0.25, 0.5), &sq) - 0.25).abs() < 1e-15);
    }
}
