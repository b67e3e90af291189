//! Convex polygons in the plane, stored in both half-space and vertex form.
//!
//! Collision volumes are Minkowski sums `(-C) ⊕ P` computed with the
//! edge-merge algorithm for convex polygons. Every polygon is closed: a
//! point on the boundary counts as inside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

/// Slack allowed on each face when testing containment.
pub const FACE_TOLERANCE: f64 = 1e-9;

const COLLINEAR_EPS: f64 = 1e-12;

/// `normal · x <= offset`, with `normal` of unit length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec2, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !offset.is_finite() {
            return Err(Error::invalid("half-space normal must be finite and nonzero"));
        }
        Ok(HalfSpace {
            normal: normal / len,
            offset: offset / len,
        })
    }

    /// Signed distance of `x` past the boundary; positive means outside.
    #[inline]
    pub fn violation(&self, x: &Vec2) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Bounded convex polygon with at least three non-collinear vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    faces: Vec<HalfSpace>,
    vertices: Vec<Vec2>,
}

impl Polytope {
    /// Axis-aligned rectangle.
    pub fn rect(center: Vec2, half_extent: Vec2) -> Result<Self> {
        if !(half_extent.x > 0.0 && half_extent.y > 0.0) {
            return Err(Error::invalid(format!(
                "box half extent must be positive, got ({}, {})",
                half_extent.x, half_extent.y
            )));
        }
        let (cx, cy, hx, hy) = (center.x, center.y, half_extent.x, half_extent.y);
        let vertices = vec![
            Vec2::new(cx - hx, cy - hy),
            Vec2::new(cx + hx, cy - hy),
            Vec2::new(cx + hx, cy + hy),
            Vec2::new(cx - hx, cy + hy),
        ];
        Ok(Self::from_ccw_unchecked(vertices))
    }

    /// Convex hull of an arbitrary point set.
    pub fn from_points(points: &[Vec2]) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        let hull = convex_hull(points);
        if hull.len() < 3 {
            return Err(Error::invalid("polygon is degenerate (fewer than 3 hull vertices)"));
        }
        Ok(Self::from_ccw_unchecked(hull))
    }

    /// Builds from a strictly convex CCW vertex loop, dropping collinear vertices.
    fn from_ccw_unchecked(vertices: Vec<Vec2>) -> Self {
        let vertices = drop_collinear(vertices);
        let n = vertices.len();
        let faces = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let edge = b - a;
                let normal = Vec2::new(edge.y, -edge.x).normalize();
                HalfSpace {
                    normal,
                    offset: normal.dot(&a),
                }
            })
            .collect();
        Polytope { faces, vertices }
    }

    pub fn faces(&self) -> &[HalfSpace] {
        &self.faces
    }

    /// Vertices in counter-clockwise order.
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        self.faces.iter().all(|f| f.violation(x) <= FACE_TOLERANCE)
    }

    pub fn translate(&self, delta: &Vec2) -> Polytope {
        Polytope {
            faces: self
                .faces
                .iter()
                .map(|f| HalfSpace {
                    normal: f.normal,
                    offset: f.offset + f.normal.dot(delta),
                })
                .collect(),
            vertices: self.vertices.iter().map(|v| v + delta).collect(),
        }
    }

    /// Point reflection through the origin, `{-x : x ∈ self}`.
    pub fn negate(&self) -> Polytope {
        // Negation is a rotation by pi, so CCW order is preserved.
        Polytope {
            faces: self
                .faces
                .iter()
                .map(|f| HalfSpace {
                    normal: -f.normal,
                    offset: f.offset,
                })
                .collect(),
            vertices: self.vertices.iter().map(|v| -v).collect(),
        }
    }

    pub fn minkowski_sum(&self, other: &Polytope) -> Polytope {
        Self::from_ccw_unchecked(minkowski_ccw(&self.vertices, &other.vertices))
    }

    /// Largest face violation over the vertex set and the smallest number of
    /// vertices tight on any face; used to assert face/vertex duality.
    pub fn duality_defect(&self) -> (f64, usize) {
        let mut worst = f64::NEG_INFINITY;
        let mut min_tight = usize::MAX;
        for f in &self.faces {
            let mut tight = 0;
            for v in &self.vertices {
                let viol = f.violation(v);
                worst = worst.max(viol);
                if viol.abs() <= 1e-9 * (1.0 + f.offset.abs()) {
                    tight += 1;
                }
            }
            min_tight = min_tight.min(tight);
        }
        (worst, min_tight)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len() as f64;
        self.vertices.iter().fold(Vec2::zeros(), |acc, v| acc + v) / n
    }
}

/// Region occupied by an agent relative to its reference point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AgentShape {
    /// Point-like agent, `C = {0}`.
    Point,
    Region(Polytope),
}

impl AgentShape {
    /// Axis-aligned square/rectangle centred on the reference.
    pub fn rect(half_extent: Vec2) -> Result<Self> {
        Ok(AgentShape::Region(Polytope::rect(Vec2::zeros(), half_extent)?))
    }

    pub fn region(region: Polytope) -> Result<Self> {
        if !region.contains(&Vec2::zeros()) {
            return Err(Error::invalid("agent region must contain its reference point"));
        }
        Ok(AgentShape::Region(region))
    }

    /// The body placed with its reference at `at`, if the agent has extent.
    pub fn placed(&self, at: &Vec2) -> Option<Polytope> {
        match self {
            AgentShape::Point => None,
            AgentShape::Region(c) => Some(c.translate(at)),
        }
    }
}

/// Reference positions at which `agent` overlaps `obstacle`: `(-C) ⊕ P`.
pub fn collision_volume(agent: &AgentShape, obstacle: &Polytope) -> Polytope {
    match agent {
        AgentShape::Point => obstacle.clone(),
        AgentShape::Region(c) => c.negate().minkowski_sum(obstacle),
    }
}

/// Hausdorff distance between two convex polygons. For convex sets the
/// supremum is attained at a vertex of one of them.
pub fn hausdorff_distance(a: &Polytope, b: &Polytope) -> f64 {
    let one_way = |from: &Polytope, to: &Polytope| {
        from.vertices
            .iter()
            .map(|v| distance_to_polygon(v, to))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn distance_to_polygon(x: &Vec2, p: &Polytope) -> f64 {
    if p.contains(x) {
        return 0.0;
    }
    let n = p.vertices.len();
    (0..n)
        .map(|i| segment_distance(x, &p.vertices[i], &p.vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(x: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((x - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - (a + ab * t)).norm()
}

#[inline]
fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Andrew's monotone chain; returns CCW hull without collinear points.
fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross(&(b - a), &(p - a)) <= COLLINEAR_EPS * (1.0 + (b - a).norm() * (p - a).norm()) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn drop_collinear(vertices: Vec<Vec2>) -> Vec<Vec2> {
    let mut out = vertices;
    loop {
        let n = out.len();
        if n <= 3 {
            return out;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = out[(i + n - 1) % n];
            let cur = out[i];
            let next = out[(i + 1) % n];
            let e1 = cur - prev;
            let e2 = next - cur;
            let scale = e1.norm() * e2.norm();
            if e1.norm() <= COLLINEAR_EPS || cross(&e1, &e2).abs() <= 1e-12 * (1.0 + scale) {
                out.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return out;
        }
    }
}

/// Rotates a CCW loop so the lowest (then leftmost) vertex comes first.
fn rotate_to_bottom(v: &[Vec2]) -> Vec<Vec2> {
    let start = (0..v.len())
        .min_by(|&i, &j| v[i].y.total_cmp(&v[j].y).then(v[i].x.total_cmp(&v[j].x)))
        .unwrap_or(0);
    v[start..].iter().chain(v[..start].iter()).copied().collect()
}

fn minkowski_ccw(a: &[Vec2], b: &[Vec2]) -> Vec<Vec2> {
    let mut p = rotate_to_bottom(a);
    let mut q = rotate_to_bottom(b);
    let (n, m) = (p.len(), q.len());
    p.push(p[0]);
    p.push(p[1]);
    q.push(q[0]);
    q.push(q[1]);
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        out.push(p[i] + q[j]);
        let c = cross(&(p[i + 1] - p[i]), &(q[j + 1] - q[j]));
        if c >= 0.0 && i < n {
            i += 1;
        }
        if c <= 0.0 && j < m {
            j += 1;
        }
    }
    out
}
