//! Embedded boundaries: circles, simple polygons and closed parametric curves.
//!
//! A [`Shape`] couples a closed curve with the side of it that is the
//! computational domain Ω. Normals reported by [`Shape::project`] are outward
//! from Ω, so for an embedded hole they point into the hole.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::{rot90, rotate_about, Vec2};

/// Points closer than this to Γ count as lying on Γ.
const ON_BOUNDARY_TOL: f64 = 1e-12;

/// Default sample count for parametric curves.
pub const PARAMETRIC_SAMPLES: usize = 16384;
/// Local minima of the sampled distance refined per projection.
const CANDIDATE_MINIMA: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Labels points of Γ as Dirichlet or Neumann.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcRule {
    AllNeumann,
    AllDirichlet,
    /// Dirichlet where the boundary point has `x <= threshold`, Neumann elsewhere.
    DirichletWhereXAtMost(f64),
}

impl BcRule {
    pub fn classify(&self, x: Vec2) -> BcKind {
        match *self {
            BcRule::AllNeumann => BcKind::Neumann,
            BcRule::AllDirichlet => BcKind::Dirichlet,
            BcRule::DirichletWhereXAtMost(t) => {
                if x.x <= t {
                    BcKind::Dirichlet
                } else {
                    BcKind::Neumann
                }
            }
        }
    }
}

/// Which side of the closed curve is the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSide {
    /// Ω is the region enclosed by the curve (e.g. an embedded beam).
    Inside,
    /// Ω is the complement of the enclosed region (an embedded hole).
    Outside,
}

type CurveFn = Arc<dyn Fn(f64) -> Vec2 + Send + Sync>;

/// Closed curve `t -> c(t)` on a periodic parameter interval, with a dense
/// sample table for coarse searches.
#[derive(Clone)]
pub struct ParametricCurve {
    pos: CurveFn,
    vel: CurveFn,
    t_min: f64,
    t_max: f64,
    samples: Vec<(f64, Vec2)>,
    lo: Vec2,
    hi: Vec2,
    ccw: bool,
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("t_min", &self.t_min)
            .field("t_max", &self.t_max)
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl ParametricCurve {
    /// `pos` must be periodic on `[t_min, t_max)`; `vel` is its derivative.
    pub fn new(pos: CurveFn, vel: CurveFn, t_min: f64, t_max: f64, n_samples: usize) -> Result<Self> {
        if !(t_max > t_min) || n_samples < 8 {
            return invalid("parametric curve needs t_max > t_min and at least 8 samples");
        }
        let dt = (t_max - t_min) / n_samples as f64;
        let samples: Vec<(f64, Vec2)> = (0..n_samples)
            .map(|k| {
                let t = t_min + k as f64 * dt;
                (t, pos(t))
            })
            .collect();
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for (_, p) in &samples {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let pts: Vec<Vec2> = samples.iter().map(|s| s.1).collect();
        let ccw = crate::shoelace(&pts) >= 0.0;
        Ok(ParametricCurve {
            pos,
            vel,
            t_min,
            t_max,
            samples,
            lo,
            hi,
            ccw,
        })
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        (self.pos)(t)
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        (self.vel)(t)
    }

    pub fn samples(&self) -> &[(f64, Vec2)] {
        &self.samples
    }

    /// Largest distance between consecutive samples (closing segment included).
    pub fn max_sample_spacing(&self) -> f64 {
        let n = self.samples.len();
        (0..n)
            .map(|k| (self.samples[(k + 1) % n].1 - self.samples[k].1).norm())
            .fold(0.0, f64::max)
    }

    fn rotated(&self, pivot: Vec2, angle: f64) -> Result<Self> {
        let pos = self.pos.clone();
        let vel = self.vel.clone();
        let zero = Vec2::zeros();
        ParametricCurve::new(
            Arc::new(move |t| rotate_about(pos(t), pivot, angle)),
            Arc::new(move |t| rotate_about(vel(t), zero, angle)),
            self.t_min,
            self.t_max,
            self.samples.len(),
        )
    }

    fn wrap(&self, t: f64) -> f64 {
        let span = self.t_max - self.t_min;
        self.t_min + (t - self.t_min).rem_euclid(span)
    }

    /// Closest accepted parameter: coarse scan over samples, then
    /// golden-section refinement around local minima of the sampled distance,
    /// nearest first, until at least a few have been tried and one passed.
    fn closest_parameter(&self, p: Vec2, accept: &dyn Fn(Vec2) -> bool) -> Option<f64> {
        let n = self.samples.len();
        let dist: Vec<f64> = self.samples.iter().map(|(_, q)| (q - p).norm_squared()).collect();
        let mut minima: Vec<usize> = (0..n)
            .filter(|&k| dist[k] <= dist[(k + n - 1) % n] && dist[k] <= dist[(k + 1) % n])
            .collect();
        minima.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let mut best: Option<(f64, f64)> = None;
        for (tried, &k) in minima.iter().enumerate() {
            if tried >= CANDIDATE_MINIMA && best.is_some() {
                break;
            }
            let t = self.refine(p, self.samples[k].0);
            let x = (self.pos)(t);
            let f = (x - p).norm_squared();
            if accept(x) && best.is_none_or(|b| f < b.1) {
                best = Some((t, f));
            }
        }
        best.map(|b| b.0)
    }

    fn refine(&self, p: Vec2, t0: f64) -> f64 {
        let dt = (self.t_max - self.t_min) / self.samples.len() as f64;
        let f = |t: f64| ((self.pos)(self.wrap(t)) - p).norm_squared();
        let (mut a, mut b) = (t0 - dt, t0 + dt);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-14 * (1.0 + t0.abs()) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        let t = 0.5 * (a + b);
        // the bracket can miss the sample itself when the minimum sits on it
        if f(t) <= f(t0) {
            self.wrap(t)
        } else {
            self.wrap(t0)
        }
    }

    fn sample_polygon(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.samples.len();
        (0..n).map(move |k| (self.samples[k].1, self.samples[(k + 1) % n].1))
    }
}

#[derive(Debug, Clone)]
pub enum Boundary {
    /// No embedded boundary: Ω is the whole plane.
    Unbounded,
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// Simple closed polygon, vertices counter-clockwise, closing edge implied.
    Polygon(Vec<Vec2>),
    Parametric(ParametricCurve),
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub boundary: Boundary,
    pub side: DomainSide,
    pub bc_rule: BcRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    /// Closest point on Γ.
    pub point: Vec2,
    /// `point - query`.
    pub distance_vec: Vec2,
    /// Unit normal at `point`, outward from Ω. At polygon corners this is the
    /// bisector of the two adjacent edge normals.
    pub normal: Vec2,
    pub bc: BcKind,
}

impl Shape {
    pub fn unbounded() -> Shape {
        Shape {
            boundary: Boundary::Unbounded,
            side: DomainSide::Inside,
            bc_rule: BcRule::AllNeumann,
        }
    }

    pub fn circle(center: Vec2, radius: f64, side: DomainSide, bc_rule: BcRule) -> Result<Shape> {
        if !(radius > 0.0) {
            return invalid(format!("circle radius must be positive, got {radius}"));
        }
        Ok(Shape {
            boundary: Boundary::Circle { center, radius },
            side,
            bc_rule,
        })
    }

    /// Simple polygon; the vertex order is normalized to counter-clockwise.
    pub fn polygon(mut vertices: Vec<Vec2>, side: DomainSide, bc_rule: BcRule) -> Result<Shape> {
        if vertices.len() < 3 {
            return invalid("polygon needs at least 3 vertices");
        }
        if !polygon_is_simple(&vertices) {
            return invalid("polygon is self-intersecting");
        }
        if crate::shoelace(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Shape {
            boundary: Boundary::Polygon(vertices),
            side,
            bc_rule,
        })
    }

    /// Square of side `side_len` centered at `center`, rotated by `angle`.
    pub fn square(center: Vec2, side_len: f64, angle: f64, side: DomainSide, bc_rule: BcRule) -> Result<Shape> {
        Shape::rectangle(center, Vec2::new(side_len, side_len), angle, side, bc_rule)
    }

    pub fn rectangle(center: Vec2, size: Vec2, angle: f64, side: DomainSide, bc_rule: BcRule) -> Result<Shape> {
        if !(size.x > 0.0 && size.y > 0.0) {
            return invalid("rectangle sides must be positive");
        }
        let h = size / 2.0;
        let corners = [
            Vec2::new(-h.x, -h.y),
            Vec2::new(h.x, -h.y),
            Vec2::new(h.x, h.y),
            Vec2::new(-h.x, h.y),
        ];
        let verts = corners
            .iter()
            .map(|c| rotate_about(center + c, center, angle))
            .collect();
        Shape::polygon(verts, side, bc_rule)
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self.boundary, Boundary::Unbounded)
    }

    /// True iff `p` lies in the closure of Ω. Points on Γ count as inside.
    pub fn is_inside(&self, p: Vec2) -> bool {
        let enclosed = match &self.boundary {
            Boundary::Unbounded => return true,
            Boundary::Circle { center, radius } => (p - center).norm() < *radius,
            Boundary::Polygon(v) => {
                let n = v.len();
                winding_number(p, (0..n).map(|k| (v[k], v[(k + 1) % n]))) != 0
            }
            Boundary::Parametric(c) => {
                let outside_box = p.x < c.lo.x || p.y < c.lo.y || p.x > c.hi.x || p.y > c.hi.y;
                !outside_box && winding_number(p, c.sample_polygon()) != 0
            }
        };
        let in_omega = match self.side {
            DomainSide::Inside => enclosed,
            DomainSide::Outside => !enclosed,
        };
        in_omega || self.distance(p) <= ON_BOUNDARY_TOL
    }

    fn distance(&self, p: Vec2) -> f64 {
        self.project(p).map(|r| r.distance_vec.norm()).unwrap_or(f64::INFINITY)
    }

    /// Closest-point projection of `p` onto Γ.
    pub fn project(&self, p: Vec2) -> Result<ProjectionResult> {
        Ok(self
            .project_where(p, &|_| true)?
            .expect("some point of a closed curve is accepted"))
    }

    /// Nearest point of Γ among those `accept` admits; `None` if it admits
    /// no candidate. Candidates are the local distance minima of Γ.
    pub fn project_where(&self, p: Vec2, accept: &dyn Fn(Vec2) -> bool) -> Result<Option<ProjectionResult>> {
        let found = match &self.boundary {
            Boundary::Unbounded => return invalid("cannot project onto an empty boundary"),
            Boundary::Circle { center, radius } => {
                let r = p - center;
                let dir = if r.norm() > 0.0 {
                    r / r.norm()
                } else {
                    Vec2::new(1.0, 0.0)
                };
                let x = center + dir * *radius;
                accept(x).then_some((x, dir))
            }
            Boundary::Polygon(v) => project_polygon(v, p, accept),
            Boundary::Parametric(c) => c.closest_parameter(p, accept).map(|t| {
                let x = c.eval(t);
                let vel = c.derivative(t);
                let n = if vel.norm() > 0.0 {
                    let out = -rot90(vel) / vel.norm();
                    if c.ccw {
                        out
                    } else {
                        -out
                    }
                } else {
                    (p - x).try_normalize(0.0).unwrap_or(Vec2::new(1.0, 0.0))
                };
                (x, n)
            }),
        };
        Ok(found.map(|(point, shape_normal)| {
            let normal = match self.side {
                DomainSide::Inside => shape_normal,
                DomainSide::Outside => -shape_normal,
            };
            ProjectionResult {
                point,
                distance_vec: point - p,
                normal,
                bc: self.bc_rule.classify(point),
            }
        }))
    }

    pub fn rotated(&self, pivot: Vec2, angle: f64) -> Result<Shape> {
        let boundary = match &self.boundary {
            Boundary::Unbounded => Boundary::Unbounded,
            Boundary::Circle { center, radius } => Boundary::Circle {
                center: rotate_about(*center, pivot, angle),
                radius: *radius,
            },
            Boundary::Polygon(v) => Boundary::Polygon(v.iter().map(|p| rotate_about(*p, pivot, angle)).collect()),
            Boundary::Parametric(c) => Boundary::Parametric(c.rotated(pivot, angle)?),
        };
        Ok(Shape {
            boundary,
            ..self.clone()
        })
    }

    /// Length of Γ (sample polygon length for parametric curves).
    pub fn perimeter(&self) -> f64 {
        match &self.boundary {
            Boundary::Unbounded => 0.0,
            Boundary::Circle { radius, .. } => 2.0 * PI * radius,
            Boundary::Polygon(v) => (0..v.len()).map(|k| (v[(k + 1) % v.len()] - v[k]).norm()).sum(),
            Boundary::Parametric(c) => c.sample_polygon().map(|(a, b)| (b - a).norm()).sum(),
        }
    }

    /// True iff Γ passes through the interior of the convex cell with the
    /// given counter-clockwise corners.
    pub fn crosses_cell(&self, cell: &[Vec2]) -> bool {
        let centroid = cell.iter().sum::<Vec2>() / cell.len() as f64;
        let reach = cell.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
        if self.distance(centroid) >= reach {
            return false;
        }
        let n = cell.len();
        let edges = || (0..n).map(move |k| (cell[k], cell[(k + 1) % n]));
        match &self.boundary {
            Boundary::Unbounded => false,
            Boundary::Circle { center, radius } => {
                let near = edges()
                    .map(|(a, b)| segment_distance(*center, a, b))
                    .fold(f64::INFINITY, f64::min);
                let near = if strictly_inside_convex(*center, cell) {
                    0.0
                } else {
                    near
                };
                let far = cell.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
                let tol = ON_BOUNDARY_TOL * radius.max(1.0);
                near < radius - tol && far > radius + tol
            }
            Boundary::Polygon(v) => {
                let m = v.len();
                polyline_crosses(cell, (0..m).map(|k| (v[k], v[(k + 1) % m])), edges)
            }
            Boundary::Parametric(c) => polyline_crosses(cell, c.sample_polygon(), edges),
        }
    }
}

pub fn rotate_shape(shape: &Shape, pivot: Vec2, angle: f64) -> Result<Shape> {
    shape.rotated(pivot, angle)
}

fn project_polygon(v: &[Vec2], p: Vec2, accept: &dyn Fn(Vec2) -> bool) -> Option<(Vec2, Vec2)> {
    let n = v.len();
    let edge_normal = |k: usize| {
        let t = v[(k + 1) % n] - v[k];
        -rot90(t) / t.norm()
    };
    let mut best = (f64::INFINITY, Vec2::zeros(), usize::MAX, 0.5);
    for k in 0..n {
        let a = v[k];
        let t = v[(k + 1) % n] - a;
        let s = ((p - a).dot(&t) / t.norm_squared()).clamp(0.0, 1.0);
        let q = a + t * s;
        let d2 = (q - p).norm_squared();
        if d2 < best.0 && accept(q) {
            best = (d2, q, k, s);
        }
    }
    let (_, q, k, s) = best;
    if k == usize::MAX {
        return None;
    }
    let bisector = |n1: Vec2, n2: Vec2| (n1 + n2).try_normalize(1e-14).unwrap_or(n2);
    let normal = if s <= 0.0 {
        bisector(edge_normal((k + n - 1) % n), edge_normal(k))
    } else if s >= 1.0 {
        bisector(edge_normal(k), edge_normal((k + 1) % n))
    } else {
        edge_normal(k)
    };
    Some((q, normal))
}

fn winding_number(p: Vec2, segments: impl Iterator<Item = (Vec2, Vec2)>) -> i32 {
    let mut w = 0;
    for (a, b) in segments {
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn strictly_inside_convex(p: Vec2, cell: &[Vec2]) -> bool {
    let n = cell.len();
    (0..n).all(|k| {
        let (a, b) = (cell[k], cell[(k + 1) % n]);
        let tol = ON_BOUNDARY_TOL * (b - a).norm();
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) > tol
    })
}

/// Proper crossings of a closed polyline with the cell edges, or a polyline
/// vertex strictly inside the cell.
fn polyline_crosses<E>(cell: &[Vec2], segments: impl Iterator<Item = (Vec2, Vec2)>, edges: impl Fn() -> E) -> bool
where
    E: Iterator<Item = (Vec2, Vec2)>,
{
    let lo = cell.iter().fold(Vec2::repeat(f64::INFINITY), |m, p| m.inf(p));
    let hi = cell.iter().fold(Vec2::repeat(f64::NEG_INFINITY), |m, p| m.sup(p));
    for (a, b) in segments {
        if a.x.max(b.x) < lo.x || a.x.min(b.x) > hi.x || a.y.max(b.y) < lo.y || a.y.min(b.y) > hi.y {
            continue;
        }
        if strictly_inside_convex(a, cell) || edges().any(|(p, q)| crosses_properly(a, b, p, q)) {
            return true;
        }
    }
    false
}

/// Like [`segments_intersect`] but ignores crossings within round-off of an
/// endpoint.
fn crosses_properly(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let orient = |a: Vec2, b: Vec2, c: Vec2| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let tol = ON_BOUNDARY_TOL * (p2 - p1).norm().max((q2 - q1).norm());
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    let split = |a: f64, b: f64| (a > tol && b < -tol) || (a < -tol && b > tol);
    split(d1, d2) && split(d3, d4)
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let orient = |a: Vec2, b: Vec2, c: Vec2| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Exhaustive check that no two non-adjacent edges cross.
pub fn polygon_is_simple(v: &[Vec2]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Star polygon with `n_points` tips: `2 * n_points` vertices alternating
/// between the outer and inner radius, first tip straight up.
pub fn make_star(
    center: Vec2,
    outer_radius: f64,
    inner_radius: f64,
    n_points: usize,
    side: DomainSide,
    bc_rule: BcRule,
) -> Result<Shape> {
    if !(outer_radius > 0.0 && inner_radius > 0.0) {
        return invalid("star radii must be positive");
    }
    if inner_radius >= outer_radius {
        return invalid("star inner radius must be smaller than the outer radius");
    }
    if n_points < 2 {
        return invalid("star needs at least 2 points");
    }
    let verts = (0..2 * n_points)
        .map(|k| {
            let a = PI / 2.0 + k as f64 * PI / n_points as f64;
            let r = if k % 2 == 0 { outer_radius } else { inner_radius };
            center + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect();
    Shape::polygon(verts, side, bc_rule)
}

/// Seven-lobed flower: polar radius `0.05 + 0.24 sin(7θ)` about (0.5, 0.5),
/// θ in [-π, π).
pub fn make_flower(side: DomainSide, bc_rule: BcRule) -> Result<Shape> {
    let pos: CurveFn = Arc::new(|t: f64| {
        let r = 0.05 + 0.24 * (7.0 * t).sin();
        Vec2::new(0.5 + r * t.cos(), 0.5 + r * t.sin())
    });
    let vel: CurveFn = Arc::new(|t: f64| {
        let r = 0.05 + 0.24 * (7.0 * t).sin();
        let dr = 0.24 * 7.0 * (7.0 * t).cos();
        Vec2::new(dr * t.cos() - r * t.sin(), dr * t.sin() + r * t.cos())
    });
    let curve = ParametricCurve::new(pos, vel, -PI, PI, PARAMETRIC_SAMPLES)?;
    Ok(Shape {
        boundary: Boundary::Parametric(curve),
        side,
        bc_rule,
    })
}
