//! Planar path primitives: points, piecewise-linear paths, puncture sets,
//! winding numbers, half-turn counts and minimal spacing.
//!
//! All winding quantities are exact integers for the polyline itself. Inputs
//! that put a query point within [`DEGENERACY_TOL`] of the path are rejected
//! rather than resolved by guessing a side.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance below which a point is considered to touch a segment, a cut ray
/// or a half-line endpoint.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("a path needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex and time lists differ in length ({vertices} vs {times})")]
    LengthMismatch { vertices: usize, times: usize },
    #[error("times must start at 0 and increase strictly (violated at index {0})")]
    BadTimes(usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("closed path must end at its first vertex")]
    NotClosedUp,
    #[error("path is already closed")]
    AlreadyClosed,
    #[error("operation requires a closed loop")]
    NotClosed,
    #[error("point ({x}, {y}) lies within tolerance of the path")]
    OnPath { x: f64, y: f64 },
    #[error("path passes within tolerance of the half-line endpoint ({x}, {y})")]
    HalfLineDegenerate { x: f64, y: f64 },
    #[error("half-turns are undefined for a point at the origin")]
    PointAtOrigin,
    #[error("puncture {0} lies at the origin")]
    PunctureAtOrigin(u32),
    #[error("punctures {0} and {1} have equal norms")]
    EqualNorms(u32, u32),
    #[error("punctures {0} and {1} are collinear with the origin")]
    CollinearWithOrigin(u32, u32),
    #[error("puncture ids must increase with the norm (ids {0} then {1})")]
    IdsNotNormOrdered(u32, u32),
    #[error("sub-path bounds must satisfy 0 <= s < t <= 1 (got {0}, {1})")]
    BadInterval(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        Point2::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotation by +pi/2.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, s: f64) -> Point2 {
        Point2::new(self.x + s * (o.x - self.x), self.y + s * (o.y - self.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let e = b - a;
    let l2 = e.norm2();
    if l2 == 0.0 {
        return a.dist(p);
    }
    let s = ((p - a).dot(e) / l2).clamp(0.0, 1.0);
    a.lerp(b, s).dist(p)
}

/// A timestamped piecewise-linear planar path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPath {
    vertices: Vec<Point2>,
    times: Vec<f64>,
    closed: bool,
}

impl PolyPath {
    pub fn new(
        vertices: Vec<Point2>,
        times: Vec<f64>,
        closed: bool,
    ) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.len() != times.len() {
            return Err(GeometryError::LengthMismatch {
                vertices: vertices.len(),
                times: times.len(),
            });
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        if times[0] != 0.0 {
            return Err(GeometryError::BadTimes(0));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0]) || w[1] > 1.0) {
            return Err(GeometryError::BadTimes(i + 1));
        }
        if closed && vertices[0] != vertices[vertices.len() - 1] {
            return Err(GeometryError::NotClosedUp);
        }
        Ok(PolyPath {
            vertices,
            times,
            closed,
        })
    }

    /// Open path with uniform times `j / (len - 1)`.
    pub fn open(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let times = uniform_times(vertices.len());
        PolyPath::new(vertices, times, false)
    }

    /// Closed polygon through `vertices`; the first vertex is repeated at the end.
    pub fn polygon(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if let Some(&first) = vertices.first() {
            if vertices.last() != Some(&first) || vertices.len() == 1 {
                vertices.push(first);
            }
        }
        let times = uniform_times(vertices.len());
        PolyPath::new(vertices, times, true)
    }

    /// Counter-clockwise regular `sides`-gon inscribed in the circle of the
    /// given centre and radius, starting at angle `phase`.
    pub fn circle(center: Point2, radius: f64, sides: usize, phase: f64) -> Self {
        let verts = (0..sides)
            .map(|j| center + Point2::polar(radius, phase + 2.0 * PI * j as f64 / sides as f64))
            .collect();
        PolyPath::polygon(verts).expect("regular polygon is a valid loop")
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn start(&self) -> Point2 {
        self.vertices[0]
    }

    pub fn end(&self) -> Point2 {
        self.vertices[self.vertices.len() - 1]
    }

    /// Largest distance from the origin reached by the path.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Position at time `t`, linearly interpolated.
    pub fn position(&self, t: f64) -> Point2 {
        let (i, s) = self.locate(t);
        if i + 1 >= self.vertices.len() {
            return self.end();
        }
        self.vertices[i].lerp(self.vertices[i + 1], s)
    }

    /// Edge index and local parameter of time `t`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, 1.0);
        let idx = match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap_or(Ordering::Less))
        {
            Ok(i) => return (i.min(self.vertices.len() - 1), 0.0),
            Err(i) => i,
        };
        if idx == 0 {
            return (0, 0.0);
        }
        if idx >= self.times.len() {
            return (self.vertices.len() - 1, 0.0);
        }
        let i = idx - 1;
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        (i, s)
    }

    /// Vertices of the restriction to `[s, t]`, endpoints interpolated.
    pub fn restrict(&self, s: f64, t: f64) -> Result<Vec<Point2>, GeometryError> {
        if !(0.0..1.0).contains(&s) || !(t > s && t <= 1.0) {
            return Err(GeometryError::BadInterval(s, t));
        }
        let mut out = vec![self.position(s)];
        for (v, &tv) in self.vertices.iter().zip(&self.times) {
            if tv > s && tv < t {
                out.push(*v);
            }
        }
        out.push(self.position(t));
        Ok(out)
    }

    /// Prefix `[0, t]` as an open path with times rescaled to `[0, 1]`.
    pub fn prefix(&self, t: f64) -> Result<PolyPath, GeometryError> {
        let verts = self.restrict(0.0, t)?;
        PolyPath::open(verts)
    }

    /// Same loop traversed backwards.
    pub fn reversed(&self) -> PolyPath {
        let mut v = self.vertices.clone();
        v.reverse();
        let times = self.times.iter().rev().map(|t| 1.0 - t).collect();
        PolyPath {
            vertices: v,
            times,
            closed: self.closed,
        }
    }

    /// Closed loop with its vertex list rotated to start at vertex `k`.
    pub fn rotated(&self, k: usize) -> Result<PolyPath, GeometryError> {
        if !self.closed {
            return Err(GeometryError::NotClosed);
        }
        let n = self.num_edges();
        let verts: Vec<Point2> = (0..=n).map(|j| self.vertices[(k + j) % n]).collect();
        PolyPath::polygon(verts)
    }

    /// Image of the path under a planar map applied to the vertices.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> PolyPath {
        PolyPath {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            times: self.times.clone(),
            closed: self.closed,
        }
    }

    /// Concatenation with the straight segment back to the first vertex.
    pub fn close_loop(&self) -> Result<PolyPath, GeometryError> {
        if self.closed {
            return Err(GeometryError::AlreadyClosed);
        }
        let edges = self.num_edges() as f64;
        let scale = edges / (edges + 1.0);
        let mut vertices = self.vertices.clone();
        vertices.push(self.vertices[0]);
        let mut times: Vec<f64> = self.times.iter().map(|t| t * scale).collect();
        times.push(1.0);
        PolyPath::new(vertices, times, true)
    }
}

fn uniform_times(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![0.0; len];
    }
    let last = (len - 1) as f64;
    (0..len)
        .map(|j| if j + 1 == len { 1.0 } else { j as f64 / last })
        .collect()
}

/// See [`PolyPath::close_loop`].
pub fn close_loop(path: &PolyPath) -> Result<PolyPath, GeometryError> {
    path.close_loop()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Puncture {
    pub id: u32,
    pub point: Point2,
}

/// Punctures sorted by Euclidean norm, with ids increasing along that order.
///
/// Invariants: no puncture at the origin, pairwise distinct norms, and no two
/// punctures on a common ray from the origin (all up to [`DEGENERACY_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PunctureSet {
    punctures: Vec<Puncture>,
}

impl PunctureSet {
    /// Assigns ids `1..=m` in increasing norm order.
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        let mut pts = points;
        pts.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let punctures = pts
            .into_iter()
            .enumerate()
            .map(|(i, point)| Puncture {
                id: i as u32 + 1,
                point,
            })
            .collect();
        PunctureSet::with_ids(punctures)
    }

    /// Keeps the given ids; they must increase with the norm.
    pub fn with_ids(mut punctures: Vec<Puncture>) -> Result<Self, GeometryError> {
        punctures.sort_by(|a, b| a.point.norm().total_cmp(&b.point.norm()));
        for p in &punctures {
            if p.point.norm() <= DEGENERACY_TOL {
                return Err(GeometryError::PunctureAtOrigin(p.id));
            }
        }
        for w in punctures.windows(2) {
            if w[1].point.norm() - w[0].point.norm() <= DEGENERACY_TOL {
                return Err(GeometryError::EqualNorms(w[0].id, w[1].id));
            }
            if w[1].id <= w[0].id {
                return Err(GeometryError::IdsNotNormOrdered(w[0].id, w[1].id));
            }
        }
        check_no_common_ray(&punctures)?;
        Ok(PunctureSet { punctures })
    }

    pub fn punctures(&self) -> &[Puncture] {
        &self.punctures
    }

    pub fn len(&self) -> usize {
        self.punctures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.punctures.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.punctures.iter().map(|p| p.id)
    }

    pub fn get(&self, id: u32) -> Option<&Puncture> {
        self.punctures
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.punctures[i])
    }

    /// Copy without the puncture `id`.
    pub fn without(&self, id: u32) -> PunctureSet {
        PunctureSet {
            punctures: self
                .punctures
                .iter()
                .copied()
                .filter(|p| p.id != id)
                .collect(),
        }
    }

    /// Copy keeping only punctures with id `<= id` (or `< id` when `strict`).
    pub fn truncated(&self, id: u32, strict: bool) -> PunctureSet {
        PunctureSet {
            punctures: self
                .punctures
                .iter()
                .copied()
                .filter(|p| if strict { p.id < id } else { p.id <= id })
                .collect(),
        }
    }

    pub fn points(&self) -> Vec<Point2> {
        self.punctures.iter().map(|p| p.point).collect()
    }
}

fn check_no_common_ray(punctures: &[Puncture]) -> Result<(), GeometryError> {
    if punctures.len() < 2 {
        return Ok(());
    }
    let mut by_angle: Vec<(f64, &Puncture)> =
        punctures.iter().map(|p| (p.point.angle(), p)).collect();
    by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = by_angle.len();
    for i in 0..n {
        let (a0, p0) = by_angle[i];
        let (a1, p1) = by_angle[(i + 1) % n];
        let gap = if i + 1 == n {
            a1 + 2.0 * PI - a0
        } else {
            a1 - a0
        };
        // perpendicular offset of the outer point from the inner point's ray
        let r = p0.point.norm().max(p1.point.norm());
        if gap * r <= DEGENERACY_TOL {
            return Err(GeometryError::CollinearWithOrigin(
                p0.id.min(p1.id),
                p0.id.max(p1.id),
            ));
        }
    }
    Ok(())
}

fn require_closed(loop_: &PolyPath) -> Result<(), GeometryError> {
    if loop_.is_closed() {
        Ok(())
    } else {
        Err(GeometryError::NotClosed)
    }
}

fn check_clearance(loop_: &PolyPath, p: Point2) -> Result<(), GeometryError> {
    for (a, b) in loop_.edges() {
        if segment_distance(a, b, p) <= DEGENERACY_TOL {
            return Err(GeometryError::OnPath { x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// Winding number of a closed polyline around `p`, by summing the signed
/// angle subtended by each edge.
pub fn winding_number(loop_: &PolyPath, p: Point2) -> Result<i64, GeometryError> {
    require_closed(loop_)?;
    check_clearance(loop_, p)?;
    let total: f64 = loop_
        .edges()
        .map(|(a, b)| {
            let (u, v) = (a - p, b - p);
            u.cross(v).atan2(u.dot(v))
        })
        .sum();
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Signed crossing contribution of edge `a -> b` to the rightward horizontal
/// ray from `p` (upward crossings count +1, downward -1).
#[inline]
fn edge_ray_crossing(a: Point2, b: Point2, p: Point2) -> i64 {
    if a.y <= p.y {
        if b.y > p.y && (b - a).cross(p - a) > 0.0 {
            return 1;
        }
    } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
        return -1;
    }
    0
}

/// Winding number by signed crossings of the horizontal ray from `p`.
pub fn winding_number_by_crossings(loop_: &PolyPath, p: Point2) -> Result<i64, GeometryError> {
    require_closed(loop_)?;
    check_clearance(loop_, p)?;
    Ok(loop_.edges().map(|(a, b)| edge_ray_crossing(a, b, p)).sum())
}

/// The two half-lines delimited by `p` and orthogonal to the direction from
/// the origin to `p`. `d1` points along `p/|p|` rotated by +pi/2.
#[derive(Debug, Clone, Copy)]
struct HalfLines {
    base: Point2,
    radial: Point2,
    tangent: Point2,
    offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    First,
    Second,
}

impl Side {
    fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

impl HalfLines {
    fn new(p: Point2) -> Result<Self, GeometryError> {
        let r = p.norm();
        if r <= DEGENERACY_TOL {
            return Err(GeometryError::PointAtOrigin);
        }
        let radial = p * (1.0 / r);
        Ok(HalfLines {
            base: p,
            radial,
            tangent: radial.perp(),
            offset: r,
        })
    }

    /// Which half-line the edge meets, if any. An edge meets the supporting
    /// line at most once unless it lies on it.
    fn hit(&self, a: Point2, b: Point2) -> Result<Option<Side>, GeometryError> {
        let fa = a.dot(self.radial) - self.offset;
        let fb = b.dot(self.radial) - self.offset;
        if (fa > 0.0 && fb > 0.0) || (fa < 0.0 && fb < 0.0) {
            return Ok(None);
        }
        let z = if fa == fb {
            // both endpoints on the line
            if segment_distance(a, b, self.base) <= DEGENERACY_TOL {
                return Err(GeometryError::HalfLineDegenerate {
                    x: self.base.x,
                    y: self.base.y,
                });
            }
            a
        } else {
            a.lerp(b, fa / (fa - fb))
        };
        let c = (z - self.base).dot(self.tangent);
        if c.abs() <= DEGENERACY_TOL {
            return Err(GeometryError::HalfLineDegenerate {
                x: self.base.x,
                y: self.base.y,
            });
        }
        Ok(Some(if c > 0.0 { Side::First } else { Side::Second }))
    }

    /// Interval of tangent coordinates where the supporting line meets the
    /// (padded) box.
    fn box_interval(&self, bb: &BBox) -> Option<(f64, f64)> {
        let pad = DEGENERACY_TOL;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (origin, dir, min, max) in [
            (self.base.x, self.tangent.x, bb.xmin - pad, bb.xmax + pad),
            (self.base.y, self.tangent.y, bb.ymin - pad, bb.ymax + pad),
        ] {
            if dir.abs() < 1e-300 {
                if origin < min || origin > max {
                    return None;
                }
            } else {
                let (t0, t1) = ((min - origin) / dir, (max - origin) / dir);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn box_may_hit(&self, bb: &BBox, side: Side) -> bool {
        match self.box_interval(bb) {
            None => false,
            Some((lo, hi)) => match side {
                Side::First => hi >= -DEGENERACY_TOL,
                Side::Second => lo <= DEGENERACY_TOL,
            },
        }
    }
}

/// Number of half-turns of `path` around `p`: the length of the alternating
/// hit sequence `d1, d2, d1, ...` starting at time 0, plus one. A path that
/// starts on `d1` counts that as its first hit.
pub fn half_turn_count(path: &PolyPath, p: Point2) -> Result<u64, GeometryError> {
    let lines = HalfLines::new(p)?;
    check_clearance(path, p)?;
    let mut want = Side::First;
    let mut hits = 0u64;
    for (a, b) in path.edges() {
        if let Some(side) = lines.hit(a, b)? {
            if side == want {
                hits += 1;
                want = want.other();
            }
        }
    }
    Ok(hits + 1)
}

/// Minimal pairwise distance among the punctures and the origin, by
/// enumeration of all pairs.
pub fn min_spacing_brute(ps: &PunctureSet) -> f64 {
    let mut pts = vec![Point2::ORIGIN];
    pts.extend(ps.points());
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(pts[i].dist(pts[j]));
        }
    }
    best
}

/// Minimal pairwise distance among the punctures and the origin, by a sweep
/// over x-sorted points. Returns exactly the brute-force value.
pub fn min_spacing(ps: &PunctureSet) -> f64 {
    let mut pts = vec![Point2::ORIGIN];
    pts.extend(ps.points());
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut best = f64::INFINITY;
    for i in 1..pts.len() {
        for j in (0..i).rev() {
            if pts[i].x - pts[j].x > best {
                break;
            }
            best = best.min(pts[i].dist(pts[j]));
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl BBox {
    fn of(points: &[Point2]) -> BBox {
        let mut bb = BBox {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for p in points {
            bb.xmin = bb.xmin.min(p.x);
            bb.xmax = bb.xmax.max(p.x);
            bb.ymin = bb.ymin.min(p.y);
            bb.ymax = bb.ymax.max(p.y);
        }
        bb
    }

    fn union(&self, o: &BBox) -> BBox {
        BBox {
            xmin: self.xmin.min(o.xmin),
            xmax: self.xmax.max(o.xmax),
            ymin: self.ymin.min(o.ymin),
            ymax: self.ymax.max(o.ymax),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    bb: BBox,
    /// Edge range `[first, last)`.
    first: usize,
    last: usize,
    children: Option<(usize, usize)>,
}

const LEAF_EDGES: usize = 8;

/// Bounding-box hierarchy over contiguous time ranges of a path. Answers
/// winding-number and half-turn queries in time roughly proportional to the
/// number of path pieces near the query point.
#[derive(Debug, Clone)]
pub struct PathIndex {
    vertices: Vec<Point2>,
    closed: bool,
    nodes: Vec<Node>,
    root: usize,
}

impl PathIndex {
    pub fn new(path: &PolyPath) -> PathIndex {
        let vertices = path.vertices().to_vec();
        let mut nodes = Vec::with_capacity(2 * vertices.len() / LEAF_EDGES + 2);
        let root = build_node(&vertices, 0, vertices.len() - 1, &mut nodes);
        PathIndex {
            vertices,
            closed: path.is_closed(),
            nodes,
            root,
        }
    }

    /// Largest distance from the origin reached by the path.
    pub fn max_norm(&self) -> f64 {
        let bb = &self.nodes[self.root].bb;
        [
            Point2::new(bb.xmin, bb.ymin),
            Point2::new(bb.xmin, bb.ymax),
            Point2::new(bb.xmax, bb.ymin),
            Point2::new(bb.xmax, bb.ymax),
        ]
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
    }

    /// Winding number of the indexed closed loop around `p`; equal to
    /// [`winding_number_by_crossings`].
    pub fn winding_number(&self, p: Point2) -> Result<i64, GeometryError> {
        if !self.closed {
            return Err(GeometryError::NotClosed);
        }
        let mut acc = 0i64;
        self.winding_rec(self.root, p, &mut acc)?;
        Ok(acc)
    }

    fn winding_rec(&self, ni: usize, p: Point2, acc: &mut i64) -> Result<(), GeometryError> {
        let node = &self.nodes[ni];
        let bb = &node.bb;
        let tol = DEGENERACY_TOL;
        if bb.xmax < p.x - tol || bb.ymin > p.y + tol || bb.ymax < p.y - tol {
            return Ok(());
        }
        if bb.xmin > p.x + tol {
            // the whole piece lies right of p: net crossings of the full
            // horizontal line telescope to the endpoints
            let (a, b) = (self.vertices[node.first], self.vertices[node.last]);
            *acc += (a.y <= p.y) as i64 - (b.y <= p.y) as i64;
            return Ok(());
        }
        match node.children {
            Some((l, r)) => {
                self.winding_rec(l, p, acc)?;
                self.winding_rec(r, p, acc)
            }
            None => {
                for i in node.first..node.last {
                    let (a, b) = (self.vertices[i], self.vertices[i + 1]);
                    if segment_distance(a, b, p) <= tol {
                        return Err(GeometryError::OnPath { x: p.x, y: p.y });
                    }
                    *acc += edge_ray_crossing(a, b, p);
                }
                Ok(())
            }
        }
    }

    /// Half-turn count of the indexed path around `p`; equal to
    /// [`half_turn_count`].
    pub fn half_turn_count(&self, p: Point2) -> Result<u64, GeometryError> {
        let lines = HalfLines::new(p)?;
        let mut want = Side::First;
        let mut from = 0usize;
        let mut hits = 0u64;
        while let Some(edge) = self.first_hit(self.root, from, &lines, want, p)? {
            hits += 1;
            want = want.other();
            from = edge + 1;
        }
        Ok(hits + 1)
    }

    fn first_hit(
        &self,
        ni: usize,
        from: usize,
        lines: &HalfLines,
        side: Side,
        p: Point2,
    ) -> Result<Option<usize>, GeometryError> {
        let node = &self.nodes[ni];
        if node.last <= from || !lines.box_may_hit(&node.bb, side) {
            return Ok(None);
        }
        match node.children {
            Some((l, r)) => {
                if let Some(e) = self.first_hit(l, from, lines, side, p)? {
                    return Ok(Some(e));
                }
                self.first_hit(r, from, lines, side, p)
            }
            None => {
                for i in node.first.max(from)..node.last {
                    let (a, b) = (self.vertices[i], self.vertices[i + 1]);
                    if segment_distance(a, b, p) <= DEGENERACY_TOL {
                        return Err(GeometryError::OnPath { x: p.x, y: p.y });
                    }
                    if lines.hit(a, b)? == Some(side) {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            }
        }
    }
}

fn build_node(vertices: &[Point2], first: usize, last: usize, nodes: &mut Vec<Node>) -> usize {
    if last - first <= LEAF_EDGES {
        nodes.push(Node {
            bb: BBox::of(&vertices[first..=last]),
            first,
            last,
            children: None,
        });
        return nodes.len() - 1;
    }
    let mid = first + (last - first) / 2;
    let l = build_node(vertices, first, mid, nodes);
    let r = build_node(vertices, mid, last, nodes);
    let bb = nodes[l].bb.union(&nodes[r].bb);
    nodes.push(Node {
        bb,
        first,
        last,
        children: Some((l, r)),
    });
    nodes.len() - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Uniform point in the disk of the given radius.
pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point2 {
    let r = radius * rng.random::<f64>().sqrt();
    Point2::polar(r, 2.0 * PI * rng.random::<f64>())
}

/// Monte Carlo estimate of the area of `{z : |winding(z)| > k}` inside the
/// disk of `region_radius`. Points landing on the loop are resampled.
pub fn winding_area_estimate<R: Rng + ?Sized>(
    loop_: &PolyPath,
    k: u64,
    samples: usize,
    region_radius: f64,
    rng: &mut R,
) -> Result<AreaEstimate, GeometryError> {
    require_closed(loop_)?;
    let index = PathIndex::new(loop_);
    Ok(winding_area_estimate_indexed(
        &index,
        k,
        samples,
        region_radius,
        rng,
    ))
}

pub fn winding_area_estimate_indexed<R: Rng + ?Sized>(
    index: &PathIndex,
    k: u64,
    samples: usize,
    region_radius: f64,
    rng: &mut R,
) -> AreaEstimate {
    let mut hits = 0usize;
    for _ in 0..samples {
        let w = loop {
            let z = uniform_in_disk(region_radius, rng);
            if let Ok(w) = index.winding_number(z) {
                break w;
            }
        };
        if w.unsigned_abs() > k {
            hits += 1;
        }
    }
    let area = PI * region_radius * region_radius;
    let frac = hits as f64 / samples as f64;
    AreaEstimate {
        estimate: area * frac,
        std_error: area * (frac * (1.0 - frac) / samples as f64).sqrt(),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn close_triangle() {
        let path = PolyPath::open(vec![p(0., 0.), p(1., 0.), p(0., 1.)]).unwrap();
        let lp = close_loop(&path).unwrap();
        assert!(lp.is_closed());
        assert_eq!(lp.vertices().len(), 4);
        assert_eq!(lp.end(), p(0., 0.));
        assert_eq!(lp.times(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(close_loop(&lp), Err(GeometryError::AlreadyClosed));
    }

    #[test]
    fn close_two_vertex_path() {
        let path = PolyPath::open(vec![p(0., 0.), p(1., 0.)]).unwrap();
        let lp = close_loop(&path).unwrap();
        assert_eq!(lp.num_edges(), 2);
        assert_eq!(winding_number(&lp, p(0.5, 1.0)).unwrap(), 0);
    }

    #[test]
    fn path_validation() {
        assert!(matches!(
            PolyPath::open(vec![p(0., 0.)]),
            Err(GeometryError::TooFewVertices(1))
        ));
        assert!(PolyPath::new(vec![p(0., 0.), p(1., 0.)], vec![0.0, 0.0], false).is_err());
        assert!(PolyPath::new(vec![p(0., 0.), p(1., 0.)], vec![0.0, 1.0], true).is_err());
    }

    #[test]
    fn circle_windings() {
        let c = PolyPath::circle(Point2::ORIGIN, 2.0, 64, 0.1);
        assert_eq!(winding_number(&c, p(1., 0.)).unwrap(), 1);
        assert_eq!(winding_number(&c, p(3., 0.)).unwrap(), 0);
        let twice_cw: Vec<Point2> = c
            .vertices()
            .iter()
            .rev()
            .chain(c.vertices().iter().rev().skip(1))
            .copied()
            .collect();
        let cw2 = PolyPath::new(twice_cw.clone(), uniform_times(twice_cw.len()), true).unwrap();
        assert_eq!(winding_number(&cw2, p(1., 0.)).unwrap(), -2);
        assert_eq!(winding_number_by_crossings(&cw2, p(1., 0.)).unwrap(), -2);
        assert_eq!(PathIndex::new(&cw2).winding_number(p(1., 0.)).unwrap(), -2);
    }

    #[test]
    fn winding_rejects_points_on_loop() {
        let sq = PolyPath::polygon(vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]).unwrap();
        assert!(matches!(
            winding_number(&sq, p(0.5, 0.0)),
            Err(GeometryError::OnPath { .. })
        ));
        assert!(PathIndex::new(&sq).winding_number(p(1.0, 0.5)).is_err());
        let open = PolyPath::open(vec![p(0., 0.), p(1., 0.)]).unwrap();
        assert_eq!(
            winding_number(&open, p(3., 3.)),
            Err(GeometryError::NotClosed)
        );
    }

    #[test]
    fn half_turn_examples() {
        // stays on the origin side of the line through p
        let near = PolyPath::open(vec![p(0., 0.), p(0.5, 0.3), p(-1.0, 0.2)]).unwrap();
        assert_eq!(half_turn_count(&near, p(1., 0.)).unwrap(), 1);

        let path = PolyPath::open(vec![p(0., 0.), p(2., 2.), p(2., -2.), p(0., -2.)]).unwrap();
        assert_eq!(half_turn_count(&path, p(1., 0.)).unwrap(), 3);
        assert_eq!(PathIndex::new(&path).half_turn_count(p(1., 0.)).unwrap(), 3);

        // CCW unit circle around (2, 0) starting on d1 = {x = 2, y > 0}
        let circ = PolyPath::circle(p(2., 0.), 1.0, 64, PI / 2.0);
        assert_eq!(half_turn_count(&circ, p(2., 0.)).unwrap(), 4);
        assert_eq!(PathIndex::new(&circ).half_turn_count(p(2., 0.)).unwrap(), 4);

        assert_eq!(
            half_turn_count(&circ, Point2::ORIGIN),
            Err(GeometryError::PointAtOrigin)
        );
    }

    #[test]
    fn spacing_examples() {
        let ps = PunctureSet::new(vec![p(1., 0.), p(0., 2.)]).unwrap();
        assert_eq!(min_spacing(&ps), 1.0);
        assert_eq!(min_spacing_brute(&ps), 1.0);
        let ps = PunctureSet::new(vec![p(3., 0.), p(3., 0.5)]).unwrap();
        assert_eq!(min_spacing(&ps), 0.5);
    }

    #[test]
    fn spacing_sweep_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point2> = (0..10_000)
            .map(|_| uniform_in_disk(1.0, &mut rng))
            .collect();
        let ps = PunctureSet::new(pts).unwrap();
        assert_eq!(min_spacing(&ps), min_spacing_brute(&ps));
    }

    #[test]
    fn puncture_set_invariants() {
        assert!(matches!(
            PunctureSet::new(vec![p(1., 1.), p(2., 2.)]),
            Err(GeometryError::CollinearWithOrigin(1, 2))
        ));
        assert!(matches!(
            PunctureSet::new(vec![p(1., 0.), p(0., 1.)]),
            Err(GeometryError::EqualNorms(1, 2))
        ));
        assert!(PunctureSet::new(vec![p(0., 0.)]).is_err());
        // opposite directions are fine
        assert!(PunctureSet::new(vec![p(1., 0.), p(-2., 0.)]).is_ok());
        let ps = PunctureSet::new(vec![p(3., 0.1), p(1., 0.2), p(0.2, 2.)]).unwrap();
        let ids: Vec<u32> = ps.ids().collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(ps.get(1).unwrap().point, p(1., 0.2));
    }

    #[test]
    fn unit_circle_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = PolyPath::circle(Point2::ORIGIN, 1.0, 512, 0.0);
        let est = winding_area_estimate(&c, 0, 20_000, 2.0, &mut rng).unwrap();
        let exact = 512.0 / 2.0 * (2.0 * PI / 512.0).sin();
        assert!(
            (est.estimate - exact).abs() < 3.0 * est.std_error,
            "{est:?}"
        );
        let est1 = winding_area_estimate(&c, 1, 2_000, 2.0, &mut rng).unwrap();
        assert_eq!(est1.estimate, 0.0);
    }

    #[test]
    fn restrict_and_position() {
        let path = PolyPath::open(vec![p(0., 0.), p(1., 0.), p(1., 1.)]).unwrap();
        assert_eq!(path.position(0.25), p(0.5, 0.0));
        assert_eq!(path.position(1.0), p(1.0, 1.0));
        let sub = path.restrict(0.25, 0.75).unwrap();
        assert_eq!(sub, vec![p(0.5, 0.0), p(1.0, 0.0), p(1.0, 0.5)]);
        assert!(path.restrict(0.5, 0.5).is_err());
    }
}
