//! Homotopy words of planar loops in the punctured plane.
//!
//! Each puncture `x` carries a cut ray starting at `x` in direction
//! `x / |x|`. Reading the signed crossings of a loop with these rays, in time
//! order, gives its class in the free group generated by the straight-segment
//! basis: the generator `x` is the loop that runs along `[0, x]`, turns once
//! counter-clockwise around `x` and comes back. The complement of the rays is
//! star-shaped with respect to the origin, so radial chords never cross a ray.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freegroup::{Letter, Word};
use crate::geometry::{
    segment_distance, GeometryError, Point2, PolyPath, PunctureSet, DEGENERACY_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("path vertex ({x}, {y}) lies on the cut ray of puncture {id}")]
    VertexOnRay { id: u32, x: f64, y: f64 },
    #[error("path passes through puncture {0}")]
    ThroughPuncture(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutRay {
    pub id: u32,
    pub base: Point2,
    pub direction: Point2,
}

impl CutRay {
    pub fn new(id: u32, base: Point2) -> Self {
        CutRay {
            id,
            base,
            direction: base * (1.0 / base.norm()),
        }
    }

    fn distance(&self, p: Point2) -> f64 {
        let r = (p - self.base).dot(self.direction).max(0.0);
        (self.base + self.direction * r).dist(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub id: u32,
    pub sign: i8,
}

/// Crossing of the edge `a -> b` with `ray`: the edge parameter and sign.
fn hit(a: Point2, b: Point2, ray: &CutRay) -> Result<Option<(f64, i8)>, HomotopyError> {
    for v in [a, b] {
        if ray.distance(v) <= DEGENERACY_TOL {
            return Err(HomotopyError::VertexOnRay {
                id: ray.id,
                x: v.x,
                y: v.y,
            });
        }
    }
    let e = b - a;
    let u = ray.direction;
    let den = e.cross(u);
    let near_base = || segment_distance(a, b, ray.base) <= DEGENERACY_TOL;
    if den == 0.0 {
        return if near_base() {
            Err(HomotopyError::ThroughPuncture(ray.id))
        } else {
            Ok(None)
        };
    }
    let s = (ray.base - a).cross(u) / den;
    let r = (a - ray.base).cross(e) / -den;
    if r.abs() < 1e-6 && near_base() {
        return Err(HomotopyError::ThroughPuncture(ray.id));
    }
    if s > 0.0 && s < 1.0 && r > 0.0 {
        Ok(Some((s, if den < 0.0 { 1 } else { -1 })))
    } else {
        Ok(None)
    }
}

/// Cut rays sorted by polar angle.
#[derive(Debug, Clone)]
pub struct RayIndex {
    rays: Vec<CutRay>,
    angles: Vec<f64>,
    norms: Vec<f64>,
}

const ANGLE_PAD: f64 = 1e-9;

impl RayIndex {
    pub fn new(ps: &PunctureSet) -> Self {
        Self::within(ps, f64::INFINITY)
    }

    /// Index over the punctures of norm at most `radius`; rays of farther
    /// punctures cannot meet a path contained in that disk.
    pub fn within(ps: &PunctureSet, radius: f64) -> Self {
        let mut rays: Vec<CutRay> = ps
            .punctures()
            .iter()
            .filter(|p| p.point.norm() <= radius + DEGENERACY_TOL)
            .map(|p| CutRay::new(p.id, p.point))
            .collect();
        rays.sort_by(|a, b| a.base.angle().total_cmp(&b.base.angle()));
        let angles = rays.iter().map(|r| r.base.angle()).collect();
        let norms = rays.iter().map(|r| r.base.norm()).collect();
        RayIndex {
            rays,
            angles,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// First index with angle `>= target`, galloping from `hint`.
    fn lower_bound(&self, hint: usize, target: f64) -> usize {
        let a = &self.angles;
        let n = a.len();
        let hint = hint.min(n);
        let (mut lo, mut hi);
        if hint < n && a[hint] < target {
            lo = hint;
            let mut step = 1;
            hi = hint + 1;
            while hi < n && a[hi] < target {
                lo = hi;
                hi = (hi + step).min(n);
                step *= 2;
            }
            lo += 1;
        } else {
            hi = hint;
            let mut step = 1;
            lo = hint;
            while lo > 0 && a[lo - 1] >= target {
                hi = lo - 1;
                lo = lo.saturating_sub(step);
                step *= 2;
            }
        }
        lo + a[lo..hi.min(n)].partition_point(|&x| x < target)
    }

    /// Calls `f` with every ray whose angle lies in `[lo, hi]` (mod 2 pi),
    /// where `hi - lo < 2 pi`. Returns the updated cursor.
    fn for_arc<F: FnMut(usize) -> Result<(), HomotopyError>>(
        &self,
        cursor: usize,
        lo: f64,
        hi: f64,
        mut f: F,
    ) -> Result<usize, HomotopyError> {
        let mut lo = lo;
        let mut hi = hi;
        while lo < -PI {
            lo += 2.0 * PI;
            hi += 2.0 * PI;
        }
        while lo >= PI {
            lo -= 2.0 * PI;
            hi -= 2.0 * PI;
        }
        let start = self.lower_bound(cursor, lo);
        let mut i = start;
        while i < self.angles.len() && self.angles[i] <= hi {
            f(i)?;
            i += 1;
        }
        if hi > PI {
            let wrap_hi = hi - 2.0 * PI;
            let mut j = 0;
            while j < start && self.angles[j] <= wrap_hi {
                f(j)?;
                j += 1;
            }
        }
        Ok(start)
    }
}

/// Time-ordered signed crossings of `path` with the cut rays.
pub fn crossing_sequence(
    path: &PolyPath,
    ps: &PunctureSet,
) -> Result<Vec<CrossingEvent>, HomotopyError> {
    let index = RayIndex::within(ps, path.max_norm());
    crossing_sequence_indexed(path, &index)
}

pub fn crossing_sequence_indexed(
    path: &PolyPath,
    index: &RayIndex,
) -> Result<Vec<CrossingEvent>, HomotopyError> {
    let mut raw: Vec<(usize, f64, u32, i8)> = Vec::new();
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let verts = path.vertices();
    let mut cursor = 0;
    for i in 0..verts.len() - 1 {
        let (a, b) = (verts[i], verts[i + 1]);
        let (na, nb) = (a.norm(), b.norm());
        let reach = na.max(nb) + DEGENERACY_TOL;
        let mut visit = |k: usize| -> Result<(), HomotopyError> {
            if index.norms[k] > reach {
                return Ok(());
            }
            if let Some((s, sign)) = hit(a, b, &index.rays[k])? {
                raw.push((i, s, index.rays[k].id, sign));
            }
            Ok(())
        };
        if na <= DEGENERACY_TOL && nb <= DEGENERACY_TOL {
            continue;
        }
        let (lo, hi) = if na <= DEGENERACY_TOL {
            (b.angle(), b.angle())
        } else if nb <= DEGENERACY_TOL {
            (a.angle(), a.angle())
        } else {
            let sweep = a.cross(b).atan2(a.dot(b));
            let close_to_origin =
                a.cross(b).abs() <= DEGENERACY_TOL * (b - a).norm() && a.dot(b) < 0.0;
            if close_to_origin {
                for k in 0..index.len() {
                    visit(k)?;
                }
                continue;
            }
            let ta = a.angle();
            if sweep >= 0.0 {
                (ta, ta + sweep)
            } else {
                (ta + sweep, ta)
            }
        };
        cursor = index.for_arc(cursor, lo - ANGLE_PAD, hi + ANGLE_PAD, &mut visit)?;
    }
    raw.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    let times = path.times();
    Ok(raw
        .into_iter()
        .map(|(i, s, id, sign)| CrossingEvent {
            time: times[i] + s * (times[i + 1] - times[i]),
            id,
            sign,
        })
        .collect())
}

/// All-pairs reference implementation of [`crossing_sequence`].
pub fn crossing_sequence_brute(
    path: &PolyPath,
    ps: &PunctureSet,
) -> Result<Vec<CrossingEvent>, HomotopyError> {
    let rays: Vec<CutRay> = ps
        .punctures()
        .iter()
        .map(|p| CutRay::new(p.id, p.point))
        .collect();
    let mut raw = Vec::new();
    for (i, (a, b)) in path.edges().enumerate() {
        for ray in &rays {
            if let Some((s, sign)) = hit(a, b, ray)? {
                raw.push((i, s, ray.id, sign));
            }
        }
    }
    raw.sort_by(|x: &(usize, f64, u32, i8), y| {
        x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2))
    });
    let times = path.times();
    Ok(raw
        .into_iter()
        .map(|(i, s, id, sign)| CrossingEvent {
            time: times[i] + s * (times[i + 1] - times[i]),
            id,
            sign,
        })
        .collect())
}

pub fn word_of_events(events: &[CrossingEvent]) -> Word {
    Word::from_letters(events.iter().map(|e| Letter::new(e.id, e.sign)))
}

/// Homotopy word of a closed loop.
pub fn word_of_loop(loop_: &PolyPath, ps: &PunctureSet) -> Result<Word, HomotopyError> {
    if !loop_.is_closed() {
        return Err(GeometryError::NotClosed.into());
    }
    Ok(word_of_events(&crossing_sequence(loop_, ps)?))
}

pub fn word_of_loop_indexed(loop_: &PolyPath, index: &RayIndex) -> Result<Word, HomotopyError> {
    if !loop_.is_closed() {
        return Err(GeometryError::NotClosed.into());
    }
    Ok(word_of_events(&crossing_sequence_indexed(loop_, index)?))
}

/// Word of `[0, path(s)] . path|[s,t] . [path(t), 0]`.
pub fn word_of_subloop(
    path: &PolyPath,
    s: f64,
    t: f64,
    ps: &PunctureSet,
) -> Result<Word, HomotopyError> {
    let mut verts = vec![Point2::ORIGIN];
    for v in path.restrict(s, t)? {
        if verts.last() != Some(&v) {
            verts.push(v);
        }
    }
    if verts.last() != Some(&Point2::ORIGIN) {
        verts.push(Point2::ORIGIN);
    }
    if verts.len() < 3 {
        return Ok(Word::identity());
    }
    let loop_ = PolyPath::polygon(verts)?;
    word_of_loop(&loop_, ps)
}

/// Net signed crossing count of every puncture's ray.
pub fn windings_from_crossings(events: &[CrossingEvent]) -> HashMap<u32, i64> {
    let mut m = HashMap::new();
    for e in events {
        *m.entry(e.id).or_insert(0) += e.sign as i64;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::winding_number;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight to near `x`, once around it counter-clockwise, straight back.
    fn lasso(x: Point2, radius: f64) -> PolyPath {
        let dir = x * (1.0 / x.norm());
        let theta0 = (-dir).angle();
        let mut v = vec![Point2::ORIGIN];
        for j in 0..=31 {
            v.push(x + Point2::polar(radius, theta0 + 2.0 * PI * j as f64 / 31.0));
        }
        PolyPath::polygon(v).unwrap()
    }

    fn random_walk_loop(rng: &mut ChaCha8Rng, n: usize, step: f64) -> PolyPath {
        let mut p = Point2::ORIGIN;
        let mut v = vec![p];
        for _ in 0..n {
            p = p + Point2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * step;
            v.push(p);
        }
        PolyPath::open(v).unwrap().close_loop().unwrap()
    }

    fn random_punctures(rng: &mut ChaCha8Rng, m: usize, radius: f64) -> PunctureSet {
        let pts = (0..m)
            .map(|_| crate::geometry::uniform_in_disk(radius, rng))
            .collect();
        PunctureSet::new(pts).unwrap()
    }

    #[test]
    fn lasso_reads_as_generator() {
        let x = Point2::new(1.0, 0.7);
        let ps = PunctureSet::new(vec![x, Point2::new(-2.0, 0.3)]).unwrap();
        let ev = crossing_sequence(&lasso(x, 0.2), &ps).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].id, ev[0].sign), (1, 1));
        assert_eq!(
            word_of_loop(&lasso(x, 0.2), &ps).unwrap(),
            "x1".parse().unwrap()
        );
    }

    #[test]
    fn small_paths_cross_nothing() {
        let ps = PunctureSet::new(vec![Point2::new(1.0, 0.1), Point2::new(-0.5, 1.5)]).unwrap();
        let c = PolyPath::circle(Point2::new(0.05, 0.0), 0.3, 40, 0.2);
        assert!(crossing_sequence(&c, &ps).unwrap().is_empty());
    }

    #[test]
    fn enclosing_circle_has_unit_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps = random_punctures(&mut rng, 30, 1.0);
        let c = PolyPath::circle(Point2::ORIGIN, 1.5, 100, 0.1);
        let w = word_of_loop(&c, &ps).unwrap();
        for id in ps.ids() {
            assert_eq!(w.abelian_exponent(id), 1);
        }
    }

    #[test]
    fn figure_eight() {
        let x1 = Point2::new(1.0, 0.2);
        let x2 = Point2::new(-0.3, 2.0);
        let ps = PunctureSet::new(vec![x1, x2]).unwrap();
        let mut v = lasso(x1, 0.2).vertices().to_vec();
        v.pop();
        v.extend(lasso(x2, 0.3).reversed().vertices().iter().copied());
        let loop_ = PolyPath::polygon(v).unwrap();
        assert_eq!(
            word_of_loop(&loop_, &ps).unwrap(),
            "x1 x2^-1".parse().unwrap()
        );
    }

    #[test]
    fn vertex_on_ray_rejected() {
        let ps = PunctureSet::new(vec![Point2::new(1.0, 0.0)]).unwrap();
        let loop_ = PolyPath::polygon(vec![
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, -1.0),
        ])
        .unwrap();
        assert!(matches!(
            crossing_sequence(&loop_, &ps),
            Err(HomotopyError::VertexOnRay { .. })
        ));
        let through = PolyPath::polygon(vec![
            Point2::new(0.0, 0.5),
            Point2::new(2.0, -0.5),
            Point2::new(0.0, -2.0),
        ])
        .unwrap();
        assert!(matches!(
            crossing_sequence(&through, &ps),
            Err(HomotopyError::ThroughPuncture(1))
        ));
    }

    #[test]
    fn indexed_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let loop_ = random_walk_loop(&mut rng, 1000, 0.15);
            let ps = random_punctures(&mut rng, 100, 1.5);
            let fast = crossing_sequence(&loop_, &ps).unwrap();
            let slow = crossing_sequence_brute(&loop_, &ps).unwrap();
            assert!(!fast.is_empty());
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn abelianization_is_winding() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let loop_ = random_walk_loop(&mut rng, 300, 0.2);
            let ps = random_punctures(&mut rng, 40, 1.5);
            let w = word_of_loop(&loop_, &ps).unwrap();
            for p in ps.punctures() {
                assert_eq!(
                    w.abelian_exponent(p.id),
                    winding_number(&loop_, p.point).unwrap()
                );
            }
        }
    }

    #[test]
    fn deleting_a_puncture_projects_the_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let loop_ = random_walk_loop(&mut rng, 400, 0.2);
            let ps = random_punctures(&mut rng, 25, 1.5);
            let w = word_of_loop(&loop_, &ps).unwrap();
            for x in [3u32, 10, 25] {
                assert_eq!(word_of_loop(&loop_, &ps.without(x)).unwrap(), w.delete(x));
                assert_eq!(
                    word_of_loop(&loop_, &ps.truncated(x, false)).unwrap(),
                    w.project_leq(x, false)
                );
            }
        }
    }

    #[test]
    fn subloop_cocycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let loop_ = random_walk_loop(&mut rng, 300, 0.2);
            let ps = random_punctures(&mut rng, 30, 1.5);
            let mut cuts: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            cuts.sort_by(f64::total_cmp);
            let (s, u, t) = (cuts[0], cuts[1], cuts[2]);
            let g_su = word_of_subloop(&loop_, s, u, &ps).unwrap();
            let g_ut = word_of_subloop(&loop_, u, t, &ps).unwrap();
            assert_eq!(
                g_su.concat(&g_ut),
                word_of_subloop(&loop_, s, t, &ps).unwrap()
            );
            assert_eq!(
                word_of_subloop(&loop_, 0.0, 1.0, &ps).unwrap(),
                word_of_loop(&loop_, &ps).unwrap()
            );
        }
    }
}
