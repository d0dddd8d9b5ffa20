//! Compact groups `Torus(d)`, `SU2` and `SO3`.
//!
//! `SU2` and `SO3` elements are unit quaternions (`SO3` up to sign). The
//! algebra norms are chosen so that `exp` is injective on the open ball of
//! radius `pi`: for `SU2` the norm of `Z` is half the angle of the rotation
//! `Ad_{exp Z}`, for `SO3` it is the rotation angle itself.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("unknown group {0:?}; expected torus:<d>, su2 or so3")]
    UnknownGroup(String),
    #[error("logarithm undefined at the cut locus (distance {0} to identity)")]
    CutLocus(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GroupKind {
    Torus(usize),
    SU2,
    SO3,
}

impl GroupKind {
    pub fn dim(self) -> usize {
        match self {
            GroupKind::Torus(d) => d,
            GroupKind::SU2 | GroupKind::SO3 => 3,
        }
    }

    pub fn is_abelian(self) -> bool {
        matches!(self, GroupKind::Torus(_))
    }

    /// Length of [`class_coordinate`] vectors.
    pub fn class_dim(self) -> usize {
        match self {
            GroupKind::Torus(d) => d,
            _ => 1,
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Torus(d) => write!(f, "torus:{d}"),
            GroupKind::SU2 => f.write_str("su2"),
            GroupKind::SO3 => f.write_str("so3"),
        }
    }
}

impl FromStr for GroupKind {
    type Err = LieError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "su2" | "su(2)" => return Ok(GroupKind::SU2),
            "so3" | "so(3)" => return Ok(GroupKind::SO3),
            "torus" | "u1" | "u(1)" => return Ok(GroupKind::Torus(1)),
            _ => {}
        }
        t.strip_prefix("torus:")
            .or_else(|| t.strip_prefix("torus"))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d >= 1)
            .map(GroupKind::Torus)
            .ok_or_else(|| LieError::UnknownGroup(s.to_string()))
    }
}

impl From<GroupKind> for String {
    fn from(k: GroupKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for GroupKind {
    type Error = LieError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Coordinates of a Lie-algebra element in an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgebraVec(pub Vec<f64>);

impl AlgebraVec {
    pub fn zeros(d: usize) -> Self {
        AlgebraVec(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, o: &AlgebraVec) -> f64 {
        self.0.iter().zip(&o.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> AlgebraVec {
        AlgebraVec(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, o: &AlgebraVec) -> AlgebraVec {
        AlgebraVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &AlgebraVec) -> AlgebraVec {
        AlgebraVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn add_assign(&mut self, o: &AlgebraVec) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, o: &AlgebraVec, s: f64) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += s * b;
        }
    }

    fn vec3(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }
}

/// Unit quaternion `w + x i + y j + z k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const ONE: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    fn conj(self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    fn vnorm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn normalized(self) -> Quat {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// `cos(a) + sin(a) v/|v|` with `a = |v|`.
    fn exp_pure(v: [f64; 3]) -> Quat {
        let a = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        // sin(a)/a, accurate near zero
        let s = if a < 1e-8 {
            1.0 - a * a / 6.0
        } else {
            a.sin() / a
        };
        Quat {
            w: a.cos(),
            x: s * v[0],
            y: s * v[1],
            z: s * v[2],
        }
    }

    /// Inverse of [`Quat::exp_pure`] on angles in `[0, pi)`.
    fn log_pure(self) -> ([f64; 3], f64) {
        let vn = self.vnorm();
        let a = vn.atan2(self.w);
        let s = if vn < 1e-12 {
            1.0 / self.w.max(f64::MIN_POSITIVE)
        } else {
            a / vn
        };
        ([s * self.x, s * self.y, s * self.z], a)
    }

    /// Rotation `q v q^-1` of a 3-vector.
    fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        let p = Quat {
            w: 0.0,
            x: v[0],
            y: v[1],
            z: v[2],
        };
        let r = self.mul(p).mul(self.conj());
        [r.x, r.y, r.z]
    }
}

/// Element of a compact group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroupElem {
    /// Angles in `(-pi, pi]`.
    Torus(Vec<f64>),
    SU2(Quat),
    SO3(Quat),
}

/// Representative of `theta` modulo `2 pi` in `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

const RENORMALIZE_EVERY: usize = 64;

impl GroupElem {
    pub fn identity(kind: GroupKind) -> GroupElem {
        match kind {
            GroupKind::Torus(d) => GroupElem::Torus(vec![0.0; d]),
            GroupKind::SU2 => GroupElem::SU2(Quat::ONE),
            GroupKind::SO3 => GroupElem::SO3(Quat::ONE),
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElem::Torus(a) => GroupKind::Torus(a.len()),
            GroupElem::SU2(_) => GroupKind::SU2,
            GroupElem::SO3(_) => GroupKind::SO3,
        }
    }

    pub fn mul(&self, o: &GroupElem) -> GroupElem {
        match (self, o) {
            (GroupElem::Torus(a), GroupElem::Torus(b)) => {
                GroupElem::Torus(a.iter().zip(b).map(|(x, y)| wrap_angle(x + y)).collect())
            }
            (GroupElem::SU2(p), GroupElem::SU2(q)) => GroupElem::SU2(p.mul(*q)),
            (GroupElem::SO3(p), GroupElem::SO3(q)) => GroupElem::SO3(p.mul(*q)),
            _ => panic!("product of elements of different groups"),
        }
    }

    /// In-place right multiplication `self <- self * o`.
    pub fn mul_assign(&mut self, o: &GroupElem) {
        match (self, o) {
            (GroupElem::Torus(a), GroupElem::Torus(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = wrap_angle(*x + y);
                }
            }
            (GroupElem::SU2(p), GroupElem::SU2(q)) | (GroupElem::SO3(p), GroupElem::SO3(q)) => {
                *p = p.mul(*q)
            }
            _ => panic!("product of elements of different groups"),
        }
    }

    /// In-place `self <- self * o^-1`.
    pub fn mul_assign_inverse(&mut self, o: &GroupElem) {
        match (self, o) {
            (GroupElem::Torus(a), GroupElem::Torus(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = wrap_angle(*x - y);
                }
            }
            (GroupElem::SU2(p), GroupElem::SU2(q)) | (GroupElem::SO3(p), GroupElem::SO3(q)) => {
                *p = p.mul(q.conj())
            }
            _ => panic!("product of elements of different groups"),
        }
    }

    pub fn inverse(&self) -> GroupElem {
        match self {
            GroupElem::Torus(a) => GroupElem::Torus(a.iter().map(|x| wrap_angle(-x)).collect()),
            GroupElem::SU2(q) => GroupElem::SU2(q.conj()),
            GroupElem::SO3(q) => GroupElem::SO3(q.conj()),
        }
    }

    /// `self^n` for any integer `n`.
    pub fn pow(&self, n: i64) -> GroupElem {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut acc = GroupElem::identity(self.kind());
        let mut sq = base;
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            sq = sq.mul(&sq);
            e >>= 1;
        }
        acc.renormalized()
    }

    pub fn renormalized(self) -> GroupElem {
        match self {
            GroupElem::SU2(q) => GroupElem::SU2(q.normalized()),
            GroupElem::SO3(q) => GroupElem::SO3(q.normalized()),
            t => t,
        }
    }

    /// `g h g^-1` with `g = self`.
    pub fn conj(&self, h: &GroupElem) -> GroupElem {
        self.mul(h).mul(&self.inverse())
    }
}

pub fn exp_g(kind: GroupKind, z: &AlgebraVec) -> GroupElem {
    assert_eq!(
        z.dim(),
        kind.dim(),
        "algebra vector has the wrong dimension"
    );
    match kind {
        GroupKind::Torus(_) => GroupElem::Torus(z.0.iter().map(|&x| wrap_angle(x)).collect()),
        GroupKind::SU2 => GroupElem::SU2(Quat::exp_pure(z.vec3())),
        GroupKind::SO3 => {
            let v = z.vec3();
            GroupElem::SO3(Quat::exp_pure([v[0] / 2.0, v[1] / 2.0, v[2] / 2.0]))
        }
    }
}

/// Principal logarithm; defined when the distance to the identity is below
/// `pi` (and, on tori, when every angle is).
pub fn log_g(g: &GroupElem) -> Result<AlgebraVec, LieError> {
    const EDGE: f64 = 1e-12;
    match g {
        GroupElem::Torus(a) => {
            if let Some(x) = a.iter().find(|x| x.abs() >= PI - EDGE) {
                return Err(LieError::CutLocus(x.abs()));
            }
            Ok(AlgebraVec(a.clone()))
        }
        GroupElem::SU2(q) => {
            let (v, angle) = q.log_pure();
            if angle >= PI - EDGE {
                return Err(LieError::CutLocus(angle));
            }
            Ok(AlgebraVec(v.to_vec()))
        }
        GroupElem::SO3(q) => {
            let q = if q.w < 0.0 {
                Quat {
                    w: -q.w,
                    x: -q.x,
                    y: -q.y,
                    z: -q.z,
                }
            } else {
                *q
            };
            let (v, half) = q.log_pure();
            if 2.0 * half >= PI - EDGE {
                return Err(LieError::CutLocus(2.0 * half));
            }
            Ok(AlgebraVec(v.iter().map(|c| 2.0 * c).collect()))
        }
    }
}

/// Geodesic distance to the identity.
pub fn norm_g(g: &GroupElem) -> f64 {
    match g {
        GroupElem::Torus(a) => a.iter().map(|x| x * x).sum::<f64>().sqrt(),
        GroupElem::SU2(q) => q.vnorm().atan2(q.w),
        GroupElem::SO3(q) => 2.0 * q.vnorm().atan2(q.w.abs()),
    }
}

/// Bi-invariant distance `|log(g^-1 h)|`, also defined on the cut locus.
pub fn group_distance(g: &GroupElem, h: &GroupElem) -> f64 {
    match (g, h) {
        (GroupElem::Torus(a), GroupElem::Torus(b)) => a
            .iter()
            .zip(b)
            .map(|(x, y)| wrap_angle(y - x).powi(2))
            .sum::<f64>()
            .sqrt(),
        _ => norm_g(&g.inverse().mul(h)),
    }
}

/// `Ad_g Z = log(g exp(Z) g^-1)`.
pub fn adjoint(g: &GroupElem, z: &AlgebraVec) -> AlgebraVec {
    match g {
        GroupElem::Torus(_) => z.clone(),
        GroupElem::SU2(q) | GroupElem::SO3(q) => AlgebraVec(q.rotate(z.vec3()).to_vec()),
    }
}

/// Lie bracket in the coordinates used by [`exp_g`].
pub fn bracket(kind: GroupKind, x: &AlgebraVec, y: &AlgebraVec) -> AlgebraVec {
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    match kind {
        GroupKind::Torus(d) => AlgebraVec::zeros(d),
        GroupKind::SU2 => AlgebraVec(cross(x.vec3(), y.vec3()).iter().map(|c| 2.0 * c).collect()),
        GroupKind::SO3 => AlgebraVec(cross(x.vec3(), y.vec3()).to_vec()),
    }
}

/// Conjugation-invariant coordinates: the angle vector on tori, the distance
/// to the identity otherwise.
pub fn class_coordinate(g: &GroupElem) -> Vec<f64> {
    match g {
        GroupElem::Torus(a) => a.clone(),
        _ => vec![norm_g(g)],
    }
}

/// Uniform point on the sphere of the given radius in the algebra.
pub fn sphere_sample<R: Rng + ?Sized>(kind: GroupKind, radius: f64, rng: &mut R) -> AlgebraVec {
    let d = kind.dim();
    if d == 1 {
        return AlgebraVec(vec![if rng.random::<bool>() {
            radius
        } else {
            -radius
        }]);
    }
    loop {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-300 {
            return AlgebraVec(v.into_iter().map(|x| x * radius / n).collect());
        }
    }
}

/// Haar-random element.
pub fn haar_sample<R: Rng + ?Sized>(kind: GroupKind, rng: &mut R) -> GroupElem {
    match kind {
        GroupKind::Torus(d) => GroupElem::Torus(
            (0..d)
                .map(|_| wrap_angle(rng.random_range(-PI..PI)))
                .collect(),
        ),
        GroupKind::SU2 | GroupKind::SO3 => {
            let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let q = Quat {
                w: v[0],
                x: v[1],
                y: v[2],
                z: v[3],
            }
            .normalized();
            if kind == GroupKind::SU2 {
                GroupElem::SU2(q)
            } else {
                GroupElem::SO3(q)
            }
        }
    }
}

/// Ordered product of a sequence, with periodic renormalization.
pub fn product<'a, I: IntoIterator<Item = &'a GroupElem>>(kind: GroupKind, items: I) -> GroupElem {
    let mut acc = GroupElem::identity(kind);
    for (i, g) in items.into_iter().enumerate() {
        acc.mul_assign(g);
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            acc = acc.renormalized();
        }
    }
    acc.renormalized()
}

/// `exp(X_1) ... exp(X_n)`.
pub fn product_of_exps(kind: GroupKind, xs: &[AlgebraVec]) -> GroupElem {
    let mut acc = GroupElem::identity(kind);
    for (i, x) in xs.iter().enumerate() {
        acc.mul_assign(&exp_g(kind, x));
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            acc = acc.renormalized();
        }
    }
    acc.renormalized()
}

/// Development of the piecewise-linear algebra path through `nodes`:
/// `y(t_i) = exp(G_1 - G_0) ... exp(G_i - G_{i-1})`.
pub fn develop(kind: GroupKind, nodes: &[AlgebraVec]) -> Vec<GroupElem> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = GroupElem::identity(kind);
    out.push(acc.clone());
    for (i, w) in nodes.windows(2).enumerate() {
        acc.mul_assign(&exp_g(kind, &w[1].sub(&w[0])));
        if (i + 1) % RENORMALIZE_EVERY == 0 {
            acc = acc.renormalized();
        }
        out.push(acc.clone());
    }
    out
}

/// Endpoint of [`develop`] without storing the intermediate values.
pub fn develop_endpoint(kind: GroupKind, increments: &[AlgebraVec]) -> GroupElem {
    product_of_exps(kind, increments)
}

/// `d(exp(X_1) ... exp(X_n), exp(X_1 + ... + X_n))`.
pub fn prod_vs_sum_gap(kind: GroupKind, xs: &[AlgebraVec]) -> f64 {
    let mut sum = AlgebraVec::zeros(kind.dim());
    for x in xs {
        sum.add_assign(x);
    }
    group_distance(&product_of_exps(kind, xs), &exp_g(kind, &sum))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeProduct {
    /// Exact product `exp(X_1) ... exp(X_n)`.
    pub element: GroupElem,
    /// `g^1, ..., g^D`: level `k` multiplies the exponentials of the sums over
    /// consecutive blocks of `b^(D-k)` leaves.
    pub levels: Vec<GroupElem>,
    /// `d(g^k, g^(k+1))` for `k = 1..D-1`.
    pub gaps: Vec<f64>,
}

impl TreeProduct {
    pub fn total_gap(&self) -> f64 {
        self.gaps.iter().sum()
    }
}

/// Evaluates `exp(X_1) ... exp(X_n)` through a `branching`-regular tree.
pub fn tree_product(kind: GroupKind, xs: &[AlgebraVec], branching: usize) -> TreeProduct {
    assert!(branching >= 2, "branching must be at least 2");
    let n = xs.len().max(1);
    let mut depth_below = 0u32;
    let mut cap = 1usize;
    while cap < n {
        cap = cap.saturating_mul(branching);
        depth_below += 1;
    }
    let depth = depth_below + 1;
    let mut levels = Vec::with_capacity(depth as usize);
    for k in 1..=depth {
        let chunk = branching.saturating_pow(depth - k).max(1);
        let sums: Vec<AlgebraVec> = xs
            .chunks(chunk)
            .map(|c| {
                let mut s = AlgebraVec::zeros(kind.dim());
                for x in c {
                    s.add_assign(x);
                }
                s
            })
            .collect();
        levels.push(product_of_exps(kind, &sums));
    }
    let gaps = levels
        .windows(2)
        .map(|w| group_distance(&w[0], &w[1]))
        .collect();
    TreeProduct {
        element: levels
            .last()
            .cloned()
            .unwrap_or_else(|| GroupElem::identity(kind)),
        levels,
        gaps,
    }
}
