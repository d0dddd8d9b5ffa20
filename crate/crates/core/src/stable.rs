//! Symmetric 1-stable laws `nu^sigma` on a Lie algebra, the radial transport
//! from a real Cauchy law, stable paths and the limit law `nu*`.
//!
//! All radial integrals reduce, through `z = tan u`, to
//! `J_n(a) = int_a^{pi/2} sin^n(u) du`, which is evaluated by its recurrence.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::liegroup::{develop_endpoint, sphere_sample, AlgebraVec, GroupElem, GroupKind};

/// `Gamma(d/2) / (2 sqrt(pi) Gamma((d+1)/2))`.
pub fn sigma_for_group(d: usize) -> f64 {
    assert!(d >= 1);
    gamma_ratio(d) / (2.0 * PI.sqrt())
}

/// `Gamma(d/2) / Gamma((d+1)/2)`.
fn gamma_ratio(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d + 1.0) / 2.0)).exp()
}

/// `J_n(atan(a)) = int_{atan a}^{pi/2} sin^n(u) du` for `a >= 0`.
fn j_tail(n: usize, a: f64) -> f64 {
    let h = (1.0 + a * a).sqrt();
    let (s, c) = (a / h, 1.0 / h);
    // J_0 = pi/2 - atan(a), computed without cancellation for large a
    let j0 = if a > 1.0 {
        (1.0 / a).atan()
    } else {
        PI / 2.0 - a.atan()
    };
    let j1 = c;
    if n == 0 {
        return j0;
    }
    // J_m = sin^(m-1) cos / m + (m-1)/m J_(m-2)
    let mut m = if n % 2 == 0 { 2 } else { 3 };
    let mut cur = if n % 2 == 0 { j0 } else { j1 };
    let mut s_pow = s.powi(m as i32 - 1);
    while m <= n {
        cur = s_pow * c / m as f64 + (m - 1) as f64 / m as f64 * cur;
        s_pow *= s * s;
        m += 2;
    }
    cur
}

/// `2 Gamma((d+1)/2) / (sqrt(pi) Gamma(d/2))`, the normalization making the
/// radial tail equal to one at zero.
fn tail_constant(d: usize) -> f64 {
    2.0 / (PI.sqrt() * gamma_ratio(d))
}

/// `P(|Z| > r)` for `Z ~ nu^sigma` in dimension `d`.
pub fn radial_tail(d: usize, sigma: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    (tail_constant(d) * j_tail(d - 1, r / sigma)).clamp(0.0, 1.0)
}

/// `P(|Z| <= r)` for `Z ~ nu^sigma`.
pub fn radial_cdf(d: usize, sigma: f64, r: f64) -> f64 {
    1.0 - radial_tail(d, sigma, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub d: usize,
    pub sigma: f64,
}

impl StableParams {
    pub fn new(d: usize, sigma: f64) -> Self {
        assert!(d >= 1 && sigma > 0.0, "need d >= 1 and sigma > 0");
        StableParams { d, sigma }
    }

    /// Parameters of the limit law for a group of dimension `d`.
    pub fn for_group(kind: GroupKind) -> Self {
        StableParams::new(kind.dim(), sigma_for_group(kind.dim()))
    }

    /// `C_1 = pi^((d+1)/2) / Gamma((d+1)/2)`.
    pub fn normalization(&self) -> f64 {
        let d = self.d as f64;
        ((d + 1.0) / 2.0 * PI.ln() - ln_gamma((d + 1.0) / 2.0)).exp()
    }

    pub fn density(&self, z: &AlgebraVec) -> f64 {
        let d = self.d as f64;
        let q = z.dot(z) / (self.sigma * self.sigma);
        1.0 / (self.normalization() * self.sigma.powf(d) * (1.0 + q).powf((d + 1.0) / 2.0))
    }

    /// `sigma G / |W|` with `G` standard Gaussian in `R^d`, `W` standard
    /// Gaussian on the line.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraVec {
        let w = loop {
            let w: f64 = rng.sample(StandardNormal);
            if w.abs() > 1e-300 {
                break w.abs();
            }
        };
        AlgebraVec(
            (0..self.d)
                .map(|_| self.sigma * rng.sample::<f64, _>(StandardNormal) / w)
                .collect(),
        )
    }

    pub fn radial_cdf(&self, r: f64) -> f64 {
        radial_cdf(self.d, self.sigma, r)
    }
}

/// Radial map `psi` sending the symmetric Cauchy law of scale one to the
/// radial law of `nu^sigma` with `sigma = Gamma(d/2) / (sqrt(pi) Gamma((d+1)/2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialTransport {
    pub d: usize,
    pub sigma: f64,
}

const ROOT_TOL: f64 = 1e-12;

impl RadialTransport {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1);
        RadialTransport {
            d,
            sigma: gamma_ratio(d) / PI.sqrt(),
        }
    }

    /// `psi(x)`: the positive solution of
    /// `(2/pi) int_psi^inf dz/(1+z^2) = c_d int_{x/sigma}^inf z^(d-1)/(1+z^2)^((d+1)/2) dz`.
    pub fn psi(&self, x: f64) -> f64 {
        assert!(x >= 0.0);
        let rhs = radial_tail(self.d, self.sigma, x);
        if rhs >= 1.0 {
            return 0.0;
        }
        1.0 / (PI * rhs / 2.0).tan()
    }

    /// `phi = psi^-1`, by bracketed bisection.
    pub fn phi(&self, y: f64) -> f64 {
        assert!(y >= 0.0);
        if y == 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 2.0 * y + 10.0;
        while self.psi(hi) < y {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > ROOT_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `sgn(S) phi(|S|) U` for `S` standard Cauchy and `U` uniform on the unit
    /// sphere; distributed as `nu^sigma`.
    pub fn pushforward_sample<R: Rng + ?Sized>(&self, kind: GroupKind, rng: &mut R) -> AlgebraVec {
        assert_eq!(kind.dim(), self.d);
        let s = (PI * (rng.random::<f64>() - 0.5)).tan();
        let u = sphere_sample(kind, 1.0, rng);
        u.scaled(s.signum() * self.phi(s.abs()))
    }

    /// `max |psi(x) - x|` over `points` log-spaced values in `[1e-3, x_max]`
    /// together with `x = 0`.
    pub fn max_deviation(&self, x_max: f64, points: usize) -> f64 {
        let (a, b) = (1e-3f64.ln(), x_max.ln());
        (0..points)
            .map(|i| (a + (b - a) * i as f64 / (points - 1).max(1) as f64).exp())
            .chain(std::iter::once(0.0))
            .map(|x| (self.psi(x) - x).abs())
            .fold(0.0, f64::max)
    }
}

/// Nodes `Gamma(j/n) = (1/n) sum_{i<=j} X_i`, `j = 0..=n`, of the
/// piecewise-linear stable path with i.i.d. `nu^sigma` increments `X_i`.
pub fn stable_path<R: Rng + ?Sized>(
    params: &StableParams,
    n: usize,
    rng: &mut R,
) -> Vec<AlgebraVec> {
    assert!(n >= 1);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut cur = AlgebraVec::zeros(params.d);
    nodes.push(cur.clone());
    for _ in 0..n {
        cur.add_scaled(&params.sample(rng), 1.0 / n as f64);
        nodes.push(cur.clone());
    }
    nodes
}

/// Endpoint `y(1)` of the development of an `n`-step stable path with the
/// group's limit scale.
pub fn nu_star_sample<R: Rng + ?Sized>(kind: GroupKind, n: usize, rng: &mut R) -> GroupElem {
    let params = StableParams::for_group(kind);
    let increments: Vec<AlgebraVec> = (0..n)
        .map(|_| params.sample(rng).scaled(1.0 / n as f64))
        .collect();
    develop_endpoint(kind, &increments)
}

/// CDF of the symmetric Cauchy law of the given scale.
pub fn cauchy_cdf(scale: f64, x: f64) -> f64 {
    0.5 + (x / scale).atan() / PI
}

/// CDF on `(-pi, pi]` of the Cauchy law of the given scale wrapped onto the
/// circle.
pub fn wrapped_cauchy_cdf(scale: f64, theta: f64) -> f64 {
    if theta <= -PI {
        return 0.0;
    }
    if theta >= PI {
        return 1.0;
    }
    let rho = (-scale).exp();
    0.5 + (((1.0 + rho) / (1.0 - rho)) * (theta / 2.0).tan()).atan() / PI
}
