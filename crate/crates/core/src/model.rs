//! The end-to-end experiment: Poisson punctures carrying Lie-algebra charges,
//! Brownian loops, homotopy words, holonomies, ordered products and
//! per-puncture word statistics, plus the invariance and tail diagnostics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freegroup::{projected_exponents, Word};
use crate::geometry::{
    close_loop, min_spacing, uniform_in_disk, winding_area_estimate_indexed, AreaEstimate,
    GeometryError, PathIndex, Point2, PolyPath, PunctureSet,
};
use crate::homotopy::{word_of_loop_indexed, HomotopyError, RayIndex};
use crate::liegroup::{class_coordinate, exp_g, sphere_sample, AlgebraVec, GroupElem, GroupKind};
use crate::stats::{bonferroni, ks_two_sample, KsResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("letter x{0} has no charge")]
    UnknownId(u32),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error("replica {replica}: degenerate after {retries} resamples: {source}")]
    Degenerate {
        replica: usize,
        retries: usize,
        source: HomotopyError,
    },
}

impl From<GeometryError> for ModelError {
    fn from(e: GeometryError) -> Self {
        ModelError::Homotopy(HomotopyError::Geometry(e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One Brownian path shared by all replicas.
    #[default]
    Quenched,
    /// A fresh path per replica.
    Annealed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Quenched => "quenched",
            Mode::Annealed => "annealed",
        })
    }
}

fn default_r() -> f64 {
    4.0
}
fn default_replicas() -> usize {
    1
}
fn default_epsilon() -> f64 {
    0.04
}
fn default_retries() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(alias = "kind")]
    pub group: GroupKind,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "R", default = "default_r")]
    pub r: f64,
    pub n_steps: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Compute the per-puncture statistics table for every replica.
    #[serde(default)]
    pub statistics: bool,
    /// Resamples allowed per replica when a draw is degenerate.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

impl ModelConfig {
    pub fn new(group: GroupKind, k: f64, n_steps: usize, replicas: usize, seed: u64) -> Self {
        ModelConfig {
            group,
            k,
            r: default_r(),
            n_steps,
            replicas,
            seed,
            epsilon: default_epsilon(),
            mode: Mode::Quenched,
            statistics: false,
            max_retries: default_retries(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(self.k.is_finite() && self.k > 0.0) {
            return bad("K must be positive");
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return bad("R must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.05) {
            return bad("epsilon must lie in (0, 1/20)");
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let cfg: ModelConfig =
            serde_json::from_str(s).map_err(|e| ModelError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generator for stream `stream` of `seed`. Replica `i` uses stream `i`; the
/// quenched path uses [`PATH_STREAM`].
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const PATH_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargedPuncture {
    pub id: u32,
    pub point: Point2,
    #[serde(rename = "Z")]
    pub z: AlgebraVec,
    pub g: GroupElem,
}

/// Charge of puncture `id`.
pub fn charge_of(charges: &[ChargedPuncture], id: u32) -> Option<&ChargedPuncture> {
    let i = id.checked_sub(1)? as usize;
    match charges.get(i) {
        Some(c) if c.id == id => Some(c),
        _ => charges
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &charges[i]),
    }
}

/// Poisson cloud of intensity `k` in the disk of radius `radius`, generated
/// in increasing norm: squared norms form a Poisson process of rate `k pi`
/// on `[0, radius^2]`, angles are uniform. Charges are uniform on the sphere
/// of radius `1/k` in the algebra.
pub fn sample_punctures_in<R: Rng + ?Sized>(
    kind: GroupKind,
    k: f64,
    radius: f64,
    rng: &mut R,
) -> (PunctureSet, Vec<ChargedPuncture>) {
    let rate = k * PI;
    let r2 = radius * radius;
    let ps = loop {
        let mut pts = Vec::with_capacity((rate * r2 * 1.1) as usize + 8);
        let mut s = 0.0;
        loop {
            let e: f64 = rng.sample(Exp1);
            s += e / rate;
            if s > r2 {
                break;
            }
            pts.push(Point2::polar(s.sqrt(), rng.random_range(-PI..PI)));
        }
        if let Ok(ps) = PunctureSet::new(pts) {
            break ps;
        }
    };
    let charges = ps
        .punctures()
        .iter()
        .map(|p| {
            let z = sphere_sample(kind, 1.0 / k, rng);
            let g = exp_g(kind, &z);
            ChargedPuncture {
                id: p.id,
                point: p.point,
                z,
                g,
            }
        })
        .collect();
    (ps, charges)
}

pub fn sample_punctures<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    rng: &mut R,
) -> (PunctureSet, Vec<ChargedPuncture>) {
    sample_punctures_in(cfg.group, cfg.k, cfg.r, rng)
}

/// Random walk with `n` Gaussian steps of covariance `I / n`, started at the
/// origin, at times `j / n`.
pub fn sample_brownian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PolyPath {
    assert!(n >= 1, "need at least one step");
    let sd = (1.0 / n as f64).sqrt();
    let mut pts = Vec::with_capacity(n + 1);
    let mut cur = Point2::ORIGIN;
    pts.push(cur);
    for _ in 0..n {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        cur = Point2::new(cur.x + sd * dx, cur.y + sd * dy);
        pts.push(cur);
    }
    PolyPath::open(pts).expect("finite random walk")
}

/// Ordered product of the charges (or their inverses) read along the word.
pub fn holonomy_eval(
    kind: GroupKind,
    word: &Word,
    charges: &[ChargedPuncture],
) -> Result<GroupElem, ModelError> {
    let mut acc = GroupElem::identity(kind);
    for (i, l) in word.letters().iter().enumerate() {
        let c = charge_of(charges, l.id).ok_or(ModelError::UnknownId(l.id))?;
        if l.sign > 0 {
            acc.mul_assign(&c.g);
        } else {
            acc.mul_assign_inverse(&c.g);
        }
        if (i + 1) % 64 == 0 {
            acc = acc.renormalized();
        }
    }
    Ok(acc.renormalized())
}

/// `prod g_x^theta(x)` over `windings`, multiplied in the order given.
pub fn simpler_product(
    kind: GroupKind,
    charges: &[ChargedPuncture],
    windings: &[(u32, i64)],
) -> Result<GroupElem, ModelError> {
    let mut acc = GroupElem::identity(kind);
    for (i, &(id, theta)) in windings.iter().enumerate() {
        if theta == 0 {
            continue;
        }
        let c = charge_of(charges, id).ok_or(ModelError::UnknownId(id))?;
        acc.mul_assign(&c.g.pow(theta));
        if (i + 1) % 64 == 0 {
            acc = acc.renormalized();
        }
    }
    Ok(acc.renormalized())
}

/// Uniformly shuffled copy of `windings`; the shuffle uses `rng` only.
pub fn random_order<R: Rng + ?Sized>(windings: &[(u32, i64)], rng: &mut R) -> Vec<(u32, i64)> {
    use rand::seq::SliceRandom;
    let mut w = windings.to_vec();
    w.shuffle(rng);
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PClass {
    P0,
    P1,
    P2,
    P3,
}

impl PClass {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for PClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P{}", self.index())
    }
}

/// Partition by `|beta1|` against `K^{2/3}` and `T = K^{1/2 - eps}`, then by
/// `S2` against `T`. The tie `S2 = T` goes to `P2`.
pub fn classify(beta1: i64, s2: u64, k: f64, epsilon: f64) -> PClass {
    let b = beta1.unsigned_abs() as f64;
    let t = k.powf(0.5 - epsilon);
    let c = k.cbrt();
    if b > c * c {
        PClass::P0
    } else if b > t {
        PClass::P1
    } else if s2 as f64 >= t {
        PClass::P2
    } else {
        PClass::P3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub puncture_id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: i64,
    pub theta_half: u64,
    /// `l1` norm of `alpha_x(pi^{<=x}(word))`.
    pub alpha_l1: u64,
    pub beta1: i64,
    pub beta2: i64,
    pub s2: u64,
    pub s5: u64,
    pub class: PClass,
}

/// Rows for the punctures occurring in the word; the others have every
/// statistic equal to zero and fall in `P3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStats {
    pub rows: Vec<StatRow>,
    pub absent: usize,
    pub class_counts: [usize; 4],
    /// Rows with `alpha_l1 > theta_half`.
    pub bound_violations: usize,
}

impl WordStats {
    /// `#P0 * K^{-1/3}`.
    pub fn card_statistic(&self, k: f64) -> f64 {
        self.class_counts[0] as f64 / k.cbrt()
    }
}

pub fn word_statistics(
    word: &Word,
    ps: &PunctureSet,
    path: &PolyPath,
    k: f64,
    epsilon: f64,
) -> Result<WordStats, ModelError> {
    word_statistics_indexed(word, ps, &PathIndex::new(path), k, epsilon)
}

/// As [`word_statistics`], with half-turn counts read from an index of the
/// open path.
pub fn word_statistics_indexed(
    word: &Word,
    ps: &PunctureSet,
    path: &PathIndex,
    k: f64,
    epsilon: f64,
) -> Result<WordStats, ModelError> {
    let mut rows = Vec::new();
    let mut class_counts = [0usize; 4];
    let mut bound_violations = 0;
    let mut alphas = projected_exponents(word);
    alphas.sort_unstable_by_key(|(x, _)| *x);
    for (x, alpha) in alphas {
        let p = ps.get(x).ok_or(ModelError::UnknownId(x))?.point;
        let sorted = alpha.sorted_by_magnitude();
        let beta1 = sorted.first().copied().unwrap_or(0);
        let beta2 = sorted.get(1).copied().unwrap_or(0);
        let s2 = alpha.tail_sum(2);
        let row = StatRow {
            puncture_id: x,
            x: p.x,
            y: p.y,
            theta: alpha.sum(),
            theta_half: path.half_turn_count(p)?,
            alpha_l1: alpha.l1_norm(),
            beta1,
            beta2,
            s2,
            s5: alpha.tail_sum(5),
            class: classify(beta1, s2, k, epsilon),
        };
        class_counts[row.class.index()] += 1;
        if row.alpha_l1 > row.theta_half {
            bound_violations += 1;
        }
        rows.push(row);
    }
    let absent = ps.len() - rows.len();
    class_counts[PClass::P3.index()] += absent;
    Ok(WordStats {
        rows,
        absent,
        class_counts,
        bound_violations,
    })
}

/// Holonomy of a loop in a charged configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEval {
    pub word: Option<Word>,
    /// Non-zero windings in increasing id order.
    pub windings: Vec<(u32, i64)>,
    pub holonomy: GroupElem,
}

/// Evaluates `loop_` (indexed by `index`). The word is computed when asked
/// for or when the group is non-abelian; otherwise the holonomy comes from
/// winding numbers alone.
pub fn evaluate_loop(
    kind: GroupKind,
    loop_: &PolyPath,
    index: &PathIndex,
    ps: &PunctureSet,
    charges: &[ChargedPuncture],
    want_word: bool,
) -> Result<LoopEval, ModelError> {
    if want_word || !kind.is_abelian() {
        let rays = RayIndex::within(ps, loop_.max_norm());
        let word = word_of_loop_indexed(loop_, &rays)?;
        let holonomy = holonomy_eval(kind, &word, charges)?;
        let mut windings: Vec<(u32, i64)> = word
            .abelianization()
            .into_iter()
            .filter(|&(_, e)| e != 0)
            .collect();
        windings.sort_unstable();
        return Ok(LoopEval {
            word: Some(word),
            windings,
            holonomy,
        });
    }
    let vs = loop_.vertices();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for v in vs {
        x0 = x0.min(v.x);
        x1 = x1.max(v.x);
        y0 = y0.min(v.y);
        y1 = y1.max(v.y);
    }
    let reach = loop_.max_norm();
    let mut windings = Vec::new();
    let mut z = AlgebraVec::zeros(kind.dim());
    for p in ps.punctures() {
        if p.point.norm() > reach {
            break;
        }
        let q = p.point;
        if q.x < x0 || q.x > x1 || q.y < y0 || q.y > y1 {
            continue;
        }
        let w = index.winding_number(q).map_err(|e| match e {
            GeometryError::OnPath { .. } => {
                ModelError::Homotopy(HomotopyError::ThroughPuncture(p.id))
            }
            e => e.into(),
        })?;
        if w != 0 {
            let c = charge_of(charges, p.id).ok_or(ModelError::UnknownId(p.id))?;
            z.add_scaled(&c.z, w as f64);
            windings.push((p.id, w));
        }
    }
    Ok(LoopEval {
        word: None,
        windings,
        holonomy: exp_g(kind, &z),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub num_punctures: usize,
    /// Minimal spacing of the punctures and the origin.
    pub delta: f64,
    pub max_path_norm: f64,
    /// `#P <= 4 R K log K` and `delta >= 1 / (K log K)`.
    pub e_r: bool,
    /// `max |X| <= R`.
    pub f_r: bool,
}

pub fn diagnostics(ps: &PunctureSet, path: &PolyPath, k: f64, r: f64) -> Diagnostics {
    let delta = min_spacing(ps);
    let klog = k * k.ln();
    let max_path_norm = path.max_norm();
    Diagnostics {
        num_punctures: ps.len(),
        delta,
        max_path_norm,
        e_r: (ps.len() as f64) <= 4.0 * r * klog && delta >= 1.0 / klog,
        f_r: max_path_norm <= r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: usize,
    /// Generator stream the replica drew from.
    pub stream: u64,
    pub retries: usize,
    pub holonomy: GroupElem,
    pub simpler: GroupElem,
    pub class_coord: Vec<f64>,
    pub simpler_class_coord: Vec<f64>,
    /// Length of the reduced word, when it was computed.
    pub word_length: Option<usize>,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statistics: Option<WordStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub e_r_frequency: f64,
    pub f_r_frequency: f64,
    pub mean_punctures: f64,
    pub total_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: ModelConfig,
    pub mode: Mode,
    pub replicas: Vec<ReplicaResult>,
    pub summary: Summary,
}

impl SimReport {
    /// Class coordinate `j` of every replica's holonomy.
    pub fn class_column(&self, j: usize) -> Vec<f64> {
        self.replicas.iter().map(|r| r.class_coord[j]).collect()
    }

    pub fn simpler_class_column(&self, j: usize) -> Vec<f64> {
        self.replicas
            .iter()
            .map(|r| r.simpler_class_coord[j])
            .collect()
    }
}

struct SharedPath {
    path: PolyPath,
    loop_: PolyPath,
    loop_index: PathIndex,
    path_index: Option<PathIndex>,
}

impl SharedPath {
    fn new(path: PolyPath, with_open_index: bool) -> Self {
        let loop_ = close_loop(&path).expect("open path");
        let loop_index = PathIndex::new(&loop_);
        let path_index = with_open_index.then(|| PathIndex::new(&path));
        SharedPath {
            path,
            loop_,
            loop_index,
            path_index,
        }
    }
}

/// The frozen path of quenched runs.
pub fn quenched_path(cfg: &ModelConfig) -> PolyPath {
    sample_brownian(cfg.n_steps, &mut stream_rng(cfg.seed, PATH_STREAM))
}

fn run_replica(
    cfg: &ModelConfig,
    i: usize,
    shared: Option<&SharedPath>,
) -> Result<ReplicaResult, ModelError> {
    let stream = i as u64;
    let mut rng = stream_rng(cfg.seed, stream);
    let mut retries = 0;
    loop {
        let fresh;
        let sp = match shared {
            Some(sp) => sp,
            None => {
                fresh = SharedPath::new(sample_brownian(cfg.n_steps, &mut rng), cfg.statistics);
                &fresh
            }
        };
        let (ps, charges) = sample_punctures(cfg, &mut rng);
        match replica_on(cfg, sp, &ps, &charges) {
            Ok((eval, statistics)) => {
                let simpler = simpler_product(cfg.group, &charges, &eval.windings)?;
                return Ok(ReplicaResult {
                    replica: i,
                    stream,
                    retries,
                    class_coord: class_coordinate(&eval.holonomy),
                    simpler_class_coord: class_coordinate(&simpler),
                    holonomy: eval.holonomy,
                    simpler,
                    word_length: eval.word.as_ref().map(Word::len),
                    diagnostics: diagnostics(&ps, &sp.path, cfg.k, cfg.r),
                    statistics,
                });
            }
            Err(ModelError::Homotopy(source)) => {
                if retries >= cfg.max_retries {
                    return Err(ModelError::Degenerate {
                        replica: i,
                        retries,
                        source,
                    });
                }
                retries += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn replica_on(
    cfg: &ModelConfig,
    sp: &SharedPath,
    ps: &PunctureSet,
    charges: &[ChargedPuncture],
) -> Result<(LoopEval, Option<WordStats>), ModelError> {
    let eval = evaluate_loop(
        cfg.group,
        &sp.loop_,
        &sp.loop_index,
        ps,
        charges,
        cfg.statistics,
    )?;
    let statistics = match (&eval.word, &sp.path_index) {
        (Some(w), Some(idx)) if cfg.statistics => {
            Some(word_statistics_indexed(w, ps, idx, cfg.k, cfg.epsilon)?)
        }
        _ => None,
    };
    Ok((eval, statistics))
}

/// Runs every replica; the result depends only on the configuration.
pub fn run_experiment(cfg: &ModelConfig) -> Result<SimReport, ModelError> {
    cfg.validate()?;
    let shared = match cfg.mode {
        Mode::Quenched => Some(SharedPath::new(quenched_path(cfg), cfg.statistics)),
        Mode::Annealed => None,
    };
    let replicas: Vec<ReplicaResult> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_replica(cfg, i, shared.as_ref()))
        .collect::<Result<_, _>>()?;
    let n = replicas.len() as f64;
    let summary = Summary {
        e_r_frequency: replicas.iter().filter(|r| r.diagnostics.e_r).count() as f64 / n,
        f_r_frequency: replicas.iter().filter(|r| r.diagnostics.f_r).count() as f64 / n,
        mean_punctures: replicas
            .iter()
            .map(|r| r.diagnostics.num_punctures as f64)
            .sum::<f64>()
            / n,
        total_retries: replicas.iter().map(|r| r.retries).sum(),
    };
    Ok(SimReport {
        config: cfg.clone(),
        mode: cfg.mode,
        replicas,
        summary,
    })
}

/// Planar maps applied to loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum PlaneMap {
    /// `(x, y) -> (x + c y, y)`.
    Shear { c: f64 },
    /// `(x, y) -> (s x, s y)`.
    Scale { s: f64 },
}

impl PlaneMap {
    pub fn apply(&self, p: Point2) -> Point2 {
        match *self {
            PlaneMap::Shear { c } => Point2::new(p.x + c * p.y, p.y),
            PlaneMap::Scale { s } => Point2::new(s * p.x, s * p.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoReport {
    pub map: PlaneMap,
    pub draws: usize,
    pub window: f64,
    /// One two-sample test per class coordinate.
    pub statistics: Vec<KsResult>,
    pub corrected_p_value: f64,
    pub retries: usize,
}

impl DiffeoReport {
    pub fn rejected(&self, alpha: f64) -> bool {
        self.corrected_p_value < alpha
    }
}

fn quantize(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Compares the holonomy law of `loop_` with that of its image under `map`.
/// Both loops are evaluated on the same configuration in each draw, with
/// punctures in a disk containing both loops; draw `i` uses stream `i` of
/// `cfg.seed`.
pub fn diffeo_check(
    cfg: &ModelConfig,
    map: PlaneMap,
    loop_: &PolyPath,
    draws: usize,
) -> Result<DiffeoReport, ModelError> {
    cfg.validate()?;
    if !loop_.is_closed() {
        return Err(GeometryError::NotClosed.into());
    }
    let image = loop_.map_points(|p| map.apply(p));
    let window = cfg.r.max(1.0001 * loop_.max_norm().max(image.max_norm()));
    let (ia, ib) = (PathIndex::new(loop_), PathIndex::new(&image));
    let kind = cfg.group;
    let out: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let mut retries = 0;
            loop {
                let (ps, charges) = sample_punctures_in(kind, cfg.k, window, &mut rng);
                let both = evaluate_loop(kind, loop_, &ia, &ps, &charges, false)
                    .and_then(|a| Ok((a, evaluate_loop(kind, &image, &ib, &ps, &charges, false)?)));
                match both {
                    Ok((a, b)) => {
                        return Ok((
                            class_coordinate(&a.holonomy),
                            class_coordinate(&b.holonomy),
                            retries,
                        ))
                    }
                    Err(ModelError::Homotopy(_)) if retries < cfg.max_retries => {
                        retries += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let cd = kind.class_dim();
    let statistics: Vec<KsResult> = (0..cd)
        .map(|j| {
            let a: Vec<f64> = out.iter().map(|o| quantize(o.0[j])).collect();
            let b: Vec<f64> = out.iter().map(|o| quantize(o.1[j])).collect();
            ks_two_sample(&a, &b)
        })
        .collect();
    let ps: Vec<f64> = statistics.iter().map(|s| s.p_value).collect();
    Ok(DiffeoReport {
        map,
        draws,
        window,
        corrected_p_value: bonferroni(&ps),
        statistics,
        retries: out.iter().map(|o| o.2).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfTurnReport {
    pub draws: usize,
    pub n_steps: usize,
    pub region_radius: f64,
    pub grid: Vec<u64>,
    /// `P(theta_half >= N)` per grid value.
    pub tail_half: Vec<f64>,
    /// `P(|theta| >= sqrt N)` per grid value.
    pub tail_winding: Vec<f64>,
    /// Ratio of the two tails where the second is positive.
    pub ratios: Vec<Option<f64>>,
    pub sup_ratio: f64,
    /// Draws with `theta_half < 2 |theta| - 2`.
    pub coupling_violations: usize,
}

/// Monte Carlo comparison of the half-turn tail with the winding tail over
/// (Brownian path, uniform point in the disk of `region_radius`) draws.
pub fn halfturn_tail_check(
    n_steps: usize,
    draws: usize,
    region_radius: f64,
    grid: &[u64],
    seed: u64,
) -> HalfTurnReport {
    let pairs: Vec<(u64, i64)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let path = sample_brownian(n_steps, &mut rng);
            let lp = close_loop(&path).expect("open path");
            let (pi, li) = (PathIndex::new(&path), PathIndex::new(&lp));
            loop {
                let z = uniform_in_disk(region_radius, &mut rng);
                if let (Ok(h), Ok(w)) = (pi.half_turn_count(z), li.winding_number(z)) {
                    return (h, w);
                }
            }
        })
        .collect();
    let n = draws as f64;
    let mut tail_half = Vec::new();
    let mut tail_winding = Vec::new();
    let mut ratios = Vec::new();
    for &g in grid {
        let root = (g as f64).sqrt();
        let a = pairs.iter().filter(|p| p.0 >= g).count() as f64 / n;
        let b = pairs
            .iter()
            .filter(|p| p.1.unsigned_abs() as f64 >= root)
            .count() as f64
            / n;
        tail_half.push(a);
        tail_winding.push(b);
        ratios.push((b > 0.0).then(|| a / b));
    }
    let sup_ratio = ratios.iter().flatten().copied().fold(0.0, f64::max);
    let coupling_violations = pairs
        .iter()
        .filter(|&&(h, w)| (h as i64) < 2 * w.abs() - 2)
        .count();
    HalfTurnReport {
        draws,
        n_steps,
        region_radius,
        grid: grid.to_vec(),
        tail_half,
        tail_winding,
        ratios,
        sup_ratio,
        coupling_violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerPoint {
    pub k: u64,
    pub area: AreaEstimate,
    /// `k * D_k`.
    pub scaled: f64,
}

/// Estimates `k * D_k`, `D_k` the area of `{|theta| > k}`, for a loop.
pub fn werner_estimates<R: Rng + ?Sized>(
    loop_: &PolyPath,
    ks: &[u64],
    samples: usize,
    rng: &mut R,
) -> Vec<WernerPoint> {
    let index = PathIndex::new(loop_);
    let radius = loop_.max_norm() * 1.0001;
    ks.iter()
        .map(|&k| {
            let area = winding_area_estimate_indexed(&index, k, samples, radius, rng);
            WernerPoint {
                k,
                scaled: k as f64 * area.estimate,
                area,
            }
        })
        .collect()
}

/// Fraction of configurations with `delta <= 1 / (K log K)`; draw `i` uses
/// stream `i` of `seed`.
pub fn small_spacing_frequency(k: f64, r: f64, draws: usize, seed: u64) -> f64 {
    let threshold = 1.0 / (k * k.ln());
    let hits: usize = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let (ps, _) = sample_punctures_in(GroupKind::Torus(1), k, r, &mut rng);
            (min_spacing(&ps) <= threshold) as usize
        })
        .sum();
    hits as f64 / draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::Letter;
    use crate::geometry::winding_number;
    use crate::liegroup::group_distance;

    fn torus_charges(angles: &[f64]) -> Vec<ChargedPuncture> {
        angles
            .iter()
            .enumerate()
            .map(|(i, &a)| ChargedPuncture {
                id: i as u32 + 1,
                point: Point2::new(i as f64 + 1.0, 0.5),
                z: AlgebraVec(vec![a]),
                g: GroupElem::Torus(vec![a]),
            })
            .collect()
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg =
            ModelConfig::from_json(r#"{"group":"su2","K":50,"n_steps":100,"replicas":3,"seed":9}"#)
                .unwrap();
        assert_eq!(cfg.r, 4.0);
        assert_eq!(cfg.epsilon, 0.04);
        assert_eq!(cfg.mode, Mode::Quenched);
        let back = ModelConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(ModelConfig::from_json(r#"{"group":"su2","K":-1,"n_steps":10}"#).is_err());
        assert!(
            ModelConfig::from_json(r#"{"group":"su2","K":1,"n_steps":10,"epsilon":0.2}"#).is_err()
        );
        assert!(ModelConfig::from_json(r#"{"group":"su2","K":1,"n_steps":10,"bogus":1}"#).is_err());
    }

    #[test]
    fn punctures_and_charges() {
        let mut rng = stream_rng(3, 0);
        let k = 40.0;
        let mut counts = Vec::new();
        for _ in 0..1000 {
            let (ps, ch) = sample_punctures_in(GroupKind::SU2, k, 1.0, &mut rng);
            assert_eq!(ps.len(), ch.len());
            for (p, c) in ps.punctures().iter().zip(&ch) {
                assert_eq!(p.id, c.id);
                assert!(p.point.norm() <= 1.0);
                assert!((c.z.norm() - 1.0 / k).abs() < 1e-12);
                assert!(group_distance(&c.g, &exp_g(GroupKind::SU2, &c.z)) < 1e-15);
            }
            counts.push(ps.len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let expect = k * PI;
        assert!(
            (mean - expect).abs() < 3.0 * (expect / 1000.0).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn brownian_moments() {
        let mut rng = stream_rng(4, 0);
        let n = 2000;
        let ends: Vec<f64> = (0..n)
            .map(|_| {
                let p = sample_brownian(16, &mut rng);
                assert_eq!(p.start(), Point2::ORIGIN);
                assert_eq!(p.times()[4], 0.25);
                p.end().norm2()
            })
            .collect();
        let mean = ends.iter().sum::<f64>() / n as f64;
        // |X(1)|^2 is exponential with mean 2, variance 4
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn holonomy_basics() {
        let ch = torus_charges(&[0.1, 0.25]);
        let kind = GroupKind::Torus(1);
        let w: Word = "x1 x1^-1".parse().unwrap();
        assert_eq!(
            holonomy_eval(kind, &w, &ch).unwrap(),
            GroupElem::identity(kind)
        );
        let w: Word = "x2^3".parse().unwrap();
        match holonomy_eval(kind, &w, &ch).unwrap() {
            GroupElem::Torus(a) => assert!((a[0] - 0.75).abs() < 1e-15),
            _ => unreachable!(),
        }
        let w: Word = "x7".parse().unwrap();
        assert_eq!(holonomy_eval(kind, &w, &ch), Err(ModelError::UnknownId(7)));
    }

    #[test]
    fn holonomy_is_a_morphism() {
        let mut rng = stream_rng(5, 0);
        let kind = GroupKind::SU2;
        let (_, ch) = sample_punctures_in(kind, 2.0, 2.0, &mut rng);
        let m = ch.len() as u32;
        for _ in 0..50 {
            let mut rw = |len: usize| {
                Word::from_letters((0..len).map(|_| {
                    Letter::new(
                        rng.random_range(1..=m),
                        if rng.random::<bool>() { 1 } else { -1 },
                    )
                }))
            };
            let (g, h) = (rw(30), rw(40));
            let lhs = holonomy_eval(kind, &g.concat(&h), &ch).unwrap();
            let rhs = holonomy_eval(kind, &g, &ch)
                .unwrap()
                .mul(&holonomy_eval(kind, &h, &ch).unwrap());
            assert!(group_distance(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn simpler_product_abelian() {
        let ch = torus_charges(&[0.1, 0.2, 0.3]);
        let kind = GroupKind::Torus(1);
        assert_eq!(
            simpler_product(kind, &ch, &[(1, 0), (3, 0)]).unwrap(),
            GroupElem::identity(kind)
        );
        let w = [(1, 2), (2, -1), (3, 1)];
        let a = simpler_product(kind, &ch, &w).unwrap();
        let b = simpler_product(kind, &ch, &[w[2], w[0], w[1]]).unwrap();
        assert!(group_distance(&a, &b) < 1e-15);
        assert!(group_distance(&a, &GroupElem::Torus(vec![0.3])) < 1e-15);
    }

    #[test]
    fn classification_thresholds() {
        let k = 1000.0;
        // K^{2/3} = 100, T = 1000^{0.46} ~ 23.99
        assert_eq!(classify(101, 0, k, 0.04), PClass::P0);
        assert_eq!(classify(-101, 0, k, 0.04), PClass::P0);
        assert_eq!(classify(100, 0, k, 0.04), PClass::P1);
        assert_eq!(classify(24, 0, k, 0.04), PClass::P1);
        assert_eq!(classify(23, 24, k, 0.04), PClass::P2);
        assert_eq!(classify(23, 23, k, 0.04), PClass::P3);
        // the tie S2 = T goes to P2
        assert_eq!(classify(1, 4, 16.0, 0.0), PClass::P2);
    }

    #[test]
    fn statistics_of_a_winding_loop() {
        let k = 200.0;
        let ps = PunctureSet::new(vec![Point2::new(1.0, 0.3), Point2::new(-3.0, 0.2)]).unwrap();
        // 27 turns around x1 then back along the radius
        let center = Point2::new(1.0, 0.3);
        let mut pts = vec![Point2::ORIGIN];
        for t in 0..=27 * 13 {
            let a = 2.0 * PI * t as f64 / 13.0 + 0.05;
            pts.push(Point2::new(
                center.x + 0.5 * a.cos(),
                center.y + 0.5 * a.sin(),
            ));
        }
        let path = PolyPath::open(pts).unwrap();
        let lp = close_loop(&path).unwrap();
        let word = crate::homotopy::word_of_loop(&lp, &ps).unwrap();
        assert_eq!(word.abelian_exponent(1), 27);
        let st = word_statistics(&word, &ps, &path, k, 0.04).unwrap();
        assert_eq!(st.rows.len(), 1);
        assert_eq!(st.absent, 1);
        let row = &st.rows[0];
        assert_eq!(
            (row.theta, row.beta1, row.beta2, row.s2, row.s5),
            (27, 27, 0, 0, 0)
        );
        assert_eq!(row.class, PClass::P1);
        assert_eq!(st.class_counts, [0, 1, 0, 1]);
        assert_eq!(st.bound_violations, 0);
        // K turns around one puncture
        assert_eq!(
            word_statistics(&word, &ps, &path, 27.0, 0.04)
                .unwrap()
                .class_counts[0],
            1
        );
        assert_eq!(winding_number(&lp, Point2::new(1.0, 0.3)).unwrap(), 27);
    }

    #[test]
    fn abelian_route_matches_word_route() {
        let mut rng = stream_rng(6, 0);
        let kind = GroupKind::Torus(2);
        for _ in 0..10 {
            let path = sample_brownian(300, &mut rng);
            let lp = close_loop(&path).unwrap();
            let idx = PathIndex::new(&lp);
            let (ps, ch) = sample_punctures_in(kind, 30.0, 3.0, &mut rng);
            let a = evaluate_loop(kind, &lp, &idx, &ps, &ch, false).unwrap();
            let b = evaluate_loop(kind, &lp, &idx, &ps, &ch, true).unwrap();
            assert!(a.word.is_none());
            assert_eq!(a.windings, b.windings);
            assert!(group_distance(&a.holonomy, &b.holonomy) < 1e-12);
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let mut cfg = ModelConfig::new(GroupKind::SU2, 20.0, 200, 4, 11);
        cfg.statistics = true;
        let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        cfg.mode = Mode::Annealed;
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.replicas.len(), 4);
        for r in &rep.replicas {
            let st = r.statistics.as_ref().unwrap();
            assert_eq!(st.bound_violations, 0);
            assert_eq!(
                st.class_counts.iter().sum::<usize>(),
                r.diagnostics.num_punctures
            );
        }
    }

    #[test]
    fn diffeo_identity_map() {
        let cfg = ModelConfig::new(GroupKind::Torus(1), 30.0, 100, 1, 2);
        let lp = close_loop(&sample_brownian(100, &mut stream_rng(1, 0))).unwrap();
        let rep = diffeo_check(&cfg, PlaneMap::Shear { c: 0.0 }, &lp, 300).unwrap();
        assert_eq!(rep.corrected_p_value, 1.0);
        let rep = diffeo_check(&cfg, PlaneMap::Scale { s: 2.0 }, &lp, 2000).unwrap();
        assert!(rep.rejected(0.01), "{rep:?}");
    }

    #[test]
    fn halfturn_far_point_and_coupling() {
        let rep = halfturn_tail_check(200, 400, 1.5, &[4, 9, 16], 3);
        assert_eq!(rep.coupling_violations, 0);
        assert!(rep.tail_half.windows(2).all(|w| w[0] >= w[1]));
        let path = sample_brownian(50, &mut stream_rng(0, 0));
        let far = Point2::new(100.0, 0.0);
        assert_eq!(PathIndex::new(&path).half_turn_count(far).unwrap(), 1);
        assert_eq!(winding_number(&close_loop(&path).unwrap(), far).unwrap(), 0);
    }
}
