//! The acceptance criteria as runnable checks. Each criterion returns one or
//! more [`TestReport`]s; `Scale::Quick` shrinks every sample size for smoke
//! runs and keeps the thresholds.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::braid::{invariance_test, BraidWord, SlotLaw};
use crate::freegroup::{refines, semidirect_component, Letter, Word};
use crate::geometry::{close_loop, PathIndex};
use crate::homotopy::{word_of_loop_indexed, RayIndex};
use crate::liegroup::{norm_g, prod_vs_sum_gap, sphere_sample, AlgebraVec, GroupKind};
use crate::model::{
    diffeo_check, evaluate_loop, run_experiment, sample_brownian, sample_punctures_in,
    small_spacing_frequency, stream_rng, werner_estimates, word_statistics_indexed, Mode,
    ModelConfig, ModelError, PlaneMap,
};
use crate::stable::{
    nu_star_sample, sigma_for_group, wrapped_cauchy_cdf, RadialTransport, StableParams,
};
use crate::stats::{bonferroni, ks_one_sample, ks_two_sample, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn n(self, full: usize, quick: usize) -> usize {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub reports: Vec<TestReport>,
    pub pass: bool,
    /// Wall-clock time; not serialized so that reports are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

impl Criterion {
    /// `PASS` or `FAIL` line with the statistics of every report; no timing.
    pub fn line(&self) -> String {
        let details: Vec<String> = self
            .reports
            .iter()
            .map(|r| {
                let p = r.p_value.map(|p| format!(" p={p:.4}")).unwrap_or_default();
                format!("{}={:.5} (thr {}{})", r.name, r.statistic, r.threshold, p)
            })
            .collect();
        format!(
            "{} #{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            details.join("; ")
        )
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "word exponents equal winding numbers"),
    (2, "semidirect decomposition reconstruction"),
    (3, "refinement chain of exponent sequences"),
    (4, "projected exponents bounded by half-turns"),
    (5, "winding area constant"),
    (6, "abelian holonomy limit"),
    (7, "non-abelian holonomy limit"),
    (8, "braid invariance"),
    (9, "product versus sum gap scaling"),
    (10, "stable law machinery"),
    (11, "area-preserving invariance"),
    (12, "small spacing frequency"),
];

pub fn run_criterion(id: u8, seed: u64, scale: Scale) -> Result<Criterion, ModelError> {
    let start = Instant::now();
    let reports = match id {
        1 => word_winding(seed, scale)?,
        2 => decomposition(seed, scale),
        3 => refinement_chain(seed, scale),
        4 => half_turn_bound(seed, scale)?,
        5 => werner(seed, scale),
        6 => abelian_limit(seed, scale)?,
        7 => nonabelian_limit(seed, scale)?,
        8 => braids(seed, scale),
        9 => gap_scaling(seed, scale),
        10 => stable_machinery(seed, scale),
        11 => diffeo(seed, scale)?,
        12 => spacing(seed, scale),
        _ => return Err(ModelError::Config(format!("no criterion {id}"))),
    };
    let title = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("");
    Ok(Criterion {
        id,
        title: title.to_string(),
        pass: reports.iter().all(|r| r.pass),
        reports,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(seed: u64, scale: Scale) -> Result<Vec<Criterion>, ModelError> {
    CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, seed, scale))
        .collect()
}

/// Seed of criterion-specific stream blocks, so that criteria do not share
/// draws.
fn sub(seed: u64, id: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(id)
}

fn word_winding(seed: u64, scale: Scale) -> Result<Vec<TestReport>, ModelError> {
    let replicas = scale.n(1000, 40);
    let seed = sub(seed, 1);
    let out: Vec<(usize, usize)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let k = [50.0, 100.0, 200.0][i % 3];
            loop {
                let lp = close_loop(&sample_brownian(10_000, &mut rng)).expect("open path");
                let (ps, _) = sample_punctures_in(GroupKind::Torus(1), k, 2.0, &mut rng);
                let Ok(word) = word_of_loop_indexed(&lp, &RayIndex::within(&ps, lp.max_norm()))
                else {
                    continue;
                };
                let index = PathIndex::new(&lp);
                let ab = word.abelianization();
                let mut bad = 0;
                let mut degenerate = false;
                for p in ps.punctures() {
                    match index.winding_number(p.point) {
                        Ok(w) => bad += (ab.get(&p.id).copied().unwrap_or(0) != w) as usize,
                        Err(_) => degenerate = true,
                    }
                }
                if !degenerate {
                    return (bad, ps.len());
                }
            }
        })
        .collect();
    let bad = out.iter().map(|o| o.0).sum();
    let checked = out.iter().map(|o| o.1).sum();
    Ok(vec![TestReport::exact(
        "mismatches",
        bad,
        vec![replicas, checked],
    )])
}

/// Random reduced word of length at most `max_len` over `1..=alphabet`.
pub fn random_word<R: Rng + ?Sized>(max_len: usize, alphabet: u32, rng: &mut R) -> Word {
    let len = rng.random_range(0..=max_len);
    Word::from_letters((0..len).map(|_| {
        Letter::new(
            rng.random_range(1..=alphabet),
            if rng.random::<bool>() { 1 } else { -1 },
        )
    }))
}

fn corpus(seed: u64, scale: Scale) -> Vec<Word> {
    let mut rng = stream_rng(sub(seed, 2), 0);
    (0..scale.n(10_000, 500))
        .map(|_| {
            let a = rng.random_range(1..=20);
            random_word(200, a, &mut rng)
        })
        .collect()
}

/// The explicit product over the runs of `x` in `g`: each run `x^a` is
/// conjugated by the image in the letters below `x` of the suffix after it.
fn component_by_runs(g: &Word, x: u32) -> Word {
    let runs = g.run_form().runs;
    let mut acc = Word::identity();
    for (i, &(a, e)) in runs.iter().enumerate() {
        if a != x {
            continue;
        }
        let suffix = Word::from_letters(
            runs[i + 1..]
                .iter()
                .filter(|r| r.0 < x)
                .flat_map(|&(b, f)| Word::power(b, f).letters().to_vec()),
        );
        acc = acc.concat(&Word::power(x, e).conjugate_by(&suffix));
    }
    acc
}

fn decomposition(seed: u64, scale: Scale) -> Vec<TestReport> {
    let words = corpus(seed, scale);
    let (mut recon, mut oracle) = (0, 0);
    for g in &words {
        let mut prod = Word::identity();
        for x in g.alphabet() {
            let c = semidirect_component(g, x);
            if c != component_by_runs(g, x) {
                oracle += 1;
            }
            prod = prod.concat(&c);
        }
        if &prod != g {
            recon += 1;
        }
    }
    vec![
        TestReport::exact("reconstruction_failures", recon, vec![words.len()]),
        TestReport::exact("explicit_formula_failures", oracle, vec![words.len()]),
    ]
}

fn refinement_chain(seed: u64, scale: Scale) -> Vec<TestReport> {
    let words = corpus(seed, scale);
    let mut bad = 0;
    for g in &words {
        for x in g.alphabet() {
            let c = semidirect_component(g, x).exponent_seq(x);
            let p = g.project_leq(x, false).exponent_seq(x);
            let a = g.exponent_seq(x);
            if !(refines(&c, &p) && refines(&p, &a)) {
                bad += 1;
            }
        }
    }
    vec![TestReport::exact("chain_failures", bad, vec![words.len()])]
}

fn half_turn_bound(seed: u64, scale: Scale) -> Result<Vec<TestReport>, ModelError> {
    let replicas = scale.n(500, 10);
    let n = scale.n(100_000, 10_000);
    let k = 200.0;
    let seed = sub(seed, 4);
    let out: Vec<(usize, usize)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            loop {
                let path = sample_brownian(n, &mut rng);
                let lp = close_loop(&path).expect("open path");
                let (ps, ch) = sample_punctures_in(GroupKind::Torus(1), k, 4.0, &mut rng);
                let li = PathIndex::new(&lp);
                let eval = match evaluate_loop(GroupKind::Torus(1), &lp, &li, &ps, &ch, true) {
                    Ok(e) => e,
                    Err(ModelError::Homotopy(_)) => continue,
                    Err(e) => return Err(e),
                };
                let word = eval.word.expect("word requested");
                match word_statistics_indexed(&word, &ps, &PathIndex::new(&path), k, 0.04) {
                    Ok(st) => return Ok((st.bound_violations, st.rows.len())),
                    Err(ModelError::Homotopy(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let bad = out.iter().map(|o| o.0).sum();
    let rows = out.iter().map(|o| o.1).sum();
    Ok(vec![TestReport::exact(
        "bound_violations",
        bad,
        vec![replicas, rows],
    )])
}

fn werner(seed: u64, scale: Scale) -> Vec<TestReport> {
    let n = scale.n(1_000_000, 100_000);
    let samples = scale.n(100_000, 20_000);
    let mut rng = stream_rng(sub(seed, 5), 0);
    let lp = close_loop(&sample_brownian(n, &mut rng)).expect("open path");
    let target = 1.0 / PI;
    werner_estimates(&lp, &[8, 16, 32], samples, &mut rng)
        .into_iter()
        .map(|p| {
            TestReport::below(
                format!("k{}_relative_error", p.k),
                (p.scaled - target).abs() / target,
                0.15,
                vec![n, samples],
            )
        })
        .collect()
}

fn abelian_limit(seed: u64, scale: Scale) -> Result<Vec<TestReport>, ModelError> {
    let draws = scale.n(10_000, 300);
    let n = scale.n(100_000, 10_000);
    let sigma = sigma_for_group(1);
    let mut reports = Vec::new();
    let mut ds = Vec::new();
    for k in [100.0, 300.0, 1000.0] {
        let mut cfg = ModelConfig::new(GroupKind::Torus(1), k, n, draws, sub(seed, 6));
        cfg.mode = Mode::Quenched;
        let rep = run_experiment(&cfg)?;
        let ks = ks_one_sample(&rep.class_column(0), |x| wrapped_cauchy_cdf(sigma, x));
        ds.push(ks.statistic);
        reports.push(TestReport {
            name: format!("ks_K{k}"),
            statistic: ks.statistic,
            threshold: if k == 1000.0 { 0.05 } else { f64::INFINITY },
            sample_sizes: vec![draws],
            p_value: Some(ks.p_value),
            pass: k != 1000.0 || ks.statistic < 0.05,
        });
    }
    let decreasing = ds.windows(2).all(|w| w[1] < w[0]);
    reports.push(TestReport::exact(
        "ks_increases",
        (!decreasing) as usize,
        vec![draws],
    ));
    Ok(reports)
}

fn nonabelian_limit(seed: u64, scale: Scale) -> Result<Vec<TestReport>, ModelError> {
    let draws = scale.n(3000, 200);
    let n = scale.n(100_000, 10_000);
    let seed = sub(seed, 7);
    let cfg = ModelConfig::new(GroupKind::SU2, 300.0, n, draws, seed);
    let rep = run_experiment(&cfg)?;
    let hol = rep.class_column(0);
    let limit: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            norm_g(&nu_star_sample(
                GroupKind::SU2,
                4096,
                &mut stream_rng(seed ^ 0x5A5A, i as u64),
            ))
        })
        .collect();
    let a = ks_two_sample(&hol, &limit);
    let b = ks_two_sample(&hol, &rep.simpler_class_column(0));
    Ok(vec![
        TestReport {
            name: "ks_vs_limit".into(),
            statistic: a.statistic,
            threshold: 0.1,
            sample_sizes: vec![draws, draws],
            p_value: Some(a.p_value),
            pass: a.statistic < 0.1,
        },
        TestReport {
            name: "ks_vs_ordered_product".into(),
            statistic: b.statistic,
            threshold: 0.05,
            sample_sizes: vec![draws, draws],
            p_value: Some(b.p_value),
            pass: b.statistic < 0.05,
        },
    ])
}

fn braids(seed: u64, scale: Scale) -> Vec<TestReport> {
    let samples = scale.n(100_000, 5_000);
    let count = scale.n(6, 3);
    let mut rng = stream_rng(sub(seed, 8), 0);
    let pool = [
        SlotLaw::Sphere { radius: 0.8 },
        SlotLaw::Stable { sigma: 0.25 },
        SlotLaw::Haar,
        SlotLaw::Sphere { radius: 2.0 },
    ];
    let mut ps = Vec::new();
    for j in 0..count {
        let strands = rng.random_range(2..=6);
        let len = rng.random_range(1..=10);
        let b = BraidWord::random(strands, len, &mut rng);
        let laws: Vec<SlotLaw> = (0..strands)
            .map(|s| pool[(s + j) % pool.len()].clone())
            .collect();
        let r = invariance_test(GroupKind::SU2, &laws, &b, samples, &mut rng)
            .expect("laws match strands");
        ps.push(r.corrected_p_value);
    }
    let p = bonferroni(&ps);
    let biased: Vec<SlotLaw> = (0..3)
        .map(|i| {
            let mut axis = vec![0.0; 3];
            axis[i] = 1.0;
            SlotLaw::Axis { axis, scale: 1.5 }
        })
        .collect();
    let control = invariance_test(
        GroupKind::SU2,
        &biased,
        &BraidWord::new(3, vec![1]).expect("valid braid"),
        samples,
        &mut rng,
    )
    .expect("laws match strands");
    vec![
        TestReport {
            name: "corrected_p".into(),
            statistic: p,
            threshold: 0.01,
            sample_sizes: vec![count, samples],
            p_value: Some(p),
            pass: p >= 0.01,
        },
        TestReport::rejected("control_p", control.corrected_p_value, 0.01, vec![samples]),
    ]
}

fn gap_scaling(seed: u64, scale: Scale) -> Vec<TestReport> {
    let configs = scale.n(2000, 200);
    let mut rng = stream_rng(sub(seed, 9), 0);
    let kind = GroupKind::SU2;
    let shapes: Vec<Vec<AlgebraVec>> = (0..configs)
        .map(|_| {
            let m = rng.random_range(2..=10);
            let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = w.iter().sum();
            w.iter()
                .map(|wi| sphere_sample(kind, wi / total, &mut rng))
                .collect()
        })
        .collect();
    let ratios: Vec<f64> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&t| {
            shapes
                .iter()
                .map(|xs| {
                    let scaled: Vec<AlgebraVec> = xs.iter().map(|x| x.scaled(t)).collect();
                    prod_vs_sum_gap(kind, &scaled) / (t * t)
                })
                .sum::<f64>()
                / configs as f64
        })
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    vec![TestReport::below(
        "relative_spread",
        (hi - lo) / lo,
        0.2,
        vec![configs],
    )]
}

fn stable_machinery(seed: u64, scale: Scale) -> Vec<TestReport> {
    let samples = scale.n(100_000, 10_000);
    let mut rng = stream_rng(sub(seed, 10), 0);
    let mut reports = Vec::new();
    for (d, kind) in [(1, GroupKind::Torus(1)), (3, GroupKind::SU2)] {
        let params = StableParams::new(d, sigma_for_group(d));
        let radii: Vec<f64> = (0..samples)
            .map(|_| params.sample(&mut rng).norm())
            .collect();
        let ks = ks_one_sample(&radii, |r| params.radial_cdf(r));
        reports.push(TestReport::below(
            format!("radial_ks_d{d}"),
            ks.statistic,
            0.01,
            vec![samples],
        ));
        let tr = RadialTransport::new(d);
        let radii: Vec<f64> = (0..samples)
            .map(|_| tr.pushforward_sample(kind, &mut rng).norm())
            .collect();
        let ks = ks_one_sample(&radii, |r| crate::stable::radial_cdf(d, tr.sigma, r));
        reports.push(TestReport::below(
            format!("transport_ks_d{d}"),
            ks.statistic,
            0.02,
            vec![samples],
        ));
        let dev = tr.max_deviation(1e3, 2000);
        reports.push(TestReport::below(
            format!("max_psi_deviation_d{d}"),
            dev,
            f64::INFINITY,
            vec![2000],
        ));
    }
    reports
}

fn diffeo(seed: u64, scale: Scale) -> Result<Vec<TestReport>, ModelError> {
    let draws = scale.n(10_000, 1000);
    let seed = sub(seed, 11);
    let lp =
        close_loop(&sample_brownian(10_000, &mut stream_rng(seed, u64::MAX))).expect("open path");
    let mut cfg = ModelConfig::new(GroupKind::Torus(1), 100.0, 10_000, 1, seed);
    cfg.r = 0.5;
    let shear = diffeo_check(&cfg, PlaneMap::Shear { c: 0.7 }, &lp, draws)?;
    let dilate = diffeo_check(&cfg, PlaneMap::Scale { s: 2.0 }, &lp, draws)?;
    Ok(vec![
        TestReport {
            name: "shear_p".into(),
            statistic: shear.corrected_p_value,
            threshold: 0.01,
            sample_sizes: vec![draws],
            p_value: Some(shear.corrected_p_value),
            pass: !shear.rejected(0.01),
        },
        TestReport::rejected("scale_p", dilate.corrected_p_value, 0.01, vec![draws]),
    ])
}

fn spacing(seed: u64, scale: Scale) -> Vec<TestReport> {
    let draws = scale.n(100_000, 2000);
    let seed = sub(seed, 12);
    let p100 = small_spacing_frequency(100.0, 1.0, draws, seed);
    let p1000 = small_spacing_frequency(1000.0, 1.0, draws, seed ^ 1);
    vec![
        TestReport {
            name: "frequency_K1000".into(),
            statistic: p1000,
            threshold: 0.1,
            sample_sizes: vec![draws],
            p_value: None,
            pass: p1000 <= 0.1,
        },
        TestReport::exact(
            "not_decreasing",
            (p1000 >= p100) as usize,
            vec![draws, draws],
        ),
    ]
}
