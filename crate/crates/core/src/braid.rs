//! Artin braid group acting on tuples of group elements.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liegroup::{
    class_coordinate, exp_g, haar_sample, sphere_sample, AlgebraVec, GroupElem, GroupKind,
};
use crate::stable::StableParams;
use crate::stats::{bonferroni, ks_two_sample, KsResult};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BraidError {
    #[error("generator {gen} out of range for {strands} strands")]
    BadGenerator { gen: i32, strands: usize },
    #[error("tuple has length {got}, braid has {strands} strands")]
    LengthMismatch { got: usize, strands: usize },
}

/// Word in the generators `b_i^{+-1}`, written as signed indices `+-i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidWord {
    pub strands: usize,
    pub word: Vec<i32>,
}

impl BraidWord {
    pub fn new(strands: usize, word: Vec<i32>) -> Result<Self, BraidError> {
        for &g in &word {
            if g == 0 || g.unsigned_abs() as usize >= strands {
                return Err(BraidError::BadGenerator { gen: g, strands });
            }
        }
        Ok(BraidWord { strands, word })
    }

    pub fn identity(strands: usize) -> Self {
        BraidWord {
            strands,
            word: Vec::new(),
        }
    }

    /// Parses a JSON list of signed generator indices.
    pub fn from_json(strands: usize, json: &str) -> Result<Self, String> {
        let word: Vec<i32> = serde_json::from_str(json).map_err(|e| e.to_string())?;
        BraidWord::new(strands, word).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.word).expect("integer list serializes")
    }

    pub fn concat(&self, other: &BraidWord) -> BraidWord {
        assert_eq!(self.strands, other.strands);
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        BraidWord {
            strands: self.strands,
            word,
        }
    }

    pub fn inverse(&self) -> BraidWord {
        BraidWord {
            strands: self.strands,
            word: self.word.iter().rev().map(|g| -g).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(strands: usize, len: usize, rng: &mut R) -> Self {
        assert!(strands >= 2);
        let word = (0..len)
            .map(|_| {
                let i = rng.random_range(1..strands as i32);
                if rng.random::<bool>() {
                    i
                } else {
                    -i
                }
            })
            .collect();
        BraidWord { strands, word }
    }
}

fn apply_generator(gen: i32, g: &mut [GroupElem]) {
    let i = gen.unsigned_abs() as usize - 1;
    let (a, b) = (g[i].clone(), g[i + 1].clone());
    if gen > 0 {
        // (a, b) -> (b, b^-1 a b)
        g[i + 1] = b.inverse().mul(&a).mul(&b).renormalized();
        g[i] = b;
    } else {
        // (a, b) -> (a b a^-1, a)
        g[i] = a.mul(&b).mul(&a.inverse()).renormalized();
        g[i + 1] = a;
    }
}

/// Left action: the rightmost generator acts first.
pub fn act(b: &BraidWord, g: &[GroupElem]) -> Result<Vec<GroupElem>, BraidError> {
    if g.len() != b.strands {
        return Err(BraidError::LengthMismatch {
            got: g.len(),
            strands: b.strands,
        });
    }
    let mut out = g.to_vec();
    for &gen in b.word.iter().rev() {
        apply_generator(gen, &mut out);
    }
    Ok(out)
}

/// Image in the symmetric group, 0-based: `p[j]` is the image of `j`.
/// Composition follows the word, `perm_of(b b') = perm_of(b) o perm_of(b')`.
pub fn perm_of(b: &BraidWord) -> Vec<usize> {
    let mut p: Vec<usize> = (0..b.strands).collect();
    for &gen in b.word.iter().rev() {
        let i = gen.unsigned_abs() as usize - 1;
        for v in p.iter_mut() {
            if *v == i {
                *v = i + 1;
            } else if *v == i + 1 {
                *v = i;
            }
        }
    }
    p
}

pub fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (j, &v) in p.iter().enumerate() {
        inv[v] = j;
    }
    inv
}

/// Law of one slot of the tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SlotLaw {
    Identity,
    /// `exp` of the uniform law on the sphere of the given radius.
    Sphere {
        radius: f64,
    },
    /// `exp` of `nu^sigma`.
    Stable {
        sigma: f64,
    },
    Haar,
    /// `exp(t axis)` with `t` uniform on `[-scale, scale]`; not invariant
    /// under conjugation in a non-abelian group.
    Axis {
        axis: Vec<f64>,
        scale: f64,
    },
}

impl SlotLaw {
    pub fn sample<R: Rng + ?Sized>(&self, kind: GroupKind, rng: &mut R) -> GroupElem {
        match self {
            SlotLaw::Identity => GroupElem::identity(kind),
            SlotLaw::Sphere { radius } => exp_g(kind, &sphere_sample(kind, *radius, rng)),
            SlotLaw::Stable { sigma } => {
                exp_g(kind, &StableParams::new(kind.dim(), *sigma).sample(rng))
            }
            SlotLaw::Haar => haar_sample(kind, rng),
            SlotLaw::Axis { axis, scale } => {
                let t = rng.random_range(-*scale..=*scale);
                exp_g(kind, &AlgebraVec(axis.clone()).scaled(t))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub braid: BraidWord,
    pub samples: usize,
    /// `(label, KS result)` for every compared observable.
    pub statistics: Vec<(String, KsResult)>,
    pub min_p_value: f64,
    /// Bonferroni-corrected p-value over the observables of this braid.
    pub corrected_p_value: f64,
}

impl InvarianceReport {
    pub fn rejected(&self, alpha: f64) -> bool {
        self.corrected_p_value < alpha
    }
}

/// Observables are rounded so that values equal up to round-off tie exactly.
fn quantize(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Compares `b . X` with the permuted tuple `(X_{s^-1(1)}, ..., X_{s^-1(n)})`,
/// `s = perm_of(b)`, on the same draws. Observables: class coordinates of
/// every slot and of every product of two slots `Y_j Y_k`, `j < k`.
pub fn invariance_test<R: Rng + ?Sized>(
    kind: GroupKind,
    laws: &[SlotLaw],
    b: &BraidWord,
    samples: usize,
    rng: &mut R,
) -> Result<InvarianceReport, BraidError> {
    let n = b.strands;
    if laws.len() != n {
        return Err(BraidError::LengthMismatch {
            got: laws.len(),
            strands: n,
        });
    }
    let inv = invert_perm(&perm_of(b));
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            pairs.push((j, k));
        }
    }
    let cd = kind.class_dim();
    let n_obs = (n + pairs.len()) * cd;
    let mut lhs: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n_obs];
    let mut rhs: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n_obs];
    for _ in 0..samples {
        let x: Vec<GroupElem> = laws.iter().map(|l| l.sample(kind, rng)).collect();
        let y = act(b, &x)?;
        let xp: Vec<&GroupElem> = inv.iter().map(|&i| &x[i]).collect();
        let mut o = 0;
        let mut push = |l: &GroupElem, r: &GroupElem, o: &mut usize| {
            for (a, c) in class_coordinate(l).into_iter().zip(class_coordinate(r)) {
                lhs[*o].push(quantize(a));
                rhs[*o].push(quantize(c));
                *o += 1;
            }
        };
        for j in 0..n {
            push(&y[j], xp[j], &mut o);
        }
        for &(j, k) in &pairs {
            push(&y[j].mul(&y[k]), &xp[j].mul(xp[k]), &mut o);
        }
    }
    let mut labels = Vec::with_capacity(n_obs);
    for j in 0..n {
        for c in 0..cd {
            labels.push(format!("slot{}[{c}]", j + 1));
        }
    }
    for &(j, k) in &pairs {
        for c in 0..cd {
            labels.push(format!("slot{}*slot{}[{c}]", j + 1, k + 1));
        }
    }
    let statistics: Vec<(String, KsResult)> = labels
        .into_iter()
        .zip(lhs.iter().zip(&rhs))
        .map(|(l, (a, c))| (l, ks_two_sample(a, c)))
        .collect();
    let ps: Vec<f64> = statistics.iter().map(|(_, r)| r.p_value).collect();
    Ok(InvarianceReport {
        braid: b.clone(),
        samples,
        min_p_value: ps.iter().copied().fold(1.0, f64::min),
        corrected_p_value: bonferroni(&ps),
        statistics,
    })
}
