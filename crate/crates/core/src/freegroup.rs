//! Free-group words over a totally ordered alphabet of puncture ids.
//!
//! Words are kept freely reduced at all times. The alphabet order is the
//! numeric order of the ids, which the puncture sets make coincide with the
//! order by distance to the origin.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("cannot parse token {0:?}; expected x<id> or x<id>^<exponent>")]
    BadToken(String),
    #[error("block split needs at least {blocks} positive entries, got {len}")]
    BlockSplitInfeasible { blocks: usize, len: usize },
}

/// A generator `x_id` or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub id: u32,
    /// `+1` or `-1`.
    pub sign: i8,
}

impl Letter {
    pub const fn pos(id: u32) -> Self {
        Letter { id, sign: 1 }
    }

    pub const fn neg(id: u32) -> Self {
        Letter { id, sign: -1 }
    }

    pub fn new(id: u32, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1, "letter sign must be +1 or -1");
        Letter { id, sign }
    }

    pub fn inverse(self) -> Self {
        Letter {
            id: self.id,
            sign: -self.sign,
        }
    }

    #[inline]
    fn cancels(self, other: Letter) -> bool {
        self.id == other.id && self.sign == -other.sign
    }
}

/// A freely reduced word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word::default()
    }

    pub fn generator(id: u32) -> Self {
        Word {
            letters: vec![Letter::pos(id)],
        }
    }

    /// `x_id^exp`.
    pub fn power(id: u32, exp: i64) -> Self {
        let l = if exp >= 0 {
            Letter::pos(id)
        } else {
            Letter::neg(id)
        };
        Word {
            letters: vec![l; exp.unsigned_abs() as usize],
        }
    }

    /// Reduces an arbitrary letter sequence by stack cancellation.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            match out.last() {
                Some(&top) if top.cancels(l) => {
                    out.pop();
                }
                _ => out.push(l),
            }
        }
        Word { letters: out }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Reduced product `self * other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut k = 0;
        let (a, b) = (&self.letters, &other.letters);
        while k < a.len() && k < b.len() && a[a.len() - 1 - k].cancels(b[k]) {
            k += 1;
        }
        let mut letters = Vec::with_capacity(a.len() + b.len() - 2 * k);
        letters.extend_from_slice(&a[..a.len() - k]);
        letters.extend_from_slice(&b[k..]);
        Word { letters }
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// `c^-1 * self * c`.
    pub fn conjugate_by(&self, c: &Word) -> Word {
        c.inverse().concat(self).concat(c)
    }

    /// Re-reduces the word; a no-op on values built through this API.
    pub fn reduce(&self) -> Word {
        Word::from_letters(self.letters.iter().copied())
    }

    pub fn run_form(&self) -> RunForm {
        let mut runs: Vec<(u32, i64)> = Vec::new();
        for l in &self.letters {
            match runs.last_mut() {
                Some((id, e)) if *id == l.id => *e += l.sign as i64,
                _ => runs.push((l.id, l.sign as i64)),
            }
        }
        RunForm { runs }
    }

    /// Signed number of occurrences of `x`.
    pub fn abelian_exponent(&self, x: u32) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.id == x)
            .map(|l| l.sign as i64)
            .sum()
    }

    /// Signed occurrence counts of every letter.
    pub fn abelianization(&self) -> HashMap<u32, i64> {
        let mut m = HashMap::new();
        for l in &self.letters {
            *m.entry(l.id).or_insert(0) += l.sign as i64;
        }
        m
    }

    /// Deletes every letter with id greater than `x` (or `>= x` when
    /// `strict`) and reduces.
    pub fn project_leq(&self, x: u32, strict: bool) -> Word {
        Word::from_letters(self.letters.iter().copied().filter(|l| {
            if strict {
                l.id < x
            } else {
                l.id <= x
            }
        }))
    }

    /// Deletes every occurrence of `x` and reduces.
    pub fn delete(&self, x: u32) -> Word {
        Word::from_letters(self.letters.iter().copied().filter(|l| l.id != x))
    }

    /// Exponents of the maximal runs of `x`, in order.
    pub fn exponent_seq(&self, x: u32) -> ExponentSeq {
        ExponentSeq(
            self.run_form()
                .runs
                .iter()
                .filter(|(id, _)| *id == x)
                .map(|&(_, e)| e)
                .collect(),
        )
    }

    /// Sorted distinct ids occurring in the word.
    pub fn alphabet(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.letters.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if l.sign > 0 {
                write!(f, "x{}", l.id)?;
            } else {
                write!(f, "x{}^-1", l.id)?;
            }
        }
        Ok(())
    }
}

fn parse_token(tok: &str) -> Result<(u32, i64), WordError> {
    let bad = || WordError::BadToken(tok.to_string());
    let body = tok.strip_prefix('x').ok_or_else(bad)?;
    let (id, exp) = match body.split_once('^') {
        Some((id, exp)) => (
            id,
            exp.trim_start_matches('{')
                .trim_end_matches('}')
                .parse::<i64>()
                .map_err(|_| bad())?,
        ),
        None => (body, 1),
    };
    let id = id.parse::<u32>().map_err(|_| bad())?;
    Ok((id, exp))
}

/// Parses space-separated tokens `x<id>`, `x<id>^-1` or any `x<id>^<exp>`
/// and reduces the result. The empty string is the identity.
impl FromStr for Word {
    type Err = WordError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            if tok == "1" || tok == "e" {
                continue;
            }
            let (id, exp) = parse_token(tok)?;
            let l = if exp >= 0 {
                Letter::pos(id)
            } else {
                Letter::neg(id)
            };
            letters.extend(std::iter::repeat_n(l, exp.unsigned_abs() as usize));
        }
        Ok(Word::from_letters(letters))
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = WordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Maximal-run decomposition `prod a_i^{alpha_i}` with `a_i != a_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunForm {
    pub runs: Vec<(u32, i64)>,
}

impl RunForm {
    /// Number of runs.
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn to_word(&self) -> Word {
        Word::from_letters(self.runs.iter().flat_map(|&(id, e)| {
            let l = if e >= 0 {
                Letter::pos(id)
            } else {
                Letter::neg(id)
            };
            std::iter::repeat_n(l, e.unsigned_abs() as usize)
        }))
    }
}

impl fmt::Display for RunForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (id, e)) in self.runs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "x{id}^{e}")?;
        }
        Ok(())
    }
}

impl FromStr for RunForm {
    type Err = WordError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut runs: Vec<(u32, i64)> = Vec::new();
        for tok in s.split_whitespace() {
            let (id, e) = parse_token(tok)?;
            if e == 0 {
                continue;
            }
            match runs.last_mut() {
                Some((last, acc)) if *last == id => *acc += e,
                _ => runs.push((id, e)),
            }
            if runs.last().is_some_and(|r| r.1 == 0) {
                runs.pop();
            }
        }
        Ok(RunForm { runs })
    }
}

/// Finite exponent sequence, the nonzero prefix of an ultimately vanishing
/// sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExponentSeq(pub Vec<i64>);

impl ExponentSeq {
    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn l1_norm(&self) -> u64 {
        self.0.iter().map(|e| e.unsigned_abs()).sum()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries reordered by decreasing absolute value; ties put the larger
    /// signed value first.
    pub fn sorted_by_magnitude(&self) -> Vec<i64> {
        let mut b = self.0.clone();
        b.sort_by(|x, y| y.unsigned_abs().cmp(&x.unsigned_abs()).then(y.cmp(x)));
        b
    }

    /// Sum of all but the `i - 1` largest absolute values.
    pub fn tail_sum(&self, i: usize) -> u64 {
        assert!(i >= 1, "tail index starts at 1");
        self.sorted_by_magnitude()
            .iter()
            .skip(i - 1)
            .map(|e| e.unsigned_abs())
            .sum()
    }
}

/// Factor of `g` on the generator `x` in the iterated semidirect
/// decomposition, computed as `pi^{<x}(g)^{-1} pi^{<=x}(g)`.
pub fn semidirect_component(g: &Word, x: u32) -> Word {
    g.project_leq(x, true)
        .inverse()
        .concat(&g.project_leq(x, false))
}

/// All factors `(x, c_x(phi_x(g)))` for the letters of `g`, in increasing
/// order of `x`. Their ordered product is `g`.
pub fn semidirect_decomposition(g: &Word) -> Vec<(u32, Word)> {
    g.alphabet()
        .into_iter()
        .map(|x| (x, semidirect_component(g, x)))
        .collect()
}

/// `u ≼ v`: `u` arises from `v` by repeatedly replacing two adjacent entries
/// with their sum. Zero entries are dropped from both sides first.
///
/// Exact dynamic programming over the block partitions of `v`.
pub fn refines(u: &ExponentSeq, v: &ExponentSeq) -> bool {
    let u: Vec<i64> = u.0.iter().copied().filter(|&e| e != 0).collect();
    let v: Vec<i64> = v.0.iter().copied().filter(|&e| e != 0).collect();
    let total_u: i64 = u.iter().sum();
    let total_v: i64 = v.iter().sum();
    if total_u != total_v {
        return false;
    }
    if u.is_empty() {
        return true;
    }
    let (k, m) = (u.len(), v.len());
    if k > m {
        return false;
    }
    let mut prefix = vec![0i64; m + 1];
    for j in 0..m {
        prefix[j + 1] = prefix[j] + v[j];
    }
    // reach[i][j]: u[..i] is obtained by merging v[..j] into blocks
    let mut reach = vec![vec![false; m + 1]; k + 1];
    reach[0][0] = true;
    for i in 1..=k {
        for j in i..=m {
            reach[i][j] =
                (i - 1..j).any(|jp| reach[i - 1][jp] && prefix[j] - prefix[jp] == u[i - 1]);
        }
    }
    // any trailing part of v sums to zero (totals agree) and merges into the
    // last block
    (k..=m).any(|j| reach[k][j])
}

/// `(alpha_x(g), beta(x, g), S^(i)(x, g))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentStats {
    pub alpha: ExponentSeq,
    pub beta: Vec<i64>,
    pub tail: u64,
}

pub fn exponent_stats(g: &Word, x: u32, i: usize) -> ExponentStats {
    let alpha = g.exponent_seq(x);
    let beta = alpha.sorted_by_magnitude();
    let tail = alpha.tail_sum(i);
    ExponentStats { alpha, beta, tail }
}

/// `alpha_x(pi^{<=x}(g))` for every letter `x` of `g`.
///
/// Letters are deleted from the largest id down on a linked list, with
/// cancellations propagated from each new junction, so the whole sweep runs
/// in time linear in `|g|` plus the alphabet sort.
pub fn projected_exponents(g: &Word) -> Vec<(u32, ExponentSeq)> {
    let letters = g.letters();
    let n = letters.len();
    if n == 0 {
        return Vec::new();
    }
    const NIL: usize = usize::MAX;
    let mut prev: Vec<usize> = (0..n).map(|i| if i == 0 { NIL } else { i - 1 }).collect();
    let mut next: Vec<usize> = (0..n)
        .map(|i| if i + 1 == n { NIL } else { i + 1 })
        .collect();
    let mut alive = vec![true; n];

    let mut occurrences: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, l) in letters.iter().enumerate() {
        occurrences.entry(l.id).or_default().push(i);
    }
    let mut ids: Vec<u32> = occurrences.keys().copied().collect();
    ids.sort_unstable_by(|a, b| b.cmp(a));

    let unlink = |i: usize, prev: &mut Vec<usize>, next: &mut Vec<usize>, alive: &mut Vec<bool>| {
        let (p, q) = (prev[i], next[i]);
        if p != NIL {
            next[p] = q;
        }
        if q != NIL {
            prev[q] = p;
        }
        alive[i] = false;
    };

    let mut out = Vec::with_capacity(ids.len());
    let mut pending: Vec<usize> = Vec::new();
    for x in ids {
        let occ = &occurrences[&x];
        let mut runs: Vec<i64> = Vec::new();
        let mut last: usize = NIL;
        for &i in occ.iter().filter(|&&i| alive[i]) {
            let s = letters[i].sign as i64;
            if last != NIL && next[last] == i {
                *runs.last_mut().unwrap() += s;
            } else {
                runs.push(s);
            }
            last = i;
        }
        out.push((x, ExponentSeq(runs)));

        pending.clear();
        for &i in occ.iter() {
            if !alive[i] {
                continue;
            }
            let p = prev[i];
            unlink(i, &mut prev, &mut next, &mut alive);
            if p != NIL {
                pending.push(p);
            }
        }
        while let Some(a) = pending.pop() {
            if !alive[a] {
                continue;
            }
            let b = next[a];
            if b == NIL || !letters[a].cancels(letters[b]) {
                continue;
            }
            let before = prev[a];
            unlink(a, &mut prev, &mut next, &mut alive);
            unlink(b, &mut prev, &mut next, &mut alive);
            if before != NIL {
                pending.push(before);
            }
        }
    }
    out.reverse();
    out
}

/// `|g|_2 = sqrt(sum_x S^(1)(x, pi^{<=x}(g))^2)`.
pub fn word_norm2(g: &Word) -> f64 {
    projected_exponents(g)
        .iter()
        .map(|(_, a)| (a.l1_norm() as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Split points `0 = j_1 < ... < j_{i+1} = len(u)` such that every block sum
/// is at least `floor(S^(i) / i)`, where `S^(i)` drops the `i - 1` largest
/// entries. Greedy: each block closes as soon as it reaches the target.
pub fn block_split(u: &[f64], i: usize) -> Result<Vec<usize>, WordError> {
    assert!(i >= 1, "block count starts at 1");
    if u.len() < i {
        return Err(WordError::BlockSplitInfeasible {
            blocks: i,
            len: u.len(),
        });
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let tail: f64 = sorted[i - 1..].iter().sum();
    let target = (tail / i as f64).floor();
    let mut cuts = vec![0usize];
    let mut acc = 0.0;
    for (k, &x) in u.iter().enumerate() {
        if cuts.len() == i {
            break;
        }
        acc += x;
        if acc >= target {
            cuts.push(k + 1);
            acc = 0.0;
        }
    }
    cuts.truncate(i);
    cuts.push(u.len());
    debug_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(cuts
        .windows(2)
        .all(|w| u[w[0]..w[1]].iter().sum::<f64>() >= target));
    Ok(cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn seq(v: &[i64]) -> ExponentSeq {
        ExponentSeq(v.to_vec())
    }

    #[test]
    fn word_arithmetic() {
        assert!(w("x1").concat(&w("x1^-1")).is_empty());
        assert_eq!(w("x1 x2^-1").inverse(), w("x2 x1^-1"));
        assert_eq!(w("x1 x2").concat(&w("x2^-1 x3")), w("x1 x3"));
        assert_eq!(w("x1 x2 x2^-1 x3"), w("x1 x3"));
        let g = w("x3 x2 x1 x4 x2 x4^-1");
        assert_eq!(g.reduce(), g);
        assert_eq!(g.to_string(), "x3 x2 x1 x4 x2 x4^-1");
    }

    #[test]
    fn run_forms() {
        assert!(Word::identity().run_form().is_empty());
        let rf = w("x1 x1 x2^-1 x2^-1 x2^-1").run_form();
        assert_eq!(rf.runs, vec![(1, 2), (2, -3)]);
        assert_eq!(rf.len(), 2);
        assert_eq!(rf.to_string(), "x1^2 x2^-3");
        assert_eq!("x1^2 x2^-3".parse::<RunForm>().unwrap(), rf);
        let rf = w("x3 x2 x1 x4 x2 x4^-1").run_form();
        assert_eq!(
            rf.runs,
            vec![(3, 1), (2, 1), (1, 1), (4, 1), (2, 1), (4, -1)]
        );
    }

    #[test]
    fn projections() {
        let g = w("x3 x2 x1 x4 x2 x4^-1");
        assert_eq!(g.project_leq(1, false), w("x1"));
        assert_eq!(g.project_leq(3, false), w("x3 x2 x1 x2"));
        assert!(g.project_leq(1, true).is_empty());
    }

    #[test]
    fn semidirect_example() {
        let g = w("x3 x2 x1 x4 x2 x4^-1");
        assert_eq!(semidirect_component(&g, 1), w("x1"));
        assert_eq!(semidirect_component(&g, 2), w("x1^-1 x2 x1 x2"));
        assert_eq!(
            semidirect_component(&g, 3),
            w("x2^-1 x1^-1 x2^-1 x3 x2 x1 x2")
        );
        assert_eq!(semidirect_component(&g, 4), w("x2^-1 x4 x2 x4^-1"));
        assert!(semidirect_component(&g, 7).is_empty());
        let prod = semidirect_decomposition(&g)
            .iter()
            .fold(Word::identity(), |acc, (_, c)| acc.concat(c));
        assert_eq!(prod, g);
    }

    #[test]
    fn refinement_examples() {
        assert!(refines(&seq(&[3]), &seq(&[1, 2])));
        assert!(refines(&seq(&[1, 2]), &seq(&[1, 2])));
        assert!(!refines(&seq(&[2, 1]), &seq(&[1, 2])));
        assert!(refines(&seq(&[]), &seq(&[1, -1])));
        assert!(!refines(&seq(&[]), &seq(&[1])));
        assert!(refines(&seq(&[2]), &seq(&[1, -1, 2])));
        assert!(refines(&seq(&[1, 2]), &seq(&[1, 3, -3, 2])));
    }

    /// All sequences reachable from `v` by merges, zero entries dropped.
    fn merge_closure(v: &[i64]) -> Vec<Vec<i64>> {
        let start: Vec<i64> = v.iter().copied().filter(|&e| e != 0).collect();
        let mut seen = vec![start.clone()];
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            // merging with the implicit trailing zero leaves s unchanged
            for i in 0..s.len().saturating_sub(1) {
                let mut t = s[..i].to_vec();
                t.push(s[i] + s[i + 1]);
                t.extend_from_slice(&s[i + 2..]);
                t.retain(|&e| e != 0);
                if !seen.contains(&t) {
                    seen.push(t.clone());
                    stack.push(t);
                }
            }
        }
        seen
    }

    #[test]
    fn refinement_matches_enumeration() {
        let vals = [-2i64, -1, 1, 2];
        let mut vs: Vec<Vec<i64>> = vec![vec![]];
        for len in 1..=4 {
            let mut next = Vec::new();
            for v in vs.iter().filter(|v| v.len() == len - 1) {
                for &x in &vals {
                    let mut t = v.clone();
                    t.push(x);
                    next.push(t);
                }
            }
            vs.extend(next);
        }
        for v in &vs {
            let closure = merge_closure(v);
            for u in &vs {
                let expected = closure.contains(u);
                assert_eq!(refines(&seq(u), &seq(v)), expected, "u={u:?} v={v:?}");
            }
        }
    }

    #[test]
    fn exponent_stats_examples() {
        let g = w("x1 x2^3 x1^-2 x2");
        let st = exponent_stats(&g, 1, 2);
        assert_eq!(st.alpha, seq(&[1, -2]));
        assert_eq!(st.beta, vec![-2, 1]);
        assert_eq!(st.tail, 1);
        assert_eq!(exponent_stats(&g, 1, 3).tail, 0);
        assert_eq!(exponent_stats(&Word::power(5, 7), 5, 1).tail, 7);
        // ties: larger signed value first
        assert_eq!(seq(&[-2, 2, 1]).sorted_by_magnitude(), vec![2, -2, 1]);
    }

    #[test]
    fn norm2_examples() {
        assert_eq!(word_norm2(&w("x1")), 1.0);
        assert_eq!(word_norm2(&w("x3 x2 x1 x4 x2 x4^-1")), 10f64.sqrt());
        assert_eq!(word_norm2(&Word::identity()), 0.0);
    }

    #[test]
    fn abelian_exponents() {
        assert_eq!(w("x1 x2 x1^-1").abelian_exponent(1), 0);
        assert_eq!(w("x1^3").abelian_exponent(1), 3);
        assert_eq!(w("x3 x2 x1 x4 x2 x4^-1").abelian_exponent(2), 2);
    }

    fn all_splits(len: usize, blocks: usize) -> Vec<Vec<usize>> {
        fn rec(
            start: usize,
            len: usize,
            left: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if left == 1 {
                let mut c = cur.clone();
                c.push(len);
                out.push(c);
                return;
            }
            for cut in start + 1..len {
                cur.push(cut);
                rec(cut, len, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, len, blocks, &mut vec![0], &mut out);
        out
    }

    #[test]
    fn block_split_examples() {
        let check = |u: &[f64], i: usize, target: f64| {
            let cuts = block_split(u, i).unwrap();
            assert_eq!(cuts.len(), i + 1);
            assert_eq!(cuts[0], 0);
            assert_eq!(*cuts.last().unwrap(), u.len());
            for wdw in cuts.windows(2) {
                assert!(u[wdw[0]..wdw[1]].iter().sum::<f64>() >= target, "{cuts:?}");
            }
            // some split must exist
            assert!(all_splits(u.len(), i).iter().any(|c| c
                .windows(2)
                .all(|w| u[w[0]..w[1]].iter().sum::<f64>() >= target)));
        };
        check(&[5., 1., 1., 1.], 2, 1.0);
        check(&[1.], 1, 1.0);
        check(&[2., 2., 2., 2.], 2, 3.0);
        assert_eq!(block_split(&[2., 2., 2., 2.], 2).unwrap(), vec![0, 2, 4]);
        assert!(block_split(&[1.], 2).is_err());
    }

    fn arb_word(max_len: usize, alphabet: u32) -> impl Strategy<Value = Word> {
        prop::collection::vec((1..=alphabet, prop::bool::ANY), 0..max_len).prop_map(|v| {
            Word::from_letters(
                v.into_iter()
                    .map(|(id, s)| Letter::new(id, if s { 1 } else { -1 })),
            )
        })
    }

    proptest! {
        #[test]
        fn projected_exponents_match_naive(g in arb_word(80, 6)) {
            for (x, alpha) in projected_exponents(&g) {
                prop_assert_eq!(alpha, g.project_leq(x, false).exponent_seq(x));
            }
            prop_assert_eq!(projected_exponents(&g).len(), g.alphabet().len());
        }

        #[test]
        fn reduction_is_idempotent_and_inverse_cancels(g in arb_word(60, 5), h in arb_word(60, 5)) {
            prop_assert_eq!(g.reduce(), g.clone());
            prop_assert!(g.concat(&g.inverse()).is_empty());
            prop_assert_eq!(g.concat(&h).inverse(), h.inverse().concat(&g.inverse()));
            prop_assert_eq!(g.to_string().parse::<Word>().unwrap(), g.clone());
            prop_assert_eq!(g.run_form().to_word(), g);
        }

        #[test]
        fn l1_monotone_under_merges(v in prop::collection::vec(-5i64..=5, 0..8), merges in prop::collection::vec(0usize..8, 0..6)) {
            let mut u: Vec<i64> = v.iter().copied().filter(|&e| e != 0).collect();
            for m in merges {
                if u.len() >= 2 {
                    let i = m % (u.len() - 1);
                    let s = u[i] + u[i + 1];
                    u.splice(i..i + 2, [s]);
                    u.retain(|&e| e != 0);
                }
            }
            prop_assert!(refines(&ExponentSeq(u.clone()), &ExponentSeq(v.clone())));
            prop_assert!(ExponentSeq(u).l1_norm() <= ExponentSeq(v).l1_norm());
        }

        #[test]
        fn tail_sums_decrease(v in prop::collection::vec(-6i64..=6, 0..10)) {
            let a = ExponentSeq(v.into_iter().filter(|&e| e != 0).collect());
            prop_assert_eq!(a.tail_sum(1), a.l1_norm());
            for i in 1..=a.len() + 1 {
                prop_assert!(a.tail_sum(i + 1) <= a.tail_sum(i));
            }
        }

        #[test]
        fn block_split_meets_target(u in prop::collection::vec(0.1f64..20.0, 1..12), i in 1usize..6) {
            prop_assume!(u.len() >= i);
            let cuts = block_split(&u, i).unwrap();
            let mut sorted = u.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let target = (sorted[i - 1..].iter().sum::<f64>() / i as f64).floor();
            prop_assert_eq!(cuts.len(), i + 1);
            for w in cuts.windows(2) {
                prop_assert!(w[0] < w[1]);
                prop_assert!(u[w[0]..w[1]].iter().sum::<f64>() >= target);
            }
        }
    }
}
