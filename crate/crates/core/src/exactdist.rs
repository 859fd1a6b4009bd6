//! Exact distribution of the singular-channel statistic `S_n = sum_i -ln alpha_{Y_i}(Q)`.
//!
//! For a singular channel the per-letter statistic takes one value per output
//! letter and only finitely many distinct values overall. Grouping outputs by
//! value gives a [`ValueClassDecomposition`]; the law of `S_n` is then a sum over
//! class-count vectors (types), each weighted by a multinomial coefficient.
//! That sum is evaluated exactly here, both for the tail `P(S_n <= r)` and for
//! the tilted sum `E[1{S_n <= r} e^{-(r - S_n)}]`.
//!
//! When the letters are independent but not identically distributed (a
//! constant-composition codeword), enumeration runs over the product of the
//! per-input-letter groups.

use crate::channel::{Channel, InputDist};
use crate::error::{Error, Result};
use crate::numeric::{composition_count, for_each_composition, CompensatedSum, LnFactorial};
use rayon::prelude::*;
use serde::Serialize;

/// Values closer than this are merged into one class.
pub const MERGE_TOL: f64 = 1e-12;
/// Per-letter absolute slack applied to threshold comparisons.
pub const THRESHOLD_SLACK: f64 = 1e-12;
/// Default cap on the number of composition vectors visited.
pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

/// Which per-letter law the class probabilities are taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// The output distribution `q_Q`.
    Output,
    /// The channel row `W(.|x)`.
    Row(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueClass {
    /// `-ln alpha` shared by every output letter of the class.
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueClassDecomposition {
    pub classes: Vec<ValueClass>,
    pub measure: Measure,
}

impl ValueClassDecomposition {
    /// Mean, variance and centered third absolute moment of one letter.
    pub fn moments(&self) -> (f64, f64, f64) {
        let mean: f64 = self.classes.iter().map(|c| c.prob * c.value).sum();
        let var = self.classes.iter().map(|c| c.prob * (c.value - mean).powi(2)).sum();
        let m3 = self.classes.iter().map(|c| c.prob * (c.value - mean).abs().powi(3)).sum();
        (mean, var, m3)
    }

    /// Smallest attainable per-letter value.
    pub fn min_value(&self) -> f64 {
        self.classes.first().map_or(0.0, |c| c.value)
    }
}

/// Per-letter law of `-ln alpha_Y(Q)` under `measure`.
pub fn decompose(ch: &Channel, q: &InputDist, measure: Measure) -> Result<ValueClassDecomposition> {
    ch.require_dist(q)?;
    let probs: Vec<f64> = match measure {
        Measure::Output => {
            if !ch.is_singular_wrt(q) {
                return Err(Error::NotSingular);
            }
            ch.output_dist(q)
        }
        Measure::Row(x) => {
            if x >= ch.input_size() {
                return Err(Error::InvalidArgument(format!("input {x} out of range")));
            }
            let mut w = q.as_slice().to_vec();
            w[x] += 1.0;
            if !ch.is_singular_wrt(&InputDist::from_weights(&w)?) {
                return Err(Error::NotSingular);
            }
            ch.row(x).to_vec()
        }
    };
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for (y, &m) in probs.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        let a = ch.alpha(q, y);
        if a <= 0.0 {
            let input = match measure {
                Measure::Row(x) => x,
                Measure::Output => unreachable!("q_Q(y) > 0 implies alpha_y(Q) > 0"),
            };
            return Err(Error::DominationFailure { input, output: y });
        }
        raw.push((-a.ln() + 0.0, m));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut classes: Vec<(f64, CompensatedSum)> = Vec::new();
    for (v, m) in raw {
        match classes.last_mut() {
            Some((cv, acc)) if (v - *cv).abs() < MERGE_TOL => acc.add(m),
            _ => {
                let mut acc = CompensatedSum::new();
                acc.add(m);
                classes.push((v, acc));
            }
        }
    }
    Ok(ValueClassDecomposition {
        classes: classes.into_iter().map(|(value, acc)| ValueClass { value, prob: acc.value() }).collect(),
        measure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailResult {
    /// `P(S_n <= threshold)`.
    pub cdf_at_threshold: f64,
    /// `E[1{S_n <= threshold} e^{-(threshold - S_n)}]`.
    pub tilted_sum: f64,
    pub threshold: f64,
    pub n: usize,
    /// Number of composition vectors visited.
    pub enumeration_size: u64,
}

/// One block of independent letters: `count` letters with law `dec`.
#[derive(Debug, Clone, Copy)]
pub struct LetterGroup<'a> {
    pub dec: &'a ValueClassDecomposition,
    pub count: usize,
}

/// Exact tail and tilted sum for `S_n` made of the given independent groups.
pub fn tail(groups: &[LetterGroup<'_>], threshold: f64, budget: u64) -> Result<TailResult> {
    let groups: Vec<LetterGroup<'_>> = groups.iter().copied().filter(|g| g.count > 0).collect();
    let n: usize = groups.iter().map(|g| g.count).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    let mut required: u128 = 1;
    for g in &groups {
        required = required.saturating_mul(composition_count(g.count, g.dec.classes.len()));
    }
    if required > budget as u128 {
        return Err(Error::EnumerationBudgetExceeded { required, budget });
    }
    let max_count = groups.iter().map(|g| g.count).max().unwrap_or(0);
    let lf = LnFactorial::new(max_count);

    // Per group: every class-count vector as (log-probability, statistic value).
    let lists: Vec<Vec<(f64, f64)>> = groups
        .iter()
        .map(|g| {
            let logs: Vec<f64> = g.dec.classes.iter().map(|c| c.prob.ln()).collect();
            let mut list = Vec::with_capacity(composition_count(g.count, logs.len()) as usize);
            for_each_composition(g.count, logs.len(), |k| {
                let mut lp = lf.ln_multinomial(k);
                let mut v = 0.0;
                for (j, &kj) in k.iter().enumerate() {
                    if kj > 0 {
                        lp += kj as f64 * logs[j];
                        v += kj as f64 * g.dec.classes[j].value;
                    }
                }
                list.push((lp, v));
            });
            list
        })
        .collect();

    let limit = threshold + THRESHOLD_SLACK * n as f64;
    const CHUNK: usize = 256;
    let partials: Vec<(CompensatedSum, CompensatedSum)> = lists[0]
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut cdf = CompensatedSum::new();
            let mut tilted = CompensatedSum::new();
            for &(lp, v) in chunk {
                accumulate(&lists[1..], lp, v, limit, threshold, &mut cdf, &mut tilted);
            }
            (cdf, tilted)
        })
        .collect();
    let mut cdf = CompensatedSum::new();
    let mut tilted = CompensatedSum::new();
    for (c, t) in partials {
        cdf.add(c.value());
        tilted.add(t.value());
    }
    let cdf = cdf.value().clamp(0.0, 1.0);
    Ok(TailResult {
        cdf_at_threshold: cdf,
        tilted_sum: tilted.value().clamp(0.0, cdf),
        threshold,
        n,
        enumeration_size: required as u64,
    })
}

fn accumulate(
    rest: &[Vec<(f64, f64)>],
    lp: f64,
    v: f64,
    limit: f64,
    threshold: f64,
    cdf: &mut CompensatedSum,
    tilted: &mut CompensatedSum,
) {
    match rest.split_first() {
        None => {
            if v <= limit {
                cdf.add(lp.exp());
                tilted.add((lp - (threshold - v)).exp());
            }
        }
        Some((head, tail)) => {
            for &(l, w) in head {
                accumulate(tail, lp + l, v + w, limit, threshold, cdf, tilted);
            }
        }
    }
}

/// I.i.d. letters.
pub fn tail_iid(dec: &ValueClassDecomposition, n: usize, threshold: f64, budget: u64) -> Result<TailResult> {
    tail(&[LetterGroup { dec, count: n }], threshold, budget)
}

pub fn exact_cdf(groups: &[LetterGroup<'_>], threshold: f64, budget: u64) -> Result<f64> {
    Ok(tail(groups, threshold, budget)?.cdf_at_threshold)
}

pub fn tilted_sum(groups: &[LetterGroup<'_>], threshold: f64, budget: u64) -> Result<f64> {
    Ok(tail(groups, threshold, budget)?.tilted_sum)
}

/// Letter groups of a word with the given input-letter counts, each group
/// distributed as the corresponding channel row.
pub fn row_decompositions(
    ch: &Channel,
    q: &InputDist,
    counts: &[usize],
) -> Result<Vec<(ValueClassDecomposition, usize)>> {
    if counts.len() != ch.input_size() {
        return Err(Error::InvalidArgument("composition length does not match input alphabet".into()));
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(x, &c)| Ok((decompose(ch, q, Measure::Row(x))?, c)))
        .collect()
}

/// Where the output letters of the brute-force oracle come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// `Y^n ~ W(.|x^n)` for this input word.
    Word(Vec<usize>),
    /// `Y^n ~ q_Q^n` with the given blocklength.
    Output(usize),
}

/// Largest `|Y|^n` the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Ground truth by enumerating every output word: returns
/// `(P(S_n <= r), E[1{S_n <= r} e^{-(r - S_n)}])`.
pub fn brute_force_cdf(ch: &Channel, q: &InputDist, source: &Source, threshold: f64) -> Result<(f64, f64)> {
    ch.require_dist(q)?;
    let ny = ch.output_size();
    let out = ch.output_dist(q);
    let n = match source {
        Source::Word(w) => w.len(),
        Source::Output(n) => *n,
    };
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    if let Source::Word(w) = source {
        if let Some(&x) = w.iter().find(|&&x| x >= ch.input_size()) {
            return Err(Error::InvalidArgument(format!("input letter {x} out of range")));
        }
    }
    let required = (ny as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > BRUTE_FORCE_LIMIT as u128 {
        return Err(Error::TooLarge { required, limit: BRUTE_FORCE_LIMIT });
    }
    let stat: Vec<f64> = (0..ny).map(|y| -ch.alpha(q, y).ln()).collect();
    let letter_prob = |i: usize, y: usize| match source {
        Source::Word(w) => ch.get(w[i], y),
        Source::Output(_) => out[y],
    };
    let limit = threshold + THRESHOLD_SLACK * n as f64;
    let mut cdf = CompensatedSum::new();
    let mut tilted = CompensatedSum::new();
    let mut word = vec![0usize; n];
    loop {
        let mut p = 1.0;
        let mut s = 0.0;
        for (i, &y) in word.iter().enumerate() {
            p *= letter_prob(i, y);
            s += stat[y];
        }
        if p > 0.0 && s <= limit {
            cdf.add(p);
            tilted.add(p * (-(threshold - s)).exp());
        }
        // Next word, last letter fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok((cdf.value(), tilted.value()));
            }
            i -= 1;
            word[i] += 1;
            if word[i] < ny {
                break;
            }
            word[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::builtin::*;
    use std::f64::consts::LN_2;

    fn u(k: usize) -> InputDist {
        InputDist::uniform(k)
    }

    #[test]
    fn decompose_examples() {
        let b = bec(0.5).unwrap();
        let d = decompose(&b, &u(2), Measure::Output).unwrap();
        assert_eq!(d.classes, vec![ValueClass { value: 0.0, prob: 0.5 }, ValueClass { value: LN_2, prob: 0.5 }]);
        let r = decompose(&b, &u(2), Measure::Row(0)).unwrap();
        assert_eq!(r.classes, d.classes);

        let id = decompose(&identity(2).unwrap(), &u(2), Measure::Output).unwrap();
        assert_eq!(id.classes, vec![ValueClass { value: LN_2, prob: 1.0 }]);

        assert_eq!(decompose(&bsc(0.1).unwrap(), &u(2), Measure::Output), Err(Error::NotSingular));
        // Row of an input outside supp(Q) reaching an output no supported input reaches.
        let pm = InputDist::point_mass(2, 0);
        assert_eq!(
            decompose(&b, &pm, Measure::Row(1)),
            Err(Error::DominationFailure { input: 1, output: 1 })
        );
    }

    #[test]
    fn cdf_examples() {
        let b = bec(0.5).unwrap();
        let d = decompose(&b, &u(2), Measure::Row(0)).unwrap();
        let t = tail_iid(&d, 4, 2.0 * LN_2, DEFAULT_ENUM_BUDGET).unwrap();
        assert!((t.cdf_at_threshold - 11.0 / 16.0).abs() < 1e-15);
        assert_eq!(t.enumeration_size, 5);

        let single = ValueClassDecomposition { classes: vec![ValueClass { value: 0.7, prob: 1.0 }], measure: Measure::Output };
        for n in [1, 5, 40] {
            assert_eq!(tail_iid(&single, n, n as f64 * 0.7, DEFAULT_ENUM_BUDGET).unwrap().cdf_at_threshold, 1.0);
        }
    }

    #[test]
    fn tilted_examples() {
        let b = bec(0.5).unwrap();
        let d = decompose(&b, &u(2), Measure::Output).unwrap();
        let r = 0.5 * LN_2;
        let t = tail_iid(&d, 1, r, DEFAULT_ENUM_BUDGET).unwrap();
        assert!((t.tilted_sum - 0.5 * (-r).exp()).abs() < 1e-15);
        assert_eq!(tail_iid(&d, 5, -0.1, DEFAULT_ENUM_BUDGET).unwrap().tilted_sum, 0.0);
        assert_eq!(tail_iid(&d, 5, -0.1, DEFAULT_ENUM_BUDGET).unwrap().cdf_at_threshold, 0.0);

        let n = 100;
        let (c, v, m3) = d.moments();
        let t = tail_iid(&d, n, n as f64 * c, DEFAULT_ENUM_BUDGET).unwrap();
        let bound = 1.0 / (2.0 * std::f64::consts::PI * n as f64 * v).sqrt() + m3 / ((n as f64).sqrt() * v.powf(1.5));
        assert!((bound - 0.2151).abs() < 1e-4);
        assert!(t.tilted_sum <= bound);
    }

    #[test]
    fn budget_is_enforced() {
        let d = decompose(&ternary(0.2, 0.1).unwrap(), &u(3), Measure::Output).unwrap();
        assert_eq!(d.classes.len(), 3);
        let e = tail_iid(&d, 100, 10.0, 100).unwrap_err();
        assert_eq!(e, Error::EnumerationBudgetExceeded { required: 5151, budget: 100 });
    }

    #[test]
    fn brute_force_examples() {
        let id = identity(2).unwrap();
        let (c, _) = brute_force_cdf(&id, &u(2), &Source::Output(3), 3.0 * LN_2).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        assert!(matches!(brute_force_cdf(&id, &u(2), &Source::Output(0), 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(brute_force_cdf(&id, &u(2), &Source::Output(30), 1.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn matches_brute_force_small() {
        let b = bec(0.5).unwrap();
        let dq = decompose(&b, &u(2), Measure::Output).unwrap();
        let dw = decompose(&b, &u(2), Measure::Row(0)).unwrap();
        for n in 1..=6 {
            for k in 0..=2 * n {
                let r = k as f64 * 0.5 * LN_2;
                let exact = tail_iid(&dw, n, r, DEFAULT_ENUM_BUDGET).unwrap();
                let (bc, bt) = brute_force_cdf(&b, &u(2), &Source::Word(vec![0; n]), r).unwrap();
                assert!((exact.cdf_at_threshold - bc).abs() < 1e-12);
                assert!((exact.tilted_sum - bt).abs() < 1e-12);
                let exact = tail_iid(&dq, n, r, DEFAULT_ENUM_BUDGET).unwrap();
                let (bc, bt) = brute_force_cdf(&b, &u(2), &Source::Output(n), r).unwrap();
                assert!((exact.cdf_at_threshold - bc).abs() < 1e-12);
                assert!((exact.tilted_sum - bt).abs() < 1e-12);
            }
        }
    }
}
