//! Ground truth for small cases: exact ML decoding error of explicit codebooks,
//! a Lemma-2 audit built on it, and a Monte-Carlo estimate of
//! `P(sum_i -ln alpha_{Y_i} <= r | x^n)` for blocklengths beyond enumeration.

use crate::bounds::{lemma2_lower_bound, Lemma2Bound};
use crate::channel::{Channel, InputDist};
use crate::error::{Error, Result};
use crate::exactdist::{BRUTE_FORCE_LIMIT, DEFAULT_ENUM_BUDGET};
use crate::numeric::{CompensatedSum, PROB_REL_TOL};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Codebook {
    pub n: usize,
    pub codewords: Vec<Vec<usize>>,
    /// Common input-letter counts, present iff every codeword has the same type.
    pub composition: Option<Vec<usize>>,
}

impl Codebook {
    pub fn new(codewords: Vec<Vec<usize>>, input_size: usize) -> Result<Self> {
        let n = codewords.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("empty codebook".into()))?;
        if n == 0 {
            return Err(Error::InvalidArgument("codewords must be non-empty".into()));
        }
        let mut common: Option<Vec<usize>> = None;
        let mut constant = true;
        for (m, w) in codewords.iter().enumerate() {
            if w.len() != n {
                return Err(Error::InvalidArgument(format!("codeword {m} has length {}, expected {n}", w.len())));
            }
            let mut counts = vec![0; input_size];
            for &x in w {
                if x >= input_size {
                    return Err(Error::InvalidArgument(format!("codeword {m} uses input {x}")));
                }
                counts[x] += 1;
            }
            match &common {
                None => common = Some(counts),
                Some(c) if *c == counts => {}
                Some(_) => constant = false,
            }
        }
        Ok(Codebook { n, codewords, composition: if constant { common } else { None } })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

/// Exact average error probability under maximum-likelihood decoding, ties
/// (equal within a relative 1e-12) going to the lowest message index.
pub fn ml_error_exact(ch: &Channel, cb: &Codebook) -> Result<f64> {
    let ny = ch.output_size();
    let total = (ny as u128).checked_pow(cb.n as u32).unwrap_or(u128::MAX);
    if total > BRUTE_FORCE_LIMIT as u128 {
        return Err(Error::TooLarge { required: total, limit: BRUTE_FORCE_LIMIT });
    }
    if let Some(w) = cb.codewords.iter().flatten().find(|&&x| x >= ch.input_size()) {
        return Err(Error::InvalidArgument(format!("codebook uses input {w}")));
    }
    let total = total as usize;
    const CHUNK: usize = 4096;
    let partials: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut err = CompensatedSum::new();
            let mut word = vec![0usize; cb.n];
            let mut lik = vec![0.0; cb.len()];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut r = idx;
                for slot in word.iter_mut().rev() {
                    *slot = r % ny;
                    r /= ny;
                }
                let mut best = 0;
                for (m, cw) in cb.codewords.iter().enumerate() {
                    lik[m] = cw.iter().zip(&word).map(|(&x, &y)| ch.get(x, y)).product();
                    if lik[m] > lik[best] && !tie(lik[m], lik[best]) {
                        best = m;
                    }
                }
                for (m, &l) in lik.iter().enumerate() {
                    if m != best {
                        err.add(l);
                    }
                }
            }
            err.value()
        })
        .collect();
    let err: CompensatedSum = partials.into_iter().collect();
    Ok(err.value() / cb.len() as f64)
}

fn tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= PROB_REL_TOL * a.abs().max(b.abs())
}

/// Both sides are exact up to rounding; this absorbs the summation error.
pub const AUDIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Audit {
    pub n: usize,
    pub codebook_size: usize,
    pub rate: f64,
    pub ml_error: f64,
    pub lower_bound: Lemma2Bound,
    /// `ml_error >= lower_bound.value - AUDIT_TOL`.
    pub holds: bool,
}

/// Compares the exact ML error of a constant-composition codebook with the
/// Lemma-2 lower bound at `Q` = its composition and `R = ln|cb| / n`.
pub fn audit_lemma2(ch: &Channel, cb: &Codebook) -> Result<Lemma2Audit> {
    let counts = cb
        .composition
        .as_ref()
        .ok_or_else(|| Error::HypothesisFailure("codebook is not constant-composition".into()))?;
    let q = InputDist::from_counts(counts)?;
    if !ch.is_singular_wrt(&q) {
        return Err(Error::HypothesisFailure("channel is not singular on the composition's support".into()));
    }
    let rate = (cb.len() as f64).ln() / cb.n as f64;
    let lower_bound = lemma2_lower_bound(ch, &q, counts, rate, DEFAULT_ENUM_BUDGET).map_err(|e| match e {
        Error::DominationFailure { .. } => Error::HypothesisFailure(e.to_string()),
        e => e,
    })?;
    let ml_error = ml_error_exact(ch, cb)?;
    Ok(Lemma2Audit {
        n: cb.n,
        codebook_size: cb.len(),
        rate,
        ml_error,
        holds: ml_error >= lower_bound.value - AUDIT_TOL,
        lower_bound,
    })
}

/// Random codebook whose codewords are uniform permutations of one word with
/// the given letter counts.
pub fn random_constant_composition<R: Rng>(
    counts: &[usize],
    size: usize,
    input_size: usize,
    rng: &mut R,
) -> Result<Codebook> {
    let base: Vec<usize> = counts.iter().enumerate().flat_map(|(x, &c)| std::iter::repeat_n(x, c)).collect();
    let words = (0..size)
        .map(|_| {
            let mut w = base.clone();
            for i in (1..w.len()).rev() {
                w.swap(i, rng.random_range(0..=i));
            }
            w
        })
        .collect();
    Codebook::new(words, input_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
    pub samples: u64,
    pub seed: u64,
}

pub const MC_MIN_SAMPLES: u64 = 1000;
const MC_CHUNK: u64 = 4096;

/// Monte-Carlo estimate of `P(sum_i -ln alpha_{Y_i}(Q) <= threshold)` with
/// `Y^n ~ W(.|x_word)`. Chunk `c` draws from ChaCha8 stream `c` of `seed`, so
/// the result does not depend on the number of worker threads.
pub fn mc_estimate(
    ch: &Channel,
    q: &InputDist,
    x_word: &[usize],
    threshold: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    ch.require_dist(q)?;
    if samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("at least {MC_MIN_SAMPLES} samples are required")));
    }
    if let Some(&x) = x_word.iter().find(|&&x| x >= ch.input_size()) {
        return Err(Error::InvalidArgument(format!("input letter {x} out of range")));
    }
    let stat: Vec<f64> = ch.alphas(q).iter().map(|a| -a.ln()).collect();
    let rows: Vec<WeightedIndex<f64>> =
        (0..ch.input_size()).map(|x| WeightedIndex::new(ch.row(x)).expect("rows are stochastic")).collect();
    let limit = threshold + crate::exactdist::THRESHOLD_SLACK * x_word.len() as f64;
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..count)
                .filter(|_| x_word.iter().map(|&x| stat[rows[x].sample(&mut rng)]).sum::<f64>() <= limit)
                .count() as u64
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(McEstimate { estimate: p, half_width: 1.959_963_984_540_054 * (p * (1.0 - p) / samples as f64).sqrt(), samples, seed })
}
