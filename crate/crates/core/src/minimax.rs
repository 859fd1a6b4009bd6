//! Minimax converse for symmetric singular channels.
//!
//! The output law `Q*` puts weight proportional to `prod_i delta_{y_i}` on the
//! words of `S_R = { y^n : sum_i -ln alpha_{y_i} <= nR }` and nothing elsewhere.
//! Against the uniform input the likelihood ratio is infinite outside `S_R`
//! and equal to the normalizer `Z = sum_{S_R} prod delta` on the support of
//! `W(.|x^n)` inside it, so the optimal test and its type-II error `beta` have
//! a closed form in `W(S_R|x_o^n)` and `Z = e^{nR} * tilted`.
//! `M*(n, eps) <= 1/beta`.

use crate::channel::{Channel, InputDist};
use crate::error::{Error, Result};
use crate::exactdist::{decompose, tail_iid, Measure, THRESHOLD_SLACK};
use crate::measures::check_eps;
use crate::numeric::{composition_count, for_each_composition, CompensatedSum, LnFactorial};
use serde::Serialize;

/// Likelihood ratios closer than this (relative, in the log domain) share a class.
pub const RATIO_REL_TOL: f64 = 1e-9;

fn require_symmetric_singular(ch: &Channel) -> Result<Vec<f64>> {
    let cls = ch.classify();
    if !cls.symmetric {
        return Err(Error::NotApplicable("channel is not symmetric".into()));
    }
    cls.column_constants.ok_or_else(|| Error::NotApplicable("channel is not singular".into()))
}

/// Unnormalized `ln Q*(y^n)`: `sum_i ln delta_{y_i}` if `y^n` is in `S_R`, else `None`.
pub fn qstar_logweight(ch: &Channel, y_word: &[usize], rate: f64) -> Result<Option<f64>> {
    let deltas = require_symmetric_singular(ch)?;
    if let Some(&y) = y_word.iter().find(|&&y| y >= ch.output_size()) {
        return Err(Error::InvalidArgument(format!("output letter {y} out of range")));
    }
    let alphas = ch.alphas(&InputDist::uniform(ch.input_size()));
    let n = y_word.len() as f64;
    let stat: f64 = y_word.iter().map(|&y| -alphas[y].ln()).sum();
    if stat > n * rate + THRESHOLD_SLACK * n {
        return Ok(None);
    }
    Ok(Some(y_word.iter().map(|&y| deltas[y].ln()).sum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub n: usize,
    pub eps: f64,
    pub rate: f64,
    /// Randomization weight on the boundary class, `eps / w_sr`.
    pub tau: f64,
    /// `W(S_R | x_o^n)`.
    pub w_sr: f64,
    /// `e^{-nR} sum_{S_R} prod delta`.
    pub tilted: f64,
    /// `beta_{1-eps}(U_{X^n}, Q*_{Y^n})`.
    pub beta: f64,
    pub ln_beta: f64,
    /// `-ln beta`, an upper bound on `ln M*(n, eps)`.
    pub rate_bound_nats: f64,
    /// `w_sr - tilted > eps`, which forces `M*(n, eps) < e^{nR}`.
    pub strict_check: bool,
}

/// Optimal randomized test between `U x W` and `U x Q*`, evaluated exactly.
pub fn np_tau_beta(ch: &Channel, eps: f64, n: usize, rate: f64, budget: u64) -> Result<MinimaxReport> {
    check_eps(eps)?;
    require_symmetric_singular(ch)?;
    let q = InputDist::uniform(ch.input_size());
    let threshold = n as f64 * rate;
    let w_sr = tail_iid(&decompose(ch, &q, Measure::Row(0))?, n, threshold, budget)?.cdf_at_threshold;
    let tilted = tail_iid(&decompose(ch, &q, Measure::Output)?, n, threshold, budget)?.tilted_sum;
    if w_sr <= eps {
        return Err(Error::TauOutOfRange { w_sr, eps });
    }
    let tau = eps / w_sr;
    let ln_beta = (-tau).ln_1p() + w_sr.ln() - threshold - tilted.ln();
    Ok(MinimaxReport {
        n,
        eps,
        rate,
        tau,
        w_sr,
        tilted,
        beta: ln_beta.exp(),
        ln_beta,
        rate_bound_nats: -ln_beta,
        strict_check: w_sr - tilted > eps,
    })
}

/// The rate minimizing `-ln beta`.
///
/// `-ln beta = ln Z - ln(w_sr - eps)` depends on `R` only through `S_R`, so
/// it suffices to try each attainable value `t` of the statistic as the
/// threshold `nR`. The winner is re-evaluated by [`np_tau_beta`] at `R = t/n`.
pub fn np_best_rate(ch: &Channel, eps: f64, n: usize, budget: u64) -> Result<MinimaxReport> {
    check_eps(eps)?;
    require_symmetric_singular(ch)?;
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    let q = InputDist::uniform(ch.input_size());
    let row = decompose(ch, &q, Measure::Row(0))?;
    let out = decompose(ch, &q, Measure::Output)?;
    // (statistic value, ln P_row mass, ln of the Z contribution) per class-count vector.
    let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
    for (dec, is_row) in [(&row, true), (&out, false)] {
        let required = composition_count(n, dec.classes.len());
        if required > budget as u128 {
            return Err(Error::EnumerationBudgetExceeded { required, budget });
        }
        let lf = LnFactorial::new(n);
        for_each_composition(n, dec.classes.len(), |k| {
            let mut lp = lf.ln_multinomial(k);
            let mut s = 0.0;
            for (c, &kj) in dec.classes.iter().zip(k) {
                lp += kj as f64 * c.prob.ln();
                s += kj as f64 * c.value;
            }
            atoms.push(if is_row { (s, lp, f64::NEG_INFINITY) } else { (s, f64::NEG_INFINITY, lp + s) });
        });
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let slack = THRESHOLD_SLACK * n as f64;
    let mut w_sr = CompensatedSum::new();
    let mut ln_z = f64::NEG_INFINITY;
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < atoms.len() {
        let t = atoms[i].0;
        while i < atoms.len() && atoms[i].0 <= t + slack {
            w_sr.add(atoms[i].1.exp());
            ln_z = log_add(ln_z, atoms[i].2);
            i += 1;
        }
        let w = w_sr.value();
        if w > eps && ln_z.is_finite() {
            let obj = ln_z - (w - eps).ln();
            if best.is_none_or(|(_, b)| obj < b) {
                best = Some((t, obj));
            }
        }
    }
    let (t, _) = best.ok_or(Error::TauOutOfRange { w_sr: w_sr.value(), eps })?;
    np_tau_beta(ch, eps, n, t / n as f64, budget)
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `beta_{1-eps}` by the textbook Neyman-Pearson construction over raw
/// output types under `x_o^n = 0^n`, without using the closed form.
pub fn np_oracle(ch: &Channel, eps: f64, n: usize, rate: f64, budget: u64) -> Result<f64> {
    check_eps(eps)?;
    let deltas = require_symmetric_singular(ch)?;
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    let ny = ch.output_size();
    let required = composition_count(n, ny);
    if required > budget as u128 {
        return Err(Error::EnumerationBudgetExceeded { required, budget });
    }
    let alphas = ch.alphas(&InputDist::uniform(ch.input_size()));
    let stat: Vec<f64> = alphas.iter().map(|a| -a.ln()).collect();
    let row = ch.row(0);
    let lf = LnFactorial::new(n);
    let limit = n as f64 * rate + THRESHOLD_SLACK * n as f64;

    // Per type: ln multinomial, ln W(type|0^n) (None if impossible),
    // ln of the unnormalized Q* mass (None outside S_R).
    let mut types: Vec<(f64, Option<f64>, Option<f64>)> = Vec::new();
    for_each_composition(n, ny, |k| {
        let lm = lf.ln_multinomial(k);
        let mut lw = Some(0.0);
        let mut lq = 0.0;
        let mut s = 0.0;
        for (y, &c) in k.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let cf = c as f64;
            lw = match lw {
                Some(acc) if row[y] > 0.0 => Some(acc + cf * row[y].ln()),
                _ => None,
            };
            lq += cf * deltas[y].ln();
            s += cf * stat[y];
        }
        types.push((lm, lw.map(|v| v + lm), (s <= limit).then_some(lq + lm)));
    });

    let ln_z = {
        let max = types.iter().filter_map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
        let sum: CompensatedSum = types.iter().filter_map(|t| t.2).map(|v| (v - max).exp()).collect();
        max + sum.value().ln()
    };

    // (ln ratio, P mass, Q* mass) for types with positive P mass.
    let mut cells: Vec<(f64, f64, f64)> = types
        .iter()
        .filter_map(|&(_, lw, lq)| {
            let lw = lw?;
            Some(match lq {
                Some(lq) => (lw - (lq - ln_z), lw.exp(), (lq - ln_z).exp()),
                None => (f64::INFINITY, lw.exp(), 0.0),
            })
        })
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Merge equal ratios into classes.
    let mut classes: Vec<(f64, CompensatedSum, CompensatedSum)> = Vec::new();
    for (r, p, q) in cells {
        match classes.last_mut() {
            Some((cr, cp, cq)) if *cr == r || (cr.is_finite() && (r - *cr).abs() <= RATIO_REL_TOL * cr.abs().max(1.0)) => {
                cp.add(p);
                cq.add(q);
            }
            _ => {
                let (mut cp, mut cq) = (CompensatedSum::new(), CompensatedSum::new());
                cp.add(p);
                cq.add(q);
                classes.push((r, cp, cq));
            }
        }
    }

    let need = 1.0 - eps;
    let mut accepted = 0.0;
    let mut beta = CompensatedSum::new();
    for (_, p, q) in &classes {
        let (p, q) = (p.value(), q.value());
        if accepted + p < need {
            accepted += p;
            beta.add(q);
        } else {
            let frac = ((need - accepted) / p).clamp(0.0, 1.0);
            beta.add(frac * q);
            return Ok(beta.value());
        }
    }
    Ok(beta.value())
}
