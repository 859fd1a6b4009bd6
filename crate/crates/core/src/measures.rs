//! Information measures: mutual information, capacity, the dispersion-type
//! second moments, third absolute moments, moment generating functions and the
//! sphere-packing exponent.
//!
//! All quantities are in nats. Terms with zero joint mass `P(x) W(y|x) = 0` are
//! dropped before any logarithm is taken.

use crate::channel::{Channel, InputDist};
use crate::error::{Error, Result};
use crate::numeric::{l2_distance, simplex_grid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Mutual information `I(Q;W)`.
pub fn mutual_info(ch: &Channel, q: &InputDist) -> f64 {
    let out = ch.output_dist(q);
    let mut total = 0.0;
    for x in q.support() {
        let mut d = 0.0;
        for (y, &w) in ch.row(x).iter().enumerate() {
            if w > 0.0 {
                d += w * (w / out[y]).ln();
            }
        }
        total += q[x] * d;
    }
    total
}

/// `D(W(.|x) || q)` for every input; `+inf` where `q` misses the row support.
pub fn row_divergences(ch: &Channel, out: &[f64]) -> Vec<f64> {
    (0..ch.input_size())
        .map(|x| {
            ch.row(x)
                .iter()
                .zip(out)
                .filter(|(w, _)| **w > 0.0)
                .map(|(&w, &o)| if o > 0.0 { w * (w / o).ln() } else { f64::INFINITY })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityConfig {
    /// Stop once `max_x D(W_x||q) - I(P;W)` falls below this many nats.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of starts used by the uniqueness probe (the first is uniform).
    pub starts: usize,
    /// Two converged inputs closer than this in L2 are considered equal.
    pub agreement: f64,
    pub seed: u64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 100_000, starts: 20, agreement: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub capacity: f64,
    pub caid: InputDist,
    /// Final upper-minus-lower capacity gap.
    pub gap: f64,
    pub iterations: usize,
}

/// Channel capacity by Blahut-Arimoto iteration started from the uniform input.
pub fn capacity(ch: &Channel, cfg: &CapacityConfig) -> Result<CapacityResult> {
    capacity_from(ch, InputDist::uniform(ch.input_size()), cfg)
}

/// Blahut-Arimoto from a full-support starting input.
///
/// The iteration alone converges slowly near the optimum, so every few steps
/// the KKT system `D(W_x||q_P) = C` on the current support is solved by Newton's
/// method; the polished point is accepted only if its capacity gap is below
/// tolerance.
pub fn capacity_from(ch: &Channel, start: InputDist, cfg: &CapacityConfig) -> Result<CapacityResult> {
    ch.require_dist(&start)?;
    if !start.has_full_support() {
        return Err(Error::InvalidArgument("capacity iteration needs a full-support start".into()));
    }
    let mut p = start.as_slice().to_vec();
    let mut gap = f64::INFINITY;
    for it in 0..cfg.max_iterations {
        let out = output(ch, &p);
        let d = row_divergences(ch, &out);
        let lower: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap = upper - lower;
        if gap < cfg.tolerance {
            return Ok(CapacityResult { capacity: lower, caid: InputDist::new(p)?, gap, iterations: it });
        }
        if it % 25 == 24 {
            if let Some((pp, c, g)) = newton_polish(ch, &p, cfg.tolerance) {
                return Ok(CapacityResult { capacity: c, caid: InputDist::new(pp)?, gap: g, iterations: it });
            }
        }
        let mut s = 0.0;
        for (pi, di) in p.iter_mut().zip(&d) {
            *pi *= (di - upper).exp();
            s += *pi;
        }
        for pi in p.iter_mut() {
            *pi /= s;
        }
    }
    Err(Error::NoConvergence { iterations: cfg.max_iterations, gap })
}

fn output(ch: &Channel, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ch.output_size()];
    for (x, &px) in p.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(ch.row(x)) {
            *o += px * w;
        }
    }
    out
}

fn newton_polish(ch: &Channel, p0: &[f64], tol: f64) -> Option<(Vec<f64>, f64, f64)> {
    let pmax = p0.iter().cloned().fold(0.0, f64::max);
    let support: Vec<usize> = (0..p0.len()).filter(|&x| p0[x] >= 1e-6 * pmax).collect();
    let k = support.len();
    let mut ps: Vec<f64> = support.iter().map(|&x| p0[x]).collect();
    let s: f64 = ps.iter().sum();
    ps.iter_mut().for_each(|v| *v /= s);
    let full = |ps: &[f64]| {
        let mut p = vec![0.0; p0.len()];
        for (&x, &v) in support.iter().zip(ps) {
            p[x] = v;
        }
        p
    };
    let mut c = {
        let p = full(&ps);
        mutual_info_raw(ch, &p)
    };
    for _ in 0..60 {
        let p = full(&ps);
        let out = output(ch, &p);
        if out.iter().any(|&o| o <= 0.0) {
            return None;
        }
        let d = row_divergences(ch, &out);
        let mut f = DVector::zeros(k + 1);
        let mut jac = DMatrix::zeros(k + 1, k + 1);
        for (i, &x) in support.iter().enumerate() {
            f[i] = d[x] - c;
            for (j, &z) in support.iter().enumerate() {
                let mut v = 0.0;
                for y in 0..ch.output_size() {
                    let (a, b) = (ch.get(x, y), ch.get(z, y));
                    if a > 0.0 && b > 0.0 {
                        v -= a * b / out[y];
                    }
                }
                jac[(i, j)] = v;
            }
            jac[(i, k)] = -1.0;
            jac[(k, i)] = 1.0;
        }
        f[k] = ps.iter().sum::<f64>() - 1.0;
        if f.amax() < 1e-15 {
            break;
        }
        let step = jac.lu().solve(&(-f))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        for i in 0..k {
            ps[i] += step[i];
        }
        c += step[k];
        if ps.iter().any(|&v| v <= 0.0) {
            return None;
        }
    }
    let p = full(&ps);
    let s: f64 = p.iter().sum();
    let p: Vec<f64> = p.iter().map(|v| v / s).collect();
    let out = output(ch, &p);
    let d = row_divergences(ch, &out);
    let lower: f64 = p.iter().zip(&d).filter(|(pi, _)| **pi > 0.0).map(|(pi, di)| pi * di).sum();
    let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gap = upper - lower;
    (gap >= 0.0 - 1e-15 && gap < tol).then_some((p, lower, gap.max(0.0)))
}

fn mutual_info_raw(ch: &Channel, p: &[f64]) -> f64 {
    let out = output(ch, p);
    let d = row_divergences(ch, &out);
    p.iter().zip(&d).filter(|(pi, _)| **pi > 0.0).map(|(pi, di)| pi * di).sum()
}

/// Result of the multi-start capacity-achieving-input uniqueness probe.
#[derive(Debug, Clone, Serialize)]
pub struct CaidProbe {
    pub capacity: f64,
    pub caid: InputDist,
    pub unique: bool,
    /// Largest L2 distance between any converged input and the representative.
    pub spread: f64,
    pub starts: usize,
}

/// Runs the capacity iteration from `cfg.starts` starting points (uniform
/// first, then seeded random full-support inputs) and reports whether all
/// converged inputs agree.
pub fn probe_caid(ch: &Channel, cfg: &CapacityConfig) -> Result<CaidProbe> {
    let k = ch.input_size();
    let starts: Vec<InputDist> = (0..cfg.starts.max(1))
        .map(|i| {
            if i == 0 {
                InputDist::uniform(k)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..1.0)).collect();
                InputDist::from_weights(&w).expect("positive weights")
            }
        })
        .collect();
    let runs: Vec<CapacityResult> =
        starts.into_par_iter().map(|s| capacity_from(ch, s, cfg)).collect::<Result<_>>()?;
    let best = runs
        .iter()
        .max_by(|a, b| {
            a.capacity
                .total_cmp(&b.capacity)
                .then_with(|| lex_cmp(b.caid.as_slice(), a.caid.as_slice()))
        })
        .expect("at least one start");
    let spread = runs
        .iter()
        .map(|r| l2_distance(r.caid.as_slice(), best.caid.as_slice()))
        .fold(0.0, f64::max);
    Ok(CaidProbe {
        capacity: best.capacity,
        caid: best.caid.clone(),
        unique: spread <= cfg.agreement,
        spread,
        starts: runs.len(),
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Per-input statistics of the information density `ln W(y|x)/q_P(y)`.
#[derive(Debug, Clone)]
struct DensityStats {
    out: Vec<f64>,
    /// Conditional means `D(W_x||q_P)`.
    mean: Vec<f64>,
}

fn density_stats(ch: &Channel, p: &InputDist) -> DensityStats {
    let out = ch.output_dist(p);
    let mean = row_divergences(ch, &out);
    DensityStats { out, mean }
}

/// Sum over `(x, y)` with `P(x) W(y|x) > 0` of `P(x) W(y|x) f(x, i(x,y))`.
fn joint_sum(ch: &Channel, p: &InputDist, out: &[f64], f: impl Fn(usize, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for x in p.support() {
        let mut row = 0.0;
        for (y, &w) in ch.row(x).iter().enumerate() {
            if w > 0.0 {
                row += w * f(x, (w / out[y]).ln());
            }
        }
        total += p[x] * row;
    }
    total
}

/// Conditional information variance `V(P,W)`.
pub fn dispersion(ch: &Channel, p: &InputDist) -> f64 {
    let s = density_stats(ch, p);
    joint_sum(ch, p, &s.out, |x, i| (i - s.mean[x]).powi(2))
}

/// Unconditional information variance `U(Q,W)`, centered at `I(Q;W)`.
pub fn cond_info_variance_u(ch: &Channel, q: &InputDist) -> f64 {
    let s = density_stats(ch, q);
    let mi = mutual_info(ch, q);
    joint_sum(ch, q, &s.out, |_, i| (i - mi).powi(2))
}

/// Reverse dispersion `V^r(P,W)`: variance of the information density
/// around its conditional mean given the output.
pub fn reverse_dispersion(ch: &Channel, p: &InputDist) -> f64 {
    let out = ch.output_dist(p);
    let back: Vec<f64> = (0..ch.output_size())
        .map(|y| {
            if out[y] == 0.0 {
                return 0.0;
            }
            p.support()
                .filter(|&z| ch.get(z, y) > 0.0)
                .map(|z| {
                    let w = ch.get(z, y);
                    p[z] * w / out[y] * (w / out[y]).ln()
                })
                .sum()
        })
        .collect();
    let mut total = 0.0;
    for x in p.support() {
        for (y, &w) in ch.row(x).iter().enumerate() {
            if w > 0.0 {
                total += p[x] * w * ((w / out[y]).ln() - back[y]).powi(2);
            }
        }
    }
    total
}

/// `V_eps(W)`: the minimum (`eps < 1/2`) or maximum (`eps >= 1/2`) of `V(P,W)`
/// over capacity-achieving inputs. Only the unique-CAID case is supported.
pub fn eps_dispersion(ch: &Channel, eps: f64, cfg: &CapacityConfig) -> Result<f64> {
    check_eps(eps)?;
    let probe = probe_caid(ch, cfg)?;
    if !probe.unique {
        return Err(Error::MultiCaidUnsupported);
    }
    Ok(dispersion(ch, &probe.caid))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")))
    }
}

/// Third absolute moments of the information density.
#[derive(Debug, Clone, Serialize)]
pub struct ThirdMoments {
    /// `E_{W(.|x)} |i - D(W_x||q)|^3` per input; `None` where `q_Q` misses
    /// part of the row support.
    pub m3_x: Vec<Option<f64>>,
    /// `sum_x Q(x) m3_x`.
    pub m3_avg: f64,
    /// Third absolute moment centered at `I(Q;W)` under the joint law.
    pub m3_tilde: f64,
    pub kappa: f64,
}

pub fn third_moments(ch: &Channel, q: &InputDist) -> ThirdMoments {
    let s = density_stats(ch, q);
    let m3_x: Vec<Option<f64>> = (0..ch.input_size())
        .map(|x| {
            if !s.mean[x].is_finite() {
                return None;
            }
            Some(
                ch.row(x)
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(y, &w)| w * ((w / s.out[y]).ln() - s.mean[x]).abs().powi(3))
                    .sum(),
            )
        })
        .collect();
    let m3_avg = q.support().map(|x| q[x] * m3_x[x].unwrap_or(0.0)).sum();
    let mi = mutual_info(ch, q);
    let m3_tilde = joint_sum(ch, q, &s.out, |_, i| (i - mi).abs().powi(3));
    ThirdMoments { m3_x, m3_avg, m3_tilde, kappa: kappa(ch) }
}

/// Alphabet-only upper bound on the centered third absolute moment of the
/// information density.
pub fn kappa(ch: &Channel) -> f64 {
    let (nx, ny) = (ch.input_size() as f64, ch.output_size() as f64);
    (3.0 * (nx.cbrt() + ny.cbrt()) / std::f64::consts::E + nx.min(ny).ln()).powi(3)
}

/// `M_x(lambda) = E_{W(.|x)} (W(Y|x)/q_Q(Y))^lambda`.
pub fn mgf(ch: &Channel, q: &InputDist, x: usize, lambda: f64) -> f64 {
    let out = ch.output_dist(q);
    ch.row(x)
        .iter()
        .zip(&out)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &o)| w * (w / o).powf(lambda))
        .sum()
}

/// Capacity, dispersions and moments evaluated at the computed CAID.
#[derive(Debug, Clone, Serialize)]
pub struct MomentProfile {
    pub capacity: f64,
    pub caid: InputDist,
    pub caid_unique: bool,
    pub v: f64,
    /// `V_eps(W)`; equal to `v` when the CAID is unique, absent otherwise.
    pub v_eps: Option<f64>,
    pub v_rev: f64,
    pub u: f64,
    pub m3_x: Vec<Option<f64>>,
    pub m3_avg: f64,
    pub m3_tilde: f64,
    pub kappa: f64,
}

pub fn moment_profile(ch: &Channel, cfg: &CapacityConfig) -> Result<MomentProfile> {
    let probe = probe_caid(ch, cfg)?;
    let p = &probe.caid;
    let v = dispersion(ch, p);
    let t = third_moments(ch, p);
    Ok(MomentProfile {
        capacity: probe.capacity,
        caid: p.clone(),
        caid_unique: probe.unique,
        v,
        v_eps: probe.unique.then_some(v),
        v_rev: reverse_dispersion(ch, p),
        u: cond_info_variance_u(ch, p),
        m3_x: t.m3_x,
        m3_avg: t.m3_avg,
        m3_tilde: t.m3_tilde,
        kappa: t.kappa,
    })
}

// ---------------------------------------------------------------------------
// Sphere-packing exponent
// ---------------------------------------------------------------------------

/// Gallager's `E_0(rho, Q) = -ln sum_y (sum_x Q(x) W(y|x)^{1/(1+rho)})^{1+rho}`.
pub fn gallager_e0(ch: &Channel, q: &InputDist, rho: f64) -> f64 {
    let s = 1.0 / (1.0 + rho);
    let logs: Vec<f64> = (0..ch.output_size())
        .filter_map(|y| {
            let inner: f64 = q
                .support()
                .filter_map(|x| {
                    let w = ch.get(x, y);
                    (w > 0.0).then(|| q[x] * w.powf(s))
                })
                .sum();
            (inner > 0.0).then(|| (1.0 + rho) * inner.ln())
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    -(m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln())
}

#[derive(Debug, Clone, Serialize)]
pub struct SpConfig {
    pub rho_max: f64,
    pub rho_tolerance: f64,
    /// Simplex grid resolution for the maximization over inputs; `None`
    /// picks a default from the input alphabet size.
    pub grid: Option<usize>,
}

impl Default for SpConfig {
    fn default() -> Self {
        Self { rho_max: 100.0, rho_tolerance: 1e-10, grid: None }
    }
}

impl SpConfig {
    pub fn resolution(&self, inputs: usize) -> usize {
        self.grid.unwrap_or(match inputs {
            0..=2 => 200,
            3 => 60,
            4 => 24,
            5 => 12,
            _ => 8,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpPoint {
    pub value: f64,
    pub rho: f64,
}

/// `E_SP(R, Q, W) = sup_{0 <= rho <= rho_max} E_0(rho, Q) - rho R` by golden
/// section search (the objective is concave in `rho`).
pub fn sp_exponent_q(ch: &Channel, rate: f64, q: &InputDist, cfg: &SpConfig) -> SpPoint {
    let f = |rho: f64| gallager_e0(ch, q, rho) - rho * rate;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, cfg.rho_max);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > cfg.rho_tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(0.0, 0.0), (mid, f(mid)), (cfg.rho_max, f(cfg.rho_max))]
        .into_iter()
        .max_by(|l, r| l.1.total_cmp(&r.1))
        .map(|(rho, value)| SpPoint { value, rho })
        .expect("nonempty")
}

#[derive(Debug, Clone, Serialize)]
pub struct SpExponent {
    pub rate: f64,
    pub value: f64,
    pub rho: f64,
    pub input: InputDist,
    pub grid: usize,
}

/// `E_SP(R, W)`: maximizes [`sp_exponent_q`] over inputs by a simplex grid
/// followed by pairwise mass-transfer refinement. Returns 0 when `R >= C`.
pub fn sp_exponent(ch: &Channel, rate: f64, capacity: f64, cfg: &SpConfig) -> Result<SpExponent> {
    if !(rate >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be nonnegative, got {rate}")));
    }
    let k = ch.input_size();
    let grid = cfg.resolution(k);
    if rate >= capacity {
        return Ok(SpExponent { rate, value: 0.0, rho: 0.0, input: InputDist::uniform(k), grid });
    }
    let eval = |p: &[f64]| sp_exponent_q(ch, rate, &InputDist::new(p.to_vec()).expect("simplex point"), cfg);
    let points = simplex_grid(k, grid);
    let scored: Vec<f64> = points.par_iter().map(|p| eval(p).value).collect();
    let best_idx = (0..points.len())
        .max_by(|&a, &b| scored[a].total_cmp(&scored[b]).then_with(|| b.cmp(&a)))
        .expect("grid is nonempty");
    let (p, _) = refine_on_simplex(points[best_idx].clone(), 1.0 / grid as f64, |p| eval(p).value);
    let best = eval(&p);
    Ok(SpExponent {
        rate,
        value: best.value.max(0.0),
        rho: best.rho,
        input: InputDist::new(p)?,
        grid,
    })
}

/// Pattern search on the simplex: move mass `h` between coordinate pairs while
/// the objective improves, halving `h` down to 1e-10.
pub(crate) fn refine_on_simplex(
    mut p: Vec<f64>,
    start_step: f64,
    f: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let k = p.len();
    let mut best = f(&p);
    let mut h = start_step;
    while h > 1e-10 {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j || p[j] < h {
                    continue;
                }
                let mut cand = p.clone();
                cand[i] += h;
                cand[j] -= h;
                cand[j] = cand[j].max(0.0);
                let v = f(&cand);
                if v > best {
                    best = v;
                    p = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (p, best)
}
