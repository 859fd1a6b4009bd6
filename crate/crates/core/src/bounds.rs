//! Converse bounds on `ln M*(n, eps)` and the constants they need.
//!
//! - [`lemma2_lower_bound`], [`lemma3_bound`], [`berry_esseen`]: the
//!   error-probability ingredients, exact or closed form.
//! - [`prop1_constants`] / [`prop1_converse`]: symmetric singular channels.
//! - [`theorem1_series`]: normal approximation with the regime-correct
//!   third-order term for symmetric channels.
//! - [`prop2_constants`] / [`prop2_converse`]: asymmetric singular channels,
//!   constant-composition codes.
//!
//! Below its validity threshold a report falls back to the trivial bound
//! `n ln min(|X|, |Y|)` and says so.

use crate::channel::{Channel, InputDist};
use crate::error::{Error, Result};
use crate::exactdist::{self, decompose, LetterGroup, Measure};
use crate::measures::{
    self, check_eps, dispersion, mutual_info, probe_caid, refine_on_simplex, third_moments, CapacityConfig,
};
use crate::normal;
use crate::numeric::{l2_distance, simplex_grid};
use rayon::prelude::*;
use serde::Serialize;

/// Dispersions at or below this are treated as zero.
pub const ZERO_DISPERSION: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Error-probability ingredients
// ---------------------------------------------------------------------------

/// Terms of the change-of-measure lower bound on the average error probability
/// of a constant-composition code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2Bound {
    /// `W(S_R(Q) | z^n)`.
    pub w_sr: f64,
    /// `sum_{y^n in S_R(Q)} q_Q(y^n) e^{-n[R - (1/n) sum ln 1/alpha]}`.
    pub tilted: f64,
    /// `w_sr - tilted`.
    pub value: f64,
    pub n: usize,
    pub rate: f64,
}

/// Lower bound on the average error probability of any code with `e^{nR}`
/// codewords of the given input-letter counts, evaluated exactly.
pub fn lemma2_lower_bound(
    ch: &Channel,
    q: &InputDist,
    counts: &[usize],
    rate: f64,
    budget: u64,
) -> Result<Lemma2Bound> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidArgument("composition must have at least one letter".into()));
    }
    let rows = exactdist::row_decompositions(ch, q, counts)?;
    let groups: Vec<LetterGroup<'_>> = rows.iter().map(|(dec, count)| LetterGroup { dec, count: *count }).collect();
    let threshold = n as f64 * rate;
    let w_sr = exactdist::exact_cdf(&groups, threshold, budget)?;
    let out = decompose(ch, q, Measure::Output)?;
    let tilted = exactdist::tail_iid(&out, n, threshold, budget)?.tilted_sum;
    Ok(Lemma2Bound { w_sr, tilted, value: w_sr - tilted, n, rate })
}

/// Closed-form bound on the tilted sum `E[1{S <= r} e^{-(r - S)}]` for a sum of
/// `n` independent letters with per-letter variance `m2` and centered third
/// absolute moment `m3`.
pub fn lemma3_bound(m2: f64, m3: f64, n: usize, iid: bool) -> f64 {
    let m2n = n as f64 * m2;
    let m3n = n as f64 * m3;
    let c = if iid { 1.0 } else { 2.0 };
    1.0 / (2.0 * std::f64::consts::PI * m2n).sqrt() + c * m3n / m2n.powf(1.5)
}

/// Berry-Esseen bracket `(lower, upper)` on `P(S_n <= threshold)`, clamped to [0, 1].
pub fn berry_esseen(m1: f64, m2: f64, m3: f64, n: usize, threshold: f64, iid: bool) -> (f64, f64) {
    let nf = n as f64;
    let z = (threshold - nf * m1) / (nf * m2).sqrt();
    let c = if iid { 0.5 } else { 1.0 };
    let half = c * m3 / (nf.sqrt() * m2.powf(1.5));
    let center = normal::cdf(z);
    ((center - half).max(0.0), (center + half).min(1.0))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Symmetric singular channel, any code.
    SymmetricSingular,
    /// Asymmetric singular channel, constant-composition codes, `eps < 1/2`.
    AsymmetricSingularLowEps,
    /// Asymmetric singular channel, constant-composition codes, `eps > 1/2`.
    AsymmetricSingularHighEps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConverseConstants {
    Prop1(Prop1Constants),
    Prop2(Box<Prop2Constants>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub n: usize,
    pub eps: f64,
    /// Upper bound on `ln M*(n, eps)` (`ln M*_c` for constant-composition codes).
    pub bound_nats: f64,
    /// `nC + sqrt(n V_eps) Phi^{-1}(eps)`.
    pub normal_approx_nats: f64,
    pub regime: Regime,
    pub valid_from: u64,
    /// Set when `n < valid_from` and `bound_nats` is `n ln min(|X|, |Y|)`.
    pub trivial: bool,
    pub constants: ConverseConstants,
}

fn trivial_rate(ch: &Channel) -> f64 {
    (ch.input_size().min(ch.output_size()) as f64).ln()
}

fn assemble(
    n: usize,
    eps: f64,
    capacity: f64,
    v_eps: f64,
    constant: f64,
    valid_from: u64,
    trivial_rate: f64,
    regime: Regime,
    constants: ConverseConstants,
) -> ConverseReport {
    let nf = n as f64;
    let normal_approx = nf * capacity + (nf * v_eps).sqrt() * normal::quantile(eps);
    let trivial = (n as u64) < valid_from;
    ConverseReport {
        n,
        eps,
        bound_nats: if trivial { nf * trivial_rate } else { normal_approx + constant },
        normal_approx_nats: normal_approx,
        regime,
        valid_from,
        trivial,
        constants,
    }
}

// ---------------------------------------------------------------------------
// Symmetric singular channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Constants {
    pub eps: f64,
    pub capacity: f64,
    /// Dispersion; every capacity-achieving input of a symmetric channel has the same one.
    pub v: f64,
    /// Third absolute moment of the information density under the reference input 0.
    pub m3: f64,
    /// `m3 / V^{3/2}`.
    pub k_ratio: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub n_o: u64,
    pub trivial_rate: f64,
}

impl Prop1Constants {
    /// `1 - K / (2 phi(Phi^{-1}(eps)) sqrt(nV)) > 1/2`.
    pub fn threshold_holds(&self, n: u64) -> bool {
        let phi = normal::pdf(normal::quantile(self.eps));
        1.0 - self.k / (2.0 * phi * (n as f64 * self.v).sqrt()) > 0.5
    }

    /// Per-letter rate used in the converse proof at blocklength `n`.
    pub fn proof_rate(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.capacity + (self.v / nf).sqrt() * normal::quantile(self.eps) + self.k / nf
    }

    pub fn report(&self, n: usize) -> ConverseReport {
        assemble(
            n,
            self.eps,
            self.capacity,
            self.v,
            self.k,
            self.n_o,
            self.trivial_rate,
            Regime::SymmetricSingular,
            ConverseConstants::Prop1(self.clone()),
        )
    }
}

/// Capacity and dispersion of a symmetric channel, both at the uniform input.
fn symmetric_c_v(ch: &Channel) -> (f64, f64) {
    let u = InputDist::uniform(ch.input_size());
    (mutual_info(ch, &u), dispersion(ch, &u))
}

pub fn prop1_constants(ch: &Channel, eps: f64) -> Result<Prop1Constants> {
    check_eps(eps)?;
    let cls = ch.classify();
    if !cls.symmetric {
        return Err(Error::NotApplicable("channel is not symmetric".into()));
    }
    if !cls.singular {
        return Err(Error::NotApplicable("channel is not singular".into()));
    }
    let u = InputDist::uniform(ch.input_size());
    let (capacity, v) = symmetric_c_v(ch);
    if v <= ZERO_DISPERSION {
        return Err(Error::NotApplicable("channel has zero dispersion".into()));
    }
    let m3 = third_moments(ch, &u).m3_x[0].expect("uniform input dominates every row");
    let k_ratio = m3 / v.powf(1.5);
    let phi = normal::pdf(normal::quantile(eps));
    let k = k_ratio * v.sqrt() / phi + (2.0 / phi) * (normal::FRAC_1_SQRT_2PI + m3 / v);
    let mut c = Prop1Constants { eps, capacity, v, m3, k_ratio, k, n_o: 1, trivial_rate: trivial_rate(ch) };
    let t = (k / phi).powi(2) / v;
    let mut n = (t.floor() as u64).max(1);
    while n > 1 && c.threshold_holds(n - 1) {
        n -= 1;
    }
    while !c.threshold_holds(n) {
        n += 1;
    }
    c.n_o = n;
    Ok(c)
}

pub fn prop1_converse(ch: &Channel, eps: f64, n: usize) -> Result<ConverseReport> {
    Ok(prop1_constants(ch, eps)?.report(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesRegime {
    /// `V_eps > 0`, not singular: third-order term `ln sqrt(n) + O(1)`.
    Nonsingular,
    /// `V_eps > 0`, singular: third-order term `O(1)`.
    Singular,
    /// `V_eps = 0`: `nC + O(1)`.
    ZeroDispersion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub n: usize,
    pub eps: f64,
    pub regime: SeriesRegime,
    pub capacity: f64,
    pub v_eps: f64,
    /// `nC`.
    pub first_order: f64,
    /// `sqrt(n V_eps) Phi^{-1}(eps)`.
    pub second_order: f64,
    /// `0.5 ln n` in the nonsingular regime, else 0.
    pub log_term: f64,
    /// The `O(1)` constant when it is known explicitly.
    pub constant: Option<f64>,
    /// `computed` or `order_only`.
    pub constant_status: &'static str,
    /// Sum of the terms above, with an unknown constant taken as 0.
    pub approximation: f64,
}

/// Normal approximation with the third-order term for a symmetric channel.
pub fn theorem1_series(ch: &Channel, eps: f64, n: usize) -> Result<SeriesReport> {
    check_eps(eps)?;
    let cls = ch.classify();
    if !cls.symmetric {
        return Err(Error::NotSymmetric);
    }
    let (capacity, v) = symmetric_c_v(ch);
    let nf = n as f64;
    let (regime, log_term, constant) = if v <= ZERO_DISPERSION {
        (SeriesRegime::ZeroDispersion, 0.0, None)
    } else if cls.singular {
        (SeriesRegime::Singular, 0.0, Some(prop1_constants(ch, eps)?.k))
    } else {
        (SeriesRegime::Nonsingular, 0.5 * nf.ln(), None)
    };
    let v_eps = if regime == SeriesRegime::ZeroDispersion { 0.0 } else { v };
    let first_order = nf * capacity;
    let second_order = if v_eps > 0.0 { (nf * v_eps).sqrt() * normal::quantile(eps) } else { 0.0 };
    Ok(SeriesReport {
        n,
        eps,
        regime,
        capacity,
        v_eps,
        first_order,
        second_order,
        log_term,
        constant,
        constant_status: if constant.is_some() { "computed" } else { "order_only" },
        approximation: first_order + second_order + log_term + constant.unwrap_or(0.0),
    })
}

// ---------------------------------------------------------------------------
// Asymmetric singular channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    S1,
    S2,
    S3,
}

fn region_of(d: f64, v: f64, delta: f64, nu: f64) -> Region {
    if d > delta {
        Region::S3
    } else if v >= nu {
        Region::S1
    } else {
        Region::S2
    }
}

/// Which of the three composition regions `q` falls in.
pub fn region_classify(ch: &Channel, q: &InputDist, delta: f64, nu: f64, cfg: &CapacityConfig) -> Result<Region> {
    ch.require_dist(q)?;
    let probe = probe_caid(ch, cfg)?;
    if !probe.unique {
        return Err(Error::MultiCaidUnsupported);
    }
    let d = l2_distance(q.as_slice(), probe.caid.as_slice());
    Ok(region_of(d, dispersion(ch, q), delta, nu))
}

/// Largest input alphabet the grid searches accept.
pub const MAX_GRID_INPUTS: usize = 6;

/// Default simplex grid resolution for searches over all inputs.
pub fn default_grid(inputs: usize) -> usize {
    match inputs {
        0..=4 => 200,
        5 => 60,
        _ => 30,
    }
}

fn check_dimension(ch: &Channel) -> Result<()> {
    if ch.input_size() > MAX_GRID_INPUTS {
        return Err(Error::DimensionTooLarge { size: ch.input_size(), limit: MAX_GRID_INPUTS });
    }
    Ok(())
}

/// Index and value of the first maximum of `f` over `points`.
fn grid_argmax(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64 + Sync) -> Option<(usize, f64)> {
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

fn dist_of(p: &[f64]) -> Option<InputDist> {
    InputDist::new(p.to_vec()).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaResult {
    pub delta: f64,
    pub gamma: f64,
    /// Maximizer of `I(.;W)` over the closure of `S3(delta)`.
    pub argmax: Vec<f64>,
    pub grid: usize,
}

/// Radial projection of `p` onto the sphere of radius `delta` around `center`,
/// if the projection stays in the simplex.
fn project(p: &[f64], center: &[f64], delta: f64) -> Option<Vec<f64>> {
    let d = l2_distance(p, center);
    if d < 1e-12 {
        return None;
    }
    let q: Vec<f64> = p.iter().zip(center).map(|(a, c)| c + delta * (a - c) / d).collect();
    if q.iter().any(|&x| x < -1e-15) {
        return None;
    }
    let q: Vec<f64> = q.into_iter().map(|x| x.max(0.0)).collect();
    let s: f64 = q.iter().sum();
    Some(q.into_iter().map(|x| x / s).collect())
}

fn gamma_with(ch: &Channel, pstar: &[f64], capacity: f64, delta: f64, grid: usize) -> Result<GammaResult> {
    let info = |p: &[f64]| match project(p, pstar, delta) {
        Some(q) => dist_of(&q).map_or(f64::NEG_INFINITY, |q| mutual_info(ch, &q)),
        None => f64::NEG_INFINITY,
    };
    let points: Vec<Vec<f64>> =
        simplex_grid(ch.input_size(), grid).into_iter().filter(|p| l2_distance(p, pstar) >= delta).collect();
    let (i, _) = grid_argmax(&points, info)
        .ok_or_else(|| Error::NotApplicable(format!("no input lies at distance {delta} from the CAID")))?;
    let (p, best) = refine_on_simplex(points[i].clone(), 1.0 / grid as f64, info);
    Ok(GammaResult { delta, gamma: capacity - best, argmax: project(&p, pstar, delta).unwrap_or(p), grid })
}

/// `C(W) - max { I(Q;W) : ||Q - P*|| >= delta }`.
///
/// `I(.;W)` is concave, so the maximum over the complement of the ball is
/// attained on its boundary sphere; grid points outside the ball are projected
/// radially onto the sphere before evaluation and the best one is polished by
/// a pattern search.
pub fn gamma_delta(ch: &Channel, delta: f64, grid: Option<usize>, cfg: &CapacityConfig) -> Result<GammaResult> {
    check_dimension(ch)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let probe = probe_caid(ch, cfg)?;
    if !probe.unique {
        return Err(Error::MultiCaidUnsupported);
    }
    let grid = grid.unwrap_or_else(|| default_grid(ch.input_size()));
    gamma_with(ch, probe.caid.as_slice(), probe.capacity, delta, grid)
}

/// `max_P V(P,W)` by grid search and pattern-search refinement.
pub fn v_max(ch: &Channel, grid: usize) -> Result<(f64, Vec<f64>)> {
    check_dimension(ch)?;
    let v = |p: &[f64]| dist_of(p).map_or(f64::NEG_INFINITY, |q| dispersion(ch, &q));
    let points = simplex_grid(ch.input_size(), grid);
    let (i, _) = grid_argmax(&points, v).expect("grid is non-empty");
    let (p, best) = refine_on_simplex(points[i].clone(), 1.0 / grid as f64, v);
    Ok((best, p))
}

/// Sample of compositions near the CAID used to check the radius conditions
/// and estimate the local curvature constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NetConfig {
    /// Resolution of the global simplex grid.
    pub grid: usize,
    /// Resolution of the simplex grid whose normalized offsets from the CAID
    /// give the radial directions.
    pub directions: usize,
    /// Radii per direction, evenly spaced in `(0, delta]`.
    pub radii: usize,
}

impl NetConfig {
    pub fn for_inputs(inputs: usize) -> Self {
        let (grid, directions) = match inputs {
            0..=2 => (400, 2),
            3 => (80, 12),
            4 => (30, 6),
            5 => (16, 4),
            _ => (10, 3),
        };
        NetConfig { grid, directions, radii: 16 }
    }

    pub fn refined(&self) -> Self {
        NetConfig { grid: 2 * self.grid, directions: 2 * self.directions, radii: 2 * self.radii }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Config {
    pub capacity: CapacityConfig,
    /// Defaults to [`NetConfig::for_inputs`].
    pub net: Option<NetConfig>,
    /// Grid for the `gamma` and `V_max` searches; defaults to [`default_grid`].
    pub grid: Option<usize>,
    pub delta_start: f64,
    pub delta_shrink: f64,
    pub delta_min: f64,
}

impl Default for Prop2Config {
    fn default() -> Self {
        Prop2Config {
            capacity: CapacityConfig::default(),
            net: None,
            grid: None,
            delta_start: 0.25,
            delta_shrink: 0.5,
            delta_min: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Constants {
    pub eps: f64,
    pub capacity: f64,
    pub caid: Vec<f64>,
    pub v_eps: f64,
    pub delta: f64,
    /// Always `net_verified`: the radius conditions held on every net point,
    /// which cannot rule out a violation between points.
    pub delta_status: &'static str,
    pub nu: f64,
    pub gamma: f64,
    pub v_max: f64,
    pub kappa: f64,
    /// `max m3(P,W)/V(P,W)` over the net part of `S1`.
    pub max_m3_over_v: f64,
    #[serde(rename = "K_s1")]
    pub k_s1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub n_o: u64,
    pub n_tilde_o: u64,
    /// Only for `eps > 1/2`; chosen as `2/(1 - eps) + 1`.
    pub a: Option<f64>,
    #[serde(rename = "K_total")]
    pub k_total: f64,
    pub net: NetConfig,
    /// Net points inside the ball of radius `delta`.
    pub net_size: usize,
    pub grid: usize,
    pub trivial_rate: f64,
}

impl Prop2Constants {
    /// Left side of the condition defining `n_o`:
    /// `1 - exp(-n[gamma/2 + sqrt(V_eps/n) Phi^{-1}(eps)]) - 4 V_max / (n gamma^2)`.
    pub fn lemma5_margin(&self, n: u64) -> f64 {
        lemma5_margin(n, self.gamma, self.v_eps, self.eps, self.v_max)
    }

    /// `sqrt(n) > 2 K_s1 / (phi(Phi^{-1}(eps)) sqrt(nu))`.
    pub fn lemma7_holds(&self, n: u64) -> bool {
        (n as f64).sqrt() > self.lemma7_target()
    }

    fn lemma7_target(&self) -> f64 {
        2.0 * self.k_s1 / (normal::pdf(normal::quantile(self.eps)) * self.nu.sqrt())
    }

    pub fn valid_from(&self) -> u64 {
        self.n_o.max(self.n_tilde_o)
    }

    pub fn report(&self, n: usize) -> ConverseReport {
        let regime =
            if self.eps < 0.5 { Regime::AsymmetricSingularLowEps } else { Regime::AsymmetricSingularHighEps };
        assemble(
            n,
            self.eps,
            self.capacity,
            self.v_eps,
            self.k_total,
            self.valid_from(),
            self.trivial_rate,
            regime,
            ConverseConstants::Prop2(Box::new(self.clone())),
        )
    }
}

fn lemma5_margin(n: u64, gamma: f64, v_eps: f64, eps: f64, v_max: f64) -> f64 {
    let nf = n as f64;
    let expo = nf * gamma / 2.0 + (nf * v_eps).sqrt() * normal::quantile(eps);
    1.0 - (-expo).exp() - 4.0 * v_max / (nf * gamma * gamma)
}

/// Least `n` such that the margin exceeds `eps` for every `m >= n`.
fn lemma5_threshold(gamma: f64, v_eps: f64, eps: f64, v_max: f64) -> Result<u64> {
    let holds = |n: u64| lemma5_margin(n, gamma, v_eps, eps, v_max) > eps;
    // Past (b/gamma)^2 the exponent grows with n and the margin is increasing.
    let b = (v_eps.sqrt() * normal::quantile(eps)).min(0.0);
    let mono = ((b / gamma).powi(2).ceil() as u64).max(1);
    const SCAN_LIMIT: u64 = 100_000_000;
    if mono > SCAN_LIMIT {
        return Err(Error::TooLarge { required: mono as u128, limit: SCAN_LIMIT });
    }
    let mut last_fail = 0;
    for n in 1..=mono {
        if !holds(n) {
            last_fail = n;
        }
    }
    if last_fail < mono {
        return Ok(last_fail + 1);
    }
    let mut lo = mono;
    let mut hi = mono.max(1);
    while !holds(hi) {
        lo = hi;
        hi = hi.checked_mul(2).ok_or(Error::TooLarge { required: u128::MAX, limit: u64::MAX })?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

struct NetStats {
    size: usize,
    beta1: f64,
    beta2: f64,
    max_m3_over_v: f64,
}

/// Net points in the closed ball of radius `delta` around `pstar`.
fn ball_net(pstar: &[f64], delta: f64, net: &NetConfig) -> Vec<Vec<f64>> {
    let k = pstar.len();
    let mut points: Vec<Vec<f64>> =
        simplex_grid(k, net.grid).into_iter().filter(|p| l2_distance(p, pstar) <= delta).collect();
    points.push(pstar.to_vec());
    for g in simplex_grid(k, net.directions) {
        let d = l2_distance(&g, pstar);
        if d < 1e-9 {
            continue;
        }
        for j in 1..=net.radii {
            let r = delta * j as f64 / net.radii as f64;
            let p: Vec<f64> = g.iter().zip(pstar).map(|(a, c)| c + r * (a - c) / d).collect();
            if p.iter().all(|&x| x >= 0.0) {
                points.push(p);
            }
        }
    }
    points
}

/// Checks the radius conditions on the net and collects the `S1` statistics.
/// Returns `None` if a condition fails.
#[allow(clippy::too_many_arguments)]
fn check_net(
    ch: &Channel,
    pstar: &[f64],
    capacity: f64,
    v_star: f64,
    delta: f64,
    nu: f64,
    require_no_s2: bool,
    net: &NetConfig,
) -> Option<NetStats> {
    let points = ball_net(pstar, delta, net);
    struct Point {
        full_support: bool,
        region: Region,
        d: f64,
        gap: f64,
        dv: f64,
        m3_over_v: f64,
    }
    let evals: Vec<Option<Point>> = points
        .par_iter()
        .map(|p| {
            let q = dist_of(p)?;
            let out = ch.output_dist(&q);
            let v = dispersion(ch, &q);
            let d = l2_distance(p, pstar);
            Some(Point {
                full_support: out.iter().all(|&o| o > 0.0),
                region: region_of(d, v, delta, nu),
                d,
                gap: capacity - mutual_info(ch, &q),
                dv: (v.sqrt() - v_star.sqrt()).abs(),
                m3_over_v: third_moments(ch, &q).m3_avg / v,
            })
        })
        .collect();
    let mut beta1 = f64::INFINITY;
    let mut beta2: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for e in evals.iter().flatten() {
        if !e.full_support || (require_no_s2 && e.region == Region::S2) {
            return None;
        }
        if e.region != Region::S1 {
            continue;
        }
        max_ratio = max_ratio.max(e.m3_over_v);
        // Offsets this small carry more rounding than signal.
        if e.d > 1e-6 {
            beta1 = beta1.min(e.gap / (e.d * e.d));
            beta2 = beta2.max(e.dv / e.d);
        }
    }
    Some(NetStats { size: points.len(), beta1, beta2, max_m3_over_v: max_ratio })
}

pub fn prop2_constants(ch: &Channel, eps: f64, cfg: &Prop2Config) -> Result<Prop2Constants> {
    check_eps(eps)?;
    if eps == 0.5 {
        return Err(Error::NotApplicable("eps = 1/2 is not covered".into()));
    }
    let cls = ch.classify();
    if cls.symmetric {
        return Err(Error::NotApplicable("channel is symmetric".into()));
    }
    if !cls.singular {
        return Err(Error::NotApplicable("channel is not singular".into()));
    }
    check_dimension(ch)?;
    let probe = probe_caid(ch, &cfg.capacity)?;
    if !probe.unique {
        return Err(Error::MultiCaidUnsupported);
    }
    let pstar = probe.caid.as_slice().to_vec();
    let capacity = probe.capacity;
    let v_eps = dispersion(ch, &probe.caid);
    if v_eps <= ZERO_DISPERSION {
        return Err(Error::NotApplicable("V_eps is zero".into()));
    }
    let q = normal::quantile(eps);
    let (nu, a) = if eps < 0.5 {
        (v_eps / 2.0, None)
    } else {
        let a = 2.0 / (1.0 - eps) + 1.0;
        (v_eps * q * q / a, Some(a))
    };
    let net = cfg.net.unwrap_or_else(|| NetConfig::for_inputs(ch.input_size()));
    let grid = cfg.grid.unwrap_or_else(|| default_grid(ch.input_size()));

    let mut delta = cfg.delta_start;
    let stats = loop {
        if delta < cfg.delta_min {
            return Err(Error::NetTooCoarse { last_delta: delta / cfg.delta_shrink });
        }
        if let Some(s) = check_net(ch, &pstar, capacity, v_eps, delta, nu, eps < 0.5, &net) {
            if s.beta1.is_finite() && s.beta1 > 0.0 && s.beta2 > 0.0 {
                break s;
            }
        }
        delta *= cfg.delta_shrink;
    };

    let gamma = gamma_with(ch, &pstar, capacity, delta, grid)?.gamma;
    if !(gamma > 0.0) {
        return Err(Error::NotApplicable(format!("gamma({delta}) is not positive")));
    }
    let (v_max, _) = v_max(ch, grid)?;
    let kappa = measures::kappa(ch);
    let phi = normal::pdf(q);
    let k_s1 = (2.0 / phi) * (stats.max_m3_over_v + normal::FRAC_1_SQRT_2PI + kappa / nu);
    let mut k_total = (stats.beta2 * q.abs()).powi(2) / (4.0 * stats.beta1) + k_s1;
    if let Some(a) = a {
        k_total -= (1.0 - eps - 2.0 / a).ln();
    }
    let n_o = lemma5_threshold(gamma, v_eps, eps, v_max)?;
    let mut c = Prop2Constants {
        eps,
        capacity,
        caid: pstar,
        v_eps,
        delta,
        delta_status: "net_verified",
        nu,
        gamma,
        v_max,
        kappa,
        max_m3_over_v: stats.max_m3_over_v,
        k_s1,
        beta1: stats.beta1,
        beta2: stats.beta2,
        n_o,
        n_tilde_o: 1,
        a,
        k_total,
        net,
        net_size: stats.size,
        grid,
        trivial_rate: trivial_rate(ch),
    };
    let t = c.lemma7_target();
    let mut n = ((t * t).floor() as u64).max(1);
    while n > 1 && c.lemma7_holds(n - 1) {
        n -= 1;
    }
    while !c.lemma7_holds(n) {
        n += 1;
    }
    c.n_tilde_o = n;
    Ok(c)
}

pub fn prop2_converse(ch: &Channel, eps: f64, n: usize, cfg: &Prop2Config) -> Result<ConverseReport> {
    Ok(prop2_constants(ch, eps, cfg)?.report(n))
}

/// Proposition 1 for symmetric channels, Proposition 2 otherwise.
pub fn converse_constants(ch: &Channel, eps: f64, cfg: &Prop2Config) -> Result<ConverseConstants> {
    if ch.classify().symmetric {
        Ok(ConverseConstants::Prop1(prop1_constants(ch, eps)?))
    } else {
        Ok(ConverseConstants::Prop2(Box::new(prop2_constants(ch, eps, cfg)?)))
    }
}

impl ConverseConstants {
    pub fn report(&self, n: usize) -> ConverseReport {
        match self {
            ConverseConstants::Prop1(c) => c.report(n),
            ConverseConstants::Prop2(c) => c.report(n),
        }
    }
}
