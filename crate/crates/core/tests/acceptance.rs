//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the summary lines are always printed.

use dmc_converse::bounds::{
    berry_esseen, lemma2_lower_bound, lemma3_bound, prop1_constants, prop2_constants, Prop2Config,
};
use dmc_converse::channel::{builtin, Channel, InputDist};
use dmc_converse::exactdist::{
    brute_force_cdf, decompose, row_decompositions, tail, tail_iid, LetterGroup, Measure, Source,
    DEFAULT_ENUM_BUDGET,
};
use dmc_converse::measures::{dispersion, mgf, mutual_info, probe_caid, reverse_dispersion, third_moments, CapacityConfig};
use dmc_converse::minimax::{np_best_rate, np_oracle, np_tau_beta};
use dmc_converse::normal;
use dmc_converse::numeric::for_each_composition;
use dmc_converse::verify::{audit_lemma2, random_constant_composition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_classification() -> Check {
    let mut cases: Vec<(String, Channel, bool, bool)> = Vec::new();
    for d in [0.01, 0.1, 0.3, 0.5, 0.9] {
        cases.push((format!("bec:{d}"), builtin::bec(d).unwrap(), true, true));
    }
    for p in [0.01, 0.11, 0.3, 0.7, 0.99] {
        cases.push((format!("bsc:{p}"), builtin::bsc(p).unwrap(), true, false));
    }
    cases.push(("asym_example".into(), builtin::asym_example(), false, true));
    for k in 2..=5 {
        cases.push((format!("identity:{k}"), builtin::identity(k).unwrap(), true, true));
    }
    for (name, ch, sym, sing) in &cases {
        let c = ch.classify();
        ensure(c.symmetric == *sym && c.singular == *sing, || {
            format!("{name}: symmetric={} singular={}", c.symmetric, c.singular)
        })?;
    }
    Ok(format!("{} channels", cases.len()))
}

fn random_channel(rng: &mut ChaCha8Rng) -> Channel {
    loop {
        let nx = rng.random_range(2..=5);
        let ny = rng.random_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..nx)
            .map(|_| (0..ny).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect())
            .collect();
        if rows.iter().any(|r| r.iter().sum::<f64>() == 0.0) {
            continue;
        }
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        if let Ok(ch) = Channel::validate(&rows) {
            return ch;
        }
    }
}

/// Atom `k` of a random base distribution lands on one of several outputs,
/// chosen per input, which makes every column constant.
fn random_singular(rng: &mut ChaCha8Rng) -> Channel {
    let nx = rng.random_range(2..=5);
    let atoms: Vec<(f64, usize)> =
        (0..rng.random_range(1..=3)).map(|_| (rng.random_range(0.1..1.0), rng.random_range(1..=2))).collect();
    let total: f64 = atoms.iter().map(|a| a.0).sum();
    let ny: usize = atoms.iter().map(|a| a.1).sum();
    let rows: Vec<Vec<f64>> = (0..nx)
        .map(|_| {
            let mut r = vec![0.0; ny];
            let mut off = 0;
            for &(m, l) in &atoms {
                r[off + rng.random_range(0..l)] = m / total;
                off += l;
            }
            r
        })
        .collect();
    Channel::validate(&rows).unwrap()
}

fn random_input(rng: &mut ChaCha8Rng, k: usize) -> InputDist {
    loop {
        let w: Vec<f64> = (0..k).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() }).collect();
        if let Ok(p) = InputDist::from_weights(&w) {
            return p;
        }
    }
}

fn c2_lemma1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut singular_verdicts = 0;
    for i in 0..1000 {
        let ch = if i < 500 { random_channel(&mut rng) } else { random_singular(&mut rng) };
        let p = random_input(&mut rng, ch.input_size());
        let vr = reverse_dispersion(&ch, &p);
        let sing = ch.is_singular_wrt(&p);
        singular_verdicts += sing as usize;
        ensure((vr < 1e-12) == sing, || format!("channel {i}: V^r = {vr:e}, singular = {sing}"))?;
        if i >= 500 {
            ensure(sing, || format!("constructed channel {i} not singular"))?;
        }
    }
    Ok(format!("1000 channels, {singular_verdicts} singular, 0 violations"))
}

fn c3_lemma4() -> Check {
    let cfg = CapacityConfig::default();
    let chans = [
        ("bec:0.3", builtin::bec(0.3).unwrap()),
        ("bec:0.5", builtin::bec(0.5).unwrap()),
        ("ternary:0.2,0.1", builtin::ternary(0.2, 0.1).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (name, ch) in &chans {
        let u = InputDist::uniform(ch.input_size());
        for lambda in [-2.0, -1.0, 0.5, 3.0] {
            let m0 = mgf(ch, &u, 0, lambda);
            for x in 1..ch.input_size() {
                let d = (mgf(ch, &u, x, lambda) - m0).abs();
                worst = worst.max(d);
                ensure(d <= 1e-12, || format!("{name}: MGF differs by {d:e} at lambda={lambda}"))?;
            }
        }
        let cap = probe_caid(ch, &cfg).map_err(|e| e.to_string())?.capacity;
        let (mean, var, m3) = decompose(ch, &u, Measure::Output).map_err(|e| e.to_string())?.moments();
        let v = dispersion(ch, &u);
        let m3x = third_moments(ch, &u).m3_x[0].unwrap();
        for (what, a, b) in [("mean", mean, cap), ("variance", var, v), ("third moment", m3, m3x)] {
            ensure((a - b).abs() <= 1e-10, || format!("{name}: {what} {a} vs {b}"))?;
        }
    }
    Ok(format!("max MGF spread {worst:.1e}"))
}

/// Thresholds on and between the lattice of attainable sums.
fn thresholds(values: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![-0.1];
    for_each_composition(n, values.len(), |k| {
        let s: f64 = k.iter().zip(values).map(|(&c, v)| c as f64 * v).sum();
        t.push(s);
        t.push(s + 1e-3);
    });
    t
}

fn c4_exact_vs_brute() -> Check {
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    let chans = [
        ("bec:0.5", builtin::bec(0.5).unwrap()),
        ("identity:2", builtin::identity(2).unwrap()),
        ("asym_example", builtin::asym_example()),
    ];
    for (name, ch) in &chans {
        let q = InputDist::uniform(ch.input_size());
        let out = decompose(ch, &q, Measure::Output).map_err(|e| e.to_string())?;
        let values: Vec<f64> = out.classes.iter().map(|c| c.value).collect();
        for n in 1..=6 {
            let ts = thresholds(&values, n);
            let mut cmp = |exact: (f64, f64), brute: (f64, f64), what: &str| -> Result<(), String> {
                let d = (exact.0 - brute.0).abs().max((exact.1 - brute.1).abs());
                worst = worst.max(d);
                checks += 1;
                ensure(d <= 1e-12, || format!("{name} n={n} {what}: exact {exact:?} brute {brute:?}"))
            };
            for &t in &ts {
                let e = tail_iid(&out, n, t, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
                let b = brute_force_cdf(ch, &q, &Source::Output(n), t).map_err(|e| e.to_string())?;
                cmp((e.cdf_at_threshold, e.tilted_sum), b, "q_Q")?;
            }
            let mut comps = Vec::new();
            for_each_composition(n, ch.input_size(), |k| comps.push(k.to_vec()));
            for counts in comps {
                let word: Vec<usize> =
                    counts.iter().enumerate().flat_map(|(x, &c)| std::iter::repeat_n(x, c)).collect();
                let rows = row_decompositions(ch, &q, &counts).map_err(|e| e.to_string())?;
                let groups: Vec<LetterGroup<'_>> = rows.iter().map(|(d, c)| LetterGroup { dec: d, count: *c }).collect();
                for &t in &ts {
                    let e = tail(&groups, t, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
                    let b = brute_force_cdf(ch, &q, &Source::Word(word.clone()), t).map_err(|e| e.to_string())?;
                    cmp((e.cdf_at_threshold, e.tilted_sum), b, &format!("word {word:?}"))?;
                }
            }
        }
    }
    Ok(format!("{checks} comparisons, max deviation {worst:.1e}"))
}

fn c5_lemma3_berry_esseen() -> Check {
    let ch = builtin::bec(0.5).unwrap();
    let q = InputDist::uniform(2);
    let out = decompose(&ch, &q, Measure::Output).map_err(|e| e.to_string())?;
    let row = decompose(&ch, &q, Measure::Row(0)).map_err(|e| e.to_string())?;
    let (m1, m2, m3) = out.moments();
    let mut checks = 0;
    for n in [10, 50, 100, 200] {
        let bound = lemma3_bound(m2, m3, n, true);
        for k in 0..=2 * n {
            let t = k as f64 * 0.5 * std::f64::consts::LN_2;
            for dec in [&out, &row] {
                let r = tail_iid(dec, n, t, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
                ensure(r.tilted_sum <= bound, || format!("n={n} t={t}: tilted {} > {bound}", r.tilted_sum))?;
                let (lo, hi) = berry_esseen(m1, m2, m3, n, t, true);
                ensure(lo <= r.cdf_at_threshold && r.cdf_at_threshold <= hi, || {
                    format!("n={n} t={t}: cdf {} outside [{lo}, {hi}]", r.cdf_at_threshold)
                })?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} thresholds"))
}

fn c6_prop1_constants() -> Check {
    let ch = builtin::bec(0.5).unwrap();
    let c5 = prop1_constants(&ch, 0.5).map_err(|e| e.to_string())?;
    let c1 = prop1_constants(&ch, 0.1).map_err(|e| e.to_string())?;
    ensure((c5.k_ratio - 1.0).abs() <= 1e-12, || format!("k(W) = {}", c5.k_ratio))?;
    ensure((c5.k - 4.6057).abs() <= 0.001, || format!("K(0.5) = {}", c5.k))?;
    ensure((c1.k - 10.470).abs() <= 0.002, || format!("K(0.1) = {}", c1.k))?;
    ensure(c5.n_o == 1110, || format!("n_o(0.5) = {}", c5.n_o))?;
    ensure(c5.threshold_holds(1110) && !c5.threshold_holds(1109), || "n_o integer check".into())?;
    Ok(format!("k = {}, K(0.5) = {:.6}, K(0.1) = {:.6}, n_o(0.5) = {}", c5.k_ratio, c5.k, c1.k, c5.n_o))
}

fn c7_proof_chain() -> Check {
    let ch = builtin::bec(0.5).unwrap();
    let q = InputDist::uniform(2);
    let mut margins = Vec::new();
    for eps in [0.1, 0.5] {
        let c = prop1_constants(&ch, eps).map_err(|e| e.to_string())?;
        for m in [1, 2, 4] {
            let n = (c.n_o * m) as usize;
            let b = lemma2_lower_bound(&ch, &q, &[n, 0], c.proof_rate(n), DEFAULT_ENUM_BUDGET)
                .map_err(|e| e.to_string())?;
            ensure(b.value > eps, || format!("eps={eps} n={n}: w_sr - tilted = {} <= eps", b.value))?;
            margins.push(format!("{:.4}", b.value - eps));
        }
    }
    Ok(format!("margins over eps: {}", margins.join(", ")))
}

fn c8_minimax_cross() -> Check {
    let ch = builtin::bec(0.5).unwrap();
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.3] {
        let c = prop1_constants(&ch, eps).map_err(|e| e.to_string())?;
        for n in [8, 16, 32] {
            let best = np_best_rate(&ch, eps, n, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?.rate;
            for rate in [c.proof_rate(n), best] {
                let a = np_tau_beta(&ch, eps, n, rate, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?.beta;
                let o = np_oracle(&ch, eps, n, rate, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
                let rel = (a - o).abs() / a;
                worst = worst.max(rel);
                ensure(rel <= 1e-10, || format!("eps={eps} n={n} R={rate}: {a} vs {o}"))?;
            }
        }
    }
    Ok(format!("max relative deviation {worst:.1e}"))
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

fn c9_third_order_gap() -> Check {
    let ch = builtin::bec(0.5).unwrap();
    let eps = 0.1;
    let c = prop1_constants(&ch, eps).map_err(|e| e.to_string())?;
    let q = normal::quantile(eps);
    let mut best = Vec::new();
    let mut proof = Vec::new();
    for n in [100usize, 400, 1600, 6400] {
        let nf = n as f64;
        let base = nf * c.capacity + (nf * c.v).sqrt() * q;
        let r = np_best_rate(&ch, eps, n, DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
        let p = np_tau_beta(&ch, eps, n, c.proof_rate(n), DEFAULT_ENUM_BUDGET).map_err(|e| e.to_string())?;
        best.push((nf.ln(), r.rate_bound_nats - base));
        proof.push((nf.ln(), p.rate_bound_nats - base));
    }
    for &(l, g) in &best {
        ensure((-5.0..=c.k).contains(&g), || format!("n={:.0}: gap {g} outside [-5, {}]", l.exp(), c.k))?;
    }
    let s = slope(&best);
    ensure(s < 0.1, || format!("slope {s}"))?;
    let fmt = |v: &[(f64, f64)]| v.iter().map(|p| format!("{:.3}", p.1)).collect::<Vec<_>>().join(", ");
    Ok(format!(
        "gaps {} (slope {s:.3}); at the proof rate {} (slope {:.3})",
        fmt(&best),
        fmt(&proof),
        slope(&proof)
    ))
}

fn c10_lemma2_audit() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut min_slack = f64::INFINITY;
    for (name, ch) in [("bec:0.5", builtin::bec(0.5).unwrap()), ("asym_example", builtin::asym_example())] {
        let k = ch.input_size();
        for trial in 0..100 {
            let n = rng.random_range(1..=6);
            let mut counts = vec![0; k];
            for _ in 0..n {
                counts[rng.random_range(0..k)] += 1;
            }
            let size = rng.random_range(1..=8);
            let cb = random_constant_composition(&counts, size, k, &mut rng).map_err(|e| e.to_string())?;
            let a = audit_lemma2(&ch, &cb).map_err(|e| format!("{name} trial {trial}: {e}"))?;
            min_slack = min_slack.min(a.ml_error - a.lower_bound.value);
            ensure(a.holds, || {
                format!("{name} trial {trial}: ML error {} < bound {}", a.ml_error, a.lower_bound.value)
            })?;
        }
    }
    Ok(format!("200 codebooks, 0 violations, min slack {min_slack:.3e}"))
}

fn c11_prop2() -> Check {
    let ch = builtin::asym_example();
    let mut notes = Vec::new();
    for eps in [0.1, 0.7] {
        let cfg = Prop2Config::default();
        let c = prop2_constants(&ch, eps, &cfg).map_err(|e| e.to_string())?;
        let positive = [
            ("delta", c.delta),
            ("nu", c.nu),
            ("gamma", c.gamma),
            ("v_max", c.v_max),
            ("kappa", c.kappa),
            ("K_s1", c.k_s1),
            ("beta1", c.beta1),
            ("beta2", c.beta2),
            ("K_total", c.k_total),
        ];
        for (what, v) in positive {
            ensure(v.is_finite() && v > 0.0, || format!("eps={eps}: {what} = {v}"))?;
        }
        if let Some(a) = c.a {
            ensure(a > 2.0 / (1.0 - eps), || format!("a = {a}"))?;
        }
        ensure(c.lemma5_margin(c.n_o) > eps, || format!("eps={eps}: margin fails at n_o = {}", c.n_o))?;
        ensure(c.n_o == 1 || c.lemma5_margin(c.n_o - 1) <= eps, || format!("eps={eps}: margin holds at n_o - 1"))?;
        ensure(c.lemma7_holds(c.n_tilde_o), || format!("eps={eps}: fails at n~_o"))?;
        ensure(c.n_tilde_o == 1 || !c.lemma7_holds(c.n_tilde_o - 1), || format!("eps={eps}: holds at n~_o - 1"))?;
        let fine = prop2_constants(&ch, eps, &Prop2Config { net: Some(c.net.refined()), ..Prop2Config::default() })
            .map_err(|e| e.to_string())?;
        let drift = (fine.k_total - c.k_total).abs() / c.k_total;
        ensure(drift < 0.05, || format!("eps={eps}: K_total drift {drift}"))?;
        notes.push(format!(
            "eps={eps}: delta={} n_o={} n~_o={} K_total={:.3} drift {drift:.1e}",
            c.delta, c.n_o, c.n_tilde_o, c.k_total
        ));
    }
    // The capacity the pipeline used must match the input it reports.
    let p = InputDist::new(prop2_constants(&ch, 0.1, &Prop2Config::default()).unwrap().caid).unwrap();
    ensure((mutual_info(&ch, &p) - 0.592_515_631_536_434).abs() < 1e-9, || "capacity mismatch".into())?;
    Ok(notes.join("; "))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Check); 11] = [
        (1, "classification suite", Duration::from_secs(1), c1_classification),
        (2, "reverse dispersion vs singularity", Duration::from_secs(10), c2_lemma1),
        (3, "moment identities of singular symmetric channels", Duration::from_secs(1), c3_lemma4),
        (4, "exact engine vs brute force", Duration::from_secs(30), c4_exact_vs_brute),
        (5, "tilted-sum and Berry-Esseen domination", Duration::from_secs(30), c5_lemma3_berry_esseen),
        (6, "symmetric converse constants on BEC(0.5)", Duration::from_secs(60), c6_prop1_constants),
        (7, "proof-chain inequality", Duration::from_secs(120), c7_proof_chain),
        (8, "minimax closed form vs Neyman-Pearson oracle", Duration::from_secs(60), c8_minimax_cross),
        (9, "bounded third-order gap", Duration::from_secs(300), c9_third_order_gap),
        (10, "change-of-measure lower bound audit", Duration::from_secs(120), c10_lemma2_audit),
        (11, "asymmetric converse pipeline", Duration::from_secs(300), c11_prop2),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (status, detail) = match (&result, elapsed <= limit) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; took longer than {limit:?}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} {status} {name} [{:.2}s]: {detail}", elapsed.as_secs_f64());
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
