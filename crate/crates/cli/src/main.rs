mod output;

use clap::{Args, Parser, Subcommand};
use dmc_converse::bounds::{converse_constants, theorem1_series, Prop2Config};
use dmc_converse::channel::{builtin, Channel, ChannelFile};
use dmc_converse::exactdist::DEFAULT_ENUM_BUDGET;
use dmc_converse::measures::{capacity, moment_profile, sp_exponent, CapacityConfig, SpConfig};
use dmc_converse::minimax::{np_best_rate, np_tau_beta};
use dmc_converse::verify::{audit_lemma2, random_constant_composition};
use dmc_converse::{bounds::prop1_constants, ErrorKind};
use output::{ChannelInfo, Format, Report};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

const MAX_N_VALUES: usize = 100_000;

#[derive(Parser)]
#[command(name = "dmc-converse", version, about = "Finite-blocklength converse bounds for singular discrete memoryless channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetry and singularity of the channel.
    Classify(Common),
    /// Capacity, dispersions and third moments at the capacity-achieving input.
    Measures(Common),
    /// Normal approximation with the third-order term, per n.
    Approx(Common),
    /// Explicit converse bound, per n.
    Converse(Common),
    /// Exact Neyman-Pearson bound against the optimal output distribution, per n.
    Minimax {
        #[command(flatten)]
        common: Common,
        /// `proof`, `best`, or a rate in nats.
        #[arg(long, default_value = "proof")]
        rate: String,
    },
    /// Randomized audits of the singular lower bound against exact ML decoding.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Codebooks per blocklength.
        #[arg(long, default_value_t = 20)]
        codebooks: usize,
        /// Codewords per codebook.
        #[arg(long, default_value_t = 4)]
        size: usize,
    },
    /// Sphere-packing exponent over a rate grid.
    Spexp {
        #[command(flatten)]
        common: Common,
        /// Rates in nats as A:B:STEP; defaults to 21 points on [0, C].
        #[arg(long)]
        rates: Option<String>,
    },
}

#[derive(Args, Clone, Serialize)]
struct Common {
    /// Channel file: {"W": [[...]], "labels_x": [...], "labels_y": [...]}.
    #[arg(long, group = "source", required = true)]
    channel: Option<PathBuf>,
    /// Builtin channel, e.g. bec:0.5, bsc:0.11, identity:3, ternary:0.2,0.1, asym_example.
    #[arg(long, group = "source", required = true)]
    builtin: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    /// Blocklength or range A[:B[:STEP]].
    #[arg(long)]
    n: Option<String>,
    #[serde(skip)]
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ENUM_BUDGET)]
    enum_budget: u64,
    /// Simplex grid resolution for searches over input distributions.
    #[arg(long)]
    grid: Option<usize>,
    #[serde(skip)]
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(dmc_converse::Error),
    Io(std::io::Error),
}

impl From<dmc_converse::Error> for Failure {
    fn from(e: dmc_converse::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (msg, code) = match f {
                Failure::Usage(m) => (m, 2),
                Failure::Io(e) => (e.to_string(), 2),
                Failure::Core(e) => {
                    let code = match e.kind() {
                        ErrorKind::Validation => 2,
                        ErrorKind::NotApplicable => 3,
                        ErrorKind::Budget => 4,
                    };
                    (e.to_string(), code)
                }
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Res<()> {
    match cmd {
        Command::Classify(c) => {
            let ch = load(&c)?;
            emit("classify", &c, &ch, config(&c, Value::Null), vec![json(&ch.classify())])
        }
        Command::Measures(c) => {
            let ch = load(&c)?;
            let cfg = cap_config(&c);
            let r = moment_profile(&ch, &cfg)?;
            emit("measures", &c, &ch, config(&c, json(&cfg)), vec![json(&r)])
        }
        Command::Approx(c) => {
            let ch = load(&c)?;
            let eps = eps(&c)?;
            let rows = ns(&c)?.into_iter().map(|n| Ok(json(&theorem1_series(&ch, eps, n)?))).collect::<Res<_>>()?;
            emit("approx", &c, &ch, config(&c, Value::Null), rows)
        }
        Command::Converse(c) => {
            let ch = load(&c)?;
            let eps = eps(&c)?;
            let cfg = prop2_config(&c);
            let k = converse_constants(&ch, eps, &cfg)?;
            let rows = ns(&c)?.into_iter().map(|n| json(&k.report(n))).collect();
            emit("converse", &c, &ch, config(&c, json(&cfg)), rows)
        }
        Command::Minimax { common: c, rate } => {
            let ch = load(&c)?;
            let eps = eps(&c)?;
            let budget = c.enum_budget;
            let rows = match rate.as_str() {
                "best" => ns(&c)?.into_iter().map(|n| Ok(json(&np_best_rate(&ch, eps, n, budget)?))).collect::<Res<_>>()?,
                "proof" => {
                    let k = prop1_constants(&ch, eps)?;
                    ns(&c)?
                        .into_iter()
                        .map(|n| Ok(json(&np_tau_beta(&ch, eps, n, k.proof_rate(n), budget)?)))
                        .collect::<Res<_>>()?
                }
                r => {
                    let r: f64 = r.parse().map_err(|_| Failure::Usage(format!("--rate: cannot parse '{r}'")))?;
                    if !(r.is_finite() && r >= 0.0) {
                        return Err(Failure::Usage(format!("--rate must be a nonnegative number, got {r}")));
                    }
                    ns(&c)?.into_iter().map(|n| Ok(json(&np_tau_beta(&ch, eps, n, r, budget)?))).collect::<Res<_>>()?
                }
            };
            emit("minimax", &c, &ch, config(&c, serde_json::json!({ "rate": rate })), rows)
        }
        Command::Verify { common: c, codebooks, size } => {
            let ch = load(&c)?;
            if size == 0 {
                return Err(Failure::Usage("--size must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let k = ch.input_size();
            let mut rows = Vec::new();
            for n in ns(&c)? {
                // Balanced composition, remainder to the lowest inputs.
                let counts: Vec<usize> = (0..k).map(|x| n / k + usize::from(x < n % k)).collect();
                for index in 0..codebooks {
                    let cb = random_constant_composition(&counts, size, k, &mut rng)?;
                    let audit = audit_lemma2(&ch, &cb)?;
                    let mut v = json(&audit);
                    if let Value::Object(m) = &mut v {
                        m.shift_insert(1, "codebook".into(), index.into());
                        m.insert("codewords".into(), json(&cb.codewords));
                    }
                    rows.push(v);
                }
            }
            let extra = serde_json::json!({ "codebooks": codebooks, "size": size });
            emit("verify", &c, &ch, config(&c, extra), rows)
        }
        Command::Spexp { common: c, rates } => {
            let ch = load(&c)?;
            let cap = capacity(&ch, &cap_config(&c))?.capacity;
            let grid = match &rates {
                Some(s) => float_range(s)?,
                None => (0..=20).map(|i| cap * i as f64 / 20.0).collect(),
            };
            let cfg = SpConfig { grid: c.grid, ..SpConfig::default() };
            let rows = grid.into_iter().map(|r| Ok(json(&sp_exponent(&ch, r, cap, &cfg)?))).collect::<Res<_>>()?;
            let extra = serde_json::json!({ "rates": rates, "capacity": cap, "sp": cfg });
            emit("spexp", &c, &ch, config(&c, extra), rows)
        }
    }
}

fn load(c: &Common) -> Res<Channel> {
    match (&c.channel, &c.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            let file: ChannelFile = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(Channel::from_file(&file)?)
        }
        (None, Some(spec)) => Ok(builtin::parse(spec)?),
        _ => Err(Failure::Usage("exactly one of --channel and --builtin is required".into())),
    }
}

fn eps(c: &Common) -> Res<f64> {
    match c.eps {
        Some(e) if e > 0.0 && e < 1.0 => Ok(e),
        Some(e) => Err(Failure::Usage(format!("--eps must lie in (0, 1), got {e}"))),
        None => Err(Failure::Usage("--eps is required".into())),
    }
}

fn ns(c: &Common) -> Res<Vec<usize>> {
    let spec = c.n.as_deref().ok_or_else(|| Failure::Usage("--n is required".into()))?;
    parse_range(spec)
}

fn parse_range(spec: &str) -> Res<Vec<usize>> {
    let bad = || Failure::Usage(format!("--n: expected A[:B[:STEP]] with 1 <= A <= B, got '{spec}'"));
    let parts: Vec<usize> = spec.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Res<_>>()?;
    let (a, b, step) = match parts[..] {
        [a] => (a, a, 1),
        [a, b] => (a, b, 1),
        [a, b, s] => (a, b, s),
        _ => return Err(bad()),
    };
    if a == 0 || b < a || step == 0 {
        return Err(bad());
    }
    if (b - a) / step >= MAX_N_VALUES {
        return Err(Failure::Usage(format!("--n: range has more than {MAX_N_VALUES} values")));
    }
    Ok((a..=b).step_by(step).collect())
}

fn float_range(spec: &str) -> Res<Vec<f64>> {
    let bad = || Failure::Usage(format!("--rates: expected A:B:STEP with 0 <= A <= B and STEP > 0, got '{spec}'"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Res<_>>()?;
    let (a, b, step) = match parts[..] {
        [a] => (a, a, 1.0),
        [a, b, s] => (a, b, s),
        _ => return Err(bad()),
    };
    if !(a >= 0.0 && b >= a && step > 0.0 && b.is_finite()) {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > MAX_N_VALUES {
        return Err(Failure::Usage(format!("--rates: more than {MAX_N_VALUES} values")));
    }
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

fn cap_config(c: &Common) -> CapacityConfig {
    CapacityConfig { seed: c.seed, ..CapacityConfig::default() }
}

fn prop2_config(c: &Common) -> Prop2Config {
    let mut cfg = Prop2Config { capacity: cap_config(c), ..Prop2Config::default() };
    if let Some(g) = c.grid {
        cfg.grid = Some(g);
    }
    cfg
}

fn config(c: &Common, extra: Value) -> Value {
    let mut v = json(c);
    if let Value::Object(m) = &mut v {
        m.insert("enum_budget".into(), c.enum_budget.into());
        if !extra.is_null() {
            m.insert("engine".into(), extra);
        }
    }
    v
}

fn json<T: Serialize + ?Sized>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

/// SHA-256 of the validated matrix as compact JSON rows.
fn channel_hash(ch: &Channel) -> String {
    let bytes = serde_json::to_vec(&ch.to_rows()).expect("matrix serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn emit(command: &'static str, c: &Common, ch: &Channel, config: Value, results: Vec<Value>) -> Res<()> {
    let report = Report {
        tool: "dmc-converse",
        version: env!("CARGO_PKG_VERSION"),
        command,
        channel: ChannelInfo { sha256: channel_hash(ch), inputs: ch.input_size(), outputs: ch.output_size() },
        config,
        results,
    };
    match &c.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            output::write(&report, c.format, &mut f)?;
            std::io::Write::flush(&mut f)?;
        }
        None => {
            let stdout = std::io::stdout();
            output::write(&report, c.format, &mut stdout.lock())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("5").ok(), Some(vec![5]));
        assert_eq!(parse_range("100:400:100").ok(), Some(vec![100, 200, 300, 400]));
        assert_eq!(parse_range("3:5").ok(), Some(vec![3, 4, 5]));
        for bad in ["0", "5:4", "1:2:0", "a", "1:2:3:4"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
        let r = float_range("0:0.5:0.1").ok().unwrap();
        assert_eq!(r.len(), 6);
    }

    #[test]
    fn hash_is_stable_for_equal_matrices() {
        let a = builtin::parse("bec:0.5").ok().unwrap();
        let b = Channel::validate(&a.to_rows()).ok().unwrap();
        assert_eq!(channel_hash(&a), channel_hash(&b));
        assert_ne!(channel_hash(&a), channel_hash(&builtin::parse("bec:0.4").ok().unwrap()));
    }
}
