//! Channel matrices, input distributions and structural classification.
//!
//! A [`Channel`] is a row-stochastic matrix `W(y|x)`. Loading strips all-zero
//! output columns and keeps a map back to the original column indices.
//!
//! Two structural properties drive everything downstream:
//!
//! - *singular*: every positive entry of a column has the same value `delta_y`,
//!   so the information density of an output letter depends on the letter only;
//! - *symmetric* (Gallager): the outputs split into blocks inside which rows are
//!   permutations of each other and columns are permutations of each other.

use crate::error::{Error, Result};
use crate::numeric::{rel_eq, PROB_REL_TOL};
use serde::{Deserialize, Serialize};

const ROW_SUM_TOL: f64 = 1e-9;
const DIST_SUM_TOL: f64 = 1e-12;

/// A probability vector over the input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputDist(Vec<f64>);

impl InputDist {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::BadDistribution("empty".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::BadDistribution(format!("entry {i} is {v}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::BadDistribution(format!("sums to {s}")));
        }
        Ok(Self(p))
    }

    /// Normalizes a nonnegative weight vector.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::BadDistribution("weights must be nonnegative with positive sum".into()));
        }
        Ok(Self(w.iter().map(|v| v / s).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, x: usize) -> Self {
        let mut p = vec![0.0; k];
        p[x] = 1.0;
        Self(p)
    }

    /// The type of a word with the given letter counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::BadDistribution("empty composition".into()));
        }
        Ok(Self(counts.iter().map(|&c| c as f64 / n as f64).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(x, _)| x)
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|p| *p > 0.0)
    }
}

impl std::ops::Index<usize> for InputDist {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

/// On-disk channel description: `{"W": [[...]], "labels_x": [...], "labels_y": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_y: Option<Vec<String>>,
}

/// A validated discrete memoryless channel with no all-zero output column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    input_size: usize,
    output_size: usize,
    /// Row-major `W(y|x)`.
    w: Vec<f64>,
    /// `column_map[y]` is the index of output `y` in the matrix as loaded.
    column_map: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels_x: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels_y: Option<Vec<String>>,
}

impl Channel {
    /// Validates a raw matrix and strips all-zero columns.
    pub fn validate(raw: &[Vec<f64>]) -> Result<Self> {
        let rows = raw.len();
        let cols = raw.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for (x, row) in raw.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Ragged { row: x, expected: cols, found: row.len() });
            }
            for (y, &v) in row.iter().enumerate() {
                if v.is_nan() || v.is_infinite() {
                    return Err(Error::NonFinite { row: x, col: y });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row: x, col: y, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochastic { row: x, sum });
            }
        }
        let column_map: Vec<usize> =
            (0..cols).filter(|&y| raw.iter().any(|row| row[y] > 0.0)).collect();
        let w = raw
            .iter()
            .flat_map(|row| column_map.iter().map(move |&y| row[y]))
            .collect();
        Ok(Self {
            input_size: rows,
            output_size: column_map.len(),
            w,
            column_map,
            labels_x: None,
            labels_y: None,
        })
    }

    pub fn from_file(file: &ChannelFile) -> Result<Self> {
        let mut ch = Self::validate(&file.w)?;
        if let Some(lx) = &file.labels_x {
            if lx.len() != ch.input_size {
                return Err(Error::InvalidArgument(format!(
                    "labels_x has {} entries, channel has {} inputs",
                    lx.len(),
                    ch.input_size
                )));
            }
            ch.labels_x = Some(lx.clone());
        }
        if let Some(ly) = &file.labels_y {
            if ly.len() != file.w[0].len() {
                return Err(Error::InvalidArgument(format!(
                    "labels_y has {} entries, matrix has {} columns",
                    ly.len(),
                    file.w[0].len()
                )));
            }
            ch.labels_y = Some(ch.column_map.iter().map(|&y| ly[y].clone()).collect());
        }
        Ok(ch)
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn column_map(&self) -> &[usize] {
        &self.column_map
    }

    pub fn labels_y(&self) -> Option<&[String]> {
        self.labels_y.as_deref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.output_size + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.output_size..(x + 1) * self.output_size]
    }

    pub fn column(&self, y: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.input_size).map(move |x| self.get(x, y))
    }

    /// Matrix rows as nested vectors (post-stripping).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.input_size).map(|x| self.row(x).to_vec()).collect()
    }

    fn check_dist(&self, p: &InputDist) -> Result<()> {
        if p.len() != self.input_size {
            return Err(Error::BadDistribution(format!(
                "length {} does not match input alphabet size {}",
                p.len(),
                self.input_size
            )));
        }
        Ok(())
    }

    /// True iff the positive entries of every column are all equal.
    pub fn is_singular(&self) -> bool {
        (0..self.output_size).all(|y| column_constant(self.column(y)).is_some())
    }

    /// Singularity relative to the support of `p`: only inputs with `p(x) > 0`
    /// are compared.
    pub fn is_singular_wrt(&self, p: &InputDist) -> bool {
        assert_eq!(p.len(), self.input_size, "input distribution size mismatch");
        (0..self.output_size).all(|y| {
            column_constant((0..self.input_size).filter(|&x| p[x] > 0.0).map(|x| self.get(x, y)))
                .is_some()
        })
    }

    /// `delta_y` for every output, if the channel is singular.
    pub fn column_constants(&self) -> Option<Vec<f64>> {
        (0..self.output_size).map(|y| column_constant(self.column(y))).collect()
    }

    /// `alpha_y(Q)`: input mass that can reach `y`.
    pub fn alpha(&self, q: &InputDist, y: usize) -> f64 {
        (0..self.input_size).filter(|&x| self.get(x, y) > 0.0).map(|x| q[x]).sum()
    }

    pub fn alphas(&self, q: &InputDist) -> Vec<f64> {
        (0..self.output_size).map(|y| self.alpha(q, y)).collect()
    }

    /// `q_Q(y) = sum_x Q(x) W(y|x)`.
    pub fn output_dist(&self, q: &InputDist) -> Vec<f64> {
        let mut out = vec![0.0; self.output_size];
        for x in 0..self.input_size {
            if q[x] == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(x)) {
                *o += q[x] * w;
            }
        }
        out
    }

    /// Exact Gallager-symmetry decision with a witnessing output partition.
    ///
    /// Columns of one block must share the same multiset of entries, so blocks
    /// refine the grouping of columns by sorted entries. Conversely a union of
    /// valid blocks with equal column multisets is again valid (row multisets
    /// add up), so each multiset group can be tested as a whole: the channel
    /// is symmetric iff every group has the same row multiset in every row.
    pub fn detect_symmetry(&self) -> Symmetry {
        let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for y in 0..self.output_size {
            let key = sorted(self.column(y));
            match groups.iter_mut().find(|(k, _)| multiset_eq(k, &key)) {
                Some((_, members)) => members.push(y),
                None => groups.push((key, vec![y])),
            }
        }
        let valid = groups.iter().all(|(_, members)| {
            let first = sorted(members.iter().map(|&y| self.get(0, y)));
            (1..self.input_size)
                .all(|x| multiset_eq(&first, &sorted(members.iter().map(|&y| self.get(x, y)))))
        });
        if valid {
            Symmetry { symmetric: true, partition: Some(groups.into_iter().map(|(_, m)| m).collect()) }
        } else {
            Symmetry { symmetric: false, partition: None }
        }
    }

    pub fn classify(&self) -> Classification {
        let sym = self.detect_symmetry();
        let column_constants = self.column_constants();
        let singular = column_constants.is_some();
        let per_class = match (&sym.partition, &column_constants) {
            (Some(blocks), Some(deltas)) => {
                let u = InputDist::uniform(self.input_size);
                blocks
                    .iter()
                    .map(|block| {
                        let y = block[0];
                        ClassTriple {
                            delta: deltas[y],
                            alpha: self.alpha(&u, y),
                            nu: block.iter().filter(|&&b| self.get(0, b) > 0.0).count(),
                        }
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Classification {
            symmetric: sym.symmetric,
            partition: sym.partition,
            singular,
            column_constants,
            per_class,
        }
    }

    /// Validates that `p` belongs to this channel's input alphabet.
    pub fn require_dist(&self, p: &InputDist) -> Result<()> {
        self.check_dist(p)
    }
}

/// The common value of the positive entries, if they all agree.
fn column_constant(entries: impl Iterator<Item = f64>) -> Option<f64> {
    let mut delta: Option<f64> = None;
    for v in entries.filter(|v| *v > 0.0) {
        match delta {
            None => delta = Some(v),
            Some(d) if rel_eq(d, v, PROB_REL_TOL) => {}
            Some(_) => return None,
        }
    }
    // A column with no positive entries among the compared rows is vacuous.
    Some(delta.unwrap_or(0.0))
}

fn sorted(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn multiset_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x == y || rel_eq(*x, *y, PROB_REL_TOL))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Symmetry {
    pub symmetric: bool,
    pub partition: Option<Vec<Vec<usize>>>,
}

/// Per-block constants of a symmetric singular channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassTriple {
    /// Common positive entry of the block.
    pub delta: f64,
    /// `alpha_y(U)` for any output of the block.
    pub alpha: f64,
    /// Number of positive entries in a row of the block.
    pub nu: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub symmetric: bool,
    pub partition: Option<Vec<Vec<usize>>>,
    pub singular: bool,
    pub column_constants: Option<Vec<f64>>,
    pub per_class: Vec<ClassTriple>,
}

/// Built-in channels.
pub mod builtin {
    use super::*;

    pub fn bec(delta: f64) -> Result<Channel> {
        check_prob("bec erasure probability", delta)?;
        Channel::validate(&[vec![1.0 - delta, 0.0, delta], vec![0.0, 1.0 - delta, delta]])
    }

    pub fn bsc(p: f64) -> Result<Channel> {
        check_prob("bsc crossover probability", p)?;
        Channel::validate(&[vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn identity(k: usize) -> Result<Channel> {
        if k == 0 {
            return Err(Error::BadParameter("identity size must be positive".into()));
        }
        let rows: Vec<Vec<f64>> =
            (0..k).map(|x| (0..k).map(|y| if x == y { 1.0 } else { 0.0 }).collect()).collect();
        Channel::validate(&rows)
    }

    /// Three inputs, four outputs: singular but not symmetric.
    pub fn asym_example() -> Channel {
        let (a, b, c) = (2.0 / 3.0, 1.0 / 6.0, 5.0 / 6.0);
        Channel::validate(&[
            vec![a, b, 0.0, b],
            vec![0.0, 0.0, c, b],
            vec![0.0, b, c, 0.0],
        ])
        .expect("built-in matrix is stochastic")
    }

    /// Ternary symmetric singular channel.
    ///
    /// Outputs are the three inputs, the three input pairs and an erasure.
    /// Input `x` is received intact with probability `1 - 2*pair - erase`,
    /// lands on each of the two pair symbols containing `x` with probability
    /// `pair`, and is erased with probability `erase`.
    pub fn ternary(pair: f64, erase: f64) -> Result<Channel> {
        check_prob("ternary pair probability", pair)?;
        check_prob("ternary erasure probability", erase)?;
        let keep = 1.0 - 2.0 * pair - erase;
        if keep < 0.0 {
            return Err(Error::BadParameter(format!("2*{pair} + {erase} exceeds 1")));
        }
        // Pair symbols: {0,1}, {0,2}, {1,2}.
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|x| {
                let mut r = vec![0.0; 7];
                r[x] = keep;
                for (j, (a, b)) in pairs.iter().enumerate() {
                    if x == *a || x == *b {
                        r[3 + j] = pair;
                    }
                }
                r[6] = erase;
                r
            })
            .collect();
        Channel::validate(&rows)
    }

    fn check_prob(what: &str, v: f64) -> Result<()> {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(Error::BadParameter(format!("{what} must lie in [0, 1], got {v}")))
        }
    }

    /// Parses `name[:p1[,p2...]]`, e.g. `bec:0.5`, `bsc:0.11`, `identity:3`,
    /// `asym_example`, `ternary:0.2,0.1`.
    pub fn parse(spec: &str) -> Result<Channel> {
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n, p),
            None => (spec, ""),
        };
        let nums: Vec<f64> = if params.is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::BadParameter(format!("cannot parse '{s}' as a number")))
                })
                .collect::<Result<_>>()?
        };
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::BadParameter(format!("{name} takes {k} parameter(s), got {}", nums.len())))
            }
        };
        match name {
            "bec" => {
                want(1)?;
                bec(nums[0])
            }
            "bsc" => {
                want(1)?;
                bsc(nums[0])
            }
            "identity" => {
                want(1)?;
                let k = nums[0];
                if k < 1.0 || k.fract() != 0.0 {
                    return Err(Error::BadParameter(format!("identity size must be a positive integer, got {k}")));
                }
                identity(k as usize)
            }
            "asym_example" => {
                want(0)?;
                Ok(asym_example())
            }
            "ternary" => {
                want(2)?;
                ternary(nums[0], nums[1])
            }
            other => Err(Error::BadParameter(format!("unknown builtin channel '{other}'"))),
        }
    }
}
