//! Small numerical helpers shared by the engines.

/// Relative tolerance used when comparing transition probabilities.
pub const PROB_REL_TOL: f64 = 1e-12;

/// `a == b` up to relative tolerance `tol`.
pub fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Table of `ln k!` for `k = 0..=n`, accumulated with compensation.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::new();
        table.push(0.0);
        for k in 1..=n {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// `ln( n! / prod k_j! )` with `n = sum k_j`.
    pub fn ln_multinomial(&self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        counts.iter().fold(self.get(n), |acc, &k| acc - self.get(k))
    }
}

/// Number of compositions of `n` into `parts` nonnegative parts, saturating.
pub fn composition_count(n: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(n == 0);
    }
    // C(n + parts - 1, parts - 1)
    let k = (parts - 1) as u128;
    let top = (n + parts - 1) as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Visit every composition of `n` into `parts` nonnegative parts in
/// lexicographic order (first part descending).
pub fn for_each_composition<F: FnMut(&[usize])>(n: usize, parts: usize, mut f: F) {
    if parts == 0 {
        if n == 0 {
            f(&[]);
        }
        return;
    }
    let mut k = vec![0usize; parts];
    k[0] = n;
    loop {
        f(&k);
        let Some(i) = (0..parts - 1).rev().find(|&i| k[i] > 0) else {
            return;
        };
        let tail: usize = k[i + 1..].iter().sum();
        k[i] -= 1;
        for slot in k[i + 1..].iter_mut() {
            *slot = 0;
        }
        k[i + 1] = tail + 1;
    }
}

/// All points `k / resolution` of the probability simplex of dimension `dim`.
pub fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let r = resolution as f64;
    for_each_composition(resolution, dim, |k| {
        out.push(k.iter().map(|&c| c as f64 / r).collect());
    });
    out
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
