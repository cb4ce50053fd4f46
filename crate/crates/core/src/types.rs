//! Method-of-types machinery with exact counting for small blocklengths.
//!
//! Typicality is the strong (per-letter absolute deviation) kind: a sequence is
//! `δ`-typical for `P` when every empirical frequency is within `δ` of `P` and
//! letters outside the support of `P` never occur.

use crate::error::{Error, Result};
use crate::prob::{Channel, CondPmf, Pmf};
use crate::seq;
use crate::simplex::compositions;

/// Slack added to every `≤ δ` comparison so that exact rational boundaries
/// (e.g. `|4/10 − 1/2| = 0.1`) are not lost to rounding.
const CMP_EPS: f64 = 1e-12;

/// Upper limit on enumerated types or sequences.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// The type (empirical composition) of a length-`n` sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeClass {
    counts: Vec<usize>,
    n: usize,
}

impl TypeClass {
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput("type of an empty sequence".into()));
        }
        Ok(TypeClass { counts, n })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn empirical(&self) -> Pmf {
        Pmf::new(
            self.counts
                .iter()
                .map(|&c| c as f64 / self.n as f64)
                .collect(),
        )
        .expect("counts sum to n")
    }

    /// `n! / Π c_a!`, the size of the type class.
    pub fn size(&self) -> u128 {
        multinomial(&self.counts)
    }
}

pub fn multinomial(counts: &[usize]) -> u128 {
    let mut acc: u128 = 1;
    let mut total: u128 = 0;
    for &c in counts {
        for i in 1..=c as u128 {
            total += 1;
            acc = acc * total / i;
        }
    }
    acc
}

pub fn type_of(seq: &[usize], k: usize) -> Result<TypeClass> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("blocklength must be at least 1".into()));
    }
    let mut counts = vec![0usize; k];
    for (t, &a) in seq.iter().enumerate() {
        if a >= k {
            return Err(Error::InvalidInput(format!(
                "letter {a} at position {t} outside alphabet of size {k}"
            )));
        }
        counts[a] += 1;
    }
    TypeClass::from_counts(counts)
}

/// All types of length-`n` sequences over `k` letters, each once,
/// in lexicographic order of descending leading counts.
pub fn enumerate_types(n: usize, k: usize) -> Result<Vec<TypeClass>> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput("need n ≥ 1 and k ≥ 1".into()));
    }
    let count = crate::simplex::binomial((n + k - 1) as u128, (k - 1) as u128);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "{count} types of length {n} over {k} letters"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut parts = vec![0usize; k];
    compositions(n, &mut parts, 0, &mut |c| {
        out.push(TypeClass {
            counts: c.to_vec(),
            n,
        })
    });
    Ok(out)
}

/// `T^n_[P]_δ`: strongly typical sequences of length `n`.
#[derive(Clone, Debug)]
pub struct TypicalSet {
    reference: Pmf,
    n: usize,
    delta: f64,
}

impl TypicalSet {
    pub fn new(reference: Pmf, n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("blocklength must be at least 1".into()));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput(format!("typicality slack {delta} < 0")));
        }
        Ok(TypicalSet {
            reference,
            n,
            delta,
        })
    }

    pub fn reference(&self) -> &Pmf {
        &self.reference
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether sequences of this type belong to the set.
    pub fn admits(&self, t: &TypeClass) -> bool {
        t.counts.iter().enumerate().all(|(a, &c)| {
            let p = self.reference.get(a);
            if p == 0.0 {
                return c == 0;
            }
            (c as f64 / self.n as f64 - p).abs() <= self.delta + CMP_EPS
        })
    }

    pub fn contains(&self, seq: &[usize]) -> Result<bool> {
        if seq.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "sequence of length {} tested against a length-{} typical set",
                seq.len(),
                self.n
            )));
        }
        Ok(self.admits(&type_of(seq, self.reference.len())?))
    }

    /// Exact cardinality, summing type-class sizes of admissible types.
    pub fn count(&self) -> Result<u128> {
        Ok(enumerate_types(self.n, self.reference.len())?
            .iter()
            .filter(|t| self.admits(t))
            .map(TypeClass::size)
            .sum())
    }

    /// Exact `Pⁿ(T)` under an i.i.d. source `p`.
    pub fn probability(&self, p: &Pmf) -> Result<f64> {
        if p.len() != self.reference.len() {
            return Err(Error::ShapeMismatch("source and reference alphabets differ".into()));
        }
        Ok(enumerate_types(self.n, p.len())?
            .iter()
            .filter(|t| self.admits(t))
            .map(|t| {
                let log_seq: f64 = t
                    .counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(a, &c)| c as f64 * p.get(a).ln())
                    .sum();
                t.size() as f64 * log_seq.exp()
            })
            .sum())
    }

    /// Every member sequence (small `n` only), in mixed-radix order.
    pub fn enumerate(&self) -> Result<Vec<Vec<usize>>> {
        let k = self.reference.len();
        let total = seq::space_size(k, self.n)?;
        if total as u128 > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!("{k}^{} sequences", self.n)));
        }
        Ok((0..total)
            .map(|i| seq::letters(i, k, self.n))
            .filter(|s| self.admits(&type_of(s, k).expect("letters in range")))
            .collect())
    }
}

pub fn typical_membership(ts: &TypicalSet, seq: &[usize]) -> Result<bool> {
    ts.contains(seq)
}

pub fn typical_count(ts: &TypicalSet) -> Result<u128> {
    ts.count()
}

/// `x ∈ T^n_[P_{X|S}]_δ(s)`: every joint pair count `N(s,x)` is within `nδ` of
/// `N(s) P(x|s)`, and pairs with `P(x|s) = 0` never occur.
pub fn conditional_typical_membership(
    cond: &CondPmf,
    delta: f64,
    s_seq: &[usize],
    x_seq: &[usize],
) -> Result<bool> {
    if s_seq.len() != x_seq.len() {
        return Err(Error::ShapeMismatch(format!(
            "state sequence length {} differs from input sequence length {}",
            s_seq.len(),
            x_seq.len()
        )));
    }
    if s_seq.is_empty() {
        return Err(Error::InvalidInput("blocklength must be at least 1".into()));
    }
    let (ns, nx) = (cond.n_rows(), cond.n_cols());
    let mut pair = vec![0usize; ns * nx];
    let mut single = vec![0usize; ns];
    for (&s, &x) in s_seq.iter().zip(x_seq) {
        if s >= ns || x >= nx {
            return Err(Error::InvalidInput(format!("pair ({s}, {x}) outside alphabets")));
        }
        pair[s * nx + x] += 1;
        single[s] += 1;
    }
    let n = s_seq.len() as f64;
    for s in 0..ns {
        for x in 0..nx {
            let c = pair[s * nx + x];
            let p = cond.get(s, x);
            if p == 0.0 && c > 0 {
                return Ok(false);
            }
            if (c as f64 - single[s] as f64 * p).abs() / n > delta + CMP_EPS {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Bounds on the minimal image size `g_{Wⁿ}(B, τ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSize {
    pub lower: u64,
    pub upper: u64,
    /// Set when the bounded exhaustive search settled the value.
    pub exact: Option<u64>,
}

/// Outputs beyond which no greedy bound is attempted.
pub const IMAGE_GREEDY_LIMIT: usize = 20_000;
/// Outputs beyond which no exhaustive search is attempted.
pub const IMAGE_EXACT_LIMIT: usize = 20;
const IMAGE_EXACT_SUBSETS: u128 = 2_000_000;

/// Smallest `|D|`, `D ⊆ Yⁿ`, with `Wⁿ(D | x, s) > τ` for every pair `(x, s)` in `b`.
///
/// The upper bound comes from a greedy cover that repeatedly adds the output
/// sequence raising the worst-covered pair the most; the lower bound is
/// `max_b ⌊τ / max_y Wⁿ(y|b)⌋ + 1`. Small instances are settled exactly by
/// scanning subsets in increasing size.
pub fn min_image_size(b: &[(Vec<usize>, Vec<usize>)], ch: &Channel, tau: f64) -> Result<ImageSize> {
    if b.is_empty() {
        return Err(Error::InvalidInput("empty input set".into()));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("τ = {tau} must lie in [0, 1)")));
    }
    let n = b[0].0.len();
    if n == 0 || b.iter().any(|(x, s)| x.len() != n || s.len() != n) {
        return Err(Error::ShapeMismatch("input pairs must share one positive length".into()));
    }
    let ny = ch.n_outputs();
    let total = seq::space_size(ny, n)?;
    if total > IMAGE_GREEDY_LIMIT {
        return Err(Error::TooLarge(format!("{ny}^{n} output sequences")));
    }
    // mass[i][y] = Wⁿ(y | x_i, s_i)
    let mut mass = Vec::with_capacity(b.len());
    for (x, s) in b {
        for (&xi, &si) in x.iter().zip(s) {
            if xi >= ch.n_inputs() || si >= ch.n_states() {
                return Err(Error::InvalidInput(format!("letter pair ({xi}, {si}) out of range")));
            }
        }
        let row: Vec<f64> = (0..total)
            .map(|yi| {
                let y = seq::letters(yi, ny, n);
                (0..n).map(|t| ch.get(s[t], x[t], y[t])).product()
            })
            .collect();
        mass.push(row);
    }

    let lower = mass
        .iter()
        .map(|row| {
            let top = row.iter().cloned().fold(0.0, f64::max);
            (tau / top).floor() as u64 + 1
        })
        .max()
        .unwrap_or(1);

    // greedy cover
    let mut covered = vec![0.0; b.len()];
    let mut chosen = vec![false; total];
    let mut upper = 0u64;
    while covered.iter().any(|&c| c <= tau) {
        let mut best: Option<(f64, f64, usize)> = None;
        for y in 0..total {
            if chosen[y] {
                continue;
            }
            let mut worst = f64::INFINITY;
            let mut sum = 0.0;
            for (i, row) in mass.iter().enumerate() {
                let after = covered[i] + row[y];
                sum += after;
                if covered[i] <= tau {
                    worst = worst.min(after);
                }
            }
            let better = match best {
                None => true,
                Some((bw, bs, _)) => worst > bw || (worst == bw && sum > bs),
            };
            if better {
                best = Some((worst, sum, y));
            }
        }
        let (_, _, y) = best.expect("an unchosen output remains while some pair is uncovered");
        chosen[y] = true;
        upper += 1;
        for (i, row) in mass.iter().enumerate() {
            covered[i] += row[y];
        }
    }

    let exact = if lower == upper {
        Some(upper)
    } else if total <= IMAGE_EXACT_LIMIT {
        exhaustive_image_size(&mass, total, tau, lower, upper)
    } else {
        None
    };
    let (lower, upper) = match exact {
        Some(e) => (e, e),
        None => (lower, upper),
    };
    Ok(ImageSize {
        lower,
        upper,
        exact,
    })
}

/// Scans subset sizes `lower..upper`; `upper` itself is attained by the greedy cover.
fn exhaustive_image_size(mass: &[Vec<f64>], total: usize, tau: f64, lower: u64, upper: u64) -> Option<u64> {
    let mut budget = IMAGE_EXACT_SUBSETS;
    for k in lower..upper {
        let c = crate::simplex::binomial(total as u128, k as u128);
        if c > budget {
            return None;
        }
        budget -= c;
        let mut pick: Vec<usize> = (0..k as usize).collect();
        loop {
            if mass
                .iter()
                .all(|row| pick.iter().map(|&y| row[y]).sum::<f64>() > tau)
            {
                return Some(k);
            }
            if !next_combination(&mut pick, total) {
                break;
            }
        }
    }
    Some(upper)
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
