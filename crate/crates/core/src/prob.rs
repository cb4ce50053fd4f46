//! Probability primitives and information measures on finite alphabets.
//!
//! All logarithms are natural; every quantity is in nats. The conventions
//! `0 ln 0 = 0` and `0 ln (0/0) = 0` are applied termwise, and divergences
//! that are infinite because of a support violation are reported as
//! [`ExtReal::Infinite`] rather than as a floating-point overflow.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};

/// Inputs farther than this from the simplex are rejected; closer ones are renormalized.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A nonnegative real extended with `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The finite value, or `None` for `+∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// Lossy conversion for display and arithmetic with plain floats.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

fn validate_simplex(mut probs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what}: empty alphabet")));
    }
    for (i, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidDistribution(format!("{what}: entry {i} is {p}")));
        }
        if *p < 0.0 {
            if *p < -SIMPLEX_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "{what}: entry {i} is negative ({p})"
                )));
            }
            *p = 0.0;
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
        )));
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(probs)
}

/// A probability vector over `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Pmf {
            probs: validate_simplex(probs, "pmf")?,
        })
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform pmf over an empty alphabet");
        Pmf {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        assert!(at < k);
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Pmf { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }
}

/// A stochastic matrix; row `a` is the pmf `P(· | a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondPmf {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CondPmf {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidDistribution("conditional pmf: empty".into()));
        }
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * cols);
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "conditional pmf row {a} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend(validate_simplex(row, &format!("conditional pmf row {a}"))?);
        }
        Ok(CondPmf {
            rows: n_rows,
            cols,
            data,
        })
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        CondPmf {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.cols..(a + 1) * self.cols]
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|a| self.row(a).to_vec()).collect()
    }
}

/// A pmf on a product of up to four named finite alphabets, stored row-major
/// with the first axis most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    names: Vec<String>,
    sizes: Vec<usize>,
    data: Vec<f64>,
}

impl JointPmf {
    pub const MAX_AXES: usize = 4;

    pub fn new(names: &[&str], sizes: &[usize], data: Vec<f64>) -> Result<Self> {
        if names.len() != sizes.len() || sizes.is_empty() || sizes.len() > Self::MAX_AXES {
            return Err(Error::ShapeMismatch(format!(
                "joint pmf needs 1..={} axes with one name each",
                Self::MAX_AXES
            )));
        }
        let total: usize = sizes.iter().product();
        if total != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "joint pmf table has {} entries, axes imply {total}",
                data.len()
            )));
        }
        Ok(JointPmf {
            names: names.iter().map(|s| s.to_string()).collect(),
            sizes: sizes.to_vec(),
            data: validate_simplex(data, "joint pmf")?,
        })
    }

    /// `P(a, b) = p(a) · P(b | a)` over axes `(name_a, name_b)`.
    pub fn from_marginal_and_conditional(
        name_a: &str,
        name_b: &str,
        p: &Pmf,
        cond: &CondPmf,
    ) -> Result<Self> {
        if p.len() != cond.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "marginal has {} letters, conditional has {} rows",
                p.len(),
                cond.n_rows()
            )));
        }
        let mut data = Vec::with_capacity(p.len() * cond.n_cols());
        for a in 0..p.len() {
            data.extend(cond.row(a).iter().map(|c| p.get(a) * c));
        }
        JointPmf::new(&[name_a, name_b], &[p.len(), cond.n_cols()], data)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn axis(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Entry at a full multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.flat_index(index)]
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &k)| acc * k + i)
    }

    /// Marginal table over `axes` (in the given order), flattened row-major.
    pub fn marginal_table(&self, axes: &[usize]) -> Result<Vec<f64>> {
        let mut seen = [false; Self::MAX_AXES];
        for &a in axes {
            if a >= self.sizes.len() || seen[a] {
                return Err(Error::AxisMisuse(format!(
                    "axis {a} out of range or repeated for a {}-axis joint",
                    self.sizes.len()
                )));
            }
            seen[a] = true;
        }
        let out_len: usize = axes.iter().map(|&a| self.sizes[a]).product();
        let mut out = vec![0.0; out_len];
        let mut idx = vec![0usize; self.sizes.len()];
        for &p in &self.data {
            let o = axes
                .iter()
                .fold(0, |acc, &a| acc * self.sizes[a] + idx[a]);
            out[o] += p;
            // odometer increment, last axis fastest
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.sizes[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(out)
    }

    pub fn marginal(&self, axes: &[usize]) -> Result<JointPmf> {
        let data = self.marginal_table(axes)?;
        let names: Vec<&str> = axes.iter().map(|&a| self.names[a].as_str()).collect();
        let sizes: Vec<usize> = axes.iter().map(|&a| self.sizes[a]).collect();
        JointPmf::new(&names, &sizes, data)
    }

    pub fn marginal_pmf(&self, axis: usize) -> Result<Pmf> {
        Pmf::new(self.marginal_table(&[axis])?)
    }

    /// Joint entropy of the variables on `axes`.
    pub fn entropy_of(&self, axes: &[usize]) -> Result<f64> {
        Ok(entropy_slice(&self.marginal_table(axes)?))
    }
}

/// Entropy of a nonnegative table, in nats, with `0 ln 0 = 0`.
pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// A state-dependent DMC `W(y | x, s)`, stored as `[s][x][y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    n_s: usize,
    n_x: usize,
    n_y: usize,
    w: Vec<f64>,
}

impl Channel {
    /// Build from a nested `[s][x][y]` table.
    pub fn new(w: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_s = w.len();
        let n_x = w.first().map(Vec::len).unwrap_or(0);
        let n_y = w.first().and_then(|r| r.first()).map(Vec::len).unwrap_or(0);
        if n_s == 0 || n_x == 0 || n_y == 0 {
            return Err(Error::ShapeMismatch("channel with an empty alphabet".into()));
        }
        let mut flat = Vec::with_capacity(n_s * n_x * n_y);
        for (s, by_x) in w.into_iter().enumerate() {
            if by_x.len() != n_x {
                return Err(Error::ShapeMismatch(format!(
                    "channel state {s} has {} input rows, expected {n_x}",
                    by_x.len()
                )));
            }
            for (x, row) in by_x.into_iter().enumerate() {
                if row.len() != n_y {
                    return Err(Error::ShapeMismatch(format!(
                        "channel row (s={s}, x={x}) has {} entries, expected {n_y}",
                        row.len()
                    )));
                }
                flat.extend(validate_simplex(row, &format!("channel row (s={s}, x={x})"))?);
            }
        }
        Ok(Channel {
            n_s,
            n_x,
            n_y,
            w: flat,
        })
    }

    /// A channel without state: `W(y|x)` with a single state letter.
    pub fn stateless(w: Vec<Vec<f64>>) -> Result<Self> {
        Channel::new(vec![w])
    }

    /// Rows already known to be valid pmfs (used by optimizers that build rows on the simplex).
    pub(crate) fn from_flat_unchecked(n_s: usize, n_x: usize, n_y: usize, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), n_s * n_x * n_y);
        Channel { n_s, n_x, n_y, w }
    }

    pub fn n_states(&self) -> usize {
        self.n_s
    }

    pub fn n_inputs(&self) -> usize {
        self.n_x
    }

    pub fn n_outputs(&self) -> usize {
        self.n_y
    }

    pub fn get(&self, s: usize, x: usize, y: usize) -> f64 {
        self.w[(s * self.n_x + x) * self.n_y + y]
    }

    pub fn row(&self, s: usize, x: usize) -> &[f64] {
        let start = (s * self.n_x + x) * self.n_y;
        &self.w[start..start + self.n_y]
    }

    pub fn flat(&self) -> &[f64] {
        &self.w
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_s)
            .map(|s| (0..self.n_x).map(|x| self.row(s, x).to_vec()).collect())
            .collect()
    }

    pub fn same_shape(&self, other: &Channel) -> bool {
        self.n_s == other.n_s && self.n_x == other.n_x && self.n_y == other.n_y
    }
}

pub fn entropy(p: &Pmf) -> f64 {
    entropy_slice(p.probs())
}

/// Termwise `Σ p ln(p/q)` over plain slices of equal length.
pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> ExtReal {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return ExtReal::Infinite;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    ExtReal::Finite(acc.max(0.0))
}

pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<ExtReal> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "kl divergence over alphabets of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_slices(p.probs(), q.probs()))
}

/// `D(V ‖ W | P_SX) = Σ_{s,x} P(s,x) D(V(·|x,s) ‖ W(·|x,s))`, with `p_sx` over axes `(S, X)`.
pub fn conditional_kl(v: &Channel, w: &Channel, p_sx: &JointPmf) -> Result<ExtReal> {
    if !v.same_shape(w) {
        return Err(Error::ShapeMismatch("conditional kl: channel shapes differ".into()));
    }
    if p_sx.sizes() != [v.n_states(), v.n_inputs()] {
        return Err(Error::ShapeMismatch(format!(
            "conditional kl: weights over {:?}, channels over S×X = {}×{}",
            p_sx.sizes(),
            v.n_states(),
            v.n_inputs()
        )));
    }
    let mut acc = ExtReal::ZERO;
    for s in 0..v.n_states() {
        for x in 0..v.n_inputs() {
            let weight = p_sx.get(&[s, x]);
            if weight <= 0.0 {
                continue;
            }
            match kl_slices(v.row(s, x), w.row(s, x)) {
                ExtReal::Finite(d) => acc = acc + ExtReal::Finite(weight * d),
                ExtReal::Infinite => return Ok(ExtReal::Infinite),
            }
        }
    }
    Ok(acc)
}

/// `I(A ∧ B) = H(A) + H(B) − H(A, B)` for disjoint axis groups; slightly negative
/// round-off (≥ −1e-10) is clamped to zero.
pub fn mutual_information(joint: &JointPmf, axes_a: &[usize], axes_b: &[usize]) -> Result<f64> {
    if axes_a.is_empty() || axes_b.is_empty() {
        return Err(Error::AxisMisuse("mutual information needs two nonempty axis groups".into()));
    }
    if axes_a.iter().any(|a| axes_b.contains(a)) {
        return Err(Error::AxisMisuse(format!(
            "axis groups {axes_a:?} and {axes_b:?} overlap"
        )));
    }
    let both: Vec<usize> = axes_a.iter().chain(axes_b).copied().collect();
    let mi = joint.entropy_of(axes_a)? + joint.entropy_of(axes_b)? - joint.entropy_of(&both)?;
    if mi < -1e-10 {
        return Err(Error::Numerical(format!("mutual information evaluated to {mi}")));
    }
    Ok(mi.max(0.0))
}

/// Output pmf `P_Y(y) = Σ_{s,x} P(s,x) W(y|x,s)` for `p_sx` over `(S, X)`.
pub fn compose_output(p_sx: &JointPmf, w: &Channel) -> Result<Pmf> {
    if p_sx.sizes() != [w.n_states(), w.n_inputs()] {
        return Err(Error::ShapeMismatch(format!(
            "output composition: weights over {:?}, channel over S×X = {}×{}",
            p_sx.sizes(),
            w.n_states(),
            w.n_inputs()
        )));
    }
    let mut out = vec![0.0; w.n_outputs()];
    for s in 0..w.n_states() {
        for x in 0..w.n_inputs() {
            let weight = p_sx.get(&[s, x]);
            for (o, &wy) in out.iter_mut().zip(w.row(s, x)) {
                *o += weight * wy;
            }
        }
    }
    Pmf::new(out)
}
