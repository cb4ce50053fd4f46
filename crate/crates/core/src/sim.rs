//! Block codes over the state-dependent channel: exact and Monte-Carlo
//! maximum error, brute-force code search, and a finite-`n` probe of the
//! strong converse.
//!
//! Sequences are stored by index, row-major with the first letter most
//! significant (see [`crate::seq`]).

use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpProblem;
use crate::par::{map_ordered, map_range, Workers};
use crate::seq;

/// Largest `|S|ⁿ·|Y|ⁿ` summed over exactly.
pub const EXACT_LIMIT: u128 = 100_000_000;
/// Samples drawn from one random stream.
const BATCH: usize = 4096;
/// Encoders evaluated per parallel job in a search.
const SEARCH_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "Y")]
    pub y: usize,
}

#[derive(Serialize, Deserialize)]
struct RawCode {
    #[serde(rename = "M")]
    m: usize,
    n: usize,
    alphabets: Alphabets,
    f: Vec<Vec<usize>>,
    phi: Vec<usize>,
}

/// An `(M, n)` code: `f[m][s-sequence] = x-sequence` and `phi[y-sequence] = m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCode", into = "RawCode")]
pub struct Code {
    m: usize,
    n: usize,
    alphabets: Alphabets,
    f: Vec<Vec<usize>>,
    phi: Vec<usize>,
}

impl From<Code> for RawCode {
    fn from(c: Code) -> Self {
        RawCode {
            m: c.m,
            n: c.n,
            alphabets: c.alphabets,
            f: c.f,
            phi: c.phi,
        }
    }
}

impl TryFrom<RawCode> for Code {
    type Error = Error;
    fn try_from(r: RawCode) -> Result<Self> {
        Code::new(r.alphabets, r.n, r.f, r.phi)
    }
}

impl Code {
    pub fn new(alphabets: Alphabets, n: usize, f: Vec<Vec<usize>>, phi: Vec<usize>) -> Result<Self> {
        let m = f.len();
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("a code needs at least one message and one letter".into()));
        }
        let ns = seq::space_size(alphabets.s, n)?;
        let nx = seq::space_size(alphabets.x, n)?;
        let ny = seq::space_size(alphabets.y, n)?;
        for (i, row) in f.iter().enumerate() {
            if row.len() != ns {
                return Err(Error::ShapeMismatch(format!(
                    "f[{i}] has {} entries, expected |S|^n = {ns}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|&&x| x >= nx) {
                return Err(Error::InvalidInput(format!("f[{i}] names x-sequence {bad} of {nx}")));
            }
        }
        if phi.len() != ny {
            return Err(Error::ShapeMismatch(format!(
                "phi has {} entries, expected |Y|^n = {ny}",
                phi.len()
            )));
        }
        if let Some(bad) = phi.iter().find(|&&d| d >= m) {
            return Err(Error::InvalidInput(format!("phi decodes to message {bad} of {m}")));
        }
        Ok(Code {
            m,
            n,
            alphabets,
            f,
            phi,
        })
    }

    pub fn messages(&self) -> usize {
        self.m
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn alphabets(&self) -> Alphabets {
        self.alphabets
    }

    pub fn encoder(&self) -> &[Vec<usize>] {
        &self.f
    }

    pub fn decoder(&self) -> &[usize] {
        &self.phi
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codes always serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn check(&self, problem: &GpProblem) -> Result<()> {
        let a = self.alphabets;
        if (a.s, a.x, a.y) != (problem.n_states(), problem.n_inputs(), problem.n_outputs()) {
            return Err(Error::ShapeMismatch(format!(
                "code over |S|,|X|,|Y| = {},{},{}, channel over {},{},{}",
                a.s,
                a.x,
                a.y,
                problem.n_states(),
                problem.n_inputs(),
                problem.n_outputs()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub per_message: Vec<f64>,
    pub max_error: f64,
    pub average_error: f64,
    pub method: Method,
    /// Three-sigma normal-approximation half-widths, Monte-Carlo only.
    pub half_widths: Option<Vec<f64>>,
}

impl ErrorReport {
    fn new(per_message: Vec<f64>, method: Method, half_widths: Option<Vec<f64>>) -> Self {
        let max_error = per_message.iter().cloned().fold(0.0, f64::max);
        let average_error = per_message.iter().sum::<f64>() / per_message.len() as f64;
        ErrorReport {
            per_message,
            max_error,
            average_error,
            method,
            half_widths,
        }
    }
}

/// `table[(s * nx + x) * ny + y] = P_Sⁿ(s) Wⁿ(y|x,s)` over sequence indices.
struct Likelihoods {
    ns: usize,
    nx: usize,
    ny: usize,
    table: Vec<f64>,
}

impl Likelihoods {
    fn new(problem: &GpProblem, n: usize) -> Result<Self> {
        let (a_s, a_x, a_y) = (problem.n_states(), problem.n_inputs(), problem.n_outputs());
        let ns = seq::space_size(a_s, n)?;
        let nx = seq::space_size(a_x, n)?;
        let ny = seq::space_size(a_y, n)?;
        if (ns as u128) * (nx as u128) * (ny as u128) > EXACT_LIMIT {
            return Err(Error::TooLarge(format!("|S|^n·|X|^n·|Y|^n = {ns}·{nx}·{ny} at n = {n}")));
        }
        let w = problem.channel();
        let ps = problem.state_pmf();
        let mut table = vec![0.0; ns * nx * ny];
        for si in 0..ns {
            let s = seq::letters(si, a_s, n);
            let p_s: f64 = s.iter().map(|&l| ps.get(l)).product();
            for xi in 0..nx {
                let x = seq::letters(xi, a_x, n);
                for yi in 0..ny {
                    let y = seq::letters(yi, a_y, n);
                    let mut p = p_s;
                    for t in 0..n {
                        p *= w.get(s[t], x[t], y[t]);
                    }
                    table[(si * nx + xi) * ny + yi] = p;
                }
            }
        }
        Ok(Likelihoods { ns, nx, ny, table })
    }

    /// `Σ_s P_Sⁿ(s) Wⁿ(y | f(s), s)` for every `y`.
    fn averaged(&self, f_row: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (si, &xi) in f_row.iter().enumerate() {
            let base = (si * self.nx + xi) * self.ny;
            for (o, &p) in out.iter_mut().zip(&self.table[base..base + self.ny]) {
                *o += p;
            }
        }
    }

    /// Per-message error of `(f, phi)`, summing the mass decoded elsewhere.
    fn errors(&self, f: &[Vec<usize>], phi: &[usize]) -> Vec<f64> {
        let mut buf = vec![0.0; self.ny];
        f.iter()
            .enumerate()
            .map(|(m, row)| {
                self.averaged(row, &mut buf);
                buf.iter().zip(phi).filter(|(_, &d)| d != m).map(|(p, _)| p).sum()
            })
            .collect()
    }

    /// Maximum-likelihood decoder under the state-averaged likelihood; ties go to the lowest message.
    fn ml_decoder(&self, f: &[Vec<usize>]) -> Vec<usize> {
        let mut best = vec![f64::NEG_INFINITY; self.ny];
        let mut phi = vec![0; self.ny];
        let mut buf = vec![0.0; self.ny];
        for (m, row) in f.iter().enumerate() {
            self.averaged(row, &mut buf);
            for y in 0..self.ny {
                if buf[y] > best[y] {
                    best[y] = buf[y];
                    phi[y] = m;
                }
            }
        }
        phi
    }
}

/// Exact per-message and maximum error by summation over all state and output sequences.
pub fn exact_error(code: &Code, problem: &GpProblem) -> Result<ErrorReport> {
    code.check(problem)?;
    let (a_s, a_x, a_y) = (problem.n_states(), problem.n_inputs(), problem.n_outputs());
    let n = code.n;
    let ns = seq::space_size(a_s, n)?;
    let ny = seq::space_size(a_y, n)?;
    if (ns as u128) * (ny as u128) > EXACT_LIMIT {
        return Err(Error::TooLarge(format!("|S|^n·|Y|^n = {ns}·{ny} exceeds {EXACT_LIMIT}")));
    }
    let w = problem.channel();
    let ps = problem.state_pmf();
    let ys: Vec<Vec<usize>> = (0..ny).map(|yi| seq::letters(yi, a_y, n)).collect();
    let per_message = (0..code.m)
        .map(|m| {
            let mut err = 0.0;
            for si in 0..ns {
                let s = seq::letters(si, a_s, n);
                let x = seq::letters(code.f[m][si], a_x, n);
                let p_s: f64 = s.iter().map(|&l| ps.get(l)).product();
                if p_s == 0.0 {
                    continue;
                }
                for (yi, y) in ys.iter().enumerate() {
                    if code.phi[yi] == m {
                        continue;
                    }
                    let mut p = p_s;
                    for t in 0..n {
                        p *= w.get(s[t], x[t], y[t]);
                    }
                    err += p;
                }
            }
            err
        })
        .collect();
    Ok(ErrorReport::new(per_message, Method::Exact, None))
}

/// Monte-Carlo estimate from `samples` draws of `(Sⁿ, Yⁿ)` per message.
///
/// Samples are drawn in fixed batches, each from its own ChaCha stream keyed
/// by `(seed, message, batch)`, so the report is identical for any worker count.
pub fn mc_error(code: &Code, problem: &GpProblem, samples: usize, seed: u64, workers: Workers) -> Result<ErrorReport> {
    code.check(problem)?;
    if samples == 0 {
        return Err(Error::InvalidInput("at least one sample is needed".into()));
    }
    let (a_s, a_x, a_y) = (problem.n_states(), problem.n_inputs(), problem.n_outputs());
    let n = code.n;
    let state_draw = WeightedIndex::new(problem.state_pmf().probs())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let w = problem.channel();
    let mut row_draws = Vec::with_capacity(a_s * a_x);
    for s in 0..a_s {
        for x in 0..a_x {
            row_draws.push(WeightedIndex::new(w.row(s, x)).map_err(|e| Error::InvalidDistribution(e.to_string()))?);
        }
    }
    let batches = samples.div_ceil(BATCH);
    let jobs: Vec<(usize, usize)> = (0..code.m).flat_map(|m| (0..batches).map(move |b| (m, b))).collect();
    let counts = map_ordered(&jobs, workers, |&(m, b)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((m as u64) << 32) | b as u64);
        let todo = BATCH.min(samples - b * BATCH);
        let mut s = vec![0usize; n];
        let mut y = vec![0usize; n];
        let mut errors = 0u64;
        for _ in 0..todo {
            for l in s.iter_mut() {
                *l = state_draw.sample(&mut rng);
            }
            let x = seq::letters(code.f[m][seq::index(&s, a_s)], a_x, n);
            for t in 0..n {
                y[t] = row_draws[s[t] * a_x + x[t]].sample(&mut rng);
            }
            if code.phi[seq::index(&y, a_y)] != m {
                errors += 1;
            }
        }
        errors
    });
    let mut per_message = vec![0.0; code.m];
    let mut half = vec![0.0; code.m];
    for m in 0..code.m {
        let e: u64 = counts[m * batches..(m + 1) * batches].iter().sum();
        let p = e as f64 / samples as f64;
        per_message[m] = p;
        half[m] = 3.0 * (p * (1.0 - p) / samples as f64).sqrt();
    }
    Ok(ErrorReport::new(per_message, Method::MonteCarlo { samples, seed }, Some(half)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Random { k: u64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// For each encoder, also try every decoder and keep the best one.
    pub exhaustive_decoder: bool,
    /// Largest number of (encoder, decoder) pairs an exhaustive search may visit.
    pub max_codes: u128,
    pub workers: Workers,
    pub deadline: Option<Instant>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            exhaustive_decoder: false,
            max_codes: 10_000_000,
            workers: Workers::default(),
            deadline: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub code: Code,
    pub report: ErrorReport,
    pub encoders_visited: u64,
    /// The deadline stopped the search early.
    pub budget: bool,
}

/// Number of encoder tables `(|X|ⁿ)^(M·|S|ⁿ)`, saturating.
pub fn encoder_count(problem: &GpProblem, m: usize, n: usize) -> u128 {
    let base = (problem.n_inputs() as u128).saturating_pow(n as u32);
    let digits = (m as u128).saturating_mul((problem.n_states() as u128).saturating_pow(n as u32));
    if digits > u32::MAX as u128 {
        return u128::MAX;
    }
    base.saturating_pow(digits as u32)
}

fn decoder_count(problem: &GpProblem, m: usize, n: usize) -> u128 {
    let ny = (problem.n_outputs() as u128).saturating_pow(n as u32);
    if ny > u32::MAX as u128 {
        return u128::MAX;
    }
    (m as u128).saturating_pow(ny as u32)
}

fn encoder_table(mut idx: u64, m: usize, ns: usize, nx: usize) -> Vec<Vec<usize>> {
    let mut f = vec![vec![0; ns]; m];
    for cell in f.iter_mut().flatten().rev() {
        *cell = (idx % nx as u64) as usize;
        idx /= nx as u64;
    }
    f
}

/// Decoder and max error for an encoder: the averaged-likelihood rule, or the
/// best of all decoders (first in index order on ties).
fn decode(lk: &Likelihoods, f: &[Vec<usize>], exhaustive: bool) -> (Vec<usize>, f64) {
    let max_of = |phi: &[usize]| lk.errors(f, phi).into_iter().fold(0.0, f64::max);
    let ml = lk.ml_decoder(f);
    if !exhaustive {
        let e = max_of(&ml);
        return (ml, e);
    }
    let m = f.len();
    let total = (m as u64).pow(lk.ny as u32);
    let mut best = (ml.clone(), max_of(&ml));
    for i in 0..total {
        let phi = seq::letters(i as usize, m, lk.ny);
        let e = max_of(&phi);
        if e < best.1 {
            best = (phi, e);
        }
    }
    best
}

/// Smallest maximum error over encoder tables `f: M × Sⁿ → Xⁿ`. Ties keep the
/// first encoder in index order.
pub fn best_code_search(
    problem: &GpProblem,
    m: usize,
    n: usize,
    mode: SearchMode,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("M and n must be positive".into()));
    }
    let lk = Likelihoods::new(problem, n)?;
    let (ns, nx) = (lk.ns, lk.nx);
    let per_encoder = if opts.exhaustive_decoder {
        decoder_count(problem, m, n)
    } else {
        1
    };
    let encoders: u64 = match mode {
        SearchMode::Exhaustive => {
            let count = encoder_count(problem, m, n);
            if count.saturating_mul(per_encoder) > opts.max_codes {
                return Err(Error::BudgetExceeded(format!(
                    "exhaustive search over {count} encoders × {per_encoder} decoders exceeds {}",
                    opts.max_codes
                )));
            }
            count as u64
        }
        SearchMode::Random { k, .. } => {
            if opts.exhaustive_decoder && (k as u128).saturating_mul(per_encoder) > opts.max_codes {
                return Err(Error::BudgetExceeded(format!(
                    "{k} encoders × {per_encoder} decoders exceeds {}",
                    opts.max_codes
                )));
            }
            k.max(1)
        }
    };
    let table = |i: u64| -> Vec<Vec<usize>> {
        match mode {
            SearchMode::Exhaustive => encoder_table(i, m, ns, nx),
            SearchMode::Random { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                (0..m).map(|_| (0..ns).map(|_| rng.gen_range(0..nx)).collect()).collect()
            }
        }
    };

    let chunks = encoders.div_ceil(SEARCH_CHUNK) as usize;
    let mut best: Option<(f64, u64, Vec<usize>)> = None;
    let mut visited = 0u64;
    let mut budget = false;
    // a few chunks per round, so the deadline is checked regularly
    let round = 64usize;
    let mut start = 0usize;
    while start < chunks {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            budget = true;
            break;
        }
        let end = (start + round).min(chunks);
        let results = map_range(end - start, opts.workers, |c| {
            let lo = (start + c) as u64 * SEARCH_CHUNK;
            let hi = (lo + SEARCH_CHUNK).min(encoders);
            let mut local: Option<(f64, u64, Vec<usize>)> = None;
            for i in lo..hi {
                let f = table(i);
                let (phi, e) = decode(&lk, &f, opts.exhaustive_decoder);
                if local.as_ref().is_none_or(|b| e < b.0) {
                    local = Some((e, i, phi));
                }
            }
            (local, hi - lo)
        });
        for (local, count) in results {
            visited += count;
            if let Some(l) = local {
                if best.as_ref().is_none_or(|b| l.0 < b.0) {
                    best = Some(l);
                }
            }
        }
        start = end;
    }
    let (_, idx, phi) = best.ok_or_else(|| Error::BudgetExceeded("deadline passed before any code was evaluated".into()))?;
    let alphabets = Alphabets {
        s: problem.n_states(),
        x: problem.n_inputs(),
        y: problem.n_outputs(),
    };
    let code = Code::new(alphabets, n, table(idx), phi)?;
    let report = ErrorReport::new(lk.errors(&code.f, &code.phi), Method::Exact, None);
    Ok(SearchResult {
        code,
        report,
        encoders_visited: visited,
        budget,
    })
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Encoders drawn when exhaustive search is out of budget.
    pub random_k: u64,
    pub seed: u64,
    pub search: SearchOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            random_k: 10_000,
            seed: 0,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub n: usize,
    pub messages: usize,
    pub exhaustive: bool,
    pub max_error: f64,
    pub average_error: f64,
    pub budget: bool,
}

/// `M = ⌈exp(nR)⌉`, ignoring float noise just above an integer.
pub fn messages_for_rate(n: usize, rate: f64) -> usize {
    let target = (n as f64 * rate).exp();
    ((target - 1e-9).ceil() as usize).max(1)
}

/// Best-found maximum error at `M = ⌈exp(nR)⌉` for each blocklength. This is
/// finite-`n` evidence only.
pub fn strong_converse_probe(problem: &GpProblem, rate: f64, n_list: &[usize], opts: &ProbeOptions) -> Result<Vec<ProbeRow>> {
    if !(rate > 0.0) {
        return Err(Error::InvalidInput(format!("rate must be positive, got {rate}")));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = messages_for_rate(n, rate);
        let per_encoder = if opts.search.exhaustive_decoder {
            decoder_count(problem, m, n)
        } else {
            1
        };
        let exhaustive = encoder_count(problem, m, n).saturating_mul(per_encoder) <= opts.search.max_codes;
        let mode = if exhaustive {
            SearchMode::Exhaustive
        } else {
            SearchMode::Random {
                k: opts.random_k,
                seed: opts.seed ^ n as u64,
            }
        };
        let found = best_code_search(problem, m, n, mode, &opts.search)?;
        rows.push(ProbeRow {
            n,
            messages: m,
            exhaustive,
            max_error: found.report.max_error,
            average_error: found.report.average_error,
            budget: found.budget,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests;
