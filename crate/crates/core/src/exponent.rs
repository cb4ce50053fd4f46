//! Sphere-packing exponent
//!
//! ```text
//! E_SP(R) = min_{P̃_S} max_{P̃_{X|S}} min_{V ∈ 𝒱(R, P̃_S P̃_{X|S})} D(P̃_S‖P_S) + D(V‖W | P̃_S P̃_{X|S})
//! ```
//!
//! where `𝒱(R, P_SX)` holds the channels `V` whose best GP rate under the
//! input marginal `P_SX` does not exceed `R`. All three layers are searched on
//! simplex lattices and then refined locally around the incumbents.
//!
//! The search is a branch and bound. The inner minimum scans candidate
//! channels in ascending divergence, so the first member found is the lattice
//! minimum. Each middle cell carries a floor (the running maximum of its
//! chunk) below which its exact value is not needed, and a cap (what the outer
//! incumbent leaves over) above which the whole outer candidate is hopeless.
//! Floors and caps are frozen per fixed-size chunk, so results do not depend
//! on the number of workers.
//!
//! Membership is decided with certificates: any policy whose rate exceeds the
//! threshold proves `V ∉ 𝒱`, and the Frank–Wolfe bound of the alternating
//! maximization proves `V ∈ 𝒱`. When neither shows up within the iteration
//! limit the current rate estimate decides and the result is flagged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gp::{augment_receiver_csi, gp_rate_max, GpOptions, GpProblem, Landscape, RunLimits, Stop, Strategies};
use crate::par::{map_ordered, Workers};
use crate::prob::{conditional_kl, kl_divergence, kl_slices, Channel, CondPmf, ExtReal, JointPmf, Pmf};
use crate::simplex;

/// Middle cells evaluated between two incumbent updates.
const CHUNK: usize = 32;

#[derive(Clone, Debug)]
pub struct ExponentOptions {
    /// Lattice step for the state pmf.
    pub s_step: f64,
    /// Lattice step for each row of the input conditional.
    pub x_step: f64,
    /// Lattice step for each row of the test channel.
    pub v_step: f64,
    /// Local refinement rounds around the outer and middle incumbents; each
    /// round searches `±step` at `step / 5`.
    pub refine_rounds: usize,
    /// Coordinate-descent levels on the channel rows, at `v_step / 5^k`.
    pub descent_levels: usize,
    /// Membership requires `rate ≤ R − strictness_margin`.
    pub strictness_margin: f64,
    /// Iteration limit of one membership decision.
    pub feasibility_iter: usize,
    /// The channel lattice is coarsened until it has at most this many points.
    pub max_v_candidates: usize,
    pub workers: Workers,
    pub deadline: Option<Instant>,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions {
            s_step: 0.05,
            x_step: 0.05,
            v_step: 0.1,
            refine_rounds: 1,
            descent_levels: 2,
            strictness_margin: 0.0,
            feasibility_iter: 2000,
            max_v_candidates: 250_000,
            workers: Workers::default(),
            deadline: None,
        }
    }
}

impl ExponentOptions {
    /// The same options with every lattice step halved.
    pub fn halved(&self) -> Self {
        ExponentOptions {
            s_step: self.s_step / 2.0,
            x_step: self.x_step / 2.0,
            v_step: self.v_step / 2.0,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, step) in [("s_step", self.s_step), ("x_step", self.x_step), ("v_step", self.v_step)] {
            if !(step > 0.0 && step <= 0.5) {
                return Err(Error::InvalidInput(format!("{name} = {step} is outside (0, 0.5]")));
            }
        }
        if !(self.strictness_margin >= 0.0) {
            return Err(Error::InvalidInput("strictness margin must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ExponentQuery {
    pub problem: GpProblem,
    pub rate: f64,
    pub opts: ExponentOptions,
}

impl ExponentQuery {
    pub fn new(problem: GpProblem, rate: f64, opts: ExponentOptions) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidInput(format!("rate must be positive and finite, got {rate}")));
        }
        opts.validate()?;
        Ok(ExponentQuery { problem, rate, opts })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExponentFlags {
    /// The deadline stopped the search; the value is the best found so far.
    pub budget: bool,
    /// A witness has a zero coordinate where the reference is positive.
    pub boundary: bool,
    /// The channel lattice was coarser than requested.
    pub coarsened: bool,
    /// Some membership decision ran out of iterations without a certificate.
    pub undecided: bool,
    /// Replaced by its left neighbour during curve cleanup.
    pub repaired: bool,
}

impl ExponentFlags {
    fn merge(&mut self, other: ExponentFlags) {
        self.budget |= other.budget;
        self.boundary |= other.boundary;
        self.coarsened |= other.coarsened;
        self.undecided |= other.undecided;
        self.repaired |= other.repaired;
    }

    /// Names of the raised flags, in a fixed order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (on, name) in [
            (self.budget, "budget"),
            (self.boundary, "boundary"),
            (self.coarsened, "coarsened"),
            (self.undecided, "undecided"),
            (self.repaired, "repaired"),
        ] {
            if on {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ExponentResult {
    pub rate: f64,
    pub value: ExtReal,
    pub p_s: Option<Pmf>,
    pub p_x_given_s: Option<CondPmf>,
    pub v: Option<Channel>,
    /// Best GP rate of the witness channel under the witness input marginal.
    pub witness_rate: Option<f64>,
    /// `R − strictness_margin − witness_rate`; nonnegative for members.
    pub feasibility_margin: Option<f64>,
    pub flags: ExponentFlags,
}

#[derive(Clone, Debug)]
pub struct ExponentCurve {
    pub samples: Vec<(f64, ExponentResult)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub rate: f64,
    pub budget: bool,
}

/// Whether `v ∈ 𝒱(R, p_sx)`, i.e. `gp_rate_max(v, p_sx) ≤ R − margin`.
pub fn v_set_contains(v: &Channel, rate: f64, p_sx: &JointPmf, margin: f64, opts: &GpOptions) -> Result<Membership> {
    let r = gp_rate_max(v, p_sx, opts)?;
    Ok(Membership {
        member: r.rate <= rate - margin,
        rate: r.rate,
        budget: r.flags.budget,
    })
}

fn ext(v: f64) -> ExtReal {
    if v.is_finite() {
        ExtReal::Finite(v)
    } else {
        ExtReal::Infinite
    }
}

/// Lattice rows of one `(s, x)` slot of the test channel, with their divergence from `W`.
#[derive(Clone, Debug)]
struct RowTable {
    rows: Vec<Vec<f64>>,
    kl: Vec<f64>,
}

fn row_tables(w: &Channel, step: f64) -> Vec<RowTable> {
    let mut out = Vec::new();
    for s in 0..w.n_states() {
        for x in 0..w.n_inputs() {
            let wr = w.row(s, x);
            let support: Vec<bool> = wr.iter().map(|&p| p > 0.0).collect();
            let mut rows = simplex::support_grid(&support, step);
            if !rows.iter().any(|r| r.as_slice() == wr) {
                rows.push(wr.to_vec());
            }
            let kl = rows.iter().map(|r| kl_slices(r, wr).to_f64()).collect();
            out.push(RowTable { rows, kl });
        }
    }
    out
}

/// Outcome of one inner minimization under a floor and a cap.
#[derive(Clone, Debug)]
enum Inner {
    /// Minimum found: divergence and the flat test channel.
    Value(f64, Vec<f64>),
    /// Some member has divergence `≤ floor`.
    AtMost,
    /// Every member has divergence `≥ cap`.
    AtLeast,
    /// No member on the lattice.
    Empty,
}

#[derive(Clone, Copy, Debug)]
struct Key(f64, u32);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Membership oracle for one input marginal, reusing certificates across calls.
struct Oracle {
    land: Landscape,
    dims: (usize, usize, usize),
    threshold: f64,
    iter: usize,
    cert: Option<Vec<f64>>,
    undecided: bool,
}

impl Oracle {
    fn member(&mut self, v: &[f64]) -> bool {
        let (ns, nx, ny) = self.dims;
        self.land.set_channel(&Channel::from_flat_unchecked(ns, nx, ny, v.to_vec()));
        if let Some(c) = &self.cert {
            if self.land.value_at(c) > self.threshold {
                return false;
            }
        }
        let out = self.land.run(
            self.land.uniform_start(),
            RunLimits {
                tol: 1e-12,
                max_iter: self.iter,
                threshold: Some(self.threshold),
                deadline: None,
            },
        );
        match out.stop {
            Stop::Above => {
                self.cert = Some(out.pi);
                false
            }
            Stop::Below => true,
            Stop::IterationLimit | Stop::Deadline => {
                self.undecided = true;
                out.value <= self.threshold
            }
            Stop::Converged => out.value <= self.threshold,
        }
    }
}

/// Shared data of one exponent evaluation.
struct Search<'a> {
    problem: &'a GpProblem,
    threshold: f64,
    opts: &'a ExponentOptions,
    v_step: f64,
    tables: Vec<RowTable>,
    coarsened: bool,
}

#[derive(Clone, Debug)]
struct CellResult {
    inner: Inner,
    undecided: bool,
}

impl<'a> Search<'a> {
    fn new(problem: &'a GpProblem, rate: f64, opts: &'a ExponentOptions) -> Self {
        let w = problem.channel();
        let mut step = opts.v_step;
        let mut coarsened = false;
        let mut tables = row_tables(w, step);
        while tables.iter().map(|t| t.rows.len() as f64).product::<f64>() > opts.max_v_candidates as f64
            && step < 0.5
        {
            step = (step * 2.0).min(0.5);
            coarsened = true;
            tables = row_tables(w, step);
        }
        // rates are nonnegative, so at R ≤ 0 the open set is empty
        let threshold = if rate > 0.0 { rate - opts.strictness_margin } else { -1.0 };
        Search {
            problem,
            threshold,
            opts,
            v_step: step,
            tables,
            coarsened,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let w = self.problem.channel();
        (w.n_states(), w.n_inputs(), w.n_outputs())
    }

    /// Inner minimum for the marginal `p_s(s) cond[s * nx + x]`.
    fn cell(&self, p_s: &[f64], cond: &[f64], floor: f64, cap: f64) -> CellResult {
        let (ns, nx, ny) = self.dims();
        let w = self.problem.channel();
        if self.threshold < 0.0 {
            return CellResult {
                inner: Inner::Empty,
                undecided: false,
            };
        }
        let weights: Vec<f64> = (0..ns * nx).map(|i| p_s[i / nx] * cond[i]).collect();
        let active: Vec<usize> = (0..ns * nx).filter(|&i| weights[i] > 0.0).collect();
        let land = match Landscape::new(p_s, Strategies::all(ns, nx), w, Some(cond)) {
            Some(l) => l,
            None => {
                return CellResult {
                    inner: Inner::Empty,
                    undecided: false,
                }
            }
        };
        let mut oracle = Oracle {
            land,
            dims: (ns, nx, ny),
            threshold: self.threshold,
            iter: self.opts.feasibility_iter,
            cert: None,
            undecided: false,
        };

        // every combination of active-row lattice points, by mixed-radix index
        let radix: Vec<usize> = active.iter().map(|&r| self.tables[r].rows.len()).collect();
        let total: usize = radix.iter().product();
        let mut keys = Vec::with_capacity(total);
        let mut digits = vec![0usize; active.len()];
        for idx in 0..total {
            let d: f64 = active
                .iter()
                .zip(&digits)
                .map(|(&r, &k)| weights[r] * self.tables[r].kl[k])
                .sum();
            keys.push(Key(d, idx as u32));
            for pos in (0..digits.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < radix[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
        let mut heap = BinaryHeap::from(keys);
        let build = |idx: usize| -> Vec<f64> {
            let mut v = w.flat().to_vec();
            let mut rest = idx;
            for pos in (0..active.len()).rev() {
                let k = rest % radix[pos];
                rest /= radix[pos];
                let r = active[pos];
                v[r * ny..(r + 1) * ny].copy_from_slice(&self.tables[r].rows[k]);
            }
            v
        };

        let found = loop {
            let Some(Key(d, idx)) = heap.pop() else {
                break None;
            };
            if d >= cap {
                return CellResult {
                    inner: Inner::AtLeast,
                    undecided: oracle.undecided,
                };
            }
            let v = build(idx as usize);
            if oracle.member(&v) {
                break Some((d, v));
            }
        };
        let Some((mut d, mut v)) = found else {
            return CellResult {
                inner: Inner::Empty,
                undecided: oracle.undecided,
            };
        };
        if d <= floor {
            return CellResult {
                inner: Inner::AtMost,
                undecided: oracle.undecided,
            };
        }

        // coordinate descent on rows, moving mass between support letters
        for level in 1..=self.opts.descent_levels {
            let delta = self.v_step / 5f64.powi(level as i32);
            for _sweep in 0..200 {
                let mut improved = false;
                for &r in &active {
                    let wr = w.row(r / nx, r % nx);
                    let support: Vec<usize> = (0..ny).filter(|&y| wr[y] > 0.0).collect();
                    for &i in &support {
                        for &j in &support {
                            if i == j {
                                continue;
                            }
                            let row = &v[r * ny..(r + 1) * ny];
                            let step = delta.min(row[i]);
                            if step <= 0.0 {
                                continue;
                            }
                            let mut new_row = row.to_vec();
                            new_row[i] -= step;
                            new_row[j] += step;
                            let old_kl = kl_slices(row, wr).to_f64();
                            let new_kl = kl_slices(&new_row, wr).to_f64();
                            let nd = d + weights[r] * (new_kl - old_kl);
                            if nd >= d - 1e-15 {
                                continue;
                            }
                            let mut cand = v.clone();
                            cand[r * ny..(r + 1) * ny].copy_from_slice(&new_row);
                            if oracle.member(&cand) {
                                v = cand;
                                d = nd;
                                improved = true;
                                if d <= floor {
                                    return CellResult {
                                        inner: Inner::AtMost,
                                        undecided: oracle.undecided,
                                    };
                                }
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        CellResult {
            inner: Inner::Value(d.max(0.0), v),
            undecided: oracle.undecided,
        }
    }

    fn deadline_passed(&self) -> bool {
        self.opts.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Max over input conditionals of the inner minimum, for a fixed state pmf.
    fn middle(&self, p_s: &[f64], cap: f64, hint: Option<&[f64]>, flags: &mut ExponentFlags) -> Middle {
        let (ns, nx, _) = self.dims();
        let active: Vec<usize> = (0..ns).filter(|&s| p_s[s] > 0.0).collect();
        let row_grid = simplex::simplex_grid(nx, self.opts.x_step);
        let uniform = vec![1.0 / nx as f64; nx];
        let assemble = |choice: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
            let mut cond = Vec::with_capacity(ns * nx);
            for s in 0..ns {
                match active.iter().position(|&a| a == s) {
                    Some(pos) => cond.extend(choice(pos)),
                    None => cond.extend_from_slice(&uniform),
                }
            }
            cond
        };

        let mut cands: Vec<Vec<f64>> = Vec::new();
        if let Some(h) = hint {
            cands.push(assemble(&|pos| h[active[pos] * nx..(active[pos] + 1) * nx].to_vec()));
        }
        let count = row_grid.len().pow(active.len() as u32);
        for i in 0..count {
            let digits = crate::seq::letters(i, row_grid.len(), active.len());
            let c = assemble(&|pos| row_grid[digits[pos]].clone());
            if hint.is_none() || c != cands[0] {
                cands.push(c);
            }
        }

        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        if !self.scan(p_s, &cands, cap, &mut best, flags) {
            return Middle::Abort;
        }
        let mut radius = self.opts.x_step;
        for _ in 0..self.opts.refine_rounds {
            let Some((_, center, _)) = best.clone() else { break };
            let step = radius / 5.0;
            let locals: Vec<Vec<Vec<f64>>> = active
                .iter()
                .map(|&s| {
                    let row = &center[s * nx..(s + 1) * nx];
                    simplex::local_grid(row, &vec![true; nx], radius, step)
                })
                .collect();
            let radix: Vec<usize> = locals.iter().map(|l| l.len()).collect();
            let total: usize = radix.iter().product();
            let mut refined = Vec::with_capacity(total);
            for i in 0..total {
                let mut rest = i;
                let mut picks = vec![0; radix.len()];
                for pos in (0..radix.len()).rev() {
                    picks[pos] = rest % radix[pos];
                    rest /= radix[pos];
                }
                let c = assemble(&|pos| locals[pos][picks[pos]].clone());
                if c != center {
                    refined.push(c);
                }
            }
            if !self.scan(p_s, &refined, cap, &mut best, flags) {
                return Middle::Abort;
            }
            radius = step;
        }
        match best {
            Some((d, cond, v)) => Middle::Value(d, cond, v),
            None => Middle::Abort,
        }
    }

    /// Folds chunks of middle cells into `best`; false when the state pmf is hopeless.
    fn scan(
        &self,
        p_s: &[f64],
        cands: &[Vec<f64>],
        cap: f64,
        best: &mut Option<(f64, Vec<f64>, Vec<f64>)>,
        flags: &mut ExponentFlags,
    ) -> bool {
        for chunk in cands.chunks(CHUNK) {
            if self.deadline_passed() {
                flags.budget = true;
                return best.is_some();
            }
            let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
            let results = map_ordered(chunk, self.opts.workers, |cond| self.cell(p_s, cond, floor, cap));
            for (cond, res) in chunk.iter().zip(results) {
                flags.undecided |= res.undecided;
                match res.inner {
                    Inner::Value(d, v) => {
                        if best.as_ref().is_none_or(|b| d > b.0) {
                            *best = Some((d, cond.clone(), v));
                        }
                    }
                    Inner::AtMost => {}
                    Inner::AtLeast | Inner::Empty => return false,
                }
            }
        }
        true
    }
}

enum Middle {
    Value(f64, Vec<f64>, Vec<f64>),
    Abort,
}

struct Incumbent {
    value: f64,
    p_s: Vec<f64>,
    cond: Vec<f64>,
    v: Vec<f64>,
}

fn has_boundary(p: &[f64], reference: &[f64]) -> bool {
    p.iter().zip(reference).any(|(&a, &b)| a == 0.0 && b > 0.0)
}

fn run_search(query: &ExponentQuery, warm: Option<(&[f64], &[f64])>) -> Result<ExponentResult> {
    query.opts.validate()?;
    let problem = &query.problem;
    let opts = &query.opts;
    let search = Search::new(problem, query.rate, opts);
    let (ns, nx, ny) = search.dims();
    let p_true = problem.state_pmf().probs();
    let mut flags = ExponentFlags {
        coarsened: search.coarsened,
        ..ExponentFlags::default()
    };

    let mut outer: Vec<Vec<f64>> = Vec::new();
    if let Some((ps, _)) = warm {
        outer.push(ps.to_vec());
    }
    outer.push(p_true.to_vec());
    let support: Vec<bool> = p_true.iter().map(|&p| p > 0.0).collect();
    for g in simplex::support_grid(&support, opts.s_step) {
        if !outer.contains(&g) {
            outer.push(g);
        }
    }

    let mut inc: Option<Incumbent> = None;
    let mut hint: Option<Vec<f64>> = warm.map(|(_, c)| c.to_vec());
    let visit = |ps: &[f64], inc: &mut Option<Incumbent>, hint: &mut Option<Vec<f64>>, flags: &mut ExponentFlags| {
        let ds = kl_slices(ps, p_true).to_f64();
        let bound = inc.as_ref().map_or(f64::INFINITY, |i| i.value);
        if !ds.is_finite() || ds >= bound {
            return;
        }
        match search.middle(ps, bound - ds, hint.as_deref(), flags) {
            Middle::Value(d, cond, v) => {
                *hint = Some(cond.clone());
                if ds + d < bound {
                    *inc = Some(Incumbent {
                        value: ds + d,
                        p_s: ps.to_vec(),
                        cond,
                        v,
                    });
                }
            }
            Middle::Abort => {}
        }
    };
    for ps in &outer {
        if search.deadline_passed() {
            flags.budget = true;
            break;
        }
        visit(ps, &mut inc, &mut hint, &mut flags);
    }
    let mut radius = opts.s_step;
    for _ in 0..opts.refine_rounds {
        let Some(center) = inc.as_ref().map(|i| i.p_s.clone()) else { break };
        let step = radius / 5.0;
        for ps in simplex::local_grid(&center, &support, radius, step) {
            if search.deadline_passed() {
                flags.budget = true;
                break;
            }
            if ps != center {
                visit(&ps, &mut inc, &mut hint, &mut flags);
            }
        }
        radius = step;
    }

    let Some(inc) = inc else {
        return Ok(ExponentResult {
            rate: query.rate,
            value: ExtReal::Infinite,
            p_s: None,
            p_x_given_s: None,
            v: None,
            witness_rate: None,
            feasibility_margin: None,
            flags,
        });
    };

    let p_s = Pmf::new(inc.p_s.clone())?;
    let rows: Vec<Vec<f64>> = inc.cond.chunks(nx).map(|c| c.to_vec()).collect();
    let p_x_given_s = CondPmf::new(rows)?;
    let v = Channel::from_flat_unchecked(ns, nx, ny, inc.v.clone());
    let p_sx = JointPmf::from_marginal_and_conditional("S", "X", &p_s, &p_x_given_s)?;
    let value = kl_divergence(&p_s, problem.state_pmf())? + conditional_kl(&v, problem.channel(), &p_sx)?;
    let witness = gp_rate_max(
        &v,
        &p_sx,
        &GpOptions {
            restarts: 1,
            workers: Workers::SEQUENTIAL,
            ..GpOptions::default()
        },
    )?;
    flags.boundary = has_boundary(&inc.p_s, p_true)
        || inc
            .cond
            .chunks(nx)
            .zip(&inc.p_s)
            .any(|(row, &ps)| ps > 0.0 && row.contains(&0.0));
    Ok(ExponentResult {
        rate: query.rate,
        value,
        p_s: Some(p_s),
        p_x_given_s: Some(p_x_given_s),
        v: Some(v),
        witness_rate: Some(witness.rate),
        feasibility_margin: Some(query.rate - opts.strictness_margin - witness.rate),
        flags,
    })
}

/// Minimum of `D(V‖W | P̃_S P̃_{X|S})` over lattice channels in `𝒱(R, ·)`,
/// refined by coordinate descent. Only the channel witness is filled in; the
/// value is `+∞` when no lattice channel is a member.
pub fn inner_min(
    rate: f64,
    p_s: &Pmf,
    p_x_given_s: &CondPmf,
    problem: &GpProblem,
    opts: &ExponentOptions,
) -> Result<ExponentResult> {
    opts.validate()?;
    let (ns, nx, ny) = (problem.n_states(), problem.n_inputs(), problem.n_outputs());
    if p_s.len() != ns || p_x_given_s.n_rows() != ns || p_x_given_s.n_cols() != nx {
        return Err(Error::ShapeMismatch("state pmf or input conditional does not fit the channel".into()));
    }
    let search = Search::new(problem, rate, opts);
    let cond: Vec<f64> = (0..ns).flat_map(|s| p_x_given_s.row(s).to_vec()).collect();
    let res = search.cell(p_s.probs(), &cond, f64::NEG_INFINITY, f64::INFINITY);
    let flags = ExponentFlags {
        coarsened: search.coarsened,
        undecided: res.undecided,
        ..ExponentFlags::default()
    };
    let (value, v) = match res.inner {
        Inner::Value(d, v) => (ext(d), Some(Channel::from_flat_unchecked(ns, nx, ny, v))),
        _ => (ExtReal::Infinite, None),
    };
    Ok(ExponentResult {
        rate,
        value,
        p_s: None,
        p_x_given_s: None,
        v,
        witness_rate: None,
        feasibility_margin: None,
        flags,
    })
}

/// `E_SP(R)` on the lattices of `query.opts`. Deterministic for a fixed query.
pub fn esp_exponent(query: &ExponentQuery) -> Result<ExponentResult> {
    run_search(query, None)
}

/// `E_SP` at increasing rates, each search seeded with the previous witnesses.
/// A sample above its left neighbour is replaced by the neighbour and flagged.
pub fn esp_curve(problem: &GpProblem, rates: &[f64], opts: &ExponentOptions) -> Result<ExponentCurve> {
    if rates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("rates must be strictly increasing".into()));
    }
    let mut samples: Vec<(f64, ExponentResult)> = Vec::with_capacity(rates.len());
    for &r in rates {
        let query = ExponentQuery::new(problem.clone(), r, opts.clone())?;
        let warm: Option<(Vec<f64>, Vec<f64>)> = samples.last().and_then(|(_, prev)| {
            let ps = prev.p_s.as_ref()?.probs().to_vec();
            let cond = prev.p_x_given_s.as_ref()?.to_rows().concat();
            Some((ps, cond))
        });
        let mut res = run_search(&query, warm.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())))?;
        if let Some((_, prev)) = samples.last() {
            if res.value > prev.value {
                let mut flags = prev.flags;
                flags.merge(res.flags);
                flags.repaired = true;
                res = ExponentResult {
                    rate: r,
                    flags,
                    feasibility_margin: prev.witness_rate.map(|w| r - opts.strictness_margin - w),
                    ..prev.clone()
                };
            }
        }
        samples.push((r, res));
    }
    Ok(ExponentCurve { samples })
}

/// `E_SP` of the problem whose receiver also sees the state, obtained by
/// running the same search on the `Y × S` output alphabet.
pub fn esp_receiver_csi(problem: &GpProblem, rate: f64, opts: &ExponentOptions) -> Result<ExponentResult> {
    esp_exponent(&ExponentQuery::new(augment_receiver_csi(problem), rate, opts.clone())?)
}

#[cfg(test)]
mod tests;
