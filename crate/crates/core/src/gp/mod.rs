//! The auxiliary-variable rate functional `I(U∧Y) − I(U∧S)` and its optimizations.
//!
//! Policies are deterministic input maps `x = h(u, s)` together with `P(U|S)`.
//! The search works over *strategies*: each auxiliary letter is identified
//! with the map `s ↦ h(u, s)` it selects. Merging two letters that select the
//! same map never lowers the rate, so the set of all `|X|^|S|` maps with a free
//! `P(U|S)` dominates every policy, and for a fixed set of maps the objective is
//! concave in `P(U|S)`. That turns the search into a handful of concave
//! maximizations, solved by alternating maximization (see [`alternating`]).

pub mod alternating;

use std::time::Instant;

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::{map_ordered, Workers};
use crate::prob::{mutual_information, Channel, CondPmf, JointPmf, Pmf};
use crate::simplex;

pub use alternating::{Landscape, Outcome, RunLimits, Stop, Strategies};

/// A channel paired with its i.i.d. state pmf.
#[derive(Clone, Debug, PartialEq)]
pub struct GpProblem {
    channel: Channel,
    state_pmf: Pmf,
}

impl GpProblem {
    pub fn new(channel: Channel, state_pmf: Pmf) -> Result<Self> {
        if channel.n_states() != state_pmf.len() {
            return Err(Error::ShapeMismatch(format!(
                "channel has {} states, state pmf has {} letters",
                channel.n_states(),
                state_pmf.len()
            )));
        }
        Ok(GpProblem { channel, state_pmf })
    }

    /// Single-state problem around a plain DMC `W(y|x)`.
    pub fn stateless(w: Vec<Vec<f64>>) -> Result<Self> {
        GpProblem::new(Channel::stateless(w)?, Pmf::uniform(1))
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn state_pmf(&self) -> &Pmf {
        &self.state_pmf
    }

    pub fn n_states(&self) -> usize {
        self.channel.n_states()
    }

    pub fn n_inputs(&self) -> usize {
        self.channel.n_inputs()
    }

    pub fn n_outputs(&self) -> usize {
        self.channel.n_outputs()
    }
}

/// `x = h(u, s)` plus `P(u | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxPolicy {
    u_size: usize,
    /// `h[u][s]`
    h: Vec<Vec<usize>>,
    /// rows indexed by `s`, columns by `u`
    p_u_given_s: CondPmf,
}

impl AuxPolicy {
    pub fn new(h: Vec<Vec<usize>>, p_u_given_s: CondPmf) -> Result<Self> {
        let u_size = h.len();
        if u_size == 0 || p_u_given_s.n_cols() != u_size {
            return Err(Error::ShapeMismatch(format!(
                "policy has {u_size} auxiliary letters in h and {} in P(U|S)",
                p_u_given_s.n_cols()
            )));
        }
        let n_s = p_u_given_s.n_rows();
        if h.iter().any(|row| row.len() != n_s) {
            return Err(Error::ShapeMismatch(format!(
                "every h[u] must list one input per state ({n_s})"
            )));
        }
        Ok(AuxPolicy {
            u_size,
            h,
            p_u_given_s,
        })
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn h(&self, u: usize, s: usize) -> usize {
        self.h[u][s]
    }

    pub fn h_table(&self) -> &[Vec<usize>] {
        &self.h
    }

    pub fn p_u_given_s(&self) -> &CondPmf {
        &self.p_u_given_s
    }

    fn check_against(&self, state_pmf: &Pmf, channel: &Channel) -> Result<()> {
        if self.p_u_given_s.n_rows() != state_pmf.len() || channel.n_states() != state_pmf.len() {
            return Err(Error::ShapeMismatch("policy, state pmf and channel disagree on |S|".into()));
        }
        if self.h.iter().flatten().any(|&x| x >= channel.n_inputs()) {
            return Err(Error::ShapeMismatch("policy selects an input outside the channel's alphabet".into()));
        }
        Ok(())
    }

    fn from_outcome(strategies: &Strategies, n_s: usize, pi: &[f64]) -> Self {
        let n_u = strategies.len();
        let rows: Vec<Vec<f64>> = (0..n_s).map(|s| pi[s * n_u..(s + 1) * n_u].to_vec()).collect();
        AuxPolicy {
            u_size: n_u,
            h: strategies.maps().to_vec(),
            p_u_given_s: CondPmf::new(rows).expect("iterates stay on the simplex"),
        }
    }
}

/// `P(u,s,x,y) = P_S(s) P(u|s) 1{x = h(u,s)} W(y|x,s)` over axes `U, S, X, Y`.
pub fn induced_joint(state_pmf: &Pmf, channel: &Channel, policy: &AuxPolicy) -> Result<JointPmf> {
    policy.check_against(state_pmf, channel)?;
    let (nu, ns, nx, ny) = (
        policy.u_size,
        state_pmf.len(),
        channel.n_inputs(),
        channel.n_outputs(),
    );
    let mut data = vec![0.0; nu * ns * nx * ny];
    for u in 0..nu {
        for s in 0..ns {
            let x = policy.h(u, s);
            let w = state_pmf.get(s) * policy.p_u_given_s.get(s, u);
            for y in 0..ny {
                data[((u * ns + s) * nx + x) * ny + y] = w * channel.get(s, x, y);
            }
        }
    }
    JointPmf::new(&["U", "S", "X", "Y"], &[nu, ns, nx, ny], data)
}

/// `I(U∧Y) − I(U∧S)` from a joint over `U, S, X, Y`.
pub fn rate_of_joint(joint: &JointPmf) -> Result<f64> {
    Ok(mutual_information(joint, &[0], &[3])? - mutual_information(joint, &[0], &[1])?)
}

/// `I(U∧Y) − I(U∧S)` for a policy; negative for poor policies.
pub fn gp_rate(problem: &GpProblem, policy: &AuxPolicy) -> Result<f64> {
    rate_of_joint(&induced_joint(&problem.state_pmf, &problem.channel, policy)?)
}

#[derive(Clone, Debug)]
pub struct GpOptions {
    /// Maximum number of auxiliary letters; `None` uses `|X|·|S| + 1`.
    pub u_size_cap: Option<usize>,
    /// Step of the coarse policy grid used to rank seeds.
    pub grid: f64,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub workers: Workers,
    pub deadline: Option<Instant>,
    /// Largest number of strategy subsets enumerated under a cap.
    pub max_subsets: usize,
    /// Largest policy grid evaluated for seeding.
    pub max_grid_points: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            u_size_cap: None,
            grid: 0.1,
            restarts: 32,
            tol: 1e-9,
            max_iter: 200_000,
            seed: 0,
            workers: Workers::default(),
            deadline: None,
            max_subsets: 4096,
            max_grid_points: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RateFlags {
    /// A deadline or iteration limit cut the search short.
    pub budget: bool,
    /// The strategy-subset enumeration under the cap was too large, so the
    /// full strategy set (which dominates every subset) was used instead.
    pub cap_relaxed: bool,
}

#[derive(Clone, Debug)]
pub struct RateResult {
    pub rate: f64,
    /// Upper bound on how far `rate` may sit below the optimum for the chosen strategies.
    pub gap: f64,
    pub policy: AuxPolicy,
    pub induced_joint: JointPmf,
    pub flags: RateFlags,
}

/// Strategy sets to optimize over, in lexicographic order.
fn strategy_sets(n_s: usize, n_x: usize, cap: Option<usize>, max_subsets: usize) -> (Vec<Strategies>, bool) {
    let all = Strategies::all(n_s, n_x);
    let cap = cap.unwrap_or(n_x * n_s + 1).max(1);
    if cap >= all.len() {
        return (vec![all], false);
    }
    let count = simplex::binomial(all.len() as u128, cap as u128);
    if count > max_subsets as u128 {
        return (vec![all], true);
    }
    let mut sets = Vec::with_capacity(count as usize);
    let mut pick: Vec<usize> = (0..cap).collect();
    loop {
        sets.push(all.subset(&pick));
        if !next_combination(&mut pick, all.len()) {
            break;
        }
    }
    (sets, false)
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
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

/// Starting policies: the uniform one, then the best points of a coarse
/// policy grid (when it is small enough), then seeded random draws.
fn seeds(land: &Landscape, n_s: usize, opts: &GpOptions, set_index: usize) -> Vec<Vec<f64>> {
    let want = opts.restarts.max(1);
    let mut out = vec![land.uniform_start()];
    let n_u = land.n_u();
    let row_grid = simplex::simplex_grid(n_u, opts.grid);
    let total = (row_grid.len() as u128).saturating_pow(n_s as u32);
    if want > 1 && total <= opts.max_grid_points as u128 {
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total as usize);
        for i in 0..total as usize {
            let digits = crate::seq::letters(i, row_grid.len(), n_s);
            let weights: Vec<f64> = digits.iter().flat_map(|&d| row_grid[d].iter().copied()).collect();
            let pi = land.project_weights(&weights, 0.05);
            scored.push((land.value_at(&pi), pi));
        }
        // stable: ties keep grid order
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        out.extend(scored.into_iter().take(want - 1).map(|(_, pi)| pi));
    }
    let mut k = 0u64;
    while out.len() < want {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(((set_index as u64) << 32) | k);
        let exp = rand_distr_exp();
        let weights: Vec<f64> = (0..n_s * n_u).map(|_| exp.sample(&mut rng)).collect();
        out.push(land.project_weights(&weights, 0.0));
        k += 1;
    }
    out
}

/// Unit exponential draws give flat Dirichlet rows after normalization.
fn rand_distr_exp() -> impl Distribution<f64> {
    rand::distributions::Open01.map(|u: f64| -u.ln())
}

fn optimize_landscapes(
    lands: &[(usize, Landscape)],
    n_s: usize,
    opts: &GpOptions,
) -> Option<(usize, Outcome, bool)> {
    let limits = RunLimits {
        tol: opts.tol,
        max_iter: opts.max_iter,
        threshold: None,
        deadline: opts.deadline,
    };
    let jobs: Vec<(usize, Vec<f64>)> = lands
        .iter()
        .enumerate()
        .flat_map(|(li, (set_index, land))| {
            seeds(land, n_s, opts, *set_index)
                .into_iter()
                .map(move |pi| (li, pi))
        })
        .collect();
    let outcomes = map_ordered(&jobs, opts.workers, |(li, pi)| {
        lands[*li].1.run(pi.clone(), limits)
    });
    let mut best: Option<(usize, Outcome)> = None;
    let mut budget = false;
    for ((li, _), out) in jobs.iter().zip(outcomes) {
        budget |= matches!(out.stop, Stop::IterationLimit | Stop::Deadline);
        let better = match &best {
            None => true,
            Some((_, b)) => out.value > b.value,
        };
        if better {
            best = Some((*li, out));
        }
    }
    best.map(|(li, out)| (li, out, budget))
}

fn finish(
    state_pmf: &Pmf,
    channel: &Channel,
    land: &Landscape,
    out: Outcome,
    flags: RateFlags,
) -> Result<RateResult> {
    let policy = AuxPolicy::from_outcome(land.strategies(), state_pmf.len(), &out.pi);
    let joint = induced_joint(state_pmf, channel, &policy)?;
    let rate = rate_of_joint(&joint)?;
    Ok(RateResult {
        rate,
        gap: out.gap,
        policy,
        induced_joint: joint,
        flags,
    })
}

/// `C = max I(U∧Y) − I(U∧S)` over all policies with at most `u_size_cap` auxiliary letters.
pub fn gp_capacity(problem: &GpProblem, opts: &GpOptions) -> Result<RateResult> {
    let (n_s, n_x) = (problem.n_states(), problem.n_inputs());
    let (sets, cap_relaxed) = strategy_sets(n_s, n_x, opts.u_size_cap, opts.max_subsets);
    let lands: Vec<(usize, Landscape)> = sets
        .into_iter()
        .enumerate()
        .filter_map(|(i, st)| {
            Landscape::new(problem.state_pmf.probs(), st, &problem.channel, None).map(|l| (i, l))
        })
        .collect();
    let (li, out, budget) = optimize_landscapes(&lands, n_s, opts)
        .ok_or_else(|| Error::Numerical("no strategy set to optimize".into()))?;
    finish(
        &problem.state_pmf,
        &problem.channel,
        &lands[li].1,
        out,
        RateFlags { budget, cap_relaxed },
    )
}

/// Split `P_SX` into `P_S` and `P(x|s)` (uniform rows where `P_S(s) = 0`).
pub fn split_state_input(p_sx: &JointPmf) -> Result<(Pmf, Vec<f64>)> {
    if p_sx.sizes().len() != 2 {
        return Err(Error::ShapeMismatch("expected a joint over (S, X)".into()));
    }
    let (n_s, n_x) = (p_sx.sizes()[0], p_sx.sizes()[1]);
    let p_s = p_sx.marginal_pmf(0)?;
    let mut cond = vec![0.0; n_s * n_x];
    for s in 0..n_s {
        let ps = p_s.get(s);
        for x in 0..n_x {
            cond[s * n_x + x] = if ps > 0.0 {
                p_sx.get(&[s, x]) / ps
            } else {
                1.0 / n_x as f64
            };
        }
    }
    Ok((p_s, cond))
}

/// `max I(U∧Y) − I(U∧S)` over policies whose induced `(S, X)` marginal equals
/// `p_sx`, with `v` as the channel. The marginal holds by construction: every
/// cell of auxiliary letters selecting input `x` in state `s` carries exactly
/// `P(x|s)`.
pub fn gp_rate_max(v: &Channel, p_sx: &JointPmf, opts: &GpOptions) -> Result<RateResult> {
    if p_sx.sizes() != [v.n_states(), v.n_inputs()] {
        return Err(Error::ShapeMismatch(format!(
            "input marginal over {:?}, channel over S×X = {}×{}",
            p_sx.sizes(),
            v.n_states(),
            v.n_inputs()
        )));
    }
    let (p_s, cond) = split_state_input(p_sx)?;
    let (n_s, n_x) = (v.n_states(), v.n_inputs());
    let (sets, cap_relaxed) = strategy_sets(n_s, n_x, opts.u_size_cap, opts.max_subsets);
    let lands: Vec<(usize, Landscape)> = sets
        .into_iter()
        .enumerate()
        .filter_map(|(i, st)| Landscape::new(p_s.probs(), st, v, Some(&cond)).map(|l| (i, l)))
        .collect();
    let (li, out, budget) = optimize_landscapes(&lands, n_s, opts).ok_or_else(|| {
        Error::InvalidInput("no strategy subset under the cap realizes this input marginal".into())
    })?;
    finish(&p_s, v, &lands[li].1, out, RateFlags { budget, cap_relaxed })
}

/// Capacity of a plain DMC given as rows `W(·|x)`, by Blahut–Arimoto iterations
/// stopped when the standard upper and lower bounds meet within `tol`.
pub fn dmc_capacity(rows: &[&[f64]], tol: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let nx = rows.len();
    let ny = rows[0].len();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut d = vec![0.0; nx];
    let mut lower = 0.0;
    for _ in 0..max_iter {
        let mut q = vec![0.0; ny];
        for (x, row) in rows.iter().enumerate() {
            for y in 0..ny {
                q[y] += p[x] * row[y];
            }
        }
        for (x, row) in rows.iter().enumerate() {
            d[x] = row
                .iter()
                .zip(&q)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, &qy)| w * (w / qy).ln())
                .sum();
        }
        lower = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol {
            return (lower.max(0.0), p);
        }
        let z: f64 = p.iter().zip(&d).map(|(a, b)| a * b.exp()).sum();
        for x in 0..nx {
            p[x] *= d[x].exp() / z;
        }
    }
    (lower.max(0.0), p)
}

/// `max_{P(X|S)} I(X∧Y|S) = Σ_s P_S(s) C_s`, the capacity when the receiver
/// also sees the state.
pub fn receiver_csi_capacity(problem: &GpProblem) -> f64 {
    let ch = &problem.channel;
    (0..ch.n_states())
        .map(|s| {
            let rows: Vec<&[f64]> = (0..ch.n_inputs()).map(|x| ch.row(s, x)).collect();
            problem.state_pmf.get(s) * dmc_capacity(&rows, 1e-9, 1_000_000).0
        })
        .sum()
}

/// The same problem with output alphabet `Y × S`: `W'((y, s')|x, s) = W(y|x,s) 1{s' = s}`,
/// output letter `(y, s')` at index `y·|S| + s'`.
pub fn augment_receiver_csi(problem: &GpProblem) -> GpProblem {
    let ch = &problem.channel;
    let (ns, nx, ny) = (ch.n_states(), ch.n_inputs(), ch.n_outputs());
    let mut w = vec![0.0; ns * nx * ny * ns];
    for s in 0..ns {
        for x in 0..nx {
            for y in 0..ny {
                w[(s * nx + x) * ny * ns + y * ns + s] = ch.get(s, x, y);
            }
        }
    }
    GpProblem {
        channel: Channel::from_flat_unchecked(ns, nx, ny * ns, w),
        state_pmf: problem.state_pmf.clone(),
    }
}

#[cfg(test)]
mod tests;
