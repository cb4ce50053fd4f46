//! Alternating maximization of `I(U∧Y) − I(U∧S)` over `P(U|S)` for a fixed
//! deterministic input map `x = t_u(s)`.
//!
//! For fixed `t`, the objective is concave in `P(U|S)`, and it can be written
//! as `max_q Σ p(s) π(u|s) A(y|u,s) ln(q(u|y)/π(u|s))` with the maximizing `q`
//! the posterior of `U` given `Y`. Alternating the two maximizations gives
//! monotone ascent: `q ← posterior(π)`, then `π(u|s) ∝ exp(a(u,s))` inside
//! each cell, with `a(u,s) = Σ_y A(y|u,s) ln q(u|y)`.
//!
//! Cells carry the optional input-marginal constraint: for each `s` the
//! auxiliary letters are grouped by the input they select, and each group's
//! total mass is pinned to `P(x|s)`. Without a constraint there is one cell per
//! state with mass one.
//!
//! Every iterate `π` is feasible, so its objective is a lower bound on the
//! maximum. The Frank–Wolfe gap `max_{π'} ⟨∇G(π), π' − π⟩` over the same
//! polytope bounds the distance to the maximum from above.

use std::time::Instant;

use crate::prob::Channel;

/// Deterministic input maps `t: S → X`, one per auxiliary letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategies {
    n_s: usize,
    n_x: usize,
    maps: Vec<Vec<usize>>,
}

impl Strategies {
    /// All `|X|^|S|` maps, in mixed-radix order with `t(0)` most significant.
    pub fn all(n_s: usize, n_x: usize) -> Self {
        let total = n_x.pow(n_s as u32);
        let maps = (0..total).map(|i| crate::seq::letters(i, n_x, n_s)).collect();
        Strategies { n_s, n_x, maps }
    }

    pub fn from_maps(n_s: usize, n_x: usize, maps: Vec<Vec<usize>>) -> Self {
        Strategies { n_s, n_x, maps }
    }

    pub fn subset(&self, pick: &[usize]) -> Self {
        Strategies {
            n_s: self.n_s,
            n_x: self.n_x,
            maps: pick.iter().map(|&i| self.maps[i].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn input(&self, u: usize, s: usize) -> usize {
        self.maps[u][s]
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    pub fn n_states(&self) -> usize {
        self.n_s
    }

    pub fn n_inputs(&self) -> usize {
        self.n_x
    }
}

#[derive(Clone, Debug)]
struct Cell {
    mass: f64,
    members: Vec<usize>,
}

/// The fixed data of one maximization: state pmf, strategies, channel and cells.
#[derive(Clone, Debug)]
pub struct Landscape {
    p_s: Vec<f64>,
    strategies: Strategies,
    n_y: usize,
    /// `A(y|u,s) = V(y | t_u(s), s)` at `[(u * n_s + s) * n_y + y]`.
    a_tab: Vec<f64>,
    /// Per state, the groups of auxiliary letters whose masses are pinned.
    cells: Vec<Vec<Cell>>,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Converged,
    /// The lower bound exceeded the threshold.
    Above,
    /// The upper bound fell to or below the threshold.
    Below,
    IterationLimit,
    Deadline,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// `π(u|s)` at `[s * n_u + u]`.
    pub pi: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub stop: Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct RunLimits {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the bracket `[value, value + gap]` excludes this level.
    pub threshold: Option<f64>,
    pub deadline: Option<Instant>,
}

impl Landscape {
    /// `input_marginal`, when given, is `P(x|s)` at `[s * n_x + x]`.
    /// Returns `None` when some positive-mass cell has no strategy in it.
    pub fn new(
        p_s: &[f64],
        strategies: Strategies,
        channel: &Channel,
        input_marginal: Option<&[f64]>,
    ) -> Option<Self> {
        let n_s = strategies.n_states();
        let n_x = strategies.n_inputs();
        let n_u = strategies.len();
        let n_y = channel.n_outputs();
        debug_assert_eq!(channel.n_states(), n_s);
        debug_assert_eq!(channel.n_inputs(), n_x);
        let mut cells = Vec::with_capacity(n_s);
        for s in 0..n_s {
            match input_marginal {
                None => cells.push(vec![Cell {
                    mass: 1.0,
                    members: (0..n_u).collect(),
                }]),
                Some(m) => {
                    let mut row = Vec::with_capacity(n_x);
                    for x in 0..n_x {
                        let members: Vec<usize> =
                            (0..n_u).filter(|&u| strategies.input(u, s) == x).collect();
                        let mass = m[s * n_x + x];
                        if mass > 0.0 && members.is_empty() {
                            return None;
                        }
                        row.push(Cell { mass, members });
                    }
                    cells.push(row);
                }
            }
        }
        let mut land = Landscape {
            p_s: p_s.to_vec(),
            strategies,
            n_y,
            a_tab: vec![0.0; n_u * n_s * n_y],
            cells,
        };
        land.set_channel(channel);
        Some(land)
    }

    /// Swap in a channel of the same shape, keeping strategies and cells.
    pub fn set_channel(&mut self, channel: &Channel) {
        let n_s = self.strategies.n_states();
        for u in 0..self.strategies.len() {
            for s in 0..n_s {
                let x = self.strategies.input(u, s);
                let base = (u * n_s + s) * self.n_y;
                self.a_tab[base..base + self.n_y].copy_from_slice(channel.row(s, x));
            }
        }
    }

    pub fn strategies(&self) -> &Strategies {
        &self.strategies
    }

    pub fn n_u(&self) -> usize {
        self.strategies.len()
    }

    /// Uniform within every cell.
    pub fn uniform_start(&self) -> Vec<f64> {
        let n_u = self.n_u();
        let mut pi = vec![0.0; self.p_s.len() * n_u];
        for (s, row) in self.cells.iter().enumerate() {
            for cell in row {
                if cell.mass > 0.0 {
                    let share = cell.mass / cell.members.len() as f64;
                    for &u in &cell.members {
                        pi[s * n_u + u] = share;
                    }
                }
            }
        }
        pi
    }

    /// Rescale arbitrary nonnegative weights into the feasible polytope,
    /// mixing in a `floor` share of the uniform start to stay interior.
    pub fn project_weights(&self, weights: &[f64], floor: f64) -> Vec<f64> {
        let n_u = self.n_u();
        let uniform = self.uniform_start();
        let mut pi = vec![0.0; self.p_s.len() * n_u];
        for (s, row) in self.cells.iter().enumerate() {
            for cell in row {
                if cell.mass <= 0.0 {
                    continue;
                }
                let total: f64 = cell.members.iter().map(|&u| weights[s * n_u + u].max(0.0)).sum();
                for &u in &cell.members {
                    let w = if total > 0.0 {
                        weights[s * n_u + u].max(0.0) / total * cell.mass
                    } else {
                        uniform[s * n_u + u]
                    };
                    pi[s * n_u + u] = (1.0 - floor) * w + floor * uniform[s * n_u + u];
                }
            }
        }
        pi
    }

    /// Objective `I(U∧Y) − I(U∧S)` at `pi`, plus `a(u,s)` at `[s * n_u + u]`.
    fn evaluate(&self, pi: &[f64], a: &mut [f64], p_uy: &mut [f64], p_y: &mut [f64]) -> f64 {
        let n_u = self.n_u();
        let n_s = self.p_s.len();
        let n_y = self.n_y;
        p_uy.iter_mut().for_each(|v| *v = 0.0);
        p_y.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..n_s {
            let ps = self.p_s[s];
            if ps <= 0.0 {
                continue;
            }
            for u in 0..n_u {
                let w = ps * pi[s * n_u + u];
                if w <= 0.0 {
                    continue;
                }
                let base = (u * n_s + s) * n_y;
                for y in 0..n_y {
                    p_uy[u * n_y + y] += w * self.a_tab[base + y];
                }
            }
        }
        for u in 0..n_u {
            for y in 0..n_y {
                p_y[y] += p_uy[u * n_y + y];
            }
        }
        let mut value = 0.0;
        for s in 0..n_s {
            let ps = self.p_s[s];
            for u in 0..n_u {
                let base = (u * n_s + s) * n_y;
                let mut acc = 0.0;
                for y in 0..n_y {
                    let t = self.a_tab[base + y];
                    if t > 0.0 {
                        let puy = p_uy[u * n_y + y];
                        if puy > 0.0 {
                            acc += t * (puy / p_y[y]).ln();
                        } else {
                            // only reachable when π(u|·) vanished on this row
                            acc = f64::NEG_INFINITY;
                            break;
                        }
                    }
                }
                a[s * n_u + u] = acc;
                let p = pi[s * n_u + u];
                if ps > 0.0 && p > 0.0 {
                    value += ps * p * (acc - p.ln());
                }
            }
        }
        value
    }

    fn gap(&self, pi: &[f64], a: &[f64]) -> f64 {
        let n_u = self.n_u();
        let mut gap = 0.0;
        for (s, row) in self.cells.iter().enumerate() {
            let ps = self.p_s[s];
            if ps <= 0.0 {
                continue;
            }
            for cell in row {
                if cell.mass <= 0.0 {
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                let mut mean = 0.0;
                for &u in &cell.members {
                    let p = pi[s * n_u + u];
                    let g = if p > 0.0 {
                        a[s * n_u + u] - p.ln()
                    } else if a[s * n_u + u] > f64::NEG_INFINITY {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    };
                    best = best.max(g);
                    if p > 0.0 {
                        mean += p * g;
                    }
                }
                gap += ps * (cell.mass * best - mean);
            }
        }
        gap.max(0.0)
    }

    fn update(&self, pi: &mut [f64], a: &[f64]) {
        let n_u = self.n_u();
        for (s, row) in self.cells.iter().enumerate() {
            if self.p_s[s] <= 0.0 {
                continue;
            }
            for cell in row {
                if cell.mass <= 0.0 {
                    continue;
                }
                let top = cell
                    .members
                    .iter()
                    .map(|&u| a[s * n_u + u])
                    .fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    continue;
                }
                let mut z = 0.0;
                for &u in &cell.members {
                    let e = (a[s * n_u + u] - top).exp();
                    pi[s * n_u + u] = e;
                    z += e;
                }
                for &u in &cell.members {
                    pi[s * n_u + u] *= cell.mass / z;
                }
            }
        }
    }

    /// Objective at a fixed policy.
    pub fn value_at(&self, pi: &[f64]) -> f64 {
        let (mut a, mut p_uy, mut p_y) = self.scratch();
        self.evaluate(pi, &mut a, &mut p_uy, &mut p_y)
    }

    fn scratch(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            vec![0.0; self.p_s.len() * self.n_u()],
            vec![0.0; self.n_u() * self.n_y],
            vec![0.0; self.n_y],
        )
    }

    pub fn run(&self, start: Vec<f64>, limits: RunLimits) -> Outcome {
        let (mut a, mut p_uy, mut p_y) = self.scratch();
        let mut pi = start;
        let mut iterations = 0;
        loop {
            let value = self.evaluate(&pi, &mut a, &mut p_uy, &mut p_y);
            let gap = self.gap(&pi, &a);
            let stop = if let Some(t) = limits.threshold {
                if value > t {
                    Some(Stop::Above)
                } else if value + gap <= t {
                    Some(Stop::Below)
                } else {
                    None
                }
            } else {
                None
            };
            let stop = stop.or_else(|| {
                if gap <= limits.tol {
                    Some(Stop::Converged)
                } else if iterations >= limits.max_iter {
                    Some(Stop::IterationLimit)
                } else if iterations % 64 == 63
                    && limits.deadline.is_some_and(|d| Instant::now() >= d)
                {
                    Some(Stop::Deadline)
                } else {
                    None
                }
            });
            if let Some(stop) = stop {
                return Outcome {
                    pi,
                    value,
                    gap,
                    iterations,
                    stop,
                };
            }
            self.update(&mut pi, &a);
            iterations += 1;
        }
    }
}
