//! Grid-based discounted value iteration over belief space.
//!
//! Each model variant compiles into the same shape of problem: a set of grid
//! nodes, and per node and action an immediate gain plus feedback branches,
//! each branch carrying its probability and the interpolation stencil of the
//! updated belief. Value iteration then applies the Bellman operator until
//! the sup-norm change falls below the tolerance. Interpolation is linear in
//! 1D, barycentric on the triangulated belief simplex, and bilinear on the
//! unit square, so every lookup is a convex combination and the iteration
//! remains an α-contraction.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::policies::{Action, Objective};
use crate::{Error, Result};

/// Belief-space domain of a solved grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `p ∈ [0, 1]`, two-state models.
    Interval,
    /// `{(p, q) : p, q ≥ 0, p + q ≤ 1}`, three-state model.
    Simplex,
    /// `[0, 1]²`, two-channel model.
    Square,
}

/// Solver configuration. The primary reward lives on the channel model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    pub alpha: f64,
    pub objective: Objective,
    /// Nodes per belief axis.
    pub grid_resolution: usize,
    /// Sup-norm convergence threshold on successive iterates.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SolverParams {
    /// Defaults for one-dimensional belief domains.
    pub fn interval_defaults(objective: Objective) -> Self {
        Self {
            alpha: 0.999,
            objective,
            grid_resolution: 1025,
            tolerance: 1e-10,
            max_iterations: 1_000_000,
        }
    }

    /// Defaults for two-dimensional belief domains.
    pub fn planar_defaults(objective: Objective) -> Self {
        Self {
            grid_resolution: 257,
            ..Self::interval_defaults(objective)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Precondition(format!(
                "discount alpha = {} must lie in [0, 1)",
                self.alpha
            )));
        }
        if self.grid_resolution < 2 {
            return Err(Error::Precondition(format!(
                "grid resolution {} must be at least 2",
                self.grid_resolution
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Precondition(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if !(0.0..=1.0).contains(&self.objective.w) {
            return Err(Error::Precondition(format!(
                "weight w = {} outside [0,1]",
                self.objective.w
            )));
        }
        if self.objective.r_s < 0.0 {
            return Err(Error::Precondition("secondary reward must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Discretized value function and argmax actions over a belief domain.
///
/// Action codes are 0 = Listen, 1 = Transmit for single-channel domains and
/// 0 = ListenBoth, 1 = TxCh1, 2 = TxCh2 on the square.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueGrid {
    pub schema_version: u32,
    pub domain: Domain,
    pub resolution: usize,
    pub values: Vec<f64>,
    pub actions: Vec<u8>,
}

/// Current schema of the serialized grid layout.
pub const VALUE_GRID_SCHEMA_VERSION: u32 = 1;

impl ValueGrid {
    pub fn node_count(domain: Domain, n: usize) -> usize {
        match domain {
            Domain::Interval => n,
            Domain::Simplex => n * (n + 1) / 2,
            Domain::Square => n * n,
        }
    }

    /// Flat index of the node at integer coordinates `(i, j)`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        match self.domain {
            Domain::Interval => i,
            Domain::Square => j * self.resolution + i,
            Domain::Simplex => simplex_offset(self.resolution, j) + i,
        }
    }

    /// Belief coordinates of the node at `(i, j)`.
    pub fn node_coords(&self, i: usize, j: usize) -> (f64, f64) {
        let h = (self.resolution - 1) as f64;
        (i as f64 / h, j as f64 / h)
    }

    /// Interpolated value at a belief point.
    pub fn value_at(&self, coords: &[f64]) -> f64 {
        let st = stencil(self.domain, self.resolution, coords);
        st.idx
            .iter()
            .zip(st.w.iter())
            .map(|(&i, &w)| w * self.values[i as usize])
            .sum()
    }

    /// Action stored at the grid node nearest to a belief point.
    pub fn action_index_at(&self, coords: &[f64]) -> u8 {
        let n = self.resolution;
        let h = (n - 1) as f64;
        let idx = match self.domain {
            Domain::Interval => {
                let i = (coords[0].clamp(0.0, 1.0) * h).round() as usize;
                i.min(n - 1)
            }
            Domain::Square => {
                let i = ((coords[0].clamp(0.0, 1.0) * h).round() as usize).min(n - 1);
                let j = ((coords[1].clamp(0.0, 1.0) * h).round() as usize).min(n - 1);
                j * n + i
            }
            Domain::Simplex => {
                let j = ((coords[1].clamp(0.0, 1.0) * h).round() as usize).min(n - 1);
                let i = ((coords[0].clamp(0.0, 1.0) * h).round() as usize).min(n - 1 - j);
                simplex_offset(n, j) + i
            }
        };
        self.actions[idx]
    }
}

fn simplex_offset(n: usize, j: usize) -> usize {
    j * (2 * n - j + 1) / 2
}

/// Interpolation stencil: up to four node indices with convex weights.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [u32; 4],
    w: [f64; 4],
}

fn stencil(domain: Domain, n: usize, coords: &[f64]) -> Stencil {
    let h = (n - 1) as f64;
    match domain {
        Domain::Interval => {
            let x = coords[0].clamp(0.0, 1.0) * h;
            let i = (x.floor() as usize).min(n - 2);
            let f = (x - i as f64).clamp(0.0, 1.0);
            Stencil {
                idx: [i as u32, (i + 1) as u32, 0, 0],
                w: [1.0 - f, f, 0.0, 0.0],
            }
        }
        Domain::Square => {
            let x = coords[0].clamp(0.0, 1.0) * h;
            let y = coords[1].clamp(0.0, 1.0) * h;
            let i = (x.floor() as usize).min(n - 2);
            let j = (y.floor() as usize).min(n - 2);
            let fx = (x - i as f64).clamp(0.0, 1.0);
            let fy = (y - j as f64).clamp(0.0, 1.0);
            let at = |a: usize, b: usize| (b * n + a) as u32;
            Stencil {
                idx: [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)],
                w: [
                    (1.0 - fx) * (1.0 - fy),
                    fx * (1.0 - fy),
                    (1.0 - fx) * fy,
                    fx * fy,
                ],
            }
        }
        Domain::Simplex => {
            let mut x = coords[0].max(0.0) * h;
            let mut y = coords[1].max(0.0) * h;
            let s = x + y;
            if s > h {
                let scale = h / s;
                x *= scale;
                y *= scale;
            }
            let i = (x.floor() as usize).min(n - 2);
            let j = (y.floor() as usize).min(n - 2);
            let fx = x - i as f64;
            let fy = y - j as f64;
            let at = |a: usize, b: usize| (simplex_offset(n, b) + a) as u32;
            if fx + fy <= 1.0 {
                // On the diagonal row of cells the off-corner nodes fall
                // outside the simplex; they carry zero weight there, so
                // redirect them to a valid node.
                let clamp_row = |a: usize, b: usize| at(a.min(n - 1 - b), b);
                Stencil {
                    idx: [at(i, j), clamp_row(i + 1, j), clamp_row(i, j + 1), 0],
                    w: [(1.0 - fx - fy).max(0.0), fx.max(0.0), fy.max(0.0), 0.0],
                }
            } else {
                Stencil {
                    idx: [at(i + 1, j + 1), at(i, j + 1), at(i + 1, j), 0],
                    w: [
                        (fx + fy - 1.0).max(0.0),
                        (1.0 - fx).max(0.0),
                        (1.0 - fy).max(0.0),
                        0.0,
                    ],
                }
            }
        }
    }
}

struct ActionSpec {
    gain: f64,
    branches: Vec<(f64, Stencil)>,
}

struct Problem {
    domain: Domain,
    resolution: usize,
    nodes: Vec<Vec<ActionSpec>>,
}

/// A converged solve: the grid plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub grid: ValueGrid,
    pub iterations: usize,
    /// Sup-norm change of the final committed sweep.
    pub final_delta: f64,
    /// One-step lookahead residual of the returned values.
    pub residual: f64,
}

/// Largest axis-aligned second difference of the grid values, divided by 8:
/// the standard piecewise-linear interpolation error estimate.
fn interp_error_bound(domain: Domain, n: usize, v: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    match domain {
        Domain::Interval => {
            for i in 1..n - 1 {
                m = m.max((v[i + 1] - 2.0 * v[i] + v[i - 1]).abs());
            }
        }
        Domain::Square => {
            let at = |i: usize, j: usize| v[j * n + i];
            for j in 0..n {
                for i in 1..n - 1 {
                    m = m.max((at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)).abs());
                }
            }
            for i in 0..n {
                for j in 1..n - 1 {
                    m = m.max((at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)).abs());
                }
            }
        }
        Domain::Simplex => {
            let at = |i: usize, j: usize| v[simplex_offset(n, j) + i];
            for j in 0..n {
                let row = n - j;
                for i in 1..row.saturating_sub(1) {
                    m = m.max((at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)).abs());
                }
            }
            for i in 0..n {
                let col = n - i;
                for j in 1..col.saturating_sub(1) {
                    m = m.max((at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)).abs());
                }
            }
        }
    }
    m / 8.0
}

fn sweep(problem: &Problem, alpha: f64, v: &[f64], v_next: &mut [f64], actions: &mut [u8]) -> f64 {
    let mut delta: f64 = 0.0;
    for (ni, node) in problem.nodes.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0u8;
        for (ai, action) in node.iter().enumerate() {
            let mut acc = 0.0;
            for (prob, st) in &action.branches {
                let s = st.w[0] * v[st.idx[0] as usize]
                    + st.w[1] * v[st.idx[1] as usize]
                    + st.w[2] * v[st.idx[2] as usize]
                    + st.w[3] * v[st.idx[3] as usize];
                acc += prob * s;
            }
            let val = action.gain + alpha * acc;
            if val > best {
                best = val;
                best_a = ai as u8;
            }
        }
        v_next[ni] = best;
        actions[ni] = best_a;
        delta = delta.max((v_next[ni] - v[ni]).abs());
    }
    delta
}

fn value_iterate(problem: Problem, params: &SolverParams) -> Result<Solution> {
    let n_nodes = problem.nodes.len();
    // Anchor at the myopic one-step value.
    let mut v: Vec<f64> = problem
        .nodes
        .iter()
        .map(|node| node.iter().map(|a| a.gain).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut v_next = vec![0.0; n_nodes];
    let mut actions = vec![0u8; n_nodes];
    let mut prev_delta = f64::INFINITY;
    for iteration in 1..=params.max_iterations {
        let delta = sweep(&problem, params.alpha, &v, &mut v_next, &mut actions);
        if prev_delta.is_finite() {
            let scale = v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            let slack = 2.0 * interp_error_bound(problem.domain, problem.resolution, &v)
                + 1e-9 * scale.max(1.0);
            if delta > params.alpha * prev_delta + slack {
                return Err(Error::Solver(format!(
                    "contraction violated at iteration {iteration}: delta {delta} > alpha*{prev_delta} + {slack}"
                )));
            }
        }
        std::mem::swap(&mut v, &mut v_next);
        prev_delta = delta;
        if delta < params.tolerance {
            let mut scratch = vec![0.0; n_nodes];
            let mut scratch_actions = vec![0u8; n_nodes];
            let residual = sweep(&problem, params.alpha, &v, &mut scratch, &mut scratch_actions);
            return Ok(Solution {
                grid: ValueGrid {
                    schema_version: VALUE_GRID_SCHEMA_VERSION,
                    domain: problem.domain,
                    resolution: problem.resolution,
                    values: v,
                    actions,
                },
                iterations: iteration,
                final_delta: delta,
                residual,
            });
        }
    }
    Err(Error::Solver(format!(
        "value iteration did not converge within {} iterations (last delta {prev_delta})",
        params.max_iterations
    )))
}

fn require_erasure(model: &ChannelModel) -> Result<(f64, f64)> {
    if model.num_states() != 2
        || model.success.silent_ack != [0.0, 1.0]
        || model.success.transmit_ack != [0.0, 0.0]
    {
        return Err(Error::Precondition(
            "solver requires the erasure success profile (silent (0,1), transmit (0,0))".into(),
        ));
    }
    let p_ee = model.transitions.prob(0, 0);
    let p_ne = model.transitions.prob(1, 0);
    crate::channel::check_positively_correlated(p_ee, p_ne)?;
    Ok((p_ee, p_ne))
}

/// Solves the erasure-channel Bellman equation on `p = P(E)`.
///
/// Listening earns the surviving primary reward and branches on the revealed
/// state; transmitting earns the secondary reward and propagates the belief
/// blindly.
pub fn solve_two_state(model: &ChannelModel, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    let (p_ee, p_ne) = require_erasure(model)?;
    let n = params.grid_resolution;
    let (w, r_s) = (params.objective.w, params.objective.r_s);
    let r_p = model.primary_reward;
    let h = (n - 1) as f64;
    let nodes = (0..n)
        .map(|i| {
            let p = i as f64 / h;
            let mut listen = ActionSpec {
                gain: w * r_p * (1.0 - p),
                branches: Vec::with_capacity(2),
            };
            if 1.0 - p > 0.0 {
                listen
                    .branches
                    .push((1.0 - p, stencil(Domain::Interval, n, &[p_ne])));
            }
            if p > 0.0 {
                listen.branches.push((p, stencil(Domain::Interval, n, &[p_ee])));
            }
            let drift = p * p_ee + (1.0 - p) * p_ne;
            let transmit = ActionSpec {
                gain: (1.0 - w) * r_s,
                branches: vec![(1.0, stencil(Domain::Interval, n, &[drift]))],
            };
            vec![listen, transmit]
        })
        .collect();
    value_iterate(
        Problem {
            domain: Domain::Interval,
            resolution: n,
            nodes,
        },
        params,
    )
}

/// Solves the Gilbert-Elliot Bellman equation on `p = P(B)`.
pub fn solve_gilbert_elliot(model: &ChannelModel, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    if model.num_states() != 2 {
        return Err(Error::Precondition("Gilbert-Elliot solver needs a 2-state model".into()));
    }
    let (g1, g3) = (model.success.silent_ack[0], model.success.silent_ack[1]);
    let (g2, g4) = (model.success.transmit_ack[0], model.success.transmit_ack[1]);
    if !(g3 > g1) || !(g4 >= g2) {
        return Err(Error::Precondition(format!(
            "need γ3 > γ1 and γ4 ≥ γ2 for the threshold structure, got γ = ({g1}, {g2}, {g3}, {g4})"
        )));
    }
    let p_bb = model.transitions.prob(0, 0);
    let p_gb = model.transitions.prob(1, 0);
    crate::channel::check_positively_correlated(p_bb, p_gb)?;
    let spread = p_bb - p_gb;
    let n = params.grid_resolution;
    let (w, r_s) = (params.objective.w, params.objective.r_s);
    let r_p = model.primary_reward;
    let h = (n - 1) as f64;
    // Bayes posterior of Bad, then one-step propagation.
    let target = |like_b: f64, p: f64, denom: f64| {
        let posterior = like_b * p / denom;
        posterior * spread + p_gb
    };
    let nodes = (0..n)
        .map(|i| {
            let p = i as f64 / h;
            let mut listen = ActionSpec {
                gain: 0.0,
                branches: Vec::with_capacity(2),
            };
            let ack_idle = g1 * p + g3 * (1.0 - p);
            listen.gain = w * r_p * ack_idle;
            if ack_idle > 0.0 {
                let t = target(g1, p, ack_idle);
                listen.branches.push((ack_idle, stencil(Domain::Interval, n, &[t])));
            }
            let nack_idle = 1.0 - ack_idle;
            if nack_idle > 0.0 {
                let t = target(1.0 - g1, p, nack_idle);
                listen.branches.push((nack_idle, stencil(Domain::Interval, n, &[t])));
            }
            let mut transmit = ActionSpec {
                gain: 0.0,
                branches: Vec::with_capacity(2),
            };
            let ack_tx = g2 * p + g4 * (1.0 - p);
            transmit.gain = (1.0 - w) * r_s + w * r_p * ack_tx;
            if ack_tx > 0.0 {
                let t = target(g2, p, ack_tx);
                transmit.branches.push((ack_tx, stencil(Domain::Interval, n, &[t])));
            }
            let nack_tx = 1.0 - ack_tx;
            if nack_tx > 0.0 {
                let t = target(1.0 - g2, p, nack_tx);
                transmit.branches.push((nack_tx, stencil(Domain::Interval, n, &[t])));
            }
            vec![listen, transmit]
        })
        .collect();
    value_iterate(
        Problem {
            domain: Domain::Interval,
            resolution: n,
            nodes,
        },
        params,
    )
}

/// Solves the three-state Bellman equation on the simplex `(p, q) = (P(G), P(Vg))`.
pub fn solve_three_state(model: &ChannelModel, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    if model.num_states() != 3
        || model.success.silent_ack != [0.0, 1.0, 1.0]
        || model.success.transmit_ack != [0.0, 0.0, 1.0]
    {
        return Err(Error::Precondition(
            "three-state solver requires the (B, G, Vg) success profile".into(),
        ));
    }
    let t = |i: usize, j: usize| model.transitions.prob(i, j);
    let n = params.grid_resolution;
    let (w, r_s) = (params.objective.w, params.objective.r_s);
    let r_p = model.primary_reward;
    let h = (n - 1) as f64;
    let mut nodes = Vec::with_capacity(ValueGrid::node_count(Domain::Simplex, n));
    for j in 0..n {
        for i in 0..n - j {
            let p = i as f64 / h;
            let q = j as f64 / h;
            let pb = (1.0 - p - q).max(0.0);
            let mut listen = ActionSpec {
                gain: w * r_p * (p + q),
                branches: Vec::with_capacity(2),
            };
            if pb > 0.0 {
                listen
                    .branches
                    .push((pb, stencil(Domain::Simplex, n, &[t(0, 1), t(0, 2)])));
            }
            let q2 = p + q;
            if q2 > 0.0 {
                let wg = p / q2;
                let wv = q / q2;
                let tp = wg * t(1, 1) + wv * t(2, 1);
                let tq = wg * t(1, 2) + wv * t(2, 2);
                listen.branches.push((q2, stencil(Domain::Simplex, n, &[tp, tq])));
            }
            let mut transmit = ActionSpec {
                gain: (1.0 - w) * r_s + w * r_p * q,
                branches: Vec::with_capacity(2),
            };
            if q > 0.0 {
                transmit
                    .branches
                    .push((q, stencil(Domain::Simplex, n, &[t(2, 1), t(2, 2)])));
            }
            let q4 = 1.0 - q;
            if q4 > 0.0 {
                let wg = p / q4;
                let wb = pb / q4;
                let tp = wg * t(1, 1) + wb * t(0, 1);
                let tq = wg * t(1, 2) + wb * t(0, 2);
                transmit.branches.push((q4, stencil(Domain::Simplex, n, &[tp, tq])));
            }
            nodes.push(vec![listen, transmit]);
        }
    }
    value_iterate(
        Problem {
            domain: Domain::Simplex,
            resolution: n,
            nodes,
        },
        params,
    )
}

/// Solves the two-channel Bellman equation on `(p, q)`, the erasure beliefs
/// of the two channels, with actions ListenBoth/TxCh1/TxCh2.
pub fn solve_two_channel(
    model1: &ChannelModel,
    model2: &ChannelModel,
    params: &SolverParams,
) -> Result<Solution> {
    params.validate()?;
    let (p_ee1, p_ne1) = require_erasure(model1)?;
    let (p_ee2, p_ne2) = require_erasure(model2)?;
    let (rp1, rp2) = (model1.primary_reward, model2.primary_reward);
    let n = params.grid_resolution;
    let (w, r_s) = (params.objective.w, params.objective.r_s);
    let h = (n - 1) as f64;
    let drift1 = |p: f64| p * p_ee1 + (1.0 - p) * p_ne1;
    let drift2 = |q: f64| q * p_ee2 + (1.0 - q) * p_ne2;
    let mut nodes = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let p = i as f64 / h;
            let q = j as f64 / h;
            let mut listen = ActionSpec {
                gain: w * (rp1 * (1.0 - p) + rp2 * (1.0 - q)),
                branches: Vec::with_capacity(4),
            };
            for (prob, tp, tq) in [
                ((1.0 - p) * (1.0 - q), p_ne1, p_ne2),
                ((1.0 - p) * q, p_ne1, p_ee2),
                (p * (1.0 - q), p_ee1, p_ne2),
                (p * q, p_ee1, p_ee2),
            ] {
                if prob > 0.0 {
                    listen.branches.push((prob, stencil(Domain::Square, n, &[tp, tq])));
                }
            }
            let mut tx1 = ActionSpec {
                gain: (1.0 - w) * r_s + w * rp2 * (1.0 - q),
                branches: Vec::with_capacity(2),
            };
            for (prob, tq) in [(1.0 - q, p_ne2), (q, p_ee2)] {
                if prob > 0.0 {
                    tx1.branches
                        .push((prob, stencil(Domain::Square, n, &[drift1(p), tq])));
                }
            }
            let mut tx2 = ActionSpec {
                gain: (1.0 - w) * r_s + w * rp1 * (1.0 - p),
                branches: Vec::with_capacity(2),
            };
            for (prob, tp) in [(1.0 - p, p_ne1), (p, p_ee1)] {
                if prob > 0.0 {
                    tx2.branches
                        .push((prob, stencil(Domain::Square, n, &[tp, drift2(q)])));
                }
            }
            nodes.push(vec![listen, tx1, tx2]);
        }
    }
    value_iterate(
        Problem {
            domain: Domain::Square,
            resolution: n,
            nodes,
        },
        params,
    )
}

/// Threshold of a solved 1D policy with its analytic bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Midpoint of the grid cell where the action flips.
    pub p_th: f64,
    /// `1 − (1−w)·r_s / (w·r_p)`.
    pub lower_bound: f64,
    /// `1 − (1−w)·r_s·P_NE / (w·r_p)`.
    pub upper_bound: f64,
}

/// Outcome of scanning a 1D action array for the listen→transmit crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdOutcome {
    Threshold(ThresholdReport),
    /// The whole grid takes one action; no crossing exists.
    AllSameAction(Action),
}

/// Locates the single listen→transmit crossing of a solved 1D grid.
///
/// More than one crossing, or a crossing in the wrong direction, signals a
/// solver bug and is reported as an invariant violation.
pub fn extract_threshold(
    grid: &ValueGrid,
    params: &SolverParams,
    model: &ChannelModel,
) -> Result<ThresholdOutcome> {
    if grid.domain != Domain::Interval {
        return Err(Error::Precondition(
            "threshold extraction applies to 1D grids only".into(),
        ));
    }
    let changes: Vec<usize> = grid
        .actions
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| (w[0] != w[1]).then_some(i))
        .collect();
    match changes.len() {
        0 => {
            let action = if grid.actions[0] == 0 {
                Action::Listen
            } else {
                Action::Transmit
            };
            Ok(ThresholdOutcome::AllSameAction(action))
        }
        1 => {
            let i = changes[0];
            if grid.actions[i] != 0 {
                return Err(Error::InvariantViolation(
                    "action array crosses from transmit to listen".into(),
                ));
            }
            let h = (grid.resolution - 1) as f64;
            let p_th = (i as f64 + 0.5) / h;
            let (w, r_s) = (params.objective.w, params.objective.r_s);
            let r_p = model.primary_reward;
            let p_ne = model.transitions.prob(1, 0);
            let ratio = (1.0 - w) * r_s / (w * r_p);
            Ok(ThresholdOutcome::Threshold(ThresholdReport {
                p_th,
                lower_bound: 1.0 - ratio,
                upper_bound: 1.0 - ratio * p_ne,
            }))
        }
        k => Err(Error::InvariantViolation(format!(
            "action array has {k} crossings; the optimal 1D policy admits exactly one"
        ))),
    }
}
