//! Independent oracles shared by the integration suites. Everything here
//! recomputes expected values from first principles (explicit chains, path
//! enumeration, matrix powers) without touching the implementation paths it
//! checks.

use cogarq::closedform::MPolicyParams;
use cogarq::hmm::{HmmSpec, ObservationSequence};
use cogarq::channel::TransitionMatrix;

/// Stationary time shares of the explicit after-NACK burst cycle, tracking
/// the physical channel through every slot: states are listen-N, listen-E
/// and (burst slot i, channel c). Every state occupies one slot, so the
/// stationary distribution gives per-slot rates directly.
pub fn explicit_chain_rates(m: u32, params: &MPolicyParams) -> (f64, f64) {
    let (p_ee, p_ne) = (params.p_ee, params.p_ne);
    let m = m as usize;
    let n_states = 2 + 2 * m;
    let idx_burst = |i: usize, c: usize| 2 + 2 * i + c;
    // Sparse edge list (from, to, probability).
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    edges.push((0, 0, 1.0 - p_ne));
    edges.push((0, 1, p_ne));
    if m == 0 {
        edges.push((1, 1, p_ee));
        edges.push((1, 0, 1.0 - p_ee));
    } else {
        edges.push((1, idx_burst(0, 0), p_ee));
        edges.push((1, idx_burst(0, 1), 1.0 - p_ee));
        for i in 0..m {
            for c in 0..2 {
                let (to_e, to_n) = if c == 0 {
                    (p_ee, 1.0 - p_ee)
                } else {
                    (p_ne, 1.0 - p_ne)
                };
                if i + 1 < m {
                    edges.push((idx_burst(i, c), idx_burst(i + 1, 0), to_e));
                    edges.push((idx_burst(i, c), idx_burst(i + 1, 1), to_n));
                } else {
                    edges.push((idx_burst(i, c), 1, to_e));
                    edges.push((idx_burst(i, c), 0, to_n));
                }
            }
        }
    }
    let mut dist = vec![1.0 / n_states as f64; n_states];
    for _ in 0..500_000 {
        let mut next = vec![0.0; n_states];
        for &(from, to, p) in &edges {
            next[to] += dist[from] * p;
        }
        let residual = next
            .iter()
            .zip(dist.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        dist = next;
        if residual < 1e-15 {
            break;
        }
    }
    let burst_share: f64 = (0..m)
        .map(|i| dist[idx_burst(i, 0)] + dist[idx_burst(i, 1)])
        .sum();
    (params.r_p * dist[0], params.r_s * burst_share)
}

/// Brute-force path enumeration: exact likelihood and per-slot posteriors.
pub fn enumerate_paths(
    obs: &ObservationSequence,
    spec: &HmmSpec,
    transitions: &TransitionMatrix,
) -> (f64, Vec<Vec<f64>>) {
    let s = spec.n_states();
    let len = obs.len();
    let emission = |state: usize, t: usize| -> f64 {
        let ack = spec
            .success
            .ack_prob(state, obs.regimes[t] == cogarq::hmm::Regime::Transmitting);
        match obs.symbols[t] {
            cogarq::channel::Feedback::Ack => ack,
            cogarq::channel::Feedback::Nack => 1.0 - ack,
        }
    };
    let mut total = 0.0;
    let mut posterior = vec![vec![0.0; s]; len];
    let n_paths = s.pow(len as u32);
    for code in 0..n_paths {
        let mut c = code;
        let mut prob = 0.0;
        let mut prev = 0usize;
        for t in 0..len {
            let state = c % s;
            c /= s;
            if t == 0 {
                prob = transitions.stationary()[state] * emission(state, 0);
            } else {
                prob *= transitions.prob(prev, state) * emission(state, t);
            }
            prev = state;
        }
        if prob == 0.0 {
            continue;
        }
        total += prob;
        let mut c = code;
        for row in posterior.iter_mut() {
            row[c % s] += prob;
            c /= s;
        }
    }
    for row in &mut posterior {
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    (total, posterior)
}

/// Piecewise-linear interpolation error estimate of a 1D grid: the largest
/// second difference over 8.
pub fn interp_error_bound_1d(values: &[f64]) -> f64 {
    values
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0_f64, f64::max)
        / 8.0
}
