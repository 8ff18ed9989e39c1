//! Closed-form analysis of the erasure channel in the patient (α→1) limit.
//!
//! Once the discount approaches one, the optimal two-state strategy is to
//! listen while ACKs arrive and to transmit exactly M consecutive packets
//! after a NACK. The induced cycle (listen in N, observe a NACK in E, burst
//! for M slots) is a three-state chain whose stationary distribution yields
//! the long-run throughputs in closed form. This module evaluates that
//! expression, optimizes M, traces the primary/secondary rate region, and
//! solves the continuous root equation used to cross-check the integer
//! optimum.

use serde::{Deserialize, Serialize};

use crate::channel::{check_positively_correlated, m_step_erasure_prob};
use crate::{Error, Result};

/// Scan cap for the integer optimizer; larger optima report as infinite.
pub const M_SCAN_CAP: u32 = 100_000;

/// Burst length of the after-NACK policy: a finite packet count or the
/// transmit-forever sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MValue {
    Finite(u32),
    Infinite,
}

impl MValue {
    pub fn as_finite(self) -> Option<u32> {
        match self {
            MValue::Finite(m) => Some(m),
            MValue::Infinite => None,
        }
    }

    /// Ordering in which the sentinel exceeds every finite value.
    pub fn cmp_with_infinite(self, other: MValue) -> std::cmp::Ordering {
        match (self, other) {
            (MValue::Infinite, MValue::Infinite) => std::cmp::Ordering::Equal,
            (MValue::Infinite, MValue::Finite(_)) => std::cmp::Ordering::Greater,
            (MValue::Finite(_), MValue::Infinite) => std::cmp::Ordering::Less,
            (MValue::Finite(a), MValue::Finite(b)) => a.cmp(&b),
        }
    }
}

impl std::fmt::Display for MValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MValue::Finite(m) => write!(f, "{m}"),
            MValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Parameters of the after-NACK burst policy on a positively correlated
/// erasure channel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MPolicyParams {
    pub p_ee: f64,
    pub p_ne: f64,
    pub w: f64,
    pub r_p: f64,
    pub r_s: f64,
}

impl MPolicyParams {
    pub fn validate(&self) -> Result<()> {
        check_positively_correlated(self.p_ee, self.p_ne)?;
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Precondition(format!("weight w = {} outside [0,1]", self.w)));
        }
        if self.r_p < 0.0 || self.r_s < 0.0 {
            return Err(Error::Precondition("rewards must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Stationary evaluation of the burst policy for one value of M.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MPolicyEval {
    pub m: u32,
    /// Stationary probabilities of the listen-N, listen-E and burst states of
    /// the embedded chain.
    pub pss_n: f64,
    pub pss_e: f64,
    pub pss_s: f64,
    /// Long-run per-slot throughputs and the weighted objective.
    pub r_p: f64,
    pub r_s: f64,
    pub r: f64,
}

/// Evaluates the burst policy: stationary probabilities of the embedded
/// chain, then per-slot rates obtained by weighting the burst state with its
/// M-slot sojourn.
pub fn evaluate_m_policy(m: u32, params: &MPolicyParams) -> Result<MPolicyEval> {
    params.validate()?;
    let t_m = m_step_erasure_prob(m, params.p_ee, params.p_ne)?;
    let denom = 1.0 + 2.0 * params.p_ne - t_m;
    let pss_n = (1.0 - t_m) / denom;
    let pss_e = params.p_ne / denom;
    let pss_s = pss_e;
    let slots = pss_n + pss_e + m as f64 * pss_s;
    let r_p = params.r_p * pss_n / slots;
    let r_s = params.r_s * m as f64 * pss_s / slots;
    Ok(MPolicyEval {
        m,
        pss_n,
        pss_e,
        pss_s,
        r_p,
        r_s,
        r: params.w * r_p + (1.0 - params.w) * r_s,
    })
}

/// Throughput pair of a possibly infinite burst length. The infinite burst
/// silences the primary user and saturates the secondary rate.
pub fn evaluate_m_value(m: MValue, params: &MPolicyParams) -> Result<(f64, f64, f64)> {
    match m {
        MValue::Finite(m) => {
            let eval = evaluate_m_policy(m, params)?;
            Ok((eval.r_p, eval.r_s, eval.r))
        }
        MValue::Infinite => {
            params.validate()?;
            Ok((0.0, params.r_s, (1.0 - params.w) * params.r_s))
        }
    }
}

/// Burst length maximizing the weighted throughput.
///
/// The boundary regimes are decided algebraically; otherwise the single peak
/// of R(M) justifies scanning upward until the first non-improvement. A peak
/// still climbing at the scan cap reports as infinite.
pub fn optimal_m(params: &MPolicyParams) -> Result<MValue> {
    params.validate()?;
    let weighted_p = params.w * params.r_p;
    let weighted_s = (1.0 - params.w) * params.r_s;
    if weighted_p < weighted_s {
        return Ok(MValue::Infinite);
    }
    if weighted_p * (1.0 - params.p_ee) > weighted_s {
        return Ok(MValue::Finite(0));
    }
    let mut best = evaluate_m_policy(0, params)?.r;
    let mut best_m = 0u32;
    for m in 1..=M_SCAN_CAP {
        let r = evaluate_m_policy(m, params)?.r;
        if r > best {
            best = r;
            best_m = m;
        } else {
            return Ok(MValue::Finite(best_m));
        }
    }
    Ok(MValue::Infinite)
}

/// One vertex of the rate-region boundary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatePoint {
    pub m: u32,
    pub r_p: f64,
    pub r_s: f64,
}

/// Boundary vertices plus the time-division segments joining consecutive
/// vertices. Mixing two burst lengths over time achieves any point on a
/// segment; the segments are metadata, not an executable policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRegion {
    pub points: Vec<RatePoint>,
    pub segments: Vec<(usize, usize)>,
}

/// Rate pairs achieved by each burst length in `m_list`.
pub fn rate_region(
    p_ee: f64,
    p_ne: f64,
    r_p: f64,
    r_s: f64,
    m_list: &[u32],
) -> Result<RateRegion> {
    let mut seen = std::collections::HashSet::new();
    for &m in m_list {
        if !seen.insert(m) {
            return Err(Error::Precondition(format!("duplicate M = {m} in list")));
        }
    }
    let params = MPolicyParams {
        p_ee,
        p_ne,
        w: 0.5,
        r_p,
        r_s,
    };
    let points = m_list
        .iter()
        .map(|&m| {
            let eval = evaluate_m_policy(m, &params)?;
            Ok(RatePoint {
                m,
                r_p: eval.r_p,
                r_s: eval.r_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let segments = (1..points.len()).map(|i| (i - 1, i)).collect();
    Ok(RateRegion { points, segments })
}

/// Solution of the continuous stationarity equation for the burst length.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RootReport {
    /// Root of the transformed variable.
    pub m1: f64,
    /// Root mapped back to a continuous burst length.
    pub m_continuous: f64,
}

/// Solves the continuous root equation `C·log M₁ = K − M₁·log B` whose root,
/// mapped through `M = (M₁ − D)/C`, locates the stationary point of R(M).
///
/// The logarithm's slope is everywhere below the linear term's slope on the
/// valid domain, so at most one root exists there and bisection finds it.
pub fn root_equation_m1(params: &MPolicyParams) -> Result<RootReport> {
    params.validate()?;
    if params.w * params.r_p <= (1.0 - params.w) * params.r_s {
        return Err(Error::Precondition(
            "always-transmit regime: w·r_p must exceed (1−w)·r_s for a finite peak".into(),
        ));
    }
    let a_c = 1.0 - params.p_ee;
    let b_base = params.p_ee - params.p_ne;
    let p = params.p_ne;
    let a = params.w * params.r_p * a_c * p * (1.0 - b_base);
    let b = (1.0 - params.w) * params.r_s * a_c * p * (1.0 - b_base);
    let c_const = (a - b) * (1.0 - b_base);
    let d_const = (a - b) + a * (1.0 - b_base);
    let log_arg = (a - b) - (1.0 - params.w) * params.r_s * p * p * (1.0 - b_base) * (1.0 - b_base);
    if log_arg <= 0.0 {
        return Err(Error::Precondition(format!(
            "constant a−b = {} too small: log argument (a−b) − (1−w)·r_s·P²·(1−B)² = {log_arg} is nonpositive",
            a - b
        )));
    }
    if c_const <= 0.0 {
        return Err(Error::Precondition(format!(
            "constant C = {c_const} must be positive"
        )));
    }
    if d_const <= 0.0 {
        return Err(Error::Precondition(format!(
            "constant D = {d_const} must be positive"
        )));
    }
    let log_b = b_base.ln();
    let k_const = c_const * log_arg.ln() + (d_const - c_const) * log_b;
    // h(M1) = C·ln M1 + M1·ln B − K is strictly decreasing for M1 ≥ D because
    // the log slope C/M1 stays below −ln B there (slope lemma 1/D < −ln B/C).
    let h = |m1: f64| c_const * m1.ln() + m1 * log_b - k_const;
    if h(d_const) < 0.0 {
        return Err(Error::Precondition(
            "R(M) has no stationary point for M ≥ 0: the peak is at M = 0".into(),
        ));
    }
    let mut lo = d_const;
    let mut hi = 2.0 * d_const.max(1e-300);
    let mut expand = 0;
    while h(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        expand += 1;
        if expand > 2000 {
            return Err(Error::Solver("root bracketing did not terminate".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m1 = 0.5 * (lo + hi);
    Ok(RootReport {
        m1,
        m_continuous: (m1 - d_const) / c_const,
    })
}

/// Reports pairs of adjacent weights at which the optimal burst length fails
/// to be non-increasing. Expected empty; surfaced for inspection rather than
/// asserted.
pub fn m_star_monotonicity_violations(
    p_ee: f64,
    p_ne: f64,
    r_p: f64,
    r_s: f64,
    w_grid: &[f64],
) -> Result<Vec<(f64, MValue, f64, MValue)>> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, MValue)> = None;
    for &w in w_grid {
        let params = MPolicyParams {
            p_ee,
            p_ne,
            w,
            r_p,
            r_s,
        };
        let m = optimal_m(&params)?;
        if let Some((pw, pm)) = prev {
            if m.cmp_with_infinite(pm) == std::cmp::Ordering::Greater {
                out.push((pw, pm, w, m));
            }
        }
        prev = Some((w, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn base_params(w: f64) -> MPolicyParams {
        MPolicyParams {
            p_ee: 0.99,
            p_ne: 0.01,
            w,
            r_p: 1.0,
            r_s: 1.0,
        }
    }

    /// Oracle: stationary time shares of the explicit burst cycle, tracking
    /// the physical channel state through every slot. States are listen-N,
    /// listen-E and (burst slot i, channel c); each state occupies one slot.
    fn explicit_chain_rates(m: u32, params: &MPolicyParams) -> (f64, f64) {
        let (p_ee, p_ne) = (params.p_ee, params.p_ne);
        let m = m as usize;
        let n_states = 2 + 2 * m;
        // index 0 = listen-N, 1 = listen-E, 2 + 2*i + c = burst slot i with channel c (0 = E, 1 = N).
        let idx_burst = |i: usize, c: usize| 2 + 2 * i + c;
        let row_of = |channel_state: usize| if channel_state == 0 { [p_ee, 1.0 - p_ee] } else { [p_ne, 1.0 - p_ne] };
        let mut trans = vec![vec![0.0; n_states]; n_states];
        // Listening in N: channel moves, feedback reveals the new state.
        trans[0][0] = 1.0 - p_ne;
        trans[0][1] = p_ne;
        // Listening in E (heard a NACK): burst starts, channel moves.
        if m == 0 {
            // Zero-length burst: back to listening immediately.
            trans[1][1] = p_ee;
            trans[1][0] = 1.0 - p_ee;
        } else {
            trans[1][idx_burst(0, 0)] = p_ee;
            trans[1][idx_burst(0, 1)] = 1.0 - p_ee;
            for i in 0..m {
                for c in 0..2 {
                    let row = row_of(c);
                    if i + 1 < m {
                        trans[idx_burst(i, c)][idx_burst(i + 1, 0)] = row[0];
                        trans[idx_burst(i, c)][idx_burst(i + 1, 1)] = row[1];
                    } else {
                        trans[idx_burst(i, c)][1] = row[0];
                        trans[idx_burst(i, c)][0] = row[1];
                    }
                }
            }
        }
        // Power iteration to stationarity.
        let mut dist = vec![1.0 / n_states as f64; n_states];
        for _ in 0..200_000 {
            let mut next = vec![0.0; n_states];
            for (i, &d) in dist.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (j, &t) in trans[i].iter().enumerate() {
                    next[j] += d * t;
                }
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
        let burst_share: f64 = (0..m).map(|i| dist[idx_burst(i, 0)] + dist[idx_burst(i, 1)]).sum();
        (params.r_p * dist[0], params.r_s * burst_share)
    }

    #[test]
    fn stationary_identity_and_split() {
        let params = base_params(0.6);
        for m in [0u32, 1, 7, 40] {
            let eval = evaluate_m_policy(m, &params).unwrap();
            assert!((eval.pss_n + eval.pss_e + eval.pss_s - 1.0).abs() < 1e-12);
            assert_eq!(eval.pss_e, eval.pss_s);
            assert!((eval.r - (0.6 * eval.r_p + 0.4 * eval.r_s)).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_explicit_chain_for_small_m() {
        let params = base_params(0.6);
        for m in 0..=10u32 {
            let eval = evaluate_m_policy(m, &params).unwrap();
            let (r_p, r_s) = explicit_chain_rates(m, &params);
            assert!(
                (eval.r_p - r_p).abs() < 1e-10 && (eval.r_s - r_s).abs() < 1e-10,
                "M = {m}: formula ({}, {}) vs chain ({r_p}, {r_s})",
                eval.r_p,
                eval.r_s
            );
        }
    }

    #[test]
    fn large_m_approaches_pure_secondary() {
        let params = base_params(0.6);
        let eval = evaluate_m_policy(100_000, &params).unwrap();
        assert!(eval.r_p < 1e-3);
        assert!((eval.r_s - params.r_s).abs() < 1e-3);
        assert!((eval.r - (1.0 - params.w) * params.r_s).abs() < 1e-3);
    }

    #[test]
    fn primary_only_weight_is_decreasing_in_m() {
        let params = base_params(1.0);
        let mut prev = evaluate_m_policy(0, &params).unwrap().r;
        for m in 1..=1000u32 {
            let r = evaluate_m_policy(m, &params).unwrap().r;
            assert!(r < prev, "R must strictly decrease at w = 1, M = {m}");
            prev = r;
        }
    }

    #[test]
    fn optimal_m_boundary_regimes() {
        assert_eq!(optimal_m(&base_params(0.4)).unwrap(), MValue::Infinite);
        assert_eq!(optimal_m(&base_params(0.49)).unwrap(), MValue::Infinite);
        assert_eq!(optimal_m(&base_params(1.0)).unwrap(), MValue::Finite(0));
        // Listen-always regime: w r_p (1 - P_EE) > (1-w) r_s.
        let mut params = base_params(0.9);
        params.p_ee = 0.05;
        params.p_ne = 0.01;
        params.r_s = 0.01;
        assert_eq!(optimal_m(&params).unwrap(), MValue::Finite(0));
    }

    #[test]
    fn optimal_m_matches_exhaustive_scan() {
        for w in [0.55, 0.6, 0.7, 0.85] {
            let params = base_params(w);
            let fast = optimal_m(&params).unwrap();
            let mut best = (0u32, f64::NEG_INFINITY);
            for m in 0..=5_000u32 {
                let r = evaluate_m_policy(m, &params).unwrap().r;
                if r > best.1 {
                    best = (m, r);
                }
            }
            assert_eq!(fast, MValue::Finite(best.0), "w = {w}");
        }
    }

    #[test]
    fn rate_region_shape() {
        let region = rate_region(0.99, 0.01, 1.0, 1.0, &[0, 1, 2, 5, 10, 100, 10_000]).unwrap();
        assert_eq!(region.points[0].r_s, 0.0);
        for pair in region.points.windows(2) {
            assert!(pair[1].r_p < pair[0].r_p);
            assert!(pair[1].r_s > pair[0].r_s);
        }
        let last = region.points.last().unwrap();
        assert!(last.r_s > 0.99 && last.r_p < 0.01);
        assert_eq!(region.segments.len(), region.points.len() - 1);
        assert!(rate_region(0.99, 0.01, 1.0, 1.0, &[1, 1]).is_err());
    }

    #[test]
    fn root_equation_brackets_integer_optimum() {
        let params = base_params(0.6);
        let report = root_equation_m1(&params).unwrap();
        let m_star = optimal_m(&params).unwrap().as_finite().unwrap();
        let floor = report.m_continuous.floor() as i64;
        let ceil = report.m_continuous.ceil() as i64;
        assert!(
            i64::from(m_star) == floor || i64::from(m_star) == ceil,
            "root {} does not bracket M* = {m_star}",
            report.m_continuous
        );
    }

    #[test]
    fn root_equation_rejects_transmit_regime() {
        assert!(matches!(
            root_equation_m1(&base_params(0.4)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn slope_inequality_holds_for_valid_params() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let p_ne: f64 = rng.random_range(0.005..0.5);
            let p_ee = rng.random_range((p_ne + 0.01).min(0.99)..0.995);
            let w = rng.random_range(0.05..0.95);
            let r_p = rng.random_range(0.2..2.0);
            let r_s = rng.random_range(0.2..2.0);
            if w * r_p <= (1.0 - w) * r_s {
                continue;
            }
            let a_c = 1.0 - p_ee;
            let b_base = p_ee - p_ne;
            let a = w * r_p * a_c * p_ne * (1.0 - b_base);
            let b = (1.0 - w) * r_s * a_c * p_ne * (1.0 - b_base);
            let c_const = (a - b) * (1.0 - b_base);
            let d_const = (a - b) + a * (1.0 - b_base);
            assert!(
                1.0 / d_const < -b_base.ln() / c_const,
                "slope inequality failed at p_ee={p_ee} p_ne={p_ne} w={w}"
            );
            checked += 1;
        }
    }

    #[test]
    fn throughput_has_single_peak_in_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..50 {
            let p_ne: f64 = rng.random_range(0.01..0.4);
            let p_ee = rng.random_range((p_ne + 0.05).min(0.98)..0.99);
            let w = rng.random_range(0.05..0.95);
            let params = MPolicyParams {
                p_ee,
                p_ne,
                w,
                r_p: rng.random_range(0.2..2.0),
                r_s: rng.random_range(0.2..2.0),
            };
            let mut signs = 0;
            let mut last_sign = 0i8;
            let mut prev = evaluate_m_policy(0, &params).unwrap().r;
            for m in 1..=2_000u32 {
                let r = evaluate_m_policy(m, &params).unwrap().r;
                let diff = r - prev;
                prev = r;
                if diff.abs() <= 1e-14 * r.abs().max(1.0) {
                    continue;
                }
                let sign = if diff > 0.0 { 1 } else { -1 };
                if sign != last_sign && last_sign != 0 {
                    signs += 1;
                }
                last_sign = sign;
            }
            assert!(signs <= 1, "multiple sign changes at {params:?}");
        }
    }

    #[test]
    fn m_star_monotonicity_report_runs() {
        let w_grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let violations = m_star_monotonicity_violations(0.99, 0.01, 1.0, 1.0, &w_grid).unwrap();
        if !violations.is_empty() {
            eprintln!("optimal burst length not monotone at: {violations:?}");
        }
    }
}
