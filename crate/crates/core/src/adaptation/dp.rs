use rayon::prelude::*;

use crate::channel::NakagamiChannel;
use crate::error::{invalid, Result};
use crate::harq::HarqConfig;
use crate::quad::{gauss_kronrod, Tolerance};
use crate::search::golden_section;

use super::grid::StateGrid;
use super::model::AdaptationModel;
use super::{AdaptationPolicy, ValueTable};

/// Output of one backward induction at a fixed multiplier and first power.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub policy: AdaptationPolicy,
    /// `J_2 .. J_K` on the grid.
    pub values: Vec<ValueTable>,
    pub lambda: f64,
    /// `J_1(0)`: the first-stage value of the recursion.
    pub dual_value: f64,
}

impl DpSolution {
    /// Value of the Lagrangian `f_K + lambda (sum E[P_k] - sum_{k<K} f_k)`
    /// at the minimizing policy. It differs from `J_1(0)` by the constant
    /// `lambda f_0` that the recursion leaves out.
    pub fn lagrangian(&self) -> f64 {
        self.dual_value - self.lambda
    }
}

/// Stage tables for a given multiplier; independent of the first power.
#[derive(Debug, Clone)]
pub(crate) struct StageTables {
    pub lambda: f64,
    /// Transmit powers at every node, silent or not.
    pub powers: Vec<Vec<f64>>,
    pub silent: Vec<Vec<(f64, f64)>>,
    pub values: Vec<ValueTable>,
    /// Cell-midpoint values of `(J_2 - lambda)` below threshold (all ones for K = 1).
    pub g2_mid: Vec<f64>,
}

fn cell_midpoints(nodes: &[f64]) -> Vec<f64> {
    nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Best transmitting choice at node `i`: `(cost, power)`. At the top node
/// (left limit at the threshold) any positive power crosses it, so the cost
/// is 0 with a vanishing power, reported as `NaN` and patched by the caller.
fn transmit_at_node(model: &AdaptationModel, lambda: f64, g_mid: &[f64], i: usize) -> (f64, f64) {
    if i == model.grid.len() - 1 {
        return (0.0, f64::NAN);
    }
    let cands = &model.candidates;
    let mut best_c = 0;
    let mut best_v = f64::INFINITY;
    for (c, &p) in cands.iter().enumerate() {
        let row = &model.cand_cdf[c];
        let v = lambda * p + model.expected_next(i, g_mid, |e| row[e]);
        if v < best_v {
            best_v = v;
            best_c = c;
        }
    }
    let mut best_p = cands[best_c];

    if model.settings.refine_iters > 0 {
        let lo = cands[best_c.saturating_sub(1)].ln();
        let hi = cands[(best_c + 1).min(cands.len() - 1)].ln();
        let cost = |lp: f64| {
            let p = lp.exp();
            lambda * p + model.expected_next_at_power(i, g_mid, p)
        };
        let m = golden_section(cost, lo, hi, 0.0, model.settings.refine_iters);
        if m.value < best_v {
            best_v = m.value;
            best_p = m.x.exp();
        }
    }
    (best_v, best_p)
}

/// Silent intervals from per-node `transmit - silent` cost differences
/// (silence where the difference is >= 0). Interval ends are placed where
/// the linearly interpolated difference crosses zero.
fn silent_intervals(grid: &StateGrid, diff: &[f64]) -> Vec<(f64, f64)> {
    let n = diff.len();
    let silent = |i: usize| diff[i] >= 0.0;
    let crossing = |i: usize| {
        let (a, b) = (diff[i], diff[i + 1]);
        let t = if a == b { 0.5 } else { (a / (a - b)).clamp(0.0, 1.0) };
        grid.point(i) + t * grid.step()
    };
    let mut out = Vec::new();
    let mut start = if silent(0) { Some(0.0) } else { None };
    for i in 0..n - 1 {
        match (silent(i), silent(i + 1)) {
            (true, false) => out.push((start.take().unwrap(), crossing(i))),
            (false, true) => start = Some(crossing(i)),
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((a, grid.threshold()));
    }
    out.retain(|(a, b)| b > a);
    out
}

pub(crate) fn solve_stages(model: &AdaptationModel, lambda: f64) -> Result<StageTables> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("multiplier must be finite and >= 0, got {lambda}")));
    }
    let n = model.grid.len();
    let rounds = model.config.rounds;

    // Next-stage cost below threshold; starts as the outage indicator.
    let mut g_node = vec![1.0; n];
    let mut g_mid = vec![1.0; n - 1];
    let mut powers = Vec::with_capacity(rounds.saturating_sub(1));
    let mut silent = Vec::with_capacity(rounds.saturating_sub(1));
    let mut values = Vec::with_capacity(rounds.saturating_sub(1));

    for k in (2..=rounds).rev() {
        let solved: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| transmit_at_node(model, lambda, &g_mid, i))
            .collect();
        let j: Vec<f64> = solved.iter().zip(&g_node).map(|(s, &g)| s.0.min(g)).collect();
        let diff: Vec<f64> = solved.iter().zip(&g_node).map(|(s, &g)| s.0 - g).collect();
        let mut p: Vec<f64> = solved.iter().map(|s| s.1).collect();
        p[n - 1] = p[n - 2];
        silent.push(silent_intervals(&model.grid, &diff));
        g_node = j.iter().map(|v| v - lambda).collect();
        g_mid = cell_midpoints(&g_node);
        powers.push(p);
        values.push(ValueTable { stage: k, values: j });
    }
    powers.reverse();
    silent.reverse();
    values.reverse();
    Ok(StageTables {
        lambda,
        powers,
        silent,
        values,
        g2_mid: g_mid,
    })
}

/// `J_1(0) = lambda p1 + E[(J_2 - lambda) 1{I_1 < i_th}]` (or `lambda p1 + f_1` for one round).
pub(crate) fn first_stage_value(model: &AdaptationModel, stages: &StageTables, p1: f64) -> f64 {
    stages.lambda * p1 + model.expected_next_at_power(0, &stages.g2_mid, p1)
}

pub(crate) fn assemble(model: &AdaptationModel, stages: &StageTables, p1: f64) -> Result<DpSolution> {
    let policy = AdaptationPolicy::with_silence(p1, model.grid.clone(), stages.powers.clone(), stages.silent.clone())?;
    Ok(DpSolution {
        policy,
        values: stages.values.clone(),
        lambda: stages.lambda,
        dual_value: first_stage_value(model, stages, p1),
    })
}

/// Backward induction for multiplier `lambda` and first-round power `p1`.
pub fn backward_induction(model: &AdaptationModel, lambda: f64, p1: f64) -> Result<DpSolution> {
    let peak = model.config.effective_peak();
    if !(p1 > 0.0 && p1 <= peak) {
        return Err(invalid(format!("first-round power must lie in (0, {peak}], got {p1}")));
    }
    let stages = solve_stages(model, lambda)?;
    assemble(model, &stages, p1)
}

/// Cost of using power `power` in round `k` from state `state`, with the
/// expectation over the channel done by adaptive quadrature against the
/// linearly interpolated next-stage table (`None` for the last round).
///
/// An independent route to the quantity the backward induction minimizes.
#[allow(clippy::too_many_arguments)]
pub fn stage_cost(
    k: usize,
    state: f64,
    power: f64,
    next: Option<&ValueTable>,
    grid: &StateGrid,
    ch: &NakagamiChannel,
    config: &HarqConfig,
    lambda: f64,
) -> f64 {
    let last = k >= config.rounds;
    let ith = config.threshold();
    let scheme = config.scheme;
    if power <= 0.0 {
        return match (last, next) {
            (false, Some(t)) => -lambda + t.at(grid, state),
            _ => 1.0,
        };
    }
    let gamma_succ = scheme.snr_to_reach(state, ith, power);
    let fail = ch.cdf(gamma_succ);
    let next = match (last, next) {
        (false, Some(t)) => t,
        _ => return lambda * power + fail,
    };

    // Split where the next state crosses grid points: the interpolant has
    // kinks there.
    let mut edges = vec![0.0];
    for &x in grid.points() {
        if x > state && x < ith {
            edges.push(scheme.snr_to_reach(state, x, power));
        }
    }
    edges.push(gamma_succ);
    let tol = Tolerance::new(1e-13, 1e-10);
    let integrand = |g: f64| next.at(grid, scheme.accumulate(state, g, power)) * ch.pdf(g);
    let expect: f64 = edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gauss_kronrod(integrand, w[0], w[1], tol).value)
        .sum();
    -lambda * fail + lambda * power + expect
}
