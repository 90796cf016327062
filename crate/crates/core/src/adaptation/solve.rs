use log::debug;

use crate::channel::NakagamiChannel;
use crate::error::{Error, Result};
use crate::harq::{HarqConfig, OutageReport, AVERAGE_POWER_BUDGET};
use crate::search::golden_section;

use super::dp::{assemble, solve_stages, StageTables};
use super::evaluate::{evaluate_policy, Evaluation};
use super::model::{AdaptationModel, DpSettings};
use super::{AdaptationPolicy, DEFAULT_GRID_POINTS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationSettings {
    pub grid_points: usize,
    pub dp: DpSettings,
    /// Allowed relative excess of the average power over the budget, and the
    /// target accuracy of the multiplier search.
    pub budget_tol: f64,
    /// First-power values tried (halving from the largest useful one)
    /// before the golden refinement.
    pub p1_scan: usize,
    pub p1_refine: usize,
    pub max_lambda_steps: usize,
}

impl Default for AdaptationSettings {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            dp: DpSettings::default(),
            budget_tol: 1e-3,
            p1_scan: 7,
            p1_refine: 10,
            max_lambda_steps: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptationSolution {
    pub policy: AdaptationPolicy,
    pub evaluation: Evaluation,
    pub report: OutageReport,
    pub lambda: f64,
    /// `J_1(0)` of the backward induction at the returned multiplier.
    pub dual_value: f64,
    /// `J_1(0) - lambda`, the minimized Lagrangian.
    pub lagrangian: f64,
}

impl AdaptationSolution {
    pub fn outage(&self) -> f64 {
        self.evaluation.outage()
    }

    pub fn average_power(&self) -> f64 {
        self.evaluation.average_power
    }
}

fn finish(model: &AdaptationModel, stages: &StageTables, p1: f64) -> Result<AdaptationSolution> {
    let dp = assemble(model, stages, p1)?;
    let evaluation = evaluate_policy(&dp.policy, &model.channel, &model.config, &model.grid)?;
    let report = evaluation.report()?;
    Ok(AdaptationSolution {
        lagrangian: dp.lagrangian(),
        dual_value: dp.dual_value,
        lambda: dp.lambda,
        policy: dp.policy,
        evaluation,
        report,
    })
}

/// Tunes the multiplier for a fixed first-round power so that the average
/// power meets the budget. `None` when no multiplier makes `p1` feasible.
pub fn solve_for_first_power(
    model: &AdaptationModel,
    p1: f64,
    settings: &AdaptationSettings,
    lambda_hint: Option<f64>,
) -> Result<Option<AdaptationSolution>> {
    lambda_search(model, p1, settings, lambda_hint, None)
}

fn lambda_search(
    model: &AdaptationModel,
    p1: f64,
    settings: &AdaptationSettings,
    lambda_hint: Option<f64>,
    free_tables: Option<&StageTables>,
) -> Result<Option<AdaptationSolution>> {
    let budget = AVERAGE_POWER_BUDGET;
    let tol = settings.budget_tol;
    let run = |lambda: f64| -> Result<AdaptationSolution> {
        if lambda == 0.0 {
            if let Some(t) = free_tables {
                return finish(model, t, p1);
            }
        }
        finish(model, &solve_stages(model, lambda)?, p1)
    };
    let excess = |s: &AdaptationSolution| s.average_power() / budget - 1.0;

    let free = run(0.0)?;
    if excess(&free) <= tol {
        return Ok(Some(free));
    }

    const LAMBDA_MIN: f64 = 1e-12;
    const LAMBDA_MAX: f64 = 1e9;
    // lo: over budget, hi: within budget
    let mut lo: Option<(f64, AdaptationSolution)> = None;
    let mut hi: Option<(f64, AdaptationSolution)> = None;
    let mut lambda = lambda_hint.filter(|l| *l > 0.0).unwrap_or(1.0).clamp(LAMBDA_MIN, LAMBDA_MAX);
    loop {
        let s = run(lambda)?;
        let g = excess(&s);
        if g.abs() <= tol {
            return Ok(Some(s));
        }
        if g > 0.0 {
            lo = Some((lambda, s));
            if hi.is_some() {
                break;
            }
            if lambda >= LAMBDA_MAX {
                debug!("p1={p1}: over budget even at lambda={lambda}");
                return Ok(None);
            }
            lambda = (lambda * 4.0).min(LAMBDA_MAX);
        } else {
            hi = Some((lambda, s));
            if lo.is_some() {
                break;
            }
            if lambda <= LAMBDA_MIN {
                return Ok(hi.map(|h| h.1));
            }
            lambda = (lambda / 4.0).max(LAMBDA_MIN);
        }
    }
    let (mut lo, mut hi) = (lo.unwrap(), hi.unwrap());

    // Illinois regula falsi on ln(lambda); the excess decreases in lambda.
    let mut g_lo = excess(&lo.1);
    let mut g_hi = excess(&hi.1);
    let mut side = 0i8;
    for _ in 0..settings.max_lambda_steps {
        let (a, b) = (lo.0.ln(), hi.0.ln());
        if b - a < 1e-10 {
            break;
        }
        let mut x = a + (b - a) * g_lo / (g_lo - g_hi);
        let margin = 0.02 * (b - a);
        if !(x > a + margin && x < b - margin) {
            x = 0.5 * (a + b);
        }
        let lambda = x.exp();
        let s = run(lambda)?;
        let g = excess(&s);
        if g.abs() <= tol {
            return Ok(Some(s));
        }
        if g > 0.0 {
            lo = (lambda, s);
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = (lambda, s);
            g_hi = g;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    debug!("p1={p1}: multiplier bracket collapsed at {:.6e}; keeping the feasible side", hi.0);
    Ok(Some(hi.1))
}

/// Full adaptation solve: outer search over the first-round power, inner
/// multiplier search, backward induction and exact evaluation.
pub fn solve_adaptation(
    ch: &NakagamiChannel,
    config: &HarqConfig,
    settings: &AdaptationSettings,
) -> Result<AdaptationSolution> {
    let model = AdaptationModel::new(*ch, *config, settings.grid_points, settings.dp)?;
    solve_with_model(&model, settings)
}

pub(crate) fn solve_with_model(model: &AdaptationModel, settings: &AdaptationSettings) -> Result<AdaptationSolution> {
    let config = &model.config;
    let peak = config.effective_peak();
    if config.rounds == 1 {
        let p1 = peak.min(AVERAGE_POWER_BUDGET);
        return lambda_search(model, p1, settings, None, None)?
            .ok_or_else(|| Error::Infeasible("single round at the budget power".into()));
    }

    let free = solve_stages(model, 0.0)?;
    // p1 can never exceed the expected number of rounds times the budget.
    let p1_max = peak.min(config.rounds as f64 * AVERAGE_POWER_BUDGET);

    let mut tried: Vec<(f64, f64, Option<AdaptationSolution>)> = Vec::new();
    let mut best: Option<AdaptationSolution> = None;
    let mut evaluate = |p1: f64, tried: &mut Vec<(f64, f64, Option<AdaptationSolution>)>| -> Result<f64> {
        let hint = tried
            .iter()
            .filter_map(|(p, _, s)| s.as_ref().map(|s| ((p / p1).ln().abs(), s.lambda)))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map(|x| x.1)
            .filter(|l| *l > 0.0);
        let sol = lambda_search(model, p1, settings, hint, Some(&free))?;
        let value = match &sol {
            Some(s) => s.outage(),
            // infeasible first powers rank behind every feasible one
            None => 2.0 + p1,
        };
        debug!("p1={p1:.5} -> f_K={value:.6e}");
        if let Some(s) = &sol {
            if best.as_ref().is_none_or(|b| s.outage() < b.outage()) {
                best = Some(s.clone());
            }
        }
        tried.push((p1, value, None));
        if let Some(s) = sol {
            tried.last_mut().unwrap().2 = Some(s);
        }
        Ok(value)
    };

    let scan: Vec<f64> = (0..settings.p1_scan.max(2))
        .map(|i| p1_max / 2f64.powi(i as i32))
        .collect();
    for &p in &scan {
        evaluate(p, &mut tried)?;
    }
    let (best_idx, _) = scan
        .iter()
        .enumerate()
        .map(|(i, _)| (i, tried[i].1))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let lo = scan[(best_idx + 1).min(scan.len() - 1)].ln();
    let hi = scan[best_idx.saturating_sub(1)].ln();

    let mut err = None;
    golden_section(
        |lp| match evaluate(lp.exp(), &mut tried) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        lo,
        hi,
        0.0,
        settings.p1_refine,
    );
    if let Some(e) = err {
        return Err(e);
    }
    best.ok_or_else(|| Error::Infeasible("no first-round power meets the average-power budget".into()))
}
