//! Experiment descriptions, SNR sweeps and their CSV output.
//!
//! A spec file is flat `key = value` text, one experiment per file, with `#`
//! comments. Lists are comma separated; `snr_db` also takes `start:stop:step`.
//!
//! ```text
//! scheme = ir
//! policy = ad
//! m = 2
//! rate = 1.5
//! rounds = 4
//! p_max = inf
//! snr_db = -4
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::adaptation::{evaluate_policy, solve_adaptation, AdaptationSettings, StateGrid, DEFAULT_GRID_POINTS};
use crate::allocation::{solve_allocation, AllocationPolicy, ApproxCoefficients};
use crate::channel::NakagamiChannel;
use crate::error::{invalid, Result};
use crate::gp::{diversity_order, solve_gp};
use crate::harq::{HarqConfig, Scheme, AVERAGE_POWER_BUDGET};
use crate::montecarlo::{simulate, SimConfig, MIN_TRIALS};
use crate::policy::{PolicyKind, PowerPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub policy: PolicyKind,
    pub m: f64,
    pub rate: f64,
    pub rounds: usize,
    pub p_max: f64,
    pub snr_db: Vec<f64>,
    pub grid_n: usize,
    /// Monte-Carlo packets per SNR point; 0 skips simulation.
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Ir,
            policy: PolicyKind::Al,
            m: 1.0,
            rate: 1.0,
            rounds: 2,
            p_max: f64::INFINITY,
            snr_db: vec![10.0],
            grid_n: DEFAULT_GRID_POINTS,
            trials: 0,
            seed: 1,
            out: None,
        }
    }
}

/// Parses a number, accepting `inf` for an unbounded value.
pub fn parse_power(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    parse_num(t, "p_max")
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse '{}'", s.trim())))
}

/// `a:b:step` (inclusive of `b` up to round-off) or a comma list.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("snr_db range must be start:stop:step, got '{s}'")));
        }
        let (a, b, step): (f64, f64, f64) = (
            parse_num(parts[0], "snr_db")?,
            parse_num(parts[1], "snr_db")?,
            parse_num(parts[2], "snr_db")?,
        );
        if !(step > 0.0) || b < a {
            return Err(invalid(format!("snr_db range '{s}' is empty or has a non-positive step")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    s.split(',').map(|x| parse_num(x, "snr_db")).collect()
}

impl ExperimentSpec {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "scheme" => self.scheme = v.parse()?,
            "policy" => self.policy = v.parse()?,
            "m" => self.m = parse_num(v, "m")?,
            "rate" | "R" => self.rate = parse_num(v, "rate")?,
            "rounds" | "K" => self.rounds = parse_num(v, "rounds")?,
            "p_max" | "pmax" => self.p_max = parse_power(v)?,
            "snr_db" => self.snr_db = parse_snr_list(v)?,
            "grid_n" => self.grid_n = parse_num(v, "grid_n")?,
            "trials" => self.trials = parse_num(v, "trials")?,
            "seed" => self.seed = parse_num(v, "seed")?,
            "out" => self.out = Some(PathBuf::from(v)),
            other => return Err(invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key = value", n + 1)))?;
            spec.set(k, v).map_err(|e| invalid(format!("line {}: {e}", n + 1)))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every solver precondition up front.
    pub fn validate(&self) -> Result<()> {
        self.config()?;
        NakagamiChannel::new(self.m, 1.0)?;
        if self.snr_db.is_empty() || self.snr_db.iter().any(|x| !x.is_finite()) {
            return Err(invalid("snr_db must list at least one finite value"));
        }
        StateGrid::new(self.grid_n, self.config()?.threshold())?;
        if self.trials != 0 && self.trials < MIN_TRIALS {
            return Err(invalid(format!("trials must be 0 or at least {MIN_TRIALS}")));
        }
        Ok(())
    }

    pub fn config(&self) -> Result<HarqConfig> {
        HarqConfig::new(self.scheme, self.rate, self.rounds, self.p_max)
    }
}

/// Result for one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    /// Outage of the policy by the density recursion.
    pub f_k_analytic: f64,
    /// Outage predicted by the high-SNR approximation (AL and GP).
    pub f_k_approx: Option<f64>,
    pub f_k_mc: Option<(f64, f64)>,
    /// Average power of the policy by the density recursion.
    pub p_bar: f64,
    /// Average power the solver targeted (approximate for AL and GP).
    pub p_bar_design: f64,
    /// Per-round powers (CO, AL, GP).
    pub powers: Vec<f64>,
    /// Silence thresholds and first power (AD).
    pub thresholds: Vec<f64>,
    pub p1: Option<f64>,
    pub diversity: f64,
}

/// Solves and evaluates the spec's policy at one mean SNR.
pub fn run_point(spec: &ExperimentSpec, snr_db: f64) -> Result<SweepRow> {
    let cfg = spec.config()?;
    let ch = NakagamiChannel::from_db(spec.m, snr_db)?;
    let grid = StateGrid::new(spec.grid_n, cfg.threshold())?;
    let diversity = diversity_order(spec.policy, spec.m, spec.rounds);

    let mut row = SweepRow {
        snr_db,
        f_k_analytic: f64::NAN,
        f_k_approx: None,
        f_k_mc: None,
        p_bar: f64::NAN,
        p_bar_design: f64::NAN,
        powers: Vec::new(),
        thresholds: Vec::new(),
        p1: None,
        diversity,
    };
    let mc = |policy: &dyn PowerPolicy| -> Result<Option<(f64, f64)>> {
        if spec.trials == 0 {
            return Ok(None);
        }
        let r = simulate(policy, &ch, &cfg, &SimConfig::new(spec.trials, spec.seed))?;
        Ok(Some((r.outage(), r.outage_se())))
    };
    let per_round = |row: &mut SweepRow, policy: AllocationPolicy| -> Result<()> {
        let ev = evaluate_policy(&policy, &ch, &cfg, &grid)?;
        row.f_k_analytic = ev.outage();
        row.p_bar = ev.average_power;
        row.f_k_mc = mc(&policy)?;
        row.powers = policy.powers;
        Ok(())
    };

    match spec.policy {
        PolicyKind::Co => {
            let p = AVERAGE_POWER_BUDGET.min(cfg.effective_peak());
            row.p_bar_design = p;
            per_round(&mut row, AllocationPolicy::new(vec![p; spec.rounds])?)?;
        }
        PolicyKind::Al => {
            let s = solve_allocation(&ch, &cfg)?;
            row.f_k_approx = Some(s.report.outage());
            row.p_bar_design = s.report.average_power;
            per_round(&mut row, s.policy)?;
        }
        PolicyKind::Gp => {
            let coeffs = ApproxCoefficients::for_channel(&ch, &cfg)?;
            let s = solve_gp(&coeffs, &cfg)?;
            row.f_k_approx = Some(s.f_k);
            row.p_bar_design = AVERAGE_POWER_BUDGET + crate::gp::verify_budget(&s, &coeffs);
            per_round(&mut row, s.policy())?;
        }
        PolicyKind::Ad => {
            let settings = AdaptationSettings {
                grid_points: spec.grid_n,
                ..Default::default()
            };
            let s = solve_adaptation(&ch, &cfg, &settings)?;
            row.f_k_analytic = s.outage();
            row.p_bar = s.average_power();
            row.p_bar_design = s.average_power();
            row.thresholds = s.policy.silence_thresholds().to_vec();
            row.p1 = Some(s.policy.p1());
            row.f_k_mc = mc(&s.policy)?;
        }
    }
    Ok(row)
}

/// Runs every SNR point (in parallel) and returns the rows in spec order.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.snr_db.par_iter().map(|&db| run_point(spec, db)).collect()
}

pub fn csv_header(rounds: usize) -> String {
    let mut cols: Vec<String> = [
        "snr_db",
        "scheme",
        "policy",
        "K",
        "m",
        "R",
        "p_max",
        "f_K_analytic",
        "f_K_approx",
        "f_K_mc",
        "mc_se",
        "p_bar",
        "p_bar_design",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=rounds).map(|k| format!("P_{k}")));
    cols.extend((1..rounds).map(|k| format!("i_0_{k}")));
    cols.push("p1".into());
    cols.push("diversity_formula".into());
    cols.join(",")
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x != 0.0 && !(1e-4..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV rows (no header) for one spec.
pub fn csv_rows(spec: &ExperimentSpec, rows: &[SweepRow]) -> String {
    let k = spec.rounds;
    let mut out = String::new();
    for r in rows {
        let mut cells = vec![
            num(r.snr_db),
            spec.scheme.to_string(),
            spec.policy.to_string(),
            k.to_string(),
            num(spec.m),
            num(spec.rate),
            num(spec.p_max),
            num(r.f_k_analytic),
            opt(r.f_k_approx),
            opt(r.f_k_mc.map(|x| x.0)),
            opt(r.f_k_mc.map(|x| x.1)),
            num(r.p_bar),
            num(r.p_bar_design),
        ];
        cells.extend((0..k).map(|i| opt(r.powers.get(i).copied())));
        cells.extend((0..k.saturating_sub(1)).map(|i| opt(r.thresholds.get(i).copied())));
        cells.push(opt(r.p1));
        cells.push(num(r.diversity));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn to_csv(spec: &ExperimentSpec, rows: &[SweepRow]) -> String {
    format!("{}\n{}", csv_header(spec.rounds), csv_rows(spec, rows))
}
