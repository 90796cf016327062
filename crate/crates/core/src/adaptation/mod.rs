//! Power adaptation with multi-bit feedback: the transmitter knows the
//! accumulated decoder state and picks the power of each round from a
//! tabulated function of it.
//!
//! The solver runs a backward induction over a uniform state grid for a fixed
//! multiplier, tunes the multiplier against the average-power budget, and
//! searches the first-round power in an outer loop. Policies are evaluated by
//! propagating the state distribution round by round.

mod dp;
mod evaluate;
mod grid;
mod model;
mod silence;
mod solve;

pub use dp::{backward_induction, stage_cost, DpSolution};
pub use evaluate::{evaluate_policy, expected_round_powers, propagate_density, Evaluation, StateDensity};
pub use grid::{StateGrid, MIN_GRID_POINTS};
pub use model::{AdaptationModel, DpSettings};
pub use silence::{q_max, radio_silence_condition_ir};
pub use solve::{solve_adaptation, solve_for_first_power, AdaptationSettings, AdaptationSolution};

use crate::error::{invalid, Result};
use crate::policy::PowerPolicy;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Stage value `J_k` on the grid. States at or beyond the threshold are worth 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub stage: usize,
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn at(&self, grid: &StateGrid, state: f64) -> f64 {
        if state >= grid.threshold() {
            0.0
        } else {
            grid.interpolate(&self.values, state)
        }
    }
}

/// First-round power plus one power table per later round.
///
/// Each later round has a table of transmit powers at the grid points and a
/// set of silent state intervals where the power is zero. Interval ends need
/// not sit on grid points, so the silent region can move continuously.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationPolicy {
    p1: f64,
    grid: StateGrid,
    /// `shadow[k - 2]`: round `k` power at the grid points when transmitting.
    shadow: Vec<Vec<f64>>,
    /// `silent[k - 2]`: disjoint, sorted half-open intervals of silence.
    silent: Vec<Vec<(f64, f64)>>,
    /// Shadow tables with the silent points zeroed.
    effective: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
}

impl AdaptationPolicy {
    /// Policy from plain power tables; runs of zero entries become silent
    /// intervals reaching up to the next transmitting grid point.
    pub fn new(p1: f64, grid: StateGrid, tables: Vec<Vec<f64>>) -> Result<Self> {
        let silent = tables
            .iter()
            .map(|t| {
                let mut out = Vec::new();
                let mut i = 0;
                while i < t.len() {
                    if t[i] <= 0.0 {
                        let a = if i == 0 { 0.0 } else { grid.point(i) };
                        let mut j = i;
                        while j + 1 < t.len() && t[j + 1] <= 0.0 {
                            j += 1;
                        }
                        let b = if j + 1 < t.len() { grid.point(j + 1) } else { grid.threshold() };
                        out.push((a, b));
                        i = j + 1;
                    } else {
                        i += 1;
                    }
                }
                out
            })
            .collect();
        Self::with_silence(p1, grid, tables, silent)
    }

    /// Policy from transmit-power tables and explicit silent intervals.
    pub fn with_silence(p1: f64, grid: StateGrid, shadow: Vec<Vec<f64>>, silent: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if !(p1.is_finite() && p1 >= 0.0) {
            return Err(invalid(format!("first-round power must be finite and >= 0, got {p1}")));
        }
        if silent.len() != shadow.len() {
            return Err(invalid("one list of silent intervals per tabulated round is required"));
        }
        for (idx, t) in shadow.iter().enumerate() {
            if t.len() != grid.len() {
                return Err(invalid(format!(
                    "round {} table has {} entries, grid has {}",
                    idx + 2,
                    t.len(),
                    grid.len()
                )));
            }
            if t.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(invalid(format!("round {} table has a negative or non-finite power", idx + 2)));
            }
        }
        for (idx, iv) in silent.iter().enumerate() {
            let ordered = iv.iter().all(|(a, b)| a <= b) && iv.windows(2).all(|w| w[0].1 <= w[1].0);
            if !ordered {
                return Err(invalid(format!("round {} silent intervals are not sorted and disjoint", idx + 2)));
            }
        }
        let in_silence = |iv: &[(f64, f64)], x: f64| iv.iter().any(|&(a, b)| x >= a && x < b);
        let ith = grid.threshold();
        let effective = shadow
            .iter()
            .zip(&silent)
            .map(|(t, iv)| {
                grid.points()
                    .iter()
                    .zip(t)
                    .map(|(&x, &p)| {
                        // the top point stands for the left limit at the threshold
                        let probe = if x >= ith { ith - 0.5 * grid.step() } else { x };
                        if in_silence(iv, probe) {
                            0.0
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect();
        let thresholds = silent
            .iter()
            .map(|iv| match iv.first() {
                Some(&(a, b)) if a <= 0.0 => b.min(ith),
                _ => 0.0,
            })
            .collect();
        Ok(Self {
            p1,
            grid,
            shadow,
            silent,
            effective,
            thresholds,
        })
    }

    /// Tabulates `f(round, state)` for rounds `2..=rounds`.
    pub fn from_fn<F: Fn(usize, f64) -> f64>(p1: f64, grid: StateGrid, rounds: usize, f: F) -> Result<Self> {
        let tables = (2..=rounds)
            .map(|k| grid.points().iter().map(|&x| f(k, x)).collect())
            .collect();
        Self::new(p1, grid, tables)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    /// Round `k >= 2` powers at the grid points (zero where silent).
    pub fn table(&self, k: usize) -> &[f64] {
        &self.effective[k - 2]
    }

    /// Silent state intervals of round `k >= 2`.
    pub fn silent_intervals(&self, k: usize) -> &[(f64, f64)] {
        &self.silent[k - 2]
    }

    /// Silence thresholds `i_{0,1} .. i_{0,K-1}`: the end of the silent
    /// region starting at the empty state, 0 if a round does not start
    /// silent, the decoding threshold if it is silent everywhere.
    pub fn silence_thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn max_power(&self) -> f64 {
        self.effective.iter().flatten().fold(self.p1, |a, &b| a.max(b))
    }
}

impl PowerPolicy for AdaptationPolicy {
    fn rounds(&self) -> usize {
        self.shadow.len() + 1
    }

    fn power(&self, round: usize, state: f64) -> f64 {
        if round <= 1 {
            return self.p1;
        }
        let idx = round - 2;
        if state >= self.grid.threshold() || self.silent[idx].iter().any(|&(a, b)| state >= a && state < b) {
            return 0.0;
        }
        self.grid.interpolate(&self.shadow[idx], state)
    }

    fn breakpoints(&self, round: usize) -> Vec<f64> {
        if round <= 1 {
            return Vec::new();
        }
        let ith = self.grid.threshold();
        self.silent[round - 2]
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|&x| x > 0.0 && x < ith)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_lookup_and_silence() {
        let grid = StateGrid::new(101, 1.0).unwrap();
        let p = AdaptationPolicy::from_fn(0.7, grid, 3, |k, x| if x < 0.25 { 0.0 } else { k as f64 * x }).unwrap();
        assert_eq!(p.rounds(), 3);
        assert_eq!(p.power(1, 0.9), 0.7);
        assert!((p.silence_thresholds()[0] - 0.25).abs() < 1e-12);
        assert_eq!(p.power(2, 0.245), 0.0);
        assert!((p.power(3, 0.5) - 1.5).abs() < 1e-12);
        assert_eq!(p.power(2, 1.0), 0.0);
        assert_eq!(p.max_power(), 3.0);
        assert_eq!(p.breakpoints(2), vec![p.silence_thresholds()[0]]);
    }

    #[test]
    fn explicit_silent_intervals() {
        let grid = StateGrid::new(101, 1.0).unwrap();
        let p = AdaptationPolicy::with_silence(1.0, grid, vec![vec![2.0; 101]], vec![vec![(0.0, 0.333), (0.9, 1.0)]]).unwrap();
        assert_eq!(p.power(2, 0.3329), 0.0);
        assert_eq!(p.power(2, 0.3331), 2.0);
        assert_eq!(p.power(2, 0.95), 0.0);
        assert_eq!(p.silence_thresholds(), &[0.333]);
        assert_eq!(p.table(2)[100], 0.0);
        assert_eq!(p.table(2)[50], 2.0);
        assert_eq!(p.breakpoints(2), vec![0.333, 0.9]);
        let bad = AdaptationPolicy::with_silence(1.0, StateGrid::new(101, 1.0).unwrap(), vec![vec![2.0; 101]], vec![vec![(0.5, 0.6), (0.1, 0.2)]]);
        assert!(bad.is_err());
    }

    #[test]
    fn fully_silent_round_threshold_is_decoding_threshold() {
        let grid = StateGrid::new(64, 2.0).unwrap();
        let p = AdaptationPolicy::from_fn(1.0, grid, 2, |_, _| 0.0).unwrap();
        assert_eq!(p.silence_thresholds(), &[2.0]);
        assert_eq!(p.power(2, 1.9), 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        let grid = StateGrid::new(64, 1.0).unwrap();
        assert!(AdaptationPolicy::new(1.0, grid.clone(), vec![vec![1.0; 10]]).is_err());
        assert!(AdaptationPolicy::new(1.0, grid.clone(), vec![vec![-1.0; 64]]).is_err());
        assert!(AdaptationPolicy::new(f64::NAN, grid, vec![]).is_err());
    }
}
