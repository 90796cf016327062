use rayon::prelude::*;

use crate::channel::NakagamiChannel;
use crate::error::{invalid, Error, Result};
use crate::harq::{long_term_average_power, HarqConfig, OutageReport, ReportSource};
use crate::policy::PowerPolicy;

use super::grid::StateGrid;

/// Distribution of the decoder state after round `stage`, restricted to the
/// failure region `[0, i_th)`.
///
/// Probability is kept as mass per grid cell; within a cell it is treated as
/// sitting at the midpoint when it is pushed through the next round.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDensity {
    pub stage: usize,
    pub cell_mass: Vec<f64>,
    /// Density at the grid points (average of the adjacent cells).
    pub density: Vec<f64>,
    /// Mass that stayed put because the round was silent for it.
    pub frozen_mass: f64,
}

impl StateDensity {
    fn from_masses(stage: usize, cell_mass: Vec<f64>, frozen_mass: f64, grid: &StateGrid) -> Self {
        let h = grid.step();
        let cells = cell_mass.len();
        let density = (0..grid.len())
            .map(|i| {
                let left = if i > 0 { Some(cell_mass[i - 1]) } else { None };
                let right = if i < cells { Some(cell_mass[i]) } else { None };
                match (left, right) {
                    (Some(a), Some(b)) => 0.5 * (a + b) / h,
                    (Some(a), None) | (None, Some(a)) => a / h,
                    (None, None) => 0.0,
                }
            })
            .collect();
        Self {
            stage,
            cell_mass,
            density,
            frozen_mass,
        }
    }

    /// Probability that decoding still fails after this round.
    pub fn total(&self) -> f64 {
        self.cell_mass.iter().sum()
    }
}

/// Exact-distribution evaluation of a policy on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub densities: Vec<StateDensity>,
    /// `f_0 .. f_K`.
    pub failure: Vec<f64>,
    /// `E[P_1] .. E[P_K]`.
    pub expected_powers: Vec<f64>,
    pub average_power: f64,
}

impl Evaluation {
    pub fn outage(&self) -> f64 {
        *self.failure.last().unwrap()
    }

    pub fn report(&self) -> Result<OutageReport> {
        OutageReport::new(self.failure.clone(), self.average_power, ReportSource::Analytic)
    }
}

/// Pushes the state distribution through the rounds of `policy`.
///
/// Returns the distribution after each round `1..=K` and `f_0 .. f_K`. Works
/// for any [`PowerPolicy`], not only tabulated adaptation policies.
pub fn propagate_density<P: PowerPolicy + ?Sized>(
    policy: &P,
    ch: &NakagamiChannel,
    config: &HarqConfig,
    grid: &StateGrid,
) -> Result<(Vec<StateDensity>, Vec<f64>)> {
    let rounds = policy.rounds();
    if rounds != config.rounds {
        return Err(invalid(format!("policy has {rounds} rounds, configuration {}", config.rounds)));
    }
    if (grid.threshold() - config.threshold()).abs() > 1e-12 * config.threshold() {
        return Err(invalid("grid does not span the decoding threshold"));
    }
    let scheme = config.scheme;
    let cells = grid.cells();
    let h = grid.step();

    // Round 1 starts from the empty state: cell masses are exact.
    let p1 = policy.power(1, 0.0);
    let mut mass = vec![0.0; cells];
    if p1 > 0.0 {
        let cdf_at: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x| ch.cdf(scheme.unit_snr_for_gain(x) / p1))
            .collect();
        for j in 0..cells {
            mass[j] = (cdf_at[j + 1] - cdf_at[j]).max(0.0);
        }
    } else {
        mass[0] = 1.0;
    }
    let first_frozen = if p1 > 0.0 { 0.0 } else { 1.0 };
    let mut out = vec![StateDensity::from_masses(1, mass, first_frozen, grid)];

    // Unit-power SNR that moves mass from a cell midpoint across the edge
    // `e + 1/2` cells further up.
    let half_gap: Vec<f64> = (0..cells).map(|e| scheme.unit_snr_for_gain((e as f64 + 0.5) * h)).collect();

    for k in 2..=rounds {
        let prev = &out.last().unwrap().cell_mass;
        let breaks = sorted_breaks(policy, k);
        // Row j: where the mass of source cell j lands (offsets 0..cells-j).
        let rows: Vec<(f64, Vec<f64>)> = (0..cells)
            .into_par_iter()
            .map(|j| {
                let m = prev[j];
                let mut frozen = 0.0;
                let mut row = Vec::new();
                if m == 0.0 {
                    return (frozen, row);
                }
                let span = cells - j;
                for piece in cell_pieces(grid, j, &breaks) {
                    let pm = m * piece.fraction;
                    let p = policy.power(k, piece.at);
                    if p <= 0.0 {
                        frozen += pm;
                        continue;
                    }
                    if row.is_empty() {
                        row.resize(span, 0.0);
                    }
                    let mut last = 0.0;
                    for (e, slot) in row.iter_mut().enumerate() {
                        let u = if piece.whole {
                            half_gap[e]
                        } else {
                            scheme.unit_snr_for_gain(grid.point(j + e + 1) - piece.at)
                        };
                        let c = ch.cdf(u / p);
                        *slot += pm * (c - last).max(0.0);
                        last = c;
                    }
                }
                if frozen > 0.0 {
                    if row.is_empty() {
                        row.push(0.0);
                    }
                    row[0] += frozen;
                }
                (frozen, row)
            })
            .collect();
        let mut next = vec![0.0; cells];
        let mut frozen = 0.0;
        for (j, (fz, row)) in rows.iter().enumerate() {
            frozen += fz;
            for (e, v) in row.iter().enumerate() {
                next[j + e] += v;
            }
        }
        out.push(StateDensity::from_masses(k, next, frozen, grid));
    }

    let mut failure = Vec::with_capacity(rounds + 1);
    failure.push(1.0);
    for d in &out {
        let t = d.total();
        if t > 1.0 + 1e-4 || !t.is_finite() {
            return Err(Error::Numerical(format!("state distribution of round {} has mass {t}", d.stage)));
        }
        failure.push(t.min(*failure.last().unwrap()));
    }
    Ok((out, failure))
}

struct Piece {
    /// Where the piece's mass is taken to sit.
    at: f64,
    fraction: f64,
    /// The piece is the whole cell, centred on its midpoint.
    whole: bool,
}

fn sorted_breaks<P: PowerPolicy + ?Sized>(policy: &P, round: usize) -> Vec<f64> {
    let mut b = policy.breakpoints(round);
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b
}

/// Splits cell `j` at the policy's jump points so that each piece sees a
/// single branch of the policy.
fn cell_pieces(grid: &StateGrid, j: usize, breaks: &[f64]) -> Vec<Piece> {
    let (a, b) = (grid.point(j), grid.point(j + 1));
    let inside: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    if inside.is_empty() {
        return vec![Piece {
            at: grid.midpoint(j),
            fraction: 1.0,
            whole: true,
        }];
    }
    let h = b - a;
    let mut edges = vec![a];
    edges.extend(inside);
    edges.push(b);
    edges
        .windows(2)
        .map(|w| Piece {
            at: 0.5 * (w[0] + w[1]),
            fraction: (w[1] - w[0]) / h,
            whole: false,
        })
        .collect()
}

/// `E[P_k]` for every round: `P_1` for the first, and the policy averaged
/// over the state distribution left by the previous round afterwards.
pub fn expected_round_powers<P: PowerPolicy + ?Sized>(policy: &P, densities: &[StateDensity], grid: &StateGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(policy.rounds());
    out.push(policy.power(1, 0.0));
    for k in 2..=policy.rounds() {
        let prev = &densities[k - 2].cell_mass;
        let breaks = sorted_breaks(policy, k);
        let e: f64 = prev
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(j, &m)| {
                cell_pieces(grid, j, &breaks)
                    .iter()
                    .map(|pc| m * pc.fraction * policy.power(k, pc.at))
                    .sum::<f64>()
            })
            .sum();
        out.push(e);
    }
    out
}

/// Outage vector, per-round powers and long-term average power of a policy.
pub fn evaluate_policy<P: PowerPolicy + ?Sized>(
    policy: &P,
    ch: &NakagamiChannel,
    config: &HarqConfig,
    grid: &StateGrid,
) -> Result<Evaluation> {
    let (densities, failure) = propagate_density(policy, ch, config, grid)?;
    let expected_powers = expected_round_powers(policy, &densities, grid);
    let average_power = long_term_average_power(&expected_powers, &failure)?;
    Ok(Evaluation {
        densities,
        failure,
        expected_powers,
        average_power,
    })
}
