use crate::channel::NakagamiChannel;
use crate::error::{invalid, Result};
use crate::harq::HarqConfig;

use super::grid::StateGrid;

/// Knobs of the per-node power minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSettings {
    /// Log-spaced candidate powers in the coarse scan.
    pub candidates: usize,
    /// Decades below the peak power covered by the scan.
    pub span_decades: f64,
    /// Golden-section iterations around the best candidate.
    pub refine_iters: usize,
}

impl Default for DpSettings {
    fn default() -> Self {
        Self {
            candidates: 64,
            span_decades: 8.0,
            refine_iters: 16,
        }
    }
}

/// Everything the backward induction needs that does not depend on the
/// multiplier: SNR-per-gain tables on the uniform grid and the candidate
/// transition tables.
///
/// Because the grid is uniform, the SNR a round needs to move the state by
/// `d` cells is the same from every node, so one table serves all nodes.
#[derive(Debug, Clone)]
pub struct AdaptationModel {
    pub(crate) channel: NakagamiChannel,
    pub(crate) config: HarqConfig,
    pub(crate) grid: StateGrid,
    pub(crate) settings: DpSettings,
    /// `unit_gap[d]`: unit-power SNR that advances the state by `d` cells.
    pub(crate) unit_gap: Vec<f64>,
    pub(crate) candidates: Vec<f64>,
    /// `cand_cdf[c][d] = F(unit_gap[d] / candidates[c])`.
    pub(crate) cand_cdf: Vec<Vec<f64>>,
}

impl AdaptationModel {
    pub fn new(
        channel: NakagamiChannel,
        config: HarqConfig,
        grid_points: usize,
        settings: DpSettings,
    ) -> Result<Self> {
        if settings.candidates < 2 || !(settings.span_decades > 0.0) {
            return Err(invalid("need at least two candidate powers over a positive span"));
        }
        let grid = StateGrid::new(grid_points, config.threshold())?;
        let scheme = config.scheme;
        let unit_gap: Vec<f64> = grid.points().iter().map(|&x| scheme.unit_snr_for_gain(x)).collect();

        let peak = config.effective_peak();
        let n_c = settings.candidates;
        let candidates: Vec<f64> = (0..n_c)
            .map(|c| {
                let t = c as f64 / (n_c - 1) as f64;
                peak * 10f64.powf(-settings.span_decades * (1.0 - t))
            })
            .collect();
        let cand_cdf = candidates
            .iter()
            .map(|&p| unit_gap.iter().map(|&u| channel.cdf(u / p)).collect())
            .collect();
        Ok(Self {
            channel,
            config,
            grid,
            settings,
            unit_gap,
            candidates,
            cand_cdf,
        })
    }

    pub fn channel(&self) -> &NakagamiChannel {
        &self.channel
    }

    pub fn config(&self) -> &HarqConfig {
        &self.config
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn settings(&self) -> &DpSettings {
        &self.settings
    }

    /// Expected next-stage cost from node `i` when the transition cdf over
    /// cell gaps is `t(e)`; `g_mid[c]` is the next-stage value on cell `c`
    /// and everything past the threshold costs nothing.
    #[inline]
    pub(crate) fn expected_next<T: Fn(usize) -> f64>(&self, i: usize, g_mid: &[f64], t: T) -> f64 {
        let gap = self.grid.len() - 1 - i;
        let mut prev = 0.0;
        let mut acc = 0.0;
        for e in 0..gap {
            let cur = t(e + 1);
            acc += (cur - prev) * g_mid[i + e];
            prev = cur;
        }
        acc
    }

    /// Same as [`Self::expected_next`] with the cdf evaluated on the fly.
    pub(crate) fn expected_next_at_power(&self, i: usize, g_mid: &[f64], power: f64) -> f64 {
        let ch = &self.channel;
        let u = &self.unit_gap;
        self.expected_next(i, g_mid, |e| ch.cdf(u[e] / power))
    }
}
