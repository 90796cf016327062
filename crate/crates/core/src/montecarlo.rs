//! Monte-Carlo simulation of the HARQ renewal process under any power policy.
//!
//! Every packet draws its channel from its own ChaCha stream keyed by
//! `(seed, packet index)`, and partial sums are merged in a fixed order, so
//! results do not depend on how many worker threads run.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::channel::NakagamiChannel;
use crate::error::{invalid, Result};
use crate::harq::{HarqConfig, OutageReport, ReportSource};
use crate::policy::PowerPolicy;

/// Fewest packets for which confidence intervals are reported.
pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Packets per work item. Part of the summation order, so results are
    /// reproducible for a fixed batch size.
    pub batch: u64,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            batch: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    /// Empirical `f_0 .. f_K`.
    pub f_hat: Vec<f64>,
    /// Binomial standard errors of `f_hat`.
    pub se: Vec<f64>,
    /// Mean energy per packet over mean rounds per packet.
    pub p_bar_hat: f64,
    /// Delta-method standard error of `p_bar_hat`.
    pub p_bar_se: f64,
    pub energy_per_packet: f64,
    pub rounds_per_packet: f64,
}

impl SimResult {
    pub fn outage(&self) -> f64 {
        *self.f_hat.last().unwrap()
    }

    pub fn outage_se(&self) -> f64 {
        *self.se.last().unwrap()
    }

    pub fn report(&self) -> Result<OutageReport> {
        Ok(OutageReport::new(self.f_hat.clone(), self.p_bar_hat, ReportSource::MonteCarlo)?.with_std_error(self.se.clone()))
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    /// `failures[k]`: packets still undecoded after round `k + 1`.
    failures: Vec<u64>,
    rounds: u64,
    energy: f64,
    energy_sq: f64,
    rounds_sq: u64,
    cross: f64,
}

impl Tally {
    fn merge(mut self, other: &Tally) -> Tally {
        for (a, b) in self.failures.iter_mut().zip(&other.failures) {
            *a += b;
        }
        self.rounds += other.rounds;
        self.energy += other.energy;
        self.energy_sq += other.energy_sq;
        self.rounds_sq += other.rounds_sq;
        self.cross += other.cross;
        self
    }
}

fn packet_rng(seed: u64, packet: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(packet);
    rng
}

fn run_batch<P: PowerPolicy + ?Sized>(policy: &P, ch: &NakagamiChannel, config: &HarqConfig, seed: u64, packets: std::ops::Range<u64>) -> Tally {
    let k_max = config.rounds;
    let law = ch.distribution();
    let mut t = Tally {
        failures: vec![0; k_max],
        ..Default::default()
    };
    for packet in packets {
        let mut rng = packet_rng(seed, packet);
        let mut state = 0.0;
        let mut energy = 0.0;
        let mut rounds = 0u64;
        for k in 1..=k_max {
            let p = policy.power(k, state);
            let gamma = law.sample(&mut rng);
            energy += p;
            rounds += 1;
            state = config.scheme.accumulate(state, gamma, p);
            if !config.is_outage(state) {
                break;
            }
            t.failures[k - 1] += 1;
        }
        t.rounds += rounds;
        t.rounds_sq += rounds * rounds;
        t.energy += energy;
        t.energy_sq += energy * energy;
        t.cross += energy * rounds as f64;
    }
    t
}

/// Simulates `sim.trials` packets. Silent rounds count towards the rounds
/// of a packet, as they do in the average-power ratio.
pub fn simulate<P: PowerPolicy + ?Sized>(policy: &P, ch: &NakagamiChannel, config: &HarqConfig, sim: &SimConfig) -> Result<SimResult> {
    if sim.trials < MIN_TRIALS {
        return Err(invalid(format!("need at least {MIN_TRIALS} trials, got {}", sim.trials)));
    }
    if sim.batch == 0 {
        return Err(invalid("batch size must be positive"));
    }
    if policy.rounds() != config.rounds {
        return Err(invalid(format!(
            "policy has {} rounds, configuration {}",
            policy.rounds(),
            config.rounds
        )));
    }
    let batches = sim.trials.div_ceil(sim.batch);
    let partial: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * sim.batch;
            let end = (start + sim.batch).min(sim.trials);
            run_batch(policy, ch, config, sim.seed, start..end)
        })
        .collect();
    let empty = Tally {
        failures: vec![0; config.rounds],
        ..Default::default()
    };
    let total = partial.iter().fold(empty, Tally::merge);

    let n = sim.trials as f64;
    let mut f_hat = vec![1.0];
    f_hat.extend(total.failures.iter().map(|&c| c as f64 / n));
    let se = f_hat.iter().map(|f| (f * (1.0 - f) / n).sqrt()).collect();
    let e_mean = total.energy / n;
    let r_mean = total.rounds as f64 / n;
    let ratio = e_mean / r_mean;
    // Var(e - ratio r) / (n r_mean^2)
    let var = (total.energy_sq - 2.0 * ratio * total.cross + ratio * ratio * total.rounds_sq as f64) / n
        - (e_mean - ratio * r_mean).powi(2);
    let p_bar_se = (var.max(0.0) / n).sqrt() / r_mean;
    Ok(SimResult {
        trials: sim.trials,
        f_hat,
        se,
        p_bar_hat: ratio,
        p_bar_se,
        energy_per_packet: e_mean,
        rounds_per_packet: r_mean,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Diversity estimate: slope of `-log10 f_K` against `log10` of the mean
/// SNR, with `f_K` from `outage_at` evaluated on copies of `template` at the
/// given mean SNRs (dB).
pub fn estimate_diversity<F>(mut outage_at: F, template: &NakagamiChannel, config: &HarqConfig, snr_db: &[f64]) -> Result<f64>
where
    F: FnMut(&NakagamiChannel, &HarqConfig) -> Result<OutageReport>,
{
    if snr_db.len() < 3 {
        return Err(invalid("diversity fit needs at least three SNR points"));
    }
    let span = snr_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - snr_db.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 10.0 {
        return Err(invalid(format!("diversity fit needs a 10 dB span, got {span} dB")));
    }
    let mut x = Vec::with_capacity(snr_db.len());
    let mut y = Vec::with_capacity(snr_db.len());
    for &db in snr_db {
        let ch = NakagamiChannel::from_db(template.m(), db)?;
        let report = outage_at(&ch, config)?;
        let f = report.outage();
        if report.source == ReportSource::MonteCarlo {
            let se = report.std_error.as_ref().and_then(|s| s.last().copied()).unwrap_or(0.0);
            if f <= 0.0 || se > 0.1 * f {
                warn!("Monte-Carlo outage at {db} dB rests on fewer than ~100 failures; the tail is unreliable");
            }
        }
        if !(f > 0.0) {
            return Err(crate::error::Error::Numerical(format!("zero outage at {db} dB; cannot take a logarithm")));
        }
        x.push(db / 10.0);
        y.push(-f.log10());
    }
    Ok(fit_slope(&x, &y))
}
