//! HARQ semantics shared by every solver: combining schemes, decoder state
//! accumulation, the outage predicate and the renewal-reward power ratio.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Stand-in for an unbounded peak power; keeps every search on a compact set.
pub const UNBOUNDED_PEAK_PROXY: f64 = 1e4;

/// Long-term average power budget. All powers are expressed relative to it.
pub const AVERAGE_POWER_BUDGET: f64 = 1.0;

/// How the receiver combines the rounds of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Incremental redundancy: mutual informations `log2(1 + gamma P)` add up.
    Ir,
    /// Chase combining: received SNRs `gamma P` add up.
    Cc,
}

impl Scheme {
    /// Decoder state after one more round with SNR `gamma` and power `power`.
    pub fn accumulate(self, state: f64, gamma: f64, power: f64) -> f64 {
        let snr = gamma * power;
        match self {
            Scheme::Ir => state + snr.ln_1p() / std::f64::consts::LN_2,
            Scheme::Cc => state + snr,
        }
    }

    /// Received SNR at unit power that moves the state forward by `delta`:
    /// the inverse of [`Scheme::accumulate`] in the `gamma * power` product.
    pub fn unit_snr_for_gain(self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        match self {
            Scheme::Ir => (delta * std::f64::consts::LN_2).exp_m1(),
            Scheme::Cc => delta,
        }
    }

    /// Smallest channel SNR for which one round at `power` lifts the state
    /// from `state` to at least `target`. Infinite for zero power.
    pub fn snr_to_reach(self, state: f64, target: f64, power: f64) -> f64 {
        let need = self.unit_snr_for_gain(target - state);
        if need == 0.0 {
            0.0
        } else if power <= 0.0 {
            f64::INFINITY
        } else {
            need / power
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ir => "ir",
            Scheme::Cc => "cc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ir" => Ok(Scheme::Ir),
            "cc" => Ok(Scheme::Cc),
            other => Err(invalid(format!("unknown scheme '{other}' (expected ir|cc)"))),
        }
    }
}

/// Protocol and constraint parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarqConfig {
    pub scheme: Scheme,
    /// Transmission rate in bits per channel use.
    pub rate: f64,
    /// Maximum number of transmission rounds.
    pub rounds: usize,
    /// Peak power; `f64::INFINITY` for unbounded.
    pub peak_power: f64,
}

impl HarqConfig {
    pub fn new(scheme: Scheme, rate: f64, rounds: usize, peak_power: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid(format!("rate must be positive, got {rate}")));
        }
        if rounds == 0 {
            return Err(invalid("number of rounds must be at least 1"));
        }
        if peak_power.is_nan() || peak_power < AVERAGE_POWER_BUDGET {
            return Err(invalid(format!(
                "peak power must be >= the average budget {AVERAGE_POWER_BUDGET}, got {peak_power}"
            )));
        }
        Ok(Self {
            scheme,
            rate,
            rounds,
            peak_power,
        })
    }

    /// Accumulated-state threshold: `R` for IR, `2^R - 1` for CC.
    pub fn threshold(&self) -> f64 {
        threshold(self.scheme, self.rate)
    }

    /// Peak power used by the numerical searches; an unbounded peak is
    /// replaced by [`UNBOUNDED_PEAK_PROXY`].
    pub fn effective_peak(&self) -> f64 {
        if self.peak_power.is_finite() {
            self.peak_power
        } else {
            UNBOUNDED_PEAK_PROXY
        }
    }

    pub fn peak_is_bounded(&self) -> bool {
        self.peak_power.is_finite()
    }

    /// Decoding fails while the state stays strictly below the threshold.
    pub fn is_outage(&self, state: f64) -> bool {
        state < self.threshold()
    }
}

pub fn threshold(scheme: Scheme, rate: f64) -> f64 {
    match scheme {
        Scheme::Ir => rate,
        Scheme::Cc => rate.exp2() - 1.0,
    }
}

/// Long-term average power `(sum_k E[P_k]) / (sum_{k<K} f_k)`.
///
/// `expected_powers` has one entry per round, `failure` has `K + 1` entries
/// starting with `f_0 = 1`. Silent rounds still count in the denominator.
pub fn long_term_average_power(expected_powers: &[f64], failure: &[f64]) -> Result<f64> {
    let k = expected_powers.len();
    if failure.len() != k + 1 {
        return Err(invalid(format!(
            "failure vector must have {} entries, got {}",
            k + 1,
            failure.len()
        )));
    }
    let denom: f64 = failure[..k].iter().sum();
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "expected number of rounds is {denom}; failure vector is corrupt"
        )));
    }
    Ok(expected_powers.iter().sum::<f64>() / denom)
}

/// Where the numbers in a report come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportSource {
    /// Numerical evaluation of the exact outage recursion.
    Analytic,
    /// Closed-form high-SNR outage approximation.
    Approximate,
    MonteCarlo,
}

/// Per-round failure probabilities and the resulting average power.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageReport {
    /// `f_0 .. f_K` with `f_0 = 1`.
    pub failure: Vec<f64>,
    pub average_power: f64,
    pub source: ReportSource,
    /// Standard errors of `failure` for Monte-Carlo reports.
    pub std_error: Option<Vec<f64>>,
}

impl OutageReport {
    pub fn new(failure: Vec<f64>, average_power: f64, source: ReportSource) -> Result<Self> {
        validate_failure(&failure)?;
        if !(average_power >= 0.0) {
            return Err(Error::Numerical(format!("negative average power {average_power}")));
        }
        Ok(Self {
            failure,
            average_power,
            source,
            std_error: None,
        })
    }

    pub fn with_std_error(mut self, se: Vec<f64>) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn rounds(&self) -> usize {
        self.failure.len() - 1
    }

    /// Final outage probability `f_K`.
    pub fn outage(&self) -> f64 {
        *self.failure.last().unwrap()
    }
}

/// Checks `1 = f_0 >= f_1 >= ... >= f_K >= 0`, allowing round-off of 1e-12.
pub fn validate_failure(f: &[f64]) -> Result<()> {
    const SLACK: f64 = 1e-12;
    if f.is_empty() || (f[0] - 1.0).abs() > SLACK {
        return Err(Error::Numerical("failure vector must start with f_0 = 1".into()));
    }
    for (k, w) in f.windows(2).enumerate() {
        if !(w[1] <= w[0] + SLACK) || !(w[1] >= -SLACK) {
            return Err(Error::Numerical(format!(
                "failure vector not nonincreasing at round {}: {} -> {}",
                k + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}
