//! Nakagami-m block fading: the normalized SNR `gamma` of each round is
//! gamma-distributed with shape `m` and mean `mean_snr`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Result};
use crate::special::{gamma_p, gamma_q, ln_gamma};

/// Immutable fading description; cheap to clone and share across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiChannel {
    m: f64,
    mean_snr: f64,
    rate: f64,
    ln_norm: f64,
}

impl NakagamiChannel {
    /// `m >= 0.5`, `mean_snr > 0` (linear scale).
    pub fn new(m: f64, mean_snr: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 0.5) {
            return Err(invalid(format!("fading shape m must be >= 0.5, got {m}")));
        }
        if !(mean_snr.is_finite() && mean_snr > 0.0) {
            return Err(invalid(format!("mean SNR must be positive, got {mean_snr}")));
        }
        let rate = m / mean_snr;
        Ok(Self {
            m,
            mean_snr,
            rate,
            ln_norm: m * rate.ln() - ln_gamma(m),
        })
    }

    /// Same as [`NakagamiChannel::new`] with the mean SNR given in dB.
    pub fn from_db(m: f64, mean_snr_db: f64) -> Result<Self> {
        Self::new(m, db_to_linear(mean_snr_db))
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mean_snr(&self) -> f64 {
        self.mean_snr
    }

    /// Copy with a different mean SNR and the same shape.
    pub fn with_mean_snr(&self, mean_snr: f64) -> Result<Self> {
        Self::new(self.m, mean_snr)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if self.m < 1.0 {
                f64::INFINITY
            } else if self.m == 1.0 {
                self.rate.ln()
            } else {
                f64::NEG_INFINITY
            };
        }
        self.ln_norm + (self.m - 1.0) * x.ln() - self.rate * x
    }

    /// Density `m^m x^(m-1) e^(-m x / mean) / (Gamma(m) mean^m)`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        self.ln_pdf(x).exp()
    }

    /// Distribution function `1 - Gamma(m, m x / mean) / Gamma(m)`.
    pub fn cdf(&self, x: f64) -> f64 {
        gamma_p(self.m, self.rate * x)
    }

    /// Survival function `1 - cdf`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        gamma_q(self.m, self.rate * x)
    }

    fn sampler(&self) -> Gamma<f64> {
        // Parameters are validated at construction.
        Gamma::new(self.m, 1.0 / self.rate).expect("validated gamma parameters")
    }

    /// One SNR draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// `n` i.i.d. SNR draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let g = self.sampler();
        (0..n).map(|_| g.sample(rng)).collect()
    }

    /// Gamma-distribution sampler with this channel's law, for hot loops.
    pub fn distribution(&self) -> Gamma<f64> {
        self.sampler()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
