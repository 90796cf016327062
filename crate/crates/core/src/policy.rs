//! Common interface of every power policy (constant, allocation, adaptation).

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// A transmit-power rule over the rounds of one packet.
pub trait PowerPolicy: Sync {
    /// Maximum number of rounds `K` the policy is defined for.
    fn rounds(&self) -> usize;

    /// Power of round `round` (1-based) given the decoder state reached after
    /// the previous rounds. Only called while decoding has not succeeded yet.
    fn power(&self, round: usize, state: f64) -> f64;

    /// States where `power(round, .)` jumps. Evaluators split their
    /// integration cells there.
    fn breakpoints(&self, _round: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// Same power in every round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    pub power: f64,
    pub rounds: usize,
}

impl ConstantPolicy {
    pub fn new(power: f64, rounds: usize) -> Self {
        Self { power, rounds }
    }
}

impl PowerPolicy for ConstantPolicy {
    fn rounds(&self) -> usize {
        self.rounds
    }

    fn power(&self, _round: usize, _state: f64) -> f64 {
        self.power
    }
}

/// The four policy families the crate can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Constant power.
    Co,
    /// Per-round allocation driven by ACK/NACK only.
    Al,
    /// Adaptation to the fed-back decoder state.
    Ad,
    /// Closed-form high-SNR allocation.
    Gp,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Co => "co",
            PolicyKind::Al => "al",
            PolicyKind::Ad => "ad",
            PolicyKind::Gp => "gp",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "co" => Ok(PolicyKind::Co),
            "al" => Ok(PolicyKind::Al),
            "ad" => Ok(PolicyKind::Ad),
            "gp" => Ok(PolicyKind::Gp),
            other => Err(invalid(format!("unknown policy '{other}' (expected co|al|ad|gp)"))),
        }
    }
}
