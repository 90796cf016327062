//! Outage-minimizing transmit power control for truncated HARQ (incremental
//! redundancy and Chase combining) over Nakagami-m block fading.
//!
//! Three solvers share the same channel and protocol model:
//!
//! * [`adaptation`] — powers as functions of the fed-back decoder state,
//!   solved by backward induction on a state grid;
//! * [`allocation`] — one power per round, from a high-SNR outage
//!   approximation and a closed-form stationarity recursion;
//! * [`gp`] — the closed-form high-SNR allocation from geometric programming.
//!
//! [`montecarlo`] simulates any policy, and [`experiment`] drives sweeps that
//! end up as CSV.

pub mod adaptation;
pub mod allocation;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod harq;
pub mod montecarlo;
pub mod policy;
pub mod quad;
pub mod search;
pub mod special;

pub use channel::NakagamiChannel;
pub use error::{Error, Result};
pub use harq::{HarqConfig, OutageReport, ReportSource, Scheme};
pub use policy::{ConstantPolicy, PolicyKind, PowerPolicy};
