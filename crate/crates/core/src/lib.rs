//! Reliability-based stop-feedback coding.
//!
//! Zero-tail terminated rate-1/3 convolutional codes are decoded after every
//! received symbol. The decoder returns the maximum-likelihood message together
//! with the exact posterior probability that it is the transmitted codeword, and
//! the receiver answers each attempt with a single ACK/NACK bit. The crate also
//! evaluates the finite-blocklength reference curves (variable-length feedback
//! achievability and converses, plus the no-feedback normal approximation) that
//! simulated throughput is compared against.
//!
//! Module map:
//!
//! - [`trellis`]: code specifications, trellis construction, zero-tail encoding,
//!   free-distance search and rate-compatible transmission schedules.
//! - [`channel`]: BSC and BPSK/AWGN channels with per-trial RNG substreams.
//! - [`rova`]: ML decoding and word posteriors over a partially received window.
//! - [`protocol`]: the ACK/NACK retransmission loop and aggregate statistics.
//! - [`bounds`]: capacities, converses, achievability and dispersion curves.
//!
//! Log-likelihoods and information densities are carried in nats internally;
//! every rate that leaves the crate is in bits per channel use.

pub mod bounds;
pub mod channel;
mod logsum;
pub mod protocol;
pub mod rova;
pub mod stats;
pub mod trellis;

pub use bounds::{BoundCurve, CurveGrid, CurveKind};
pub use channel::{ChannelParams, Observation};
pub use protocol::{AggregateStats, ProtocolConfig, TrialRecord};
pub use rova::{DecodeOutcome, ReceivedWindow, RovaDecoder};
pub use trellis::{ConvCodeSpec, TransmissionSchedule, Trellis};
