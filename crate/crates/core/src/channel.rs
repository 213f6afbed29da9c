//! Memoryless binary-input channels.
//!
//! Every call to [`ChannelParams::transmit`] consumes a fixed number of 64-bit
//! words from the RNG: one for the BSC and two for BPSK/AWGN (a Box-Muller
//! pair, of which only the cosine branch is used). Together with the per-trial
//! substreams from [`trial_rng`] this makes every trial replayable on its own.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `ln sqrt(2 pi)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("BSC crossover probability {0} outside [0, 0.5]")]
    CrossoverOutOfRange(f64),
    #[error("SNR {0} dB is not finite")]
    NonFiniteSnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "lowercase")]
pub enum ChannelParams {
    /// Binary symmetric channel with crossover probability `p`.
    Bsc { p: f64 },
    /// BPSK over real AWGN with unit noise variance: bit `b` is sent as
    /// `(1 - 2b) sqrt(P)` where `P = 10^(snr_db / 10)`.
    BiAwgn { snr_db: f64 },
}

/// A single channel output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Bit(u8),
    Sample(f64),
}

impl ChannelParams {
    /// Binary symmetric channel. `p = 0` and `p = 0.5` are accepted as
    /// degenerate diagnostic settings; the bounds reject them where they matter.
    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        if !(0.0..=0.5).contains(&p) {
            return Err(ChannelError::CrossoverOutOfRange(p));
        }
        Ok(ChannelParams::Bsc { p })
    }

    pub fn bi_awgn(snr_db: f64) -> Result<Self, ChannelError> {
        if !snr_db.is_finite() {
            return Err(ChannelError::NonFiniteSnr(snr_db));
        }
        Ok(ChannelParams::BiAwgn { snr_db })
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelParams::Bsc { p } => Self::bsc(p).map(|_| ()),
            ChannelParams::BiAwgn { snr_db } => Self::bi_awgn(snr_db).map(|_| ()),
        }
    }

    /// Linear signal power `P` (unit noise variance). Zero for the BSC.
    pub fn power(&self) -> f64 {
        match *self {
            ChannelParams::Bsc { .. } => 0.0,
            ChannelParams::BiAwgn { snr_db } => 10f64.powf(snr_db / 10.0),
        }
    }

    /// BPSK amplitude for `bit`: `0 -> +sqrt(P)`, `1 -> -sqrt(P)`.
    pub fn bpsk(&self, bit: u8) -> f64 {
        let a = self.power().sqrt();
        if bit & 1 == 0 {
            a
        } else {
            -a
        }
    }

    pub fn transmit<R: RngCore + ?Sized>(&self, bit: u8, rng: &mut R) -> Observation {
        match *self {
            ChannelParams::Bsc { p } => {
                let flip = rng.random::<f64>() < p;
                Observation::Bit((bit & 1) ^ flip as u8)
            }
            ChannelParams::BiAwgn { .. } => {
                Observation::Sample(self.bpsk(bit) + standard_normal(rng))
            }
        }
    }

    /// `ln P(obs | bit)` in nats.
    ///
    /// A mismatched bit on a `p = 0` BSC gives `f64::NEG_INFINITY`, which the
    /// decoder treats as an impossible branch.
    pub fn symbol_loglik(&self, obs: Observation, bit: u8) -> f64 {
        match (*self, obs) {
            (ChannelParams::Bsc { p }, Observation::Bit(y)) => {
                if y & 1 == bit & 1 {
                    (-p).ln_1p()
                } else {
                    p.ln()
                }
            }
            (ChannelParams::BiAwgn { .. }, Observation::Sample(y)) => {
                let r = y - self.bpsk(bit);
                -0.5 * r * r - LN_SQRT_2PI
            }
            (params, obs) => panic!("observation {obs:?} does not belong to channel {params:?}"),
        }
    }

    /// `[ln P(obs | 0), ln P(obs | 1)]`.
    pub fn loglik_pair(&self, obs: Observation) -> [f64; 2] {
        [self.symbol_loglik(obs, 0), self.symbol_loglik(obs, 1)]
    }
}

/// One standard normal deviate from exactly two RNG words (Box-Muller).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Independent substream for one trial: ChaCha8 keyed by the master seed, with
/// the trial index as the stream id.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
