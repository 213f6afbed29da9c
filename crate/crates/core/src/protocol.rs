//! Stop-feedback transmission loop and its statistics.
//!
//! A trial sends one uniformly random `k`-bit message. The zero-tail mother
//! codeword is sent one symbol at a time in the order of a fixed
//! [`TransmissionSchedule`]; every `decode_interval` symbols (and always after
//! the last one) the receiver decodes and feeds back a single ACK/NACK bit.
//! If the whole mother codeword has been sent without an ACK, the receiver
//! drops everything it has and the transmitter starts over with the same
//! schedule, so rounds are independent and identically distributed.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{trial_rng, ChannelError, ChannelParams};
use crate::rova::{ReceivedWindow, RovaDecoder};
use crate::stats::{binomial_half_width, clopper_pearson, mean_half_width, Z_95};
use crate::trellis::{ConvCodeSpec, TransmissionSchedule, Trellis};

pub const DEFAULT_MAX_ROUNDS: u32 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("no trials to aggregate")]
    NoTrials,
    #[error("none of the {0} trials was accepted; the configuration cannot deliver messages")]
    NoAcceptedTrials(usize),
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Message bits.
    pub k: usize,
    pub code: ConvCodeSpec,
    pub channel: ChannelParams,
    /// Target word error probability.
    pub epsilon: f64,
    /// Symbols between decoding attempts.
    pub decode_interval: usize,
    /// Rounds after which a trial gives up.
    pub max_rounds: u32,
    /// Seeds the per-trial RNG substreams.
    pub master_seed: u64,
    /// Seeds the transmission order.
    pub schedule_seed: u64,
}

impl ProtocolConfig {
    /// Per-symbol decoding, 100 rounds, schedule seeded from `master_seed`.
    pub fn new(
        k: usize,
        code: ConvCodeSpec,
        channel: ChannelParams,
        epsilon: f64,
        master_seed: u64,
    ) -> Self {
        ProtocolConfig {
            k,
            code,
            channel,
            epsilon,
            decode_interval: 1,
            max_rounds: DEFAULT_MAX_ROUNDS,
            master_seed,
            schedule_seed: master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.k < 1 {
            return Err(ProtocolError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.decode_interval < 1 {
            return Err(ProtocolError::InvalidConfig("decode_interval must be at least 1".into()));
        }
        if self.max_rounds < 1 {
            return Err(ProtocolError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        self.channel.validate()?;
        Ok(())
    }

    pub fn codeword_len(&self) -> usize {
        self.code.codeword_len(self.k)
    }
}

/// What happened to one message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    /// Channel uses over all rounds.
    pub total_symbols_sent: u64,
    pub rounds_used: u32,
    /// Symbols received in the final round when it ended in an ACK.
    pub accepted_after: Option<usize>,
    /// Whether the accepted message was the transmitted one; `None` when the
    /// trial gave up.
    pub success: Option<bool>,
    pub decode_attempts: u64,
}

impl TrialRecord {
    pub fn terminated(&self) -> bool {
        self.accepted_after.is_some()
    }

    /// Rounds that ran through the whole mother codeword without an ACK.
    pub fn failed_rounds(&self) -> u32 {
        if self.terminated() {
            self.rounds_used - 1
        } else {
            self.rounds_used
        }
    }

    /// ACK/NACK for each decode attempt of the final round, in order.
    pub fn final_round_feedback(&self, decode_interval: usize, codeword_len: usize) -> Vec<bool> {
        let end = self.accepted_after.unwrap_or(codeword_len);
        (1..=end)
            .filter(|&i| i % decode_interval == 0 || i == codeword_len)
            .map(|i| Some(i) == self.accepted_after)
            .collect()
    }
}

/// A configured experiment: the trellis and schedule are shared by all trials.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ProtocolConfig,
    trellis: Trellis,
    schedule: TransmissionSchedule,
}

impl Simulator {
    pub fn new(config: ProtocolConfig) -> Result<Self, ProtocolError> {
        config.validate()?;
        let trellis = config.code.trellis();
        let schedule = TransmissionSchedule::new(config.codeword_len(), config.schedule_seed);
        Ok(Simulator {
            config,
            trellis,
            schedule,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn schedule(&self) -> &TransmissionSchedule {
        &self.schedule
    }

    fn workspace(&self) -> (RovaDecoder, ReceivedWindow) {
        (
            RovaDecoder::new(&self.trellis, self.config.k),
            ReceivedWindow::new(self.config.channel, self.config.codeword_len()),
        )
    }

    pub fn run_trial(&self, trial_index: u64) -> TrialRecord {
        let (mut decoder, mut window) = self.workspace();
        self.run_trial_with(trial_index, &mut decoder, &mut window)
    }

    fn run_trial_with(
        &self,
        trial_index: u64,
        decoder: &mut RovaDecoder,
        window: &mut ReceivedWindow,
    ) -> TrialRecord {
        let cfg = &self.config;
        let n_total = cfg.codeword_len();
        let mut rng = trial_rng(cfg.master_seed, trial_index);
        // One RNG word per message bit, then the channel draws.
        let message: Vec<u8> = (0..cfg.k).map(|_| (rng.next_u64() >> 63) as u8).collect();
        let codeword = self.trellis.encode(&message);

        let mut sent = 0u64;
        let mut attempts = 0u64;
        for round in 1..=cfg.max_rounds {
            window.clear();
            for (i, &position) in self.schedule.order().iter().enumerate() {
                let received = i + 1;
                window.observe(position, cfg.channel.transmit(codeword[position], &mut rng));
                sent += 1;
                if received % cfg.decode_interval != 0 && received != n_total {
                    continue;
                }
                attempts += 1;
                let outcome = decoder.decode(window, cfg.epsilon);
                if outcome.accepted {
                    return TrialRecord {
                        trial_index,
                        total_symbols_sent: sent,
                        rounds_used: round,
                        accepted_after: Some(received),
                        success: Some(outcome.ml_message == message),
                        decode_attempts: attempts,
                    };
                }
            }
        }
        TrialRecord {
            trial_index,
            total_symbols_sent: sent,
            rounds_used: cfg.max_rounds,
            accepted_after: None,
            success: None,
            decode_attempts: attempts,
        }
    }

    /// Runs trials `0..num_trials` on `workers` threads (0 picks the rayon
    /// default). Records come back in trial order whatever the worker count.
    pub fn run_trials(&self, num_trials: u64, workers: usize) -> Result<Vec<TrialRecord>, ProtocolError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ProtocolError::WorkerPool(e.to_string()))?;
        Ok(pool.install(|| {
            (0..num_trials)
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |(decoder, window), t| self.run_trial_with(t, decoder, window),
                )
                .collect()
        }))
    }
}

/// Empirical latency and throughput of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub k: usize,
    pub codeword_len: usize,
    pub num_trials: u64,
    pub num_terminated: u64,
    pub num_undetected_errors: u64,
    pub total_rounds: u64,
    /// Entry `i - 1` is the probability that a round has not been ACKed after
    /// its `i`-th symbol, pooled over all rounds of all trials.
    pub p_nack: Vec<f64>,
    pub p_nack_ci: Vec<f64>,
    /// Wrong messages among accepted trials.
    pub p_ue: f64,
    pub p_ue_ci_lower: f64,
    pub p_ue_ci_upper: f64,
    /// Mean channel uses per trial.
    pub ell_empirical: f64,
    pub ell_empirical_ci: f64,
    /// `(1 + Σ_{i<N} P_NACK(i)) / (1 - P_NACK(N))`.
    pub ell_formula: f64,
    pub ell_formula_ci: f64,
    /// `(k / ell_empirical) (1 - P_UE)`, in bits per channel use.
    pub rt: f64,
    pub rt_ci: f64,
    pub mean_decode_attempts: f64,
}

/// `(1 + Σ_{i=1}^{N-1} P_NACK(i)) / (1 - P_NACK(N))` for `p_nack[i-1] = P_NACK(i)`.
pub fn latency_from_nack(p_nack: &[f64]) -> f64 {
    let (last, head) = p_nack.split_last().expect("empty NACK profile");
    (1.0 + head.iter().sum::<f64>()) / (1.0 - last)
}

/// `(k / ell) (1 - P_UE)`.
pub fn throughput(k: usize, ell: f64, p_ue: f64) -> f64 {
    k as f64 / ell * (1.0 - p_ue)
}

pub fn aggregate(trials: &[TrialRecord], config: &ProtocolConfig) -> Result<AggregateStats, ProtocolError> {
    if trials.is_empty() {
        return Err(ProtocolError::NoTrials);
    }
    let n_total = config.codeword_len();
    let num_trials = trials.len() as u64;
    let accepted: Vec<&TrialRecord> = trials.iter().filter(|t| t.terminated()).collect();
    let num_terminated = accepted.len() as u64;
    if num_terminated == 0 {
        return Err(ProtocolError::NoAcceptedTrials(trials.len()));
    }
    let num_wrong = accepted.iter().filter(|t| t.success == Some(false)).count() as u64;

    let total_rounds: u64 = trials.iter().map(|t| t.rounds_used as u64).sum();
    let failed_rounds: u64 = trials.iter().map(|t| t.failed_rounds() as u64).sum();
    // ended_at[j]: accepted rounds that ended after exactly j symbols.
    let mut ended_at = vec![0u64; n_total + 1];
    for t in &accepted {
        ended_at[t.accepted_after.unwrap()] += 1;
    }
    let mut p_nack = Vec::with_capacity(n_total);
    let mut p_nack_ci = Vec::with_capacity(n_total);
    let mut still_open = failed_rounds + num_terminated;
    for ended in ended_at.iter().skip(1) {
        still_open -= ended;
        p_nack.push(still_open as f64 / total_rounds as f64);
        p_nack_ci.push(binomial_half_width(still_open, total_rounds));
    }
    let ell_formula = latency_from_nack(&p_nack);

    // ell_formula equals Σ symbols / Σ accepted rounds; delta-method interval
    // for that ratio of per-trial sums.
    let mean_accepted = num_terminated as f64 / num_trials as f64;
    let resid = trials.iter().map(|t| {
        t.total_symbols_sent as f64 - ell_formula * t.terminated() as u8 as f64
    });
    let (_, resid_half) = mean_half_width(resid);
    let ell_formula_ci = resid_half / mean_accepted;

    let (ell_empirical, ell_empirical_ci) =
        mean_half_width(trials.iter().map(|t| t.total_symbols_sent as f64));

    let p_ue = num_wrong as f64 / num_terminated as f64;
    let (p_ue_ci_lower, p_ue_ci_upper) = clopper_pearson(num_wrong, num_terminated);
    let rt = throughput(config.k, ell_empirical, p_ue);
    let ue_half = Z_95 * (p_ue * (1.0 - p_ue) / num_terminated as f64).sqrt();
    let rel = (ell_empirical_ci / ell_empirical).hypot(ue_half / (1.0 - p_ue));
    let rt_ci = rt * rel;

    let mean_decode_attempts =
        trials.iter().map(|t| t.decode_attempts as f64).sum::<f64>() / num_trials as f64;

    Ok(AggregateStats {
        k: config.k,
        codeword_len: n_total,
        num_trials,
        num_terminated,
        num_undetected_errors: num_wrong,
        total_rounds,
        p_nack,
        p_nack_ci,
        p_ue,
        p_ue_ci_lower,
        p_ue_ci_upper,
        ell_empirical,
        ell_empirical_ci,
        ell_formula,
        ell_formula_ci,
        rt,
        rt_ci,
        mean_decode_attempts,
    })
}

/// Single trial of `config`; see [`Simulator::run_trial`].
pub fn run_trial(config: &ProtocolConfig, trial_index: u64) -> Result<TrialRecord, ProtocolError> {
    Ok(Simulator::new(config.clone())?.run_trial(trial_index))
}

/// Runs `num_trials` trials and aggregates them. The result does not depend on
/// `workers`.
pub fn run_experiment(
    config: &ProtocolConfig,
    num_trials: u64,
    workers: usize,
) -> Result<AggregateStats, ProtocolError> {
    if num_trials == 0 {
        return Err(ProtocolError::NoTrials);
    }
    let sim = Simulator::new(config.clone())?;
    let trials = sim.run_trials(num_trials, workers)?;
    aggregate(&trials, config)
}
