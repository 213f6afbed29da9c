//! Maximum-likelihood decoding with an exact word-correct posterior.
//!
//! For equiprobable messages the probability that the ML codeword `x̂` is the
//! one that was sent is
//!
//! ```text
//! P(x̂ | y) = P(y | x̂) / Σ_m P(y | x_m)
//! ```
//!
//! The numerator comes from a Viterbi (max-product) pass over the zero-tail
//! trellis and the denominator from a forward (sum-product) pass over the same
//! trellis; both run in the log domain in one traversal, so a decode costs
//! `O(N 2^nu)` like plain Viterbi decoding.
//!
//! Symbols that have not arrived yet are erased: they add log-likelihood 0 to
//! every branch, a constant that cancels between numerator and denominator.

use crate::channel::{ChannelParams, Observation};
use crate::logsum::log_add;
use crate::trellis::{TransmissionSchedule, Trellis, OUTPUTS_PER_BIT};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Per-symbol observations of one mother codeword, indexed by codeword
/// position. Positions that have not been received are erased.
#[derive(Debug, Clone)]
pub struct ReceivedWindow {
    channel: ChannelParams,
    slots: Vec<Option<Observation>>,
    logliks: Vec<[f64; 2]>,
    observed: usize,
}

impl ReceivedWindow {
    /// A fully erased window of `len` slots.
    pub fn new(channel: ChannelParams, len: usize) -> Self {
        ReceivedWindow {
            channel,
            slots: vec![None; len],
            logliks: vec![[0.0; 2]; len],
            observed: 0,
        }
    }

    /// Fills the first `observations.len()` positions of `schedule`, in order.
    pub fn from_schedule(
        channel: ChannelParams,
        schedule: &TransmissionSchedule,
        observations: &[Observation],
    ) -> Self {
        assert!(observations.len() <= schedule.len());
        let mut window = Self::new(channel, schedule.len());
        for (&position, &obs) in schedule.order().iter().zip(observations) {
            window.observe(position, obs);
        }
        window
    }

    /// Records the observation for codeword position `position`, replacing any
    /// earlier one.
    pub fn observe(&mut self, position: usize, obs: Observation) {
        if self.slots[position].is_none() {
            self.observed += 1;
        }
        self.slots[position] = Some(obs);
        self.logliks[position] = self.channel.loglik_pair(obs);
    }

    /// Erases every slot.
    pub fn clear(&mut self) {
        self.slots.fill(None);
        self.logliks.fill([0.0; 2]);
        self.observed = 0;
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    /// Number of slots, i.e. the mother codeword length `N`.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of received symbols `n`.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn slot(&self, position: usize) -> Option<Observation> {
        self.slots[position]
    }

    /// `[ln P(y | 0), ln P(y | 1)]` for a slot; `[0, 0]` when erased.
    pub fn loglik(&self, position: usize) -> [f64; 2] {
        self.logliks[position]
    }

    /// `ln P(y | codeword)` summed over the received positions.
    pub fn codeword_loglik(&self, codeword: &[u8]) -> f64 {
        assert_eq!(codeword.len(), self.len());
        codeword
            .iter()
            .zip(&self.logliks)
            .map(|(&b, ll)| ll[(b & 1) as usize])
            .sum()
    }
}

/// Result of one decoding attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub ml_message: Vec<u8>,
    /// `ln P(y | x̂)`.
    pub ml_log_likelihood: f64,
    /// `ln Σ_m P(y | x_m)`.
    pub total_log_prob: f64,
    /// `ln P(x̂ | y)`, never positive.
    pub log_posterior: f64,
    /// ACK: the posterior is at least `1 - epsilon`.
    pub accepted: bool,
}

impl DecodeOutcome {
    pub fn posterior(&self) -> f64 {
        self.log_posterior.exp()
    }
}

/// The stopping rule: accept iff `P(x̂ | y) >= 1 - epsilon`.
pub fn accepts(log_posterior: f64, epsilon: f64) -> bool {
    log_posterior >= (-epsilon).ln_1p()
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: u32,
    label: u8,
    input: u8,
}

/// Reusable decoder for one trellis and message length.
///
/// Forward-pass values are cached per section. A new call recomputes only
/// from the first section whose branch metrics changed since the last call,
/// which is what makes symbol-by-symbol decoding affordable.
#[derive(Debug, Clone)]
pub struct RovaDecoder {
    k: usize,
    sections: usize,
    num_states: usize,
    edges: Vec<[Edge; 2]>,
    branch: Vec<[f64; 8]>,
    ml: Vec<f64>,
    total: Vec<f64>,
    choice: Vec<u8>,
    valid: usize,
}

impl RovaDecoder {
    /// Decoder for `k`-bit messages; windows must have `3 (k + nu)` slots.
    pub fn new(trellis: &Trellis, k: usize) -> Self {
        let sections = trellis.sections(k);
        let num_states = trellis.num_states();
        let edges = (0..num_states)
            .map(|s| {
                trellis.predecessors(s).map(|(from, input)| Edge {
                    from,
                    label: trellis.label(from as usize, input),
                    input,
                })
            })
            .collect();
        let mut ml = vec![NEG_INF; (sections + 1) * num_states];
        ml[0] = 0.0;
        let total = ml.clone();
        RovaDecoder {
            k,
            sections,
            num_states,
            edges,
            branch: vec![[f64::NAN; 8]; sections],
            ml,
            total,
            choice: vec![0; sections * num_states],
            valid: 0,
        }
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn codeword_len(&self) -> usize {
        OUTPUTS_PER_BIT * self.sections
    }

    fn refresh(&mut self, window: &ReceivedWindow) {
        assert_eq!(
            window.len(),
            self.codeword_len(),
            "window length does not match the terminated trellis"
        );
        let mut first_changed = self.sections;
        for t in (0..self.sections).rev() {
            let ll = &window.logliks[OUTPUTS_PER_BIT * t..OUTPUTS_PER_BIT * (t + 1)];
            let mut metrics = [0.0; 8];
            for (label, m) in metrics.iter_mut().enumerate() {
                *m = ll[0][label & 1] + ll[1][label >> 1 & 1] + ll[2][label >> 2 & 1];
            }
            if metrics != self.branch[t] {
                self.branch[t] = metrics;
                first_changed = t;
            }
        }
        self.valid = self.valid.min(first_changed);

        let s = self.num_states;
        for t in self.valid..self.sections {
            let tail = t >= self.k;
            let bm = &self.branch[t];
            let (done, rest) = self.ml.split_at_mut((t + 1) * s);
            let (prev_ml, next_ml) = (&done[t * s..], &mut rest[..s]);
            let (done, rest) = self.total.split_at_mut((t + 1) * s);
            let (prev_total, next_total) = (&done[t * s..], &mut rest[..s]);
            let choice = &mut self.choice[t * s..(t + 1) * s];
            for (ns, [e0, e1]) in self.edges.iter().enumerate() {
                let (m0, m1) = if tail {
                    (
                        if e0.input == 0 { bm[e0.label as usize] } else { NEG_INF },
                        if e1.input == 0 { bm[e1.label as usize] } else { NEG_INF },
                    )
                } else {
                    (bm[e0.label as usize], bm[e1.label as usize])
                };
                let a = prev_ml[e0.from as usize] + m0;
                let b = prev_ml[e1.from as usize] + m1;
                // Ties keep the lower-numbered predecessor.
                if b > a {
                    next_ml[ns] = b;
                    choice[ns] = 1;
                } else {
                    next_ml[ns] = a;
                    choice[ns] = 0;
                }
                next_total[ns] = log_add(
                    prev_total[e0.from as usize] + m0,
                    prev_total[e1.from as usize] + m1,
                );
            }
        }
        self.valid = self.sections;
    }

    fn traceback(&self) -> Vec<u8> {
        let s = self.num_states;
        let mut inputs = vec![0u8; self.sections];
        let mut state = 0usize;
        for t in (0..self.sections).rev() {
            let edge = self.edges[state][self.choice[t * s + state] as usize];
            inputs[t] = edge.input;
            state = edge.from as usize;
        }
        debug_assert_eq!(state, 0);
        inputs.truncate(self.k);
        inputs
    }

    fn final_values(&self) -> (f64, f64) {
        let at = self.sections * self.num_states;
        (self.ml[at], self.total[at])
    }

    /// ML message and `ln P(y | x̂)` over zero-tail terminated paths.
    pub fn viterbi_ml(&mut self, window: &ReceivedWindow) -> (Vec<u8>, f64) {
        self.refresh(window);
        (self.traceback(), self.final_values().0)
    }

    /// `ln Σ_m P(y | x_m)` over all `2^k` terminated codewords.
    pub fn total_log_prob(&mut self, window: &ReceivedWindow) -> f64 {
        self.refresh(window);
        self.final_values().1
    }

    /// `ln P(x̂ | y)`.
    pub fn word_posterior(&mut self, window: &ReceivedWindow) -> f64 {
        self.refresh(window);
        let (ml, total) = self.final_values();
        log_posterior(ml, total)
    }

    /// Full decode with the `1 - epsilon` stopping decision.
    pub fn decode(&mut self, window: &ReceivedWindow, epsilon: f64) -> DecodeOutcome {
        assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
        self.refresh(window);
        let (ml, total) = self.final_values();
        let log_posterior = log_posterior(ml, total);
        DecodeOutcome {
            ml_message: self.traceback(),
            ml_log_likelihood: ml,
            total_log_prob: total,
            log_posterior,
            accepted: accepts(log_posterior, epsilon),
        }
    }

    /// Generalized-decoding (erasure) rule of Forney in the trellis form of
    /// Hof et al.: accept the ML word `m` iff
    /// `P(y, x_m) / Σ_{m' != m} P(y, x_m') >= e^{nT}` with `nT = ln((1 - ε)/ε)`.
    ///
    /// Computed by its own recursion, which carries for every state the
    /// survivor's likelihood and the summed likelihood of all other paths into
    /// that state, so the competitor mass is never obtained by subtraction.
    /// Intended as a cross-check of [`RovaDecoder::decode`].
    pub fn hof_threshold_check(&self, window: &ReceivedWindow, epsilon: f64) -> bool {
        assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
        assert_eq!(window.len(), self.codeword_len());
        let s = self.num_states;
        let mut surv = vec![NEG_INF; s];
        let mut others = vec![NEG_INF; s];
        surv[0] = 0.0;
        let mut next_surv = surv.clone();
        let mut next_others = others.clone();
        for t in 0..self.sections {
            let ll = &window.logliks[OUTPUTS_PER_BIT * t..OUTPUTS_PER_BIT * (t + 1)];
            let metric = |label: u8, input: u8| {
                if t >= self.k && input == 1 {
                    NEG_INF
                } else {
                    (0..OUTPUTS_PER_BIT)
                        .map(|j| ll[j][(label >> j & 1) as usize])
                        .sum::<f64>()
                }
            };
            for (ns, [e0, e1]) in self.edges.iter().enumerate() {
                let (m0, m1) = (metric(e0.label, e0.input), metric(e1.label, e1.input));
                let (f0, f1) = (e0.from as usize, e1.from as usize);
                let a = surv[f0] + m0;
                let b = surv[f1] + m1;
                let ((win, win_m), (lose, lose_m)) =
                    if b > a { ((f1, m1), (f0, m0)) } else { ((f0, m0), (f1, m1)) };
                next_surv[ns] = surv[win] + win_m;
                next_others[ns] = log_add(
                    others[win] + win_m,
                    log_add(surv[lose], others[lose]) + lose_m,
                );
            }
            std::mem::swap(&mut surv, &mut next_surv);
            std::mem::swap(&mut others, &mut next_others);
        }
        let threshold = (-epsilon).ln_1p() - epsilon.ln();
        others[0] == NEG_INF || surv[0] - others[0] >= threshold
    }
}

fn log_posterior(ml: f64, total: f64) -> f64 {
    if total == NEG_INF {
        return NEG_INF;
    }
    (ml - total).min(0.0)
}

fn decoder_for(trellis: &Trellis, window: &ReceivedWindow) -> RovaDecoder {
    let sections = window.len() / OUTPUTS_PER_BIT;
    assert!(
        window.len().is_multiple_of(OUTPUTS_PER_BIT) && sections >= trellis.nu() as usize,
        "window length {} is not 3 (k + nu)",
        window.len()
    );
    RovaDecoder::new(trellis, sections - trellis.nu() as usize)
}

/// One-shot [`RovaDecoder::viterbi_ml`]; `k` is inferred from the window length.
pub fn viterbi_ml(trellis: &Trellis, window: &ReceivedWindow) -> (Vec<u8>, f64) {
    decoder_for(trellis, window).viterbi_ml(window)
}

/// One-shot [`RovaDecoder::total_log_prob`].
pub fn total_log_prob(trellis: &Trellis, window: &ReceivedWindow) -> f64 {
    decoder_for(trellis, window).total_log_prob(window)
}

/// One-shot [`RovaDecoder::word_posterior`].
pub fn word_posterior(trellis: &Trellis, window: &ReceivedWindow) -> f64 {
    decoder_for(trellis, window).word_posterior(window)
}

/// One-shot [`RovaDecoder::decode`].
pub fn rova_decode(trellis: &Trellis, window: &ReceivedWindow, epsilon: f64) -> DecodeOutcome {
    decoder_for(trellis, window).decode(window, epsilon)
}

/// One-shot [`RovaDecoder::hof_threshold_check`].
pub fn hof_threshold_check(trellis: &Trellis, window: &ReceivedWindow, epsilon: f64) -> bool {
    decoder_for(trellis, window).hof_threshold_check(window, epsilon)
}
