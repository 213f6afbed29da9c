//! Finite-blocklength reference curves for variable-length stop-feedback codes.
//!
//! * Achievability: random coding with an information-density threshold
//!   `gamma = ln((M - 1) / eps)`. The error probability is then at most
//!   `(M - 1) e^{-gamma} = eps` and the average blocklength is at most
//!   `Σ_{n >= 0} P[i(X^n; Y^n) < gamma]`. For the BSC the sum is evaluated
//!   exactly from the binomial law of the flip count; for the Gaussian channel
//!   it is estimated by Monte Carlo.
//! * Converses: `log M <= (ell C + h(eps)) / (1 - eps)` for any channel, and
//!   the tighter Burnashev-type bound through `C1` and `lambda1` for the BSC.
//! * No feedback: the normal approximation `C - sqrt(V/n) Q^{-1}(eps) +
//!   log2(n) / (2n)`. The constants come from the fixed-blocklength
//!   literature, not from the feedback analysis.
//!
//! Information densities are in nats; every rate and entropy returned by a
//! public function is in bits.

use std::f64::consts::{LN_2, LOG2_E};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::channel::{standard_normal, trial_rng, ChannelParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("the DMC converse needs a finite maximal relative entropy C1; only the BSC is supported")]
    ConverseDmcUnsupported,
    #[error("{0} Monte Carlo samples is below the minimum of {MIN_MC_SAMPLES}")]
    TooFewSamples(usize),
}

fn domain(name: &'static str, value: f64, range: &'static str) -> BoundsError {
    BoundsError::Domain { name, value, range }
}

pub const MIN_MC_SAMPLES: usize = 10_000;

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("x", x, "[0, 1]"));
    }
    Ok(hb(x))
}

fn hb(x: f64) -> f64 {
    entropy_term(x) + entropy_term(1.0 - x)
}

fn entropy_term(q: f64) -> f64 {
    if q > 0.0 {
        -q * q.log2()
    } else {
        0.0
    }
}

/// Capacity in bits per channel use: `1 - h(p)` for the BSC and
/// `log2(1 + P) / 2` for the Gaussian channel. A BPSK channel is compared
/// against the unconstrained real AWGN channel at the same SNR.
pub fn capacity(channel: &ChannelParams) -> f64 {
    match *channel {
        ChannelParams::Bsc { p } => 1.0 - hb(p),
        ChannelParams::BiAwgn { .. } => 0.5 * channel.power().ln_1p() / LN_2,
    }
}

/// Channel dispersion in bits² per channel use.
pub fn dispersion(channel: &ChannelParams) -> f64 {
    match *channel {
        ChannelParams::Bsc { p } => {
            if p == 0.0 {
                return 0.0;
            }
            let l = ((1.0 - p) / p).log2();
            p * (1.0 - p) * l * l
        }
        ChannelParams::BiAwgn { .. } => {
            let pw = channel.power();
            pw * (pw + 2.0) / (2.0 * (pw + 1.0).powi(2)) * LOG2_E * LOG2_E
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), BoundsError> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(domain("epsilon", epsilon, "(0, 1)"))
    }
}

/// Rate upper bound at average blocklength `ell` from
/// `log M <= (ell C + h(eps)) / (1 - eps)`.
pub fn vlf_converse_basic(ell: f64, channel: &ChannelParams, epsilon: f64) -> Result<f64, BoundsError> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(domain("epsilon", epsilon, "[0, 1)"));
    }
    if ell <= 0.0 {
        return Err(domain("ell", ell, "(0, inf)"));
    }
    Ok((capacity(channel) + hb(epsilon) / ell) / (1.0 - epsilon))
}

/// Smallest `ell` the basic converse allows for `log2_m` message bits.
fn converse_basic_ell(log2_m: f64, channel: &ChannelParams, epsilon: f64) -> f64 {
    ((log2_m * (1.0 - epsilon) - hb(epsilon)) / capacity(channel)).max(f64::MIN_POSITIVE)
}

/// Constants of the BSC entering the DMC converse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BscConverseConstants {
    /// Capacity, bits.
    pub capacity: f64,
    /// `max D(P_{Y|x1} || P_{Y|x2}) = (1 - 2p) log2((1 - p)/p)`, bits.
    pub c1: f64,
    /// `min P(y|x1) / P(y|x2) = p / (1 - p)`.
    pub lambda1: f64,
}

impl BscConverseConstants {
    pub fn new(p: f64) -> Result<Self, BoundsError> {
        if !(p > 0.0 && p < 0.5) {
            return Err(domain("p", p, "(0, 0.5)"));
        }
        Ok(BscConverseConstants {
            capacity: 1.0 - hb(p),
            c1: (1.0 - 2.0 * p) * ((1.0 - p) / p).log2(),
            lambda1: p / (1.0 - p),
        })
    }
}

/// `log2(M - 1)` for `M = 2^log2_m`, accurate for huge and near-1 `M`.
fn log2_m_minus_1(log2_m: f64) -> f64 {
    // M - 1 = M (1 - 2^{-log2_m}).
    log2_m + (-(-log2_m * LN_2).exp()).ln_1p() / LN_2
}

/// Lower bound on the average blocklength of any VLF code with `2^log2_m`
/// messages and error probability `epsilon` over BSC(`p`):
///
/// ```text
/// ell >= sup_{0 < xi <= 1 - 1/M} [ A(xi) / C + B(xi) ]
/// A = log M - F_M(xi) - min(F_M(eps), (eps / xi) log M)
/// B = | (1 - eps)/C1 log(lambda1 xi / (eps (1 - xi))) - h(eps)/C1 |^+
/// F_M(x) = x log(M - 1) + h(x)
/// ```
///
/// All logarithms base 2. The supremum is located on a 10^4-point grid,
/// uniform in `ln(xi / (1 - xi))`, and refined by golden-section search.
pub fn vlf_converse_dmc(log2_m: f64, epsilon: f64, p: f64) -> Result<f64, BoundsError> {
    let k = BscConverseConstants::new(p)?;
    if log2_m < 1.0 {
        return Err(domain("log2 M", log2_m, "[1, inf)"));
    }
    let xi_max = -(-log2_m * LN_2).exp_m1(); // 1 - 1/M
    if !(epsilon > 0.0 && epsilon <= xi_max) {
        return Err(domain("epsilon", epsilon, "(0, 1 - 1/M]"));
    }
    let lm1 = log2_m_minus_1(log2_m);
    let h_eps = hb(epsilon);
    let f_eps = epsilon * lm1 + h_eps;
    let ratio_offset = (k.lambda1 / epsilon).log2();
    // xi = 1 / (1 + e^{-s}) keeps both xi and 1 - xi accurate, including
    // 1 - xi = 1/M at the upper end s = ln(M - 1).
    let objective = |s: f64| {
        let xi = 1.0 / (1.0 + (-s).exp());
        let complement = 1.0 / (1.0 + s.exp());
        let h_xi = entropy_term(xi) + entropy_term(complement);
        let a = log2_m - (xi * lm1 + h_xi) - f_eps.min(epsilon / xi * log2_m);
        let ratio = ratio_offset + s * LOG2_E;
        let b = ((1.0 - epsilon) / k.c1 * ratio - h_eps / k.c1).max(0.0);
        a / k.capacity + b
    };

    const GRID: usize = 10_000;
    let s_lo = -35.0;
    let s_hi = lm1 * LN_2;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| s_lo + (s_hi - s_lo) * i as f64 / (GRID - 1) as f64)
        .collect();
    let (best_i, best) = grid
        .iter()
        .map(|&x| objective(x))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(GRID - 1)];
    let refined = golden_section_max(objective, a, b, 100);
    Ok(best.max(objective(refined)))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        c
    } else {
        d
    }
}

/// Threshold `gamma = ln((M - 1) / eps)` in nats for `M = 2^log2_m`; the
/// smallest threshold for which the union bound meets `eps`.
pub fn achievability_threshold(log2_m: f64, epsilon: f64) -> f64 {
    log2_m_minus_1(log2_m) * LN_2 - epsilon.ln()
}

/// Parameters of a random-coding achievability point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AchievabilitySpec {
    pub log2_m: f64,
    pub epsilon: f64,
    /// Threshold on the information density, nats.
    pub gamma: f64,
}

impl AchievabilitySpec {
    pub fn new(log2_m: f64, epsilon: f64) -> Result<Self, BoundsError> {
        check_epsilon(epsilon)?;
        if log2_m < 1.0 {
            return Err(domain("log2 M", log2_m, "[1, inf)"));
        }
        Ok(AchievabilitySpec {
            log2_m,
            epsilon,
            gamma: achievability_threshold(log2_m, epsilon),
        })
    }
}

/// An average-blocklength bound and its rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AchievabilityPoint {
    pub log2_m: f64,
    pub ell: f64,
    /// `log2 M / ell`, bits per channel use.
    pub rate: f64,
    /// Monte Carlo standard error of `ell` (zero when exact).
    pub ell_stderr: f64,
}

impl AchievabilityPoint {
    fn new(log2_m: f64, ell: f64, ell_stderr: f64) -> Self {
        AchievabilityPoint {
            log2_m,
            ell,
            rate: log2_m / ell,
            ell_stderr,
        }
    }

    pub fn rate_stderr(&self) -> f64 {
        self.rate * self.ell_stderr / self.ell
    }
}

/// Per-symbol information-density increments on BSC(p) with equiprobable
/// inputs: `ln(2(1-p))` for an intact bit and `ln(2p)` for a flipped one.
pub fn bsc_density_increments(p: f64) -> (f64, f64) {
    ((2.0 * (1.0 - p)).ln(), (2.0 * p).ln())
}

/// `Σ_{n >= 0} P[i(X^n; Y^n) < gamma]` on BSC(p), evaluated exactly from the
/// binomial distribution of the number of flips.
fn bsc_hitting_sum(gamma: f64, p: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        // i(X^n; Y^n) = n ln 2 deterministically.
        return (gamma / LN_2).ceil();
    }
    let (up, down) = bsc_density_increments(p);
    let drop = up - down;
    let drift = up * (1.0 - p) + down * p;
    let density = |n: u64, flips: u64| (n - flips) as f64 * up + flips as f64 * down;
    let mut total = 0.0;
    for n in 0u64.. {
        // Fewest flips that keep the density below gamma.
        let t = (n as f64 * up - gamma) / drop;
        let mut f = if t < 0.0 { 0 } else { t.floor() as u64 + 1 };
        while f > 0 && density(n, f - 1) < gamma {
            f -= 1;
        }
        while f <= n && density(n, f) >= gamma {
            f += 1;
        }
        let term = if f == 0 {
            1.0
        } else if f > n {
            0.0
        } else {
            // P[X >= f] for X ~ Binomial(n, p).
            beta_reg(f as f64, (n - f + 1) as f64, p)
        };
        total += term;
        if n as f64 * drift > gamma && term < 1e-12 {
            break;
        }
    }
    total
}

/// Random-coding achievability on BSC(p): average blocklength and rate for
/// `2^log2_m` messages at error probability `epsilon`.
pub fn achievability_bsc(log2_m: f64, epsilon: f64, p: f64) -> Result<AchievabilityPoint, BoundsError> {
    let spec = AchievabilitySpec::new(log2_m, epsilon)?;
    if !(0.0..0.5).contains(&p) {
        return Err(domain("p", p, "[0, 0.5)"));
    }
    Ok(AchievabilityPoint::new(log2_m, bsc_hitting_sum(spec.gamma, p), 0.0))
}

/// Sampler of the Gaussian-channel information density with i.i.d.
/// `N(0, P)` inputs, one symbol at a time:
///
/// ```text
/// i(X^n; Y^n) = n C + (1/2) Σ_j ( -z_j² + (x_j + z_j)² / (1 + P) )    [nats]
/// ```
#[derive(Debug, Clone, Copy)]
pub struct AwgnDensityWalk {
    power: f64,
    amplitude: f64,
    capacity_nats: f64,
}

impl AwgnDensityWalk {
    pub fn new(power: f64) -> Self {
        AwgnDensityWalk {
            power,
            amplitude: power.sqrt(),
            capacity_nats: 0.5 * power.ln_1p(),
        }
    }

    /// Increment for input `x` and noise `z`.
    #[inline]
    pub fn increment(&self, x: f64, z: f64) -> f64 {
        let y = x + z;
        self.capacity_nats + 0.5 * (-z * z + y * y / (1.0 + self.power))
    }

    /// Draws `x` then `z` (four RNG words) and returns the increment.
    #[inline]
    pub fn step<R: rand::RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.amplitude * standard_normal(rng);
        let z = standard_normal(rng);
        self.increment(x, z)
    }

    /// Capacity in nats; the mean of every increment.
    pub fn capacity_nats(&self) -> f64 {
        self.capacity_nats
    }
}

/// Monte Carlo settings for the Gaussian achievability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Longest walk simulated before the estimate is reported as truncated.
    pub max_horizon: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            samples: 100_000,
            seed: 0,
            max_horizon: 1 << 16,
        }
    }
}

/// Monte Carlo achievability points for the Gaussian channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwgnAchievability {
    /// One point per requested `log2 M`, in request order.
    pub points: Vec<AchievabilityPoint>,
    /// Walk length used.
    pub horizon: usize,
    pub warnings: Vec<String>,
}

const TAIL_RUN: usize = 50;
const WALK_BLOCKS: usize = 64;

/// Gaussian-channel random-coding achievability for several message-set
/// sizes at once, with SNR `power` (linear).
///
/// Walk `w` draws its increments from RNG substream `w` of `options.seed`, and
/// every threshold is evaluated on the same walks. For each threshold,
/// `P[i(X^n; Y^n) < gamma]` is estimated by the fraction of walks below it at
/// step `n`; the sum over `n` stops once the estimate has stayed below
/// `10 / samples` for 50 consecutive steps. The standard error comes from the
/// per-walk count of steps below the threshold.
pub fn achievability_awgn_batch(
    log2_ms: &[f64],
    epsilon: f64,
    power: f64,
    options: McOptions,
) -> Result<AwgnAchievability, BoundsError> {
    check_epsilon(epsilon)?;
    if !(power > 0.0 && power.is_finite()) {
        return Err(domain("P", power, "(0, inf)"));
    }
    if options.samples < MIN_MC_SAMPLES {
        return Err(BoundsError::TooFewSamples(options.samples));
    }
    let specs = log2_ms
        .iter()
        .map(|&m| AchievabilitySpec::new(m, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let walk = AwgnDensityWalk::new(power);

    // Thresholds in ascending order; `rank[j]` maps back to request order.
    let mut rank: Vec<usize> = (0..specs.len()).collect();
    rank.sort_by(|&a, &b| specs[a].gamma.total_cmp(&specs[b].gamma));
    let gammas: Vec<f64> = rank.iter().map(|&j| specs[j].gamma).collect();
    let gamma_max = gammas.last().copied().unwrap_or(0.0);

    let mut warnings = Vec::new();
    if (options.samples as f64) * epsilon < 10.0 {
        warnings.push(format!(
            "{} samples resolve probabilities only down to about {:.1e}, coarser than epsilon = {epsilon:e}",
            options.samples,
            10.0 / options.samples as f64
        ));
    }

    let c = walk.capacity_nats();
    let mut horizon = ((1.5 * gamma_max / c) + 20.0 * gamma_max.sqrt() / c + 200.0).ceil() as usize;
    horizon = horizon.min(options.max_horizon).max(TAIL_RUN + 1);
    loop {
        let tally = walk_tally(&walk, &gammas, horizon, options);
        let cut: Vec<Option<usize>> = (0..gammas.len())
            .map(|j| truncation_point(&tally.below, j, gammas.len(), horizon))
            .collect();
        if cut.iter().all(Option::is_some) || horizon >= options.max_horizon {
            let samples = options.samples as f64;
            let mut points = vec![None; specs.len()];
            for (j, &orig) in rank.iter().enumerate() {
                let end = cut[j].unwrap_or(horizon);
                if cut[j].is_none() {
                    warnings.push(format!(
                        "log2 M = {}: walks still below the threshold after {horizon} steps; ell is a lower estimate",
                        specs[orig].log2_m
                    ));
                }
                let hits: u64 = (0..end).map(|n| tally.below[n * gammas.len() + j] as u64).sum();
                let ell = hits as f64 / samples;
                let mean = tally.per_walk_sum[j] as f64 / samples;
                let var = (tally.per_walk_sq[j] as f64 / samples - mean * mean).max(0.0);
                let se = (var * samples / (samples - 1.0)).sqrt() / samples.sqrt();
                points[orig] = Some(AchievabilityPoint::new(specs[orig].log2_m, ell, se));
            }
            return Ok(AwgnAchievability {
                points: points.into_iter().map(Option::unwrap).collect(),
                horizon,
                warnings,
            });
        }
        horizon = (horizon * 2).min(options.max_horizon);
    }
}

/// Single-point form of [`achievability_awgn_batch`].
pub fn achievability_awgn(
    log2_m: f64,
    epsilon: f64,
    power: f64,
    options: McOptions,
) -> Result<(AchievabilityPoint, Vec<String>), BoundsError> {
    let mut out = achievability_awgn_batch(&[log2_m], epsilon, power, options)?;
    Ok((out.points.remove(0), out.warnings))
}

struct WalkTally {
    // below[n * g + j]: walks with i_n < gammas[j].
    below: Vec<u32>,
    per_walk_sum: Vec<u64>,
    per_walk_sq: Vec<u128>,
}

fn walk_tally(walk: &AwgnDensityWalk, gammas: &[f64], horizon: usize, options: McOptions) -> WalkTally {
    let g = gammas.len();
    let block_len = options.samples.div_ceil(WALK_BLOCKS);
    let blocks: Vec<WalkTally> = (0..WALK_BLOCKS)
        .into_par_iter()
        .map(|b| {
            // diff[n * (g + 1) + r]: walks whose i_n lies below gammas[r..].
            let mut diff = vec![0u32; horizon * (g + 1)];
            let mut per_walk_sum = vec![0u64; g];
            let mut per_walk_sq = vec![0u128; g];
            let mut own = vec![0u64; g + 1];
            let start = b * block_len;
            let end = ((b + 1) * block_len).min(options.samples);
            for w in start..end {
                let mut rng = trial_rng(options.seed, w as u64);
                own.fill(0);
                let mut density = 0.0;
                for n in 0..horizon {
                    let r = gammas.partition_point(|&gm| gm <= density);
                    diff[n * (g + 1) + r] += 1;
                    own[r] += 1;
                    density += walk.step(&mut rng);
                }
                let mut running = 0u64;
                for j in 0..g {
                    running += own[j];
                    per_walk_sum[j] += running;
                    per_walk_sq[j] += (running as u128) * (running as u128);
                }
            }
            let mut below = vec![0u32; horizon * g];
            for n in 0..horizon {
                let mut running = 0u32;
                for j in 0..g {
                    running += diff[n * (g + 1) + j];
                    below[n * g + j] = running;
                }
            }
            WalkTally {
                below,
                per_walk_sum,
                per_walk_sq,
            }
        })
        .collect();
    blocks
        .into_iter()
        .reduce(|mut acc, b| {
            acc.below.iter_mut().zip(b.below).for_each(|(a, x)| *a += x);
            acc.per_walk_sum.iter_mut().zip(b.per_walk_sum).for_each(|(a, x)| *a += x);
            acc.per_walk_sq.iter_mut().zip(b.per_walk_sq).for_each(|(a, x)| *a += x);
            acc
        })
        .expect("at least one block")
}

/// End (exclusive) of the sum for threshold `j`: the close of the first run
/// of 50 consecutive steps with fewer than 10 walks below the threshold.
fn truncation_point(below: &[u32], j: usize, g: usize, horizon: usize) -> Option<usize> {
    let mut run = 0;
    for n in 0..horizon {
        if below[n * g + j] < 10 {
            run += 1;
            if run == TAIL_RUN {
                return Some(n + 1);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Normal approximation to the best fixed-blocklength rate without feedback,
/// clamped at zero.
pub fn dispersion_no_feedback(n: f64, epsilon: f64, channel: &ChannelParams) -> Result<f64, BoundsError> {
    check_epsilon(epsilon)?;
    if n < 1.0 {
        return Err(domain("n", n, "[1, inf)"));
    }
    let q_inv = -Normal::standard().inverse_cdf(epsilon);
    let rate = capacity(channel) - (dispersion(channel) / n).sqrt() * q_inv + n.log2() / (2.0 * n);
    Ok(rate.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Achievability,
    ConverseBasic,
    ConverseDmc,
    DispersionNoFeedback,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [
        CurveKind::Achievability,
        CurveKind::ConverseBasic,
        CurveKind::ConverseDmc,
        CurveKind::DispersionNoFeedback,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Achievability => "achievability",
            CurveKind::ConverseBasic => "converse_basic",
            CurveKind::ConverseDmc => "converse_dmc",
            CurveKind::DispersionNoFeedback => "dispersion_no_feedback",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Where a curve is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveGrid {
    /// Average blocklengths.
    Ell(Vec<f64>),
    /// Message sizes `log2 M`.
    MessageBits(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub ell: f64,
    /// Bits per channel use.
    pub rate: f64,
    /// Monte Carlo standard error of `rate`, zero for exact curves.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub kind: CurveKind,
    /// Sorted by `ell`.
    pub points: Vec<CurvePoint>,
    pub warnings: Vec<String>,
}

impl BoundCurve {
    /// Rate at `ell` by linear interpolation; `None` outside the curve.
    pub fn rate_at(&self, ell: f64) -> Option<f64> {
        interpolate(self.points.iter().map(|p| (p.ell, p.rate)), ell)
    }

    pub fn stderr_at(&self, ell: f64) -> Option<f64> {
        interpolate(self.points.iter().map(|p| (p.ell, p.stderr)), ell)
    }
}

fn interpolate(points: impl Iterator<Item = (f64, f64)>, x: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (px, py) in points {
        if px == x {
            return Some(py);
        }
        if let Some((qx, qy)) = prev {
            if qx < x && x < px {
                return Some(qy + (py - qy) * (x - qx) / (px - qx));
            }
        }
        prev = Some((px, py));
    }
    None
}

/// Largest `x` in `[lo, hi]` with `f(x) <= target` for increasing `f`.
fn invert_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    while f(hi) <= target {
        lo = hi;
        hi *= 2.0;
    }
    if f(lo) > target {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    lo
}

/// Evaluates one reference curve. Rates are in bits per channel use.
///
/// The Gaussian achievability curve on an `ell` grid is read off a dense
/// Monte Carlo curve over message sizes by linear interpolation.
pub fn curve(
    kind: CurveKind,
    channel: &ChannelParams,
    epsilon: f64,
    grid: &CurveGrid,
    mc: McOptions,
) -> Result<BoundCurve, BoundsError> {
    check_epsilon(epsilon)?;
    channel.validate().map_err(|_| domain("channel", f64::NAN, "a valid channel"))?;
    let mut warnings = Vec::new();
    let exact = |ell: f64, rate: f64| CurvePoint { ell, rate, stderr: 0.0 };
    let mut points: Vec<CurvePoint> = match (kind, grid) {
        (CurveKind::ConverseBasic, CurveGrid::Ell(ells)) => ells
            .iter()
            .map(|&ell| Ok(exact(ell, vlf_converse_basic(ell, channel, epsilon)?)))
            .collect::<Result<_, BoundsError>>()?,
        (CurveKind::ConverseBasic, CurveGrid::MessageBits(ks)) => ks
            .iter()
            .map(|&k| {
                let ell = converse_basic_ell(k, channel, epsilon);
                exact(ell, k / ell)
            })
            .collect(),
        (CurveKind::ConverseDmc, grid) => {
            let ChannelParams::Bsc { p } = *channel else {
                return Err(BoundsError::ConverseDmcUnsupported);
            };
            match grid {
                CurveGrid::MessageBits(ks) => ks
                    .iter()
                    .map(|&k| {
                        let ell = vlf_converse_dmc(k, epsilon, p)?;
                        Ok(exact(ell, k / ell))
                    })
                    .collect::<Result<_, BoundsError>>()?,
                CurveGrid::Ell(ells) => ells
                    .iter()
                    .map(|&ell| {
                        let k_hi = (ell * capacity(channel) + hb(epsilon)) / (1.0 - epsilon) + 1.0;
                        let f = |k: f64| vlf_converse_dmc(k, epsilon, p).unwrap_or(f64::INFINITY);
                        let k = invert_increasing(f, ell, 1.0, k_hi);
                        exact(ell, k / ell)
                    })
                    .collect(),
            }
        }
        (CurveKind::Achievability, grid) => match *channel {
            ChannelParams::Bsc { p } => {
                if p >= 0.5 {
                    return Err(domain("p", p, "[0, 0.5)"));
                }
                match grid {
                    CurveGrid::MessageBits(ks) => ks
                        .iter()
                        .map(|&k| {
                            let pt = achievability_bsc(k, epsilon, p)?;
                            Ok(exact(pt.ell, pt.rate))
                        })
                        .collect::<Result<_, BoundsError>>()?,
                    CurveGrid::Ell(ells) => ells
                        .iter()
                        .map(|&ell| {
                            let f = |k: f64| bsc_hitting_sum(achievability_threshold(k, epsilon), p);
                            let k = invert_increasing(f, ell, 1e-6, ell.max(1.0));
                            exact(ell, k / ell)
                        })
                        .collect(),
                }
            }
            ChannelParams::BiAwgn { .. } => {
                let power = channel.power();
                match grid {
                    CurveGrid::MessageBits(ks) => {
                        let out = achievability_awgn_batch(ks, epsilon, power, mc)?;
                        warnings.extend(out.warnings);
                        out.points
                            .iter()
                            .map(|pt| CurvePoint {
                                ell: pt.ell,
                                rate: pt.rate,
                                stderr: pt.rate_stderr(),
                            })
                            .collect()
                    }
                    CurveGrid::Ell(ells) => {
                        let ell_max = ells.iter().cloned().fold(1.0, f64::max);
                        let k_hi = ell_max * capacity(channel) + 2.0;
                        let steps = 400usize;
                        let ks: Vec<f64> = (0..=steps)
                            .map(|i| 1.0 + (k_hi - 1.0) * i as f64 / steps as f64)
                            .collect();
                        let out = achievability_awgn_batch(&ks, epsilon, power, mc)?;
                        warnings.extend(out.warnings);
                        let dense = BoundCurve {
                            kind,
                            points: out
                                .points
                                .iter()
                                .map(|pt| CurvePoint {
                                    ell: pt.ell,
                                    rate: pt.rate,
                                    stderr: pt.rate_stderr(),
                                })
                                .collect(),
                            warnings: Vec::new(),
                        };
                        ells.iter()
                            .filter_map(|&ell| {
                                let pt = dense.rate_at(ell).map(|rate| CurvePoint {
                                    ell,
                                    rate,
                                    stderr: dense.stderr_at(ell).unwrap_or(0.0),
                                });
                                if pt.is_none() {
                                    warnings.push(format!(
                                        "ell = {ell} is below the smallest achievability blocklength {:.3} (log2 M = 1)",
                                        dense.points[0].ell
                                    ));
                                }
                                pt
                            })
                            .collect()
                    }
                }
            }
        },
        (CurveKind::DispersionNoFeedback, CurveGrid::Ell(ells)) => ells
            .iter()
            .map(|&n| Ok(exact(n, dispersion_no_feedback(n, epsilon, channel)?)))
            .collect::<Result<_, BoundsError>>()?,
        (CurveKind::DispersionNoFeedback, CurveGrid::MessageBits(ks)) => ks
            .iter()
            .map(|&k| {
                // Smallest n carrying k bits; n R(n) grows once R(n) > 0.
                let bits = |n: f64| n * dispersion_no_feedback(n, epsilon, channel).unwrap_or(0.0);
                let n_hi = invert_increasing(bits, k, 1.0, (k / capacity(channel)).max(2.0));
                let n = (n_hi * (1.0 + 1e-12)).max(1.0);
                Ok(exact(n, k / n))
            })
            .collect::<Result<_, BoundsError>>()?,
    };
    points.sort_by(|a, b| a.ell.total_cmp(&b.ell));
    Ok(BoundCurve {
        kind,
        points,
        warnings,
    })
}
