//! Rate-1/3 feedforward convolutional codes with zero-tail termination.
//!
//! # Conventions
//!
//! Generator polynomials are written in octal, most significant tap first, as
//! in the standard code tables: the top bit of `g` (bit `nu`) multiplies the
//! current input and bit 0 multiplies the input `nu` steps in the past.
//!
//! The encoder state holds the last `nu` input bits with the most recent one in
//! the least significant position. An input bit `u` taken in state `s` moves the
//! encoder to `((s << 1) | u) & (2^nu - 1)` ("shift in at the LSB").
//!
//! Each branch emits three code bits. Bit `j` of a branch label is the output
//! of generator `j`, and in a mother codeword the three outputs of trellis
//! section `t` occupy positions `3t`, `3t + 1` and `3t + 2`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Outputs per input bit.
pub const OUTPUTS_PER_BIT: usize = 3;

/// Largest supported encoder memory.
pub const MAX_MEMORY: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("generator {index} ({octal:o} octal) has degree above the memory {nu}")]
    DegreeExceedsMemory { index: usize, octal: u32, nu: u32 },
    #[error("generator {index} is zero")]
    ZeroGenerator { index: usize },
    #[error("no generator taps the current input or the oldest memory cell; memory is not {nu}")]
    MemoryNotExact { nu: u32 },
    #[error("memory {0} exceeds the supported maximum of {MAX_MEMORY}")]
    MemoryTooLarge(u32),
    #[error("invalid octal generator {0:?}")]
    InvalidOctal(String),
    #[error("message length {got} does not match the expected {expected}")]
    MessageLength { expected: usize, got: usize },
    #[error("free-distance search did not close within radius {radius} after {steps} steps (catastrophic code?)")]
    SearchDidNotClose { radius: u32, steps: usize },
}

/// Distance properties published alongside a code. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedDistance {
    pub d_free: u32,
    pub a_dfree: u64,
    /// Analytic traceback depth.
    pub traceback_depth: u32,
}

/// A rate-1/3 feedforward convolutional code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCodeSpec {
    nu: u32,
    generators: [u32; 3],
    published: Option<PublishedDistance>,
}

impl ConvCodeSpec {
    /// Validates `nu` and the generators.
    ///
    /// Every generator must fit in `nu + 1` bits, and the code as a whole must
    /// use both the current input and the oldest memory cell.
    pub fn new(nu: u32, generators: [u32; 3]) -> Result<Self, CodeError> {
        if nu > MAX_MEMORY {
            return Err(CodeError::MemoryTooLarge(nu));
        }
        for (index, &g) in generators.iter().enumerate() {
            if g == 0 {
                return Err(CodeError::ZeroGenerator { index });
            }
            if g >> (nu + 1) != 0 {
                return Err(CodeError::DegreeExceedsMemory { index, octal: g, nu });
            }
        }
        let leading = generators.iter().any(|g| g >> nu & 1 == 1);
        let trailing = generators.iter().any(|g| g & 1 == 1);
        if !leading || !trailing {
            return Err(CodeError::MemoryNotExact { nu });
        }
        Ok(ConvCodeSpec {
            nu,
            generators,
            published: None,
        })
    }

    /// Parses octal generator strings such as `"117"`.
    pub fn from_octal(nu: u32, generators: [&str; 3]) -> Result<Self, CodeError> {
        let mut g = [0u32; 3];
        for (slot, text) in g.iter_mut().zip(generators) {
            *slot = u32::from_str_radix(text.trim(), 8)
                .map_err(|_| CodeError::InvalidOctal(text.to_string()))?;
        }
        Self::new(nu, g)
    }

    pub fn with_published(mut self, published: PublishedDistance) -> Self {
        self.published = Some(published);
        self
    }

    /// 64 states, (117, 127, 155): d_free 15, 3 minimum-weight paths, L_D 21.
    pub fn memory6() -> Self {
        Self::new(6, [0o117, 0o127, 0o155])
            .expect("valid table code")
            .with_published(PublishedDistance {
                d_free: 15,
                a_dfree: 3,
                traceback_depth: 21,
            })
    }

    /// 256 states, (575, 623, 727): d_free 18, 1 minimum-weight path, L_D 25.
    pub fn memory8() -> Self {
        Self::new(8, [0o575, 0o623, 0o727])
            .expect("valid table code")
            .with_published(PublishedDistance {
                d_free: 18,
                a_dfree: 1,
                traceback_depth: 25,
            })
    }

    /// 1024 states, (2325, 2731, 3747): d_free 22, 7 minimum-weight paths, L_D 34.
    pub fn memory10() -> Self {
        Self::new(10, [0o2325, 0o2731, 0o3747])
            .expect("valid table code")
            .with_published(PublishedDistance {
                d_free: 22,
                a_dfree: 7,
                traceback_depth: 34,
            })
    }

    /// The three optimum-distance codes used as mother codes.
    pub fn published_codes() -> [ConvCodeSpec; 3] {
        [Self::memory6(), Self::memory8(), Self::memory10()]
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn generators(&self) -> [u32; 3] {
        self.generators
    }

    pub fn octal_generators(&self) -> [String; 3] {
        self.generators.map(|g| format!("{g:o}"))
    }

    pub fn published(&self) -> Option<PublishedDistance> {
        self.published
    }

    pub fn num_states(&self) -> usize {
        1 << self.nu
    }

    /// Mother codeword length `N = 3 (k + nu)`.
    pub fn codeword_len(&self, k: usize) -> usize {
        OUTPUTS_PER_BIT * (k + self.nu as usize)
    }

    /// `k / N`, the information rate after paying for the zero tail.
    pub fn effective_rate(&self, k: usize) -> f64 {
        k as f64 / self.codeword_len(k) as f64
    }

    pub fn trellis(&self) -> Trellis {
        Trellis::new(self)
    }
}

/// State graph of a [`ConvCodeSpec`].
#[derive(Debug, Clone)]
pub struct Trellis {
    nu: u32,
    next: Vec<[u32; 2]>,
    labels: Vec<[u8; 2]>,
    // Incoming edges (from_state, input) ordered by from_state, then input.
    preds: Vec<[(u32, u8); 2]>,
}

impl Trellis {
    pub fn new(spec: &ConvCodeSpec) -> Self {
        let nu = spec.nu;
        let num_states = 1usize << nu;
        let mask = (num_states - 1) as u32;
        // Tap for delay i sits at bit (nu - i) of the octal form; reverse so it
        // lines up with bit i of the shift register.
        let taps = spec.generators.map(|g| g.reverse_bits() >> (31 - nu));

        let mut next = Vec::with_capacity(num_states);
        let mut labels = Vec::with_capacity(num_states);
        let mut incoming: Vec<Vec<(u32, u8)>> = vec![Vec::with_capacity(2); num_states];
        for s in 0..num_states as u32 {
            let mut ns = [0u32; 2];
            let mut ls = [0u8; 2];
            for u in 0..2u32 {
                let register = (s << 1) | u;
                let mut label = 0u8;
                for (j, tap) in taps.iter().enumerate() {
                    label |= (((register & tap).count_ones() & 1) as u8) << j;
                }
                let to = register & mask;
                ns[u as usize] = to;
                ls[u as usize] = label;
                incoming[to as usize].push((s, u as u8));
            }
            next.push(ns);
            labels.push(ls);
        }
        let preds = incoming
            .into_iter()
            .map(|v| {
                debug_assert_eq!(v.len(), 2);
                [v[0], v[1]]
            })
            .collect();
        Trellis {
            nu,
            next,
            labels,
            preds,
        }
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: u8) -> usize {
        self.next[state][input as usize] as usize
    }

    /// Three-bit branch label; bit `j` is the output of generator `j`.
    #[inline]
    pub fn label(&self, state: usize, input: u8) -> u8 {
        self.labels[state][input as usize]
    }

    /// The two branches entering `state` as `(from_state, input)`, lowest
    /// `from_state` first.
    #[inline]
    pub fn predecessors(&self, state: usize) -> [(u32, u8); 2] {
        self.preds[state]
    }

    /// Number of trellis sections for a `k`-bit message.
    pub fn sections(&self, k: usize) -> usize {
        k + self.nu as usize
    }

    /// Zero-tail encoding: the message followed by `nu` zeros, three code bits
    /// per section. The returned codeword has length `3 (k + nu)`.
    pub fn encode(&self, message: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(OUTPUTS_PER_BIT * self.sections(message.len()));
        let mut state = 0usize;
        let tail = std::iter::repeat_n(0u8, self.nu as usize);
        for u in message.iter().map(|&b| b & 1).chain(tail) {
            let label = self.label(state, u);
            out.extend((0..OUTPUTS_PER_BIT).map(|j| label >> j & 1));
            state = self.next_state(state, u);
        }
        debug_assert_eq!(state, 0);
        out
    }

    /// Free distance and the number of minimum-weight error events.
    ///
    /// Counts all paths that leave state 0 at time 0 and first return to it,
    /// pruning any path whose weight exceeds the current search radius. The
    /// radius starts at `3 nu` and doubles until some path closes within it.
    pub fn free_distance(&self) -> Result<FreeDistance, CodeError> {
        let mut radius = (3 * self.nu).max(1);
        loop {
            if let Some(found) = self.bounded_weight_search(radius)? {
                return Ok(found);
            }
            radius *= 2;
        }
    }

    fn bounded_weight_search(&self, radius: u32) -> Result<Option<FreeDistance>, CodeError> {
        let num_states = self.num_states();
        let width = radius as usize + 1;
        let mut closed = vec![0u64; width];
        let mut alive = vec![0u64; num_states * width];
        let mut scratch = vec![0u64; num_states * width];

        let first_state = self.next_state(0, 1);
        let first_weight = self.label(0, 1).count_ones() as usize;
        if first_weight <= radius as usize {
            if first_state == 0 {
                closed[first_weight] += 1;
            } else {
                alive[first_state * width + first_weight] = 1;
            }
        }

        // Without zero-weight cycles a surviving path gains weight at least
        // every 2^nu steps.
        let max_steps = width * num_states + 1;
        let mut steps = 1usize;
        while alive.iter().any(|&c| c != 0) {
            if steps > max_steps {
                return Err(CodeError::SearchDidNotClose { radius, steps });
            }
            scratch.fill(0);
            for s in 1..num_states {
                for w in 0..width {
                    let count = alive[s * width + w];
                    if count == 0 {
                        continue;
                    }
                    for u in 0..2u8 {
                        let nw = w + self.label(s, u).count_ones() as usize;
                        if nw > radius as usize {
                            continue;
                        }
                        let ns = self.next_state(s, u);
                        if ns == 0 {
                            closed[nw] = closed[nw].saturating_add(count);
                        } else {
                            let slot = &mut scratch[ns * width + nw];
                            *slot = slot.saturating_add(count);
                        }
                    }
                }
            }
            std::mem::swap(&mut alive, &mut scratch);
            steps += 1;
        }

        Ok(closed
            .iter()
            .enumerate()
            .find(|(_, &c)| c > 0)
            .map(|(w, &c)| FreeDistance {
                d_free: w as u32,
                multiplicity: c,
            }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeDistance {
    pub d_free: u32,
    /// Number of distinct minimum-weight paths leaving and returning to state 0.
    pub multiplicity: u64,
}

/// Order in which the symbols of a mother codeword are sent.
///
/// Sending a permutation one symbol at a time is rate-compatible by
/// construction: the symbols sent after `i` steps are always a prefix of the
/// symbols sent after `j > i` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionSchedule {
    order: Vec<usize>,
    seed: u64,
}

impl TransmissionSchedule {
    /// Uniform random permutation of `0..len`.
    ///
    /// The generator is ChaCha8 (`rand_chacha`) seeded with
    /// `SeedableRng::seed_from_u64(seed)`, driving the Fisher-Yates shuffle of
    /// `rand::seq::SliceRandom`. Both are platform independent, so `(len, seed)`
    /// pins the permutation.
    pub fn new(len: usize, seed: u64) -> Self {
        assert!(len >= 1, "schedule length must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        TransmissionSchedule { order, seed }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}
