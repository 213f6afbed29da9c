//! Experiment configuration files.
//!
//! Configs are TOML with flat top-level keys:
//!
//! ```toml
//! channel = "bsc"          # or "biawgn"
//! p = 0.05                 # bsc only
//! # snr_db = 2.0           # biawgn only
//! epsilon = 1e-3
//! nu = 6                   # published code for this memory...
//! # generators = ["117", "127", "155"]   # ...or explicit octal generators
//! k_sweep = [16, 32, 64]
//! num_trials = 2000
//! seed = 1
//! ```
//!
//! `sweep` takes a list of codes instead of `nu`/`generators`:
//! `codes = [{ nu = 6 }, { nu = 8, generators = ["575", "623", "727"] }]`.
//! Unknown keys are rejected so that typos do not silently fall back to
//! defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vlf_core::bounds::{McOptions, MIN_MC_SAMPLES};
use vlf_core::protocol::DEFAULT_MAX_ROUNDS;
use vlf_core::{ChannelParams, ConvCodeSpec, CurveGrid, CurveKind, ProtocolConfig};

pub const DEFAULT_ELL_GRID: [f64; 6] = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub channel: Option<String>,
    pub p: Option<f64>,
    pub snr_db: Option<f64>,
    pub epsilon: Option<f64>,
    pub nu: Option<u32>,
    pub generators: Option<Vec<String>>,
    pub codes: Option<Vec<RawCode>>,
    pub k_sweep: Option<Vec<usize>>,
    pub num_trials: Option<u64>,
    pub decode_interval: Option<usize>,
    pub max_rounds: Option<u32>,
    pub seed: Option<u64>,
    pub schedule_seed: Option<u64>,
    pub kinds: Option<Vec<String>>,
    pub ell_grid: Option<Vec<f64>>,
    pub k_grid: Option<Vec<f64>>,
    pub mc_samples: Option<usize>,
    pub mc_max_horizon: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCode {
    pub nu: u32,
    pub generators: Option<Vec<String>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A code as written to result files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeEntry {
    pub nu: u32,
    pub generators: [String; 3],
    #[serde(skip)]
    pub spec: ConvCodeSpec,
}

impl CodeEntry {
    fn new(spec: ConvCodeSpec) -> Self {
        CodeEntry {
            nu: spec.nu(),
            generators: spec.octal_generators(),
            spec,
        }
    }

    /// File-name friendly label such as `nu6_117-127-155`.
    pub fn label(&self) -> String {
        format!("nu{}_{}", self.nu, self.generators.join("-"))
    }
}

/// Fully resolved, validated configuration. Serialized into every output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub channel: ChannelParams,
    pub epsilon: f64,
    pub codes: Vec<CodeEntry>,
    pub k_sweep: Vec<usize>,
    pub num_trials: u64,
    pub decode_interval: usize,
    pub max_rounds: u32,
    pub seed: u64,
    pub schedule_seed: u64,
    pub kinds: Vec<CurveKind>,
    pub ell_grid: Option<Vec<f64>>,
    pub k_grid: Option<Vec<f64>>,
    pub mc_samples: usize,
    pub mc_max_horizon: usize,
    #[serde(skip)]
    pub output: PathBuf,
}

/// What a command needs from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Simulate,
    Sweep,
    Bounds,
}

pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse(text: &str) -> Result<RawConfig> {
    Ok(toml::from_str(text)?)
}

/// The published code for memory `nu`, if there is one.
pub fn published_code(nu: u32) -> Option<ConvCodeSpec> {
    ConvCodeSpec::published_codes().into_iter().find(|c| c.nu() == nu)
}

pub fn resolve_code(nu: u32, generators: Option<&[String]>, key: &str) -> Result<ConvCodeSpec> {
    match generators {
        None => published_code(nu)
            .with_context(|| format!("`{key}`: no published code with nu = {nu}; give `generators`")),
        Some(g) => {
            let [a, b, c] = g else {
                bail!("`{key}`: expected 3 octal generators, got {}", g.len());
            };
            let spec = ConvCodeSpec::from_octal(nu, [a.as_str(), b.as_str(), c.as_str()])
                .with_context(|| format!("`{key}`"))?;
            Ok(match published_code(nu) {
                Some(table) if table.generators() == spec.generators() => table,
                _ => spec,
            })
        }
    }
}

impl RawConfig {
    pub fn resolve(self, purpose: Purpose, overrides: &Overrides) -> Result<ExperimentConfig> {
        let channel = match self.channel.as_deref() {
            Some("bsc") => {
                if self.snr_db.is_some() {
                    bail!("`snr_db` does not apply to channel = \"bsc\"");
                }
                let p = self.p.context("`p` is required for channel = \"bsc\"")?;
                ChannelParams::bsc(p).context("`p`")?
            }
            Some("biawgn") => {
                if self.p.is_some() {
                    bail!("`p` does not apply to channel = \"biawgn\"");
                }
                let snr = self.snr_db.context("`snr_db` is required for channel = \"biawgn\"")?;
                ChannelParams::bi_awgn(snr).context("`snr_db`")?
            }
            Some(other) => bail!("`channel`: unknown channel {other:?} (expected \"bsc\" or \"biawgn\")"),
            None => bail!("`channel` is required"),
        };

        let epsilon = self.epsilon.unwrap_or(1e-3);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            bail!("`epsilon` = {epsilon} is outside (0, 1)");
        }

        let simulating = purpose != Purpose::Bounds;
        let codes = match (purpose, self.nu, &self.codes) {
            (_, Some(_), Some(_)) => bail!("give either `nu`/`generators` or `codes`, not both"),
            (Purpose::Simulate, None, Some(_)) => bail!("`codes` is for `sweep`; `simulate` takes `nu`"),
            (_, Some(nu), None) => vec![resolve_code(nu, self.generators.as_deref(), "generators")?],
            (_, None, Some(list)) => {
                if list.is_empty() {
                    bail!("`codes` is empty");
                }
                list.iter()
                    .enumerate()
                    .map(|(i, c)| resolve_code(c.nu, c.generators.as_deref(), &format!("codes[{i}]")))
                    .collect::<Result<_>>()?
            }
            (Purpose::Sweep, None, None) => ConvCodeSpec::published_codes().to_vec(),
            (Purpose::Simulate, None, None) => bail!("`nu` is required"),
            (Purpose::Bounds, None, None) => Vec::new(),
        };
        if self.nu.is_none() && self.generators.is_some() {
            bail!("`generators` needs `nu`");
        }

        let k_sweep = self.k_sweep.unwrap_or_default();
        if simulating {
            if k_sweep.is_empty() {
                bail!("`k_sweep` must list at least one message size");
            }
            if let Some(&k) = k_sweep.iter().find(|&&k| k == 0) {
                bail!("`k_sweep` contains k = {k}; message sizes must be positive");
            }
        }

        let num_trials = overrides.trials.or(self.num_trials).unwrap_or(1000);
        if simulating && num_trials == 0 {
            bail!("`num_trials` must be positive");
        }
        let decode_interval = self.decode_interval.unwrap_or(1);
        if decode_interval == 0 {
            bail!("`decode_interval` must be positive");
        }
        let max_rounds = self.max_rounds.unwrap_or(DEFAULT_MAX_ROUNDS);
        if max_rounds == 0 {
            bail!("`max_rounds` must be positive");
        }
        let seed = overrides.seed.or(self.seed).unwrap_or(0);
        let schedule_seed = self.schedule_seed.unwrap_or(seed);

        let kinds = match &self.kinds {
            None => default_kinds(&channel),
            Some(names) if names.iter().any(|n| n == "all") => {
                if names.len() > 1 {
                    bail!("`kinds`: \"all\" cannot be combined with other kinds");
                }
                default_kinds(&channel)
            }
            Some(names) => {
                let mut kinds = Vec::new();
                for name in names {
                    let kind = CurveKind::parse(name).with_context(|| {
                        format!(
                            "`kinds`: unknown kind {name:?} (expected one of {})",
                            CurveKind::ALL.map(|k| k.name()).join(", ")
                        )
                    })?;
                    if !kinds.contains(&kind) {
                        kinds.push(kind);
                    }
                }
                kinds
            }
        };
        if kinds.contains(&CurveKind::ConverseDmc) && !matches!(channel, ChannelParams::Bsc { .. }) {
            bail!("`kinds`: converse_dmc needs a channel with finite C1 (BSC only)");
        }

        let (ell_grid, k_grid) = match (self.ell_grid, self.k_grid) {
            (Some(_), Some(_)) => bail!("give either `ell_grid` or `k_grid`, not both"),
            (None, None) => (Some(DEFAULT_ELL_GRID.to_vec()), None),
            (ell, k) => (ell, k),
        };
        for (key, grid) in [("ell_grid", &ell_grid), ("k_grid", &k_grid)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    bail!("`{key}` is empty");
                }
                if let Some(x) = g.iter().find(|x| !(x.is_finite() && **x >= 1.0)) {
                    bail!("`{key}` contains {x}; grid values must be at least 1");
                }
            }
        }

        let mc_defaults = McOptions::default();
        let mc_samples = self.mc_samples.unwrap_or(mc_defaults.samples);
        if mc_samples < MIN_MC_SAMPLES {
            bail!("`mc_samples` = {mc_samples} is below the minimum of {MIN_MC_SAMPLES}");
        }
        let mc_max_horizon = self.mc_max_horizon.unwrap_or(mc_defaults.max_horizon);
        if mc_max_horizon < 100 {
            bail!("`mc_max_horizon` = {mc_max_horizon} is too short");
        }

        let output = overrides
            .out
            .clone()
            .or(self.output)
            .unwrap_or_else(|| PathBuf::from("results"));

        Ok(ExperimentConfig {
            channel,
            epsilon,
            codes: codes.into_iter().map(CodeEntry::new).collect(),
            k_sweep,
            num_trials,
            decode_interval,
            max_rounds,
            seed,
            schedule_seed,
            kinds,
            ell_grid,
            k_grid,
            mc_samples,
            mc_max_horizon,
            output,
        })
    }
}

/// Every curve kind defined for `channel`.
pub fn default_kinds(channel: &ChannelParams) -> Vec<CurveKind> {
    CurveKind::ALL
        .into_iter()
        .filter(|k| *k != CurveKind::ConverseDmc || matches!(channel, ChannelParams::Bsc { .. }))
        .collect()
}

impl ExperimentConfig {
    pub fn protocol(&self, code: &CodeEntry, k: usize) -> ProtocolConfig {
        ProtocolConfig {
            k,
            code: code.spec.clone(),
            channel: self.channel,
            epsilon: self.epsilon,
            decode_interval: self.decode_interval,
            max_rounds: self.max_rounds,
            master_seed: self.seed,
            schedule_seed: self.schedule_seed,
        }
    }

    pub fn grid(&self) -> CurveGrid {
        match (&self.ell_grid, &self.k_grid) {
            (_, Some(k)) => CurveGrid::MessageBits(k.clone()),
            (Some(ell), None) => CurveGrid::Ell(ell.clone()),
            (None, None) => CurveGrid::Ell(DEFAULT_ELL_GRID.to_vec()),
        }
    }

    pub fn mc_options(&self) -> McOptions {
        McOptions {
            samples: self.mc_samples,
            seed: self.seed,
            max_horizon: self.mc_max_horizon,
        }
    }
}
