//! Result file writers.
//!
//! CSV files start with `#` comment lines holding the command and the resolved
//! config as one-line JSON, followed by a header row. Floats are printed in
//! scientific notation with 9 significant digits; non-finite values as `NaN`
//! or `inf`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vlf_core::{AggregateStats, BoundCurve};

use crate::config::{CodeEntry, ExperimentConfig};

pub const SIM_COLUMNS: &str = "nu,generators,k,codeword_len,status,num_trials,num_terminated,\
num_undetected_errors,ell_empirical,ell_empirical_ci,ell_formula,ell_formula_ci,rt,rt_ci,\
p_ue,p_ue_ci_lower,p_ue_ci_upper,mean_decode_attempts";

pub const CURVE_COLUMNS: &str = "kind,ell,rate_bits,stderr";

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        x.to_string()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn preamble(command: &str, cfg: &ExperimentConfig) -> Result<String> {
    Ok(format!(
        "# vlfsim {command}\n# config: {}\n",
        serde_json::to_string(cfg)?
    ))
}

/// One row of the combined simulation CSV.
#[derive(Debug, Clone)]
pub struct SimRow {
    line: String,
}

impl SimRow {
    pub fn new(code: &CodeEntry, k: usize, status: &str, stats: Option<&AggregateStats>) -> Self {
        let mut line = format!(
            "{},{},{k},{},{status}",
            code.nu,
            code.generators.join(" "),
            code.spec.codeword_len(k)
        );
        match stats {
            Some(s) => {
                write!(line, ",{},{},{}", s.num_trials, s.num_terminated, s.num_undetected_errors).unwrap();
                for x in [
                    s.ell_empirical,
                    s.ell_empirical_ci,
                    s.ell_formula,
                    s.ell_formula_ci,
                    s.rt,
                    s.rt_ci,
                    s.p_ue,
                    s.p_ue_ci_lower,
                    s.p_ue_ci_upper,
                    s.mean_decode_attempts,
                ] {
                    line.push(',');
                    line.push_str(&num(x));
                }
            }
            None => line.push_str(&",".repeat(SIM_COLUMNS.matches(',').count() - 4)),
        }
        SimRow { line }
    }
}

pub fn write_sim_csv(path: &Path, command: &str, cfg: &ExperimentConfig, rows: &[SimRow]) -> Result<()> {
    let mut text = preamble(command, cfg)?;
    text.push_str(SIM_COLUMNS);
    text.push('\n');
    for row in rows {
        text.push_str(&row.line);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_curve_csv(path: &Path, cfg: &ExperimentConfig, curve: &BoundCurve) -> Result<()> {
    let mut text = preamble("bounds", cfg)?;
    for w in &curve.warnings {
        writeln!(text, "# warning: {w}").unwrap();
    }
    text.push_str(CURVE_COLUMNS);
    text.push('\n');
    for p in &curve.points {
        writeln!(text, "{},{},{},{}", curve.kind.name(), num(p.ell), num(p.rate), num(p.stderr)).unwrap();
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
