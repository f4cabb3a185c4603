use serde::{Deserialize, Serialize};

use super::{QuantizerError, Result};

/// Parameters of the per-cell sampling guarantee: with `samples` draws spread
/// over `cells` cells, every cell's (group, label) frequencies are within
/// `error` of the truth with probability at least `confidence`, on average
/// over cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacParams {
    pub error: f64,
    pub confidence: f64,
    pub cells: u64,
    pub samples: u64,
}

impl PacParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("error", self.error)?;
        check_unit("confidence", self.confidence)?;
        if self.cells == 0 || self.samples == 0 {
            return Err(QuantizerError::InvalidParameter(
                "cells and samples must be positive".into(),
            ));
        }
        Ok(())
    }

    /// True when `samples` meets the bound for `cells`.
    pub fn is_satisfied(&self) -> Result<bool> {
        self.validate()?;
        Ok(self.samples >= pac_sample_bound(self.cells, self.error, self.confidence)?)
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(QuantizerError::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

// ln(8 / (1 - confidence)): union bound over the four (group, label) events
// times the two-sided Hoeffding constant.
fn log_term(confidence: f64) -> f64 {
    (8.0 / (1.0 - confidence)).ln()
}

/// Smallest sample count `M = ceil(N ln(8/(1-δ)) / (2Δ²))`.
pub fn pac_sample_bound(cells: u64, error: f64, confidence: f64) -> Result<u64> {
    if cells == 0 {
        return Err(QuantizerError::InvalidParameter("cells must be >= 1".into()));
    }
    check_unit("error", error)?;
    check_unit("confidence", confidence)?;
    let m = cells as f64 * log_term(confidence) / (2.0 * error * error);
    Ok(m.ceil() as u64)
}

/// Largest cell count `N = floor(2Δ²M / ln(8/(1-δ)))` supported by `samples`.
pub fn pac_max_cells(samples: u64, error: f64, confidence: f64) -> Result<u64> {
    if samples == 0 {
        return Err(QuantizerError::InvalidParameter("samples must be >= 1".into()));
    }
    check_unit("error", error)?;
    check_unit("confidence", confidence)?;
    let n = 2.0 * error * error * samples as f64 / log_term(confidence);
    // absorb rounding so that max_cells(sample_bound(N)) >= N
    Ok((n * (1.0 + 1e-12)).floor().max(0.0) as u64)
}
