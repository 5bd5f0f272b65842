//! Composite midpoint rule.
//!
//! The continuous integrands here are smooth and periodic in λ, where the
//! midpoint rule converges spectrally: a trigonometric polynomial of degree
//! below the panel count is integrated to rounding error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PANELS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationPlan {
    pub panels: usize,
}

impl Default for IntegrationPlan {
    fn default() -> Self {
        IntegrationPlan {
            panels: DEFAULT_PANELS,
        }
    }
}

/// Midpoints of `panels` equal panels on `[lo, hi)` with their widths.
pub fn midpoint_nodes(lo: f64, hi: f64, panels: usize) -> Result<Vec<(f64, f64)>> {
    if panels == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one panel".into(),
        ));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi})")));
    }
    let h = (hi - lo) / panels as f64;
    Ok((0..panels)
        .map(|k| (lo + (k as f64 + 0.5) * h, h))
        .collect())
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> Result<f64> {
    Ok(midpoint_nodes(lo, hi, panels)?
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum())
}
