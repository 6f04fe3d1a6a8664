//! Three-sigma over-limit labeling of the monitored channel.
//!
//! A second is over-limit when its value reaches mean + 3 standard
//! deviations of the whole series, with the population (divide by n)
//! standard deviation. A constant series has sigma 0; rather than label
//! everything or nothing by accident, that case keeps all labels 0 and is
//! flagged as degenerate.

use crate::error::{Error, Result};

/// Column name used when labels are stored alongside the attributes.
pub const LABEL_COLUMN: &str = "LABEL";

/// Mean and population standard deviation of the monitored channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStats {
    pub mean: f64,
    pub sigma: f64,
    pub n: usize,
}

/// Per-second labels: 0 normal, 1 over-limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    pub labels: Vec<u8>,
    /// The applied cut: mean + 3 sigma.
    pub threshold: f64,
    pub stats: GStats,
}

impl LabelSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Count of over-limit seconds.
    pub fn overlimit_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Fraction of over-limit seconds.
    pub fn overlimit_fraction(&self) -> f64 {
        self.overlimit_count() as f64 / self.labels.len() as f64
    }

    /// True when sigma was 0 and no second could be labeled.
    pub fn degenerate(&self) -> bool {
        self.stats.sigma == 0.0
    }
}

/// Mean and population standard deviation. The channel is a magnitude, so
/// negative values are rejected.
pub fn g_stats(values: &[f64]) -> Result<GStats> {
    if values.is_empty() {
        return Err(Error::Argument("cannot take statistics of an empty series".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite value {v} at row {}", i + 1)));
        }
        if v < 0.0 {
            return Err(Error::Domain(format!(
                "monitored channel must be non-negative, got {v} at row {}",
                i + 1
            )));
        }
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Ok(GStats {
        mean,
        sigma: var.sqrt(),
        n,
    })
}

/// Label each second: 1 when the value reaches mean + 3 sigma, else 0.
/// When sigma is 0 every label is 0 and the result reports itself
/// degenerate; the threshold is still recorded.
pub fn label_overlimit(values: &[f64]) -> Result<LabelSeries> {
    let stats = g_stats(values)?;
    let threshold = stats.mean + 3.0 * stats.sigma;
    let labels = if stats.sigma > 0.0 {
        values.iter().map(|&v| (v >= threshold) as u8).collect()
    } else {
        vec![0u8; values.len()]
    };
    Ok(LabelSeries {
        labels,
        threshold,
        stats,
    })
}
