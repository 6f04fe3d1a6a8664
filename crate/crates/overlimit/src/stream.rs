//! Streaming replay: feed a recorder table through a trained model row by
//! row and emit one alert line per instant.
//!
//! The stream keeps a sliding buffer of the last `time_step` rows,
//! normalized with the statistics frozen in the model (values outside the
//! fitted range clamp into [0, 1]). Until the buffer fills, each instant
//! is reported as `WARMUP`; never silently skipped. From then on, after
//! row `r` arrives the model predicts instant `r + 1`, so the final
//! prediction points one second past the end of the input.
//!
//! Output is tab-separated: `timestamp`, `probability` (six decimals, `-`
//! during warm-up), and `ALERT`, `OK`, or `WARMUP`. Batch evaluation and
//! this replay run the same forward code on the same normalized rows, so
//! their probabilities agree exactly.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::dataset::normalize_value;
use crate::error::{Error, Result};
use crate::lstm::{forward_prob, NetworkParams};
use crate::model::ModelMeta;

/// Replay pacing and output options.
#[derive(Debug, Clone, Copy, Default)]
pub struct WarnOptions {
    /// Sleep one second per input row, mimicking a live 1 Hz feed.
    pub realtime: bool,
}

/// Counters and full-precision outputs from one replay.
#[derive(Debug, Clone, PartialEq)]
pub struct WarnSummary {
    /// Input rows consumed.
    pub rows: usize,
    /// Predictions at or above the alert threshold.
    pub alerts: usize,
    /// Every emitted probability in order, unrounded. The printed lines
    /// carry six decimals; programmatic consumers get the exact values.
    pub probabilities: Vec<f64>,
}

impl WarnSummary {
    /// Prediction lines emitted (excludes warm-up lines).
    pub fn predictions(&self) -> usize {
        self.probabilities.len()
    }
}

fn is_time_column(name: &str) -> bool {
    name.eq_ignore_ascii_case("TIME")
}

/// Replay a CSV stream through the model. The header must contain every
/// feature the model was trained on (checked before any inference); extra
/// columns are ignored. Cells must be numeric: the stream is expected to
/// carry converted values, as produced by the ingest stage.
pub fn warn_stream<R: BufRead, W: Write>(
    params: &NetworkParams,
    meta: &ModelMeta,
    reader: R,
    out: &mut W,
    options: &WarnOptions,
) -> Result<WarnSummary> {
    params.check()?;
    let threshold = meta.threshold;
    let time_step = meta.time_step;
    let stats = meta.norm_stats();
    if stats.feature_count() != meta.features.len() {
        return Err(Error::Format(
            "model metadata: normalization bounds do not cover the features".into(),
        ));
    }

    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::Parse {
            line: 1,
            msg: "empty stream, expected a header row".into(),
        }),
    };
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let time_index = names.iter().position(|n| is_time_column(n));

    let mut feature_indices = Vec::with_capacity(meta.features.len());
    let mut missing = Vec::new();
    for feature in &meta.features {
        match names.iter().position(|n| n == feature) {
            Some(idx) => feature_indices.push(idx),
            None => missing.push(feature.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "stream is missing model feature(s): {}",
            missing.join(", ")
        )));
    }

    let mut buffer: VecDeque<Vec<f64>> = VecDeque::with_capacity(time_step);
    let mut summary = WarnSummary {
        rows: 0,
        alerts: 0,
        probabilities: Vec::new(),
    };
    let mut last_ts: Option<i64> = None;

    for (zero_idx, line) in lines {
        let line = line?;
        let line_no = zero_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let ts = match time_index {
            Some(ti) => {
                let v: f64 = fields[ti].parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad timestamp {:?}", fields[ti]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("non-finite timestamp {:?}", fields[ti]),
                    });
                }
                v.floor() as i64
            }
            None => summary.rows as i64,
        };
        if let Some(prev) = last_ts {
            if ts < prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("timestamp {ts} decreases below {prev}"),
                });
            }
        }
        last_ts = Some(ts);

        let mut row = Vec::with_capacity(feature_indices.len());
        for (feature_pos, &field_idx) in feature_indices.iter().enumerate() {
            let raw = fields[field_idx];
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!(
                    "feature {:?} value {:?} is not numeric; streams must carry converted values",
                    meta.features[feature_pos], raw
                ),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "feature {:?} value {:?} is not finite",
                        meta.features[feature_pos], raw
                    ),
                });
            }
            row.push(normalize_value(
                v,
                stats.mins[feature_pos],
                stats.maxs[feature_pos],
            ));
        }

        if buffer.len() == time_step {
            buffer.pop_front();
        }
        buffer.push_back(row);
        let instant = summary.rows;
        summary.rows += 1;

        if instant < time_step {
            writeln!(out, "{ts}\t-\tWARMUP")?;
        }
        if buffer.len() == time_step {
            let window = Array2::from_shape_fn((time_step, meta.features.len()), |(t, f)| {
                buffer[t][f]
            });
            let prob = forward_prob(params, &window.view())?;
            let status = if prob >= threshold { "ALERT" } else { "OK" };
            writeln!(out, "{}\t{prob:.6}\t{status}", ts + 1)?;
            summary.probabilities.push(prob);
            if prob >= threshold {
                summary.alerts += 1;
            }
        }

        if options.realtime {
            std::thread::sleep(std::time::Duration::from_secs(1));
        }
    }

    Ok(summary)
}
