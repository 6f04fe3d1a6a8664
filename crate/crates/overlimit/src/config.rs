//! Pipeline configuration: one plain-text file covering labeling, feature
//! selection, training, grid search, and replay.
//!
//! The format is INI-like. `#` starts a comment, `[section]` switches
//! sections, and `key = value` sets a field. Unknown sections or keys are
//! hard errors with the offending line number; silently ignoring a typo
//! in, say, `learning_rate` would waste a training run.
//!
//! ```text
//! [label]
//! g_column = G
//!
//! [select]
//! threshold = 0.05
//!
//! [train]
//! time_step = 10
//! units = 30
//! learning_rate = 0.005
//! epochs = 200
//! batch_size = 32
//! seed = 42
//! cost_mode = cost-sensitive
//! threshold = 0.5
//! clip_norm = none
//! squash = identity
//! normalization = full-series
//!
//! [gridsearch]
//! time_steps = 3 5 7 10 30 50 70 90
//! units = 10 20 30 40 50 60 70
//! learning_rates = 0.001 0.003 0.005 0.007 0.01 0.03
//! epochs = 5
//! folds = 4
//! parallel = false
//!
//! [warn]
//! pacing = max-speed
//! ```

use crate::error::{Error, Result};
use crate::gridsearch::GridSpec;
use crate::lstm::OutputSquash;
use crate::train::{CostMode, TrainConfig};

/// How normalization statistics are fitted before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Fit min/max on every row of the series, then window. Matches the
    /// evaluation protocol used throughout; the test windows contribute
    /// their ranges to the statistics.
    #[default]
    FullSeries,
    /// Fit min/max only on rows covered by training windows, so the test
    /// side cannot influence the scaling. Stricter, and the right choice
    /// when the model must face genuinely unseen data.
    TrainOnly,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::FullSeries => "full-series",
            Normalization::TrainOnly => "train-only",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "full-series" => Ok(Normalization::FullSeries),
            "train-only" => Ok(Normalization::TrainOnly),
            other => Err(Error::Argument(format!(
                "unknown normalization {other:?}, expected full-series or train-only"
            ))),
        }
    }
}

/// Everything the pipeline stages read from one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Column holding the monitored quantity that defines over-limit.
    pub g_column: String,
    /// Feature selection keeps attributes with |r_s| strictly above this.
    pub select_threshold: f64,
    /// Training hyperparameters.
    pub train: TrainConfig,
    /// Normalization protocol for training and evaluation.
    pub normalization: Normalization,
    /// Grid-search space and controls.
    pub grid: GridSpec,
    /// Replay pacing: sleep one second per row when true.
    pub realtime: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            g_column: "G".to_string(),
            select_threshold: 0.05,
            train: TrainConfig::default(),
            normalization: Normalization::FullSeries,
            grid: GridSpec::default(),
            realtime: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g_column.is_empty() {
            return Err(Error::Argument("g_column must not be empty".into()));
        }
        if !(0.0..1.0).contains(&self.select_threshold) {
            return Err(Error::Argument(format!(
                "selection threshold {} must lie in [0, 1)",
                self.select_threshold
            )));
        }
        self.train.validate()?;
        self.grid.validate()
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{value:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("{value:?} is not finite"),
        });
    }
    Ok(v)
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{value:?} is not a non-negative integer"),
    })
}

fn parse_u64(value: &str, line: usize) -> Result<u64> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{value:?} is not a non-negative integer"),
    })
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("{value:?} is not true or false"),
        }),
    }
}

fn parse_usize_list(value: &str, line: usize) -> Result<Vec<usize>> {
    value
        .split_whitespace()
        .map(|tok| parse_usize(tok, line))
        .collect()
}

fn parse_f64_list(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| parse_f64(tok, line))
        .collect()
}

/// Re-tag an argument error with the config line that caused it.
fn reline<T>(res: Result<T>, line: usize) -> Result<T> {
    res.map_err(|e| match e {
        Error::Argument(msg) => Error::Parse { line, msg },
        other => other,
    })
}

/// Parse a config file. Every key is optional, so an empty string yields
/// the defaults; unknown sections and keys fail with their line number.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("malformed section header {line:?}"),
            })?;
            section = name.trim().to_string();
            match section.as_str() {
                "label" | "select" | "train" | "gridsearch" | "warn" => {}
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown section [{other}]"),
                    })
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected key = value, found {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("{key} has no value"),
            });
        }

        match (section.as_str(), key) {
            ("label", "g_column") => cfg.g_column = value.to_string(),
            ("select", "threshold") => cfg.select_threshold = parse_f64(value, line_no)?,
            ("train", "time_step") => cfg.train.time_step = parse_usize(value, line_no)?,
            ("train", "units") => cfg.train.units = parse_usize(value, line_no)?,
            ("train", "learning_rate") => cfg.train.learning_rate = parse_f64(value, line_no)?,
            ("train", "epochs") => cfg.train.epochs = parse_usize(value, line_no)?,
            ("train", "batch_size") => cfg.train.batch_size = parse_usize(value, line_no)?,
            ("train", "seed") => cfg.train.seed = parse_u64(value, line_no)?,
            ("train", "cost_mode") => {
                cfg.train.cost_mode = reline(CostMode::parse(value), line_no)?
            }
            ("train", "threshold") => cfg.train.threshold = parse_f64(value, line_no)?,
            ("train", "clip_norm") => {
                cfg.train.clip_norm = if value == "none" {
                    None
                } else {
                    Some(parse_f64(value, line_no)?)
                }
            }
            ("train", "squash") => {
                cfg.train.squash = reline(OutputSquash::parse(value), line_no)?
            }
            ("train", "normalization") => {
                cfg.normalization = reline(Normalization::parse(value), line_no)?
            }
            ("gridsearch", "time_steps") => cfg.grid.time_steps = parse_usize_list(value, line_no)?,
            ("gridsearch", "units") => cfg.grid.units = parse_usize_list(value, line_no)?,
            ("gridsearch", "learning_rates") => {
                cfg.grid.learning_rates = parse_f64_list(value, line_no)?
            }
            ("gridsearch", "epochs") => cfg.grid.epochs = parse_usize(value, line_no)?,
            ("gridsearch", "folds") => cfg.grid.folds = parse_usize(value, line_no)?,
            ("gridsearch", "seed") => cfg.grid.seed = parse_u64(value, line_no)?,
            ("gridsearch", "batch_size") => cfg.grid.batch_size = parse_usize(value, line_no)?,
            ("gridsearch", "parallel") => cfg.grid.parallel = parse_bool(value, line_no)?,
            ("warn", "pacing") => {
                cfg.realtime = match value {
                    "max-speed" => false,
                    "real-time" => true,
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!(
                                "unknown pacing {other:?}, expected max-speed or real-time"
                            ),
                        })
                    }
                }
            }
            ("", key) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("key {key:?} appears before any [section]"),
                })
            }
            (section, key) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown key {key:?} in section [{section}]"),
                })
            }
        }
    }

    // Grid search trains with the same cost handling and decision
    // threshold as plain training.
    cfg.grid.cost_mode = cfg.train.cost_mode;
    cfg.grid.threshold = cfg.train.threshold;
    cfg.grid.squash = cfg.train.squash;

    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a config file from disk.
pub fn load_config(path: &std::path::Path) -> Result<PipelineConfig> {
    let text = crate::util::read_to_string(path)?;
    parse_config(&text)
}
