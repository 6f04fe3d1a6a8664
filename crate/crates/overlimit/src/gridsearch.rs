//! Hyperparameter grid search with k-fold cross-validation.
//!
//! For each window length the rows are re-windowed and re-split; for each
//! (units, learning rate) pair the 80% training side is cross-validated
//! and the held-out 20% is never touched. Combinations whose window
//! length cannot be satisfied by the data are kept in the result, flagged
//! infeasible, rather than silently dropped.

use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::dataset::{build_windows, make_folds, split_80_20, FoldPlan, SplitIndices, WindowSet};
use crate::error::{Error, Result};
use crate::loss::classify;
use crate::lstm::{forward_batch, OutputSquash};
use crate::train::{train, CostMode, TrainConfig};
use crate::util::{derive_seed, seed_tag};

/// The grids to sweep plus the fixed training settings used inside every
/// cross-validation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub time_steps: Vec<usize>,
    pub units: Vec<usize>,
    pub learning_rates: Vec<f64>,
    /// Epochs per fold fit; searches use short fits.
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub cost_mode: CostMode,
    pub threshold: f64,
    pub squash: OutputSquash,
    /// Evaluate combinations on a thread pool. The outcome is identical to
    /// the serial path; only wall time changes.
    pub parallel: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            time_steps: vec![3, 5, 7, 10, 30, 50, 70, 90],
            units: vec![10, 20, 30, 40, 50, 60, 70],
            learning_rates: vec![0.001, 0.003, 0.005, 0.007, 0.01, 0.03],
            epochs: 5,
            folds: 4,
            seed: 42,
            batch_size: 32,
            cost_mode: CostMode::CostSensitive,
            threshold: 0.5,
            squash: OutputSquash::Identity,
            parallel: false,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.time_steps.is_empty() || self.units.is_empty() || self.learning_rates.is_empty() {
            return Err(Error::Argument("every grid axis needs at least one value".into()));
        }
        if self.time_steps.contains(&0) {
            return Err(Error::Argument("time steps must be at least 1".into()));
        }
        if self.units.contains(&0) {
            return Err(Error::Argument("unit counts must be at least 1".into()));
        }
        if self.learning_rates.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Argument("learning rates must be positive and finite".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Argument(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Argument(format!(
                "decision threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn combination_count(&self) -> usize {
        self.time_steps.len() * self.units.len() * self.learning_rates.len()
    }
}

/// One grid combination's outcome. `mean_accuracy` is `None` when the
/// data could not support the window length (infeasible).
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub time_step: usize,
    pub units: usize,
    pub learning_rate: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: Option<f64>,
    pub mean_fit_seconds: f64,
}

impl GridRow {
    pub fn feasible(&self) -> bool {
        self.mean_accuracy.is_some()
    }
}

/// Ranked grid results, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best(&self) -> Option<&GridRow> {
        self.rows.first().filter(|r| r.feasible())
    }

    /// Tab-separated table, one row per combination, ranked.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "rank\ttime_step\tunits\tlearning_rate\tmean_accuracy\tfold_accuracies\tmean_fit_seconds\tfeasible\n",
        );
        for (rank, row) in self.rows.iter().enumerate() {
            let mean = row
                .mean_accuracy
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into());
            let folds = if row.fold_accuracies.is_empty() {
                "-".to_string()
            } else {
                row.fold_accuracies
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                rank + 1,
                row.time_step,
                row.units,
                row.learning_rate,
                mean,
                folds,
                row.mean_fit_seconds,
                if row.feasible() { "yes" } else { "no" },
            ));
        }
        out
    }

    /// Aligned table for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>4}  {:>9}  {:>5}  {:>13}  {:>13}  {:>15}\n",
            "rank", "time_step", "units", "learning_rate", "mean_accuracy", "mean_fit_seconds"
        ));
        for (rank, row) in self.rows.iter().enumerate() {
            let mean = row
                .mean_accuracy
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "infeasible".into());
            out.push_str(&format!(
                "{:>4}  {:>9}  {:>5}  {:>13}  {:>13}  {:>15.4}\n",
                rank + 1,
                row.time_step,
                row.units,
                row.learning_rate,
                mean,
                row.mean_fit_seconds
            ));
        }
        out
    }
}

struct TimeStepContext {
    windows: WindowSet,
    folds: FoldPlan,
}

fn evaluate_combination(
    ctx: &TimeStepContext,
    spec: &GridSpec,
    time_step: usize,
    units: usize,
    learning_rate: f64,
) -> Result<GridRow> {
    let combo_seed = derive_seed(
        spec.seed,
        &[
            seed_tag::COMBO,
            time_step as u64,
            units as u64,
            learning_rate.to_bits(),
        ],
    );
    let config = TrainConfig {
        time_step,
        units,
        learning_rate,
        epochs: spec.epochs,
        batch_size: spec.batch_size,
        seed: combo_seed,
        cost_mode: spec.cost_mode,
        threshold: spec.threshold,
        clip_norm: None,
        squash: spec.squash,
    };
    let mut fold_accuracies = Vec::with_capacity(ctx.folds.folds.len());
    let mut fit_seconds = Vec::with_capacity(ctx.folds.folds.len());
    for held_out in 0..ctx.folds.folds.len() {
        let cv_split = SplitIndices {
            train: ctx.folds.training_for(held_out),
            test: ctx.folds.folds[held_out].clone(),
        };
        let started = Instant::now();
        let (params, _) = train(&ctx.windows, &cv_split, &config)?;
        fit_seconds.push(started.elapsed().as_secs_f64());

        let probs = forward_batch(&params, &ctx.windows, &cv_split.test)?;
        let preds = classify(&probs, spec.threshold)?;
        let correct = cv_split
            .test
            .iter()
            .zip(&preds)
            .filter(|(&idx, &p)| ctx.windows.labels[idx] == p)
            .count();
        fold_accuracies.push(correct as f64 / cv_split.test.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    let mean_fit_seconds = fit_seconds.iter().sum::<f64>() / fit_seconds.len() as f64;
    Ok(GridRow {
        time_step,
        units,
        learning_rate,
        fold_accuracies,
        mean_accuracy: Some(mean_accuracy),
        mean_fit_seconds,
    })
}

/// Sweep the grid over normalized rows and per-second labels. Returns
/// every combination ranked best-first. Mean accuracies are deterministic
/// for a given seed; fit times are wall-clock measurements.
pub fn grid_search(rows: &ArrayView2<f64>, labels: &[u8], spec: &GridSpec) -> Result<GridResult> {
    spec.validate()?;
    if labels.len() != rows.nrows() {
        return Err(Error::Argument(format!(
            "{} rows but {} labels",
            rows.nrows(),
            labels.len()
        )));
    }

    let mut result_rows: Vec<GridRow> = Vec::with_capacity(spec.combination_count());
    for &time_step in &spec.time_steps {
        // A time step is feasible when it leaves at least two windows to
        // split and enough training windows to deal into the folds.
        let context = if rows.nrows() >= time_step + 2 {
            let windows = build_windows(rows, labels, time_step)?;
            let split = split_80_20(
                windows.len(),
                derive_seed(spec.seed, &[seed_tag::SPLIT, time_step as u64]),
            )?;
            if split.train.len() >= spec.folds {
                let folds = make_folds(
                    &split.train,
                    spec.folds,
                    derive_seed(spec.seed, &[seed_tag::FOLDS, time_step as u64]),
                )?;
                Some(TimeStepContext { windows, folds })
            } else {
                None
            }
        } else {
            None
        };

        let combos: Vec<(usize, f64)> = spec
            .units
            .iter()
            .flat_map(|&n| spec.learning_rates.iter().map(move |&a| (n, a)))
            .collect();

        match context {
            Some(ctx) => {
                let evaluated: Result<Vec<GridRow>> = if spec.parallel {
                    combos
                        .par_iter()
                        .map(|&(n, a)| evaluate_combination(&ctx, spec, time_step, n, a))
                        .collect()
                } else {
                    combos
                        .iter()
                        .map(|&(n, a)| evaluate_combination(&ctx, spec, time_step, n, a))
                        .collect()
                };
                result_rows.extend(evaluated?);
            }
            None => {
                result_rows.extend(combos.into_iter().map(|(n, a)| GridRow {
                    time_step,
                    units: n,
                    learning_rate: a,
                    fold_accuracies: Vec::new(),
                    mean_accuracy: None,
                    mean_fit_seconds: 0.0,
                }));
            }
        }
    }

    Ok(GridResult {
        rows: rank_rows(result_rows),
    })
}

/// Rank rows best-first: feasible before infeasible, then mean accuracy
/// descending, ties broken by mean fit time ascending, then by time step,
/// units, and learning rate ascending.
pub fn rank_rows(mut rows: Vec<GridRow>) -> Vec<GridRow> {
    rows.sort_by(|a, b| {
        use std::cmp::Ordering;
        match (a.mean_accuracy, b.mean_accuracy) {
            (Some(x), Some(y)) => y
                .partial_cmp(&x)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    a.mean_fit_seconds
                        .partial_cmp(&b.mean_fit_seconds)
                        .unwrap_or(Ordering::Equal)
                })
                .then_with(|| a.time_step.cmp(&b.time_step))
                .then_with(|| a.units.cmp(&b.units))
                .then_with(|| {
                    a.learning_rate
                        .partial_cmp(&b.learning_rate)
                        .unwrap_or(Ordering::Equal)
                }),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => a
                .time_step
                .cmp(&b.time_step)
                .then_with(|| a.units.cmp(&b.units))
                .then_with(|| {
                    a.learning_rate
                        .partial_cmp(&b.learning_rate)
                        .unwrap_or(Ordering::Equal)
                }),
        }
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Separable rows: feature 0 anticipates the next label.
    fn separable_data(rows: usize) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let labels: Vec<u8> = (0..rows).map(|_| (rng.gen::<f64>() < 0.35) as u8).collect();
        let data = Array2::from_shape_fn((rows, 2), |(r, c)| {
            if c == 0 {
                if r + 1 < rows {
                    labels[r + 1] as f64
                } else {
                    0.0
                }
            } else {
                rng.gen_range(0.0..1.0)
            }
        });
        (data, labels)
    }

    fn small_spec() -> GridSpec {
        GridSpec {
            time_steps: vec![2, 3],
            units: vec![2, 3],
            learning_rates: vec![0.02],
            epochs: 2,
            folds: 2,
            seed: 7,
            batch_size: 8,
            ..GridSpec::default()
        }
    }

    #[test]
    fn covers_every_combination_and_ranks_feasible_first() {
        let (data, labels) = separable_data(60);
        let mut spec = small_spec();
        spec.time_steps = vec![2, 3, 500];
        let result = grid_search(&data.view(), &labels, &spec).unwrap();
        let combos = spec.time_steps.len() * spec.units.len() * spec.learning_rates.len();
        assert_eq!(result.rows.len(), combos);
        let feasible: Vec<bool> = result.rows.iter().map(|r| r.feasible()).collect();
        // All feasible rows precede all infeasible rows.
        let first_infeasible = feasible.iter().position(|f| !f).unwrap();
        assert!(feasible[..first_infeasible].iter().all(|&f| f));
        assert!(feasible[first_infeasible..].iter().all(|&f| !f));
        // The infeasible rows are exactly the T=500 ones.
        for row in &result.rows[first_infeasible..] {
            assert_eq!(row.time_step, 500);
            assert!(row.fold_accuracies.is_empty());
        }
        // Feasible accuracies are sorted descending.
        let accs: Vec<f64> = result.rows[..first_infeasible]
            .iter()
            .map(|r| r.mean_accuracy.unwrap())
            .collect();
        assert!(accs.windows(2).all(|w| w[0] >= w[1]), "{accs:?}");
        // Every fold accuracy is a valid fraction and means match.
        for row in &result.rows[..first_infeasible] {
            assert_eq!(row.fold_accuracies.len(), 2);
            let mean = row.fold_accuracies.iter().sum::<f64>() / 2.0;
            assert_eq!(mean.to_bits(), row.mean_accuracy.unwrap().to_bits());
        }
    }

    #[test]
    fn mean_accuracies_are_bitwise_reproducible() {
        let (data, labels) = separable_data(50);
        let spec = small_spec();
        let a = grid_search(&data.view(), &labels, &spec).unwrap();
        let b = grid_search(&data.view(), &labels, &spec).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        let key = |r: &GridRow| (r.time_step, r.units, r.learning_rate.to_bits());
        for row in &a.rows {
            let other = b.rows.iter().find(|r| key(r) == key(row)).unwrap();
            assert_eq!(
                row.mean_accuracy.map(f64::to_bits),
                other.mean_accuracy.map(f64::to_bits)
            );
            assert_eq!(row.fold_accuracies.len(), other.fold_accuracies.len());
            for (x, y) in row.fold_accuracies.iter().zip(&other.fold_accuracies) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let (data, labels) = separable_data(50);
        let serial = small_spec();
        let parallel = GridSpec {
            parallel: true,
            ..serial.clone()
        };
        let a = grid_search(&data.view(), &labels, &serial).unwrap();
        let b = grid_search(&data.view(), &labels, &parallel).unwrap();
        let key = |r: &GridRow| (r.time_step, r.units, r.learning_rate.to_bits());
        for row in &a.rows {
            let other = b.rows.iter().find(|r| key(r) == key(row)).unwrap();
            assert_eq!(
                row.mean_accuracy.map(f64::to_bits),
                other.mean_accuracy.map(f64::to_bits)
            );
        }
    }

    #[test]
    fn seed_changes_the_outcome() {
        let (data, labels) = separable_data(50);
        let a = grid_search(&data.view(), &labels, &small_spec()).unwrap();
        let b = grid_search(
            &data.view(),
            &labels,
            &GridSpec {
                seed: 8,
                ..small_spec()
            },
        )
        .unwrap();
        let bits = |r: &GridResult| {
            let mut v: Vec<(usize, usize, u64, Option<u64>)> = r
                .rows
                .iter()
                .map(|row| {
                    (
                        row.time_step,
                        row.units,
                        row.learning_rate.to_bits(),
                        row.mean_accuracy.map(f64::to_bits),
                    )
                })
                .collect();
            v.sort();
            v
        };
        assert_ne!(bits(&a), bits(&b));
    }

    #[test]
    fn learns_on_separable_data() {
        let (data, labels) = separable_data(120);
        let spec = GridSpec {
            time_steps: vec![3],
            units: vec![4],
            learning_rates: vec![0.03],
            epochs: 6,
            folds: 3,
            seed: 5,
            batch_size: 8,
            ..GridSpec::default()
        };
        let result = grid_search(&data.view(), &labels, &spec).unwrap();
        let best = result.best().unwrap();
        assert!(
            best.mean_accuracy.unwrap() > 0.8,
            "accuracy {:?}",
            best.mean_accuracy
        );
    }

    #[test]
    fn tsv_and_text_render_every_row() {
        let (data, labels) = separable_data(40);
        let mut spec = small_spec();
        spec.time_steps = vec![2, 900];
        let result = grid_search(&data.view(), &labels, &spec).unwrap();
        let tsv = result.to_tsv();
        assert_eq!(tsv.lines().count(), 1 + result.rows.len());
        assert!(tsv.contains("\tno\n"));
        let text = result.to_text();
        assert!(text.contains("infeasible"));
    }

    #[test]
    fn spec_validation_catches_bad_grids() {
        let cases = [
            GridSpec { time_steps: vec![], ..GridSpec::default() },
            GridSpec { units: vec![0], ..GridSpec::default() },
            GridSpec { learning_rates: vec![-0.1], ..GridSpec::default() },
            GridSpec { folds: 1, ..GridSpec::default() },
            GridSpec { epochs: 0, ..GridSpec::default() },
        ];
        for spec in cases {
            assert!(spec.validate().is_err());
        }
        GridSpec::default().validate().unwrap();
    }

    #[test]
    fn default_grid_matches_the_documented_search_space() {
        let spec = GridSpec::default();
        assert_eq!(spec.time_steps, vec![3, 5, 7, 10, 30, 50, 70, 90]);
        assert_eq!(spec.units, vec![10, 20, 30, 40, 50, 60, 70]);
        assert_eq!(spec.learning_rates, vec![0.001, 0.003, 0.005, 0.007, 0.01, 0.03]);
        assert_eq!(spec.epochs, 5);
        assert_eq!(spec.folds, 4);
        assert_eq!(spec.combination_count(), 8 * 7 * 6);
    }
}
