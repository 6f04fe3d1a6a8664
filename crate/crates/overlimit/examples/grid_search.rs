//! Cross-validated sweep over window length, hidden units, and learning
//! rate.
//!
//! Run with: cargo run --release --example grid_search

use ndarray::Array2;

use overlimit::dataset::{apply_minmax, fit_minmax};
use overlimit::features::select_features;
use overlimit::gridsearch::{grid_search, GridSpec};
use overlimit::labeling::label_overlimit;
use overlimit::qar::generate_synthetic;

fn main() -> overlimit::Result<()> {
    let table = generate_synthetic(42, 900, 6, 0.06)?;
    let series = label_overlimit(&table.numeric_column("G")?)?;
    let report = select_features(&table, &series, "G", 0.05)?;
    println!("features: {}", report.selected.join(", "));

    let mut rows = Array2::zeros((table.row_count(), report.selected.len()));
    for (j, name) in report.selected.iter().enumerate() {
        for (i, v) in table.numeric_column(name)?.into_iter().enumerate() {
            rows[(i, j)] = v;
        }
    }
    let stats = fit_minmax(&rows.view())?;
    let normed = apply_minmax(&rows.view(), &stats)?;

    // A deliberately small grid so the example finishes in seconds; the
    // default spec sweeps 8 x 7 x 6 combinations instead. Each
    // combination trains once per fold on the training side of an 80/20
    // split; the held-out 20% is never touched here. Infeasible window
    // lengths (too few rows) are reported, not silently dropped.
    let spec = GridSpec {
        time_steps: vec![5, 10, 900],
        units: vec![10, 20],
        learning_rates: vec![0.005, 0.01],
        epochs: 8,
        folds: 4,
        parallel: true,
        ..GridSpec::default()
    };
    let result = grid_search(&normed.view(), &series.labels, &spec)?;
    print!("{}", result.to_text());
    if let Some(best) = result.best() {
        println!();
        println!(
            "best: time_step {} units {} learning_rate {}",
            best.time_step, best.units, best.learning_rate
        );
    }
    Ok(())
}
