//! Train the warning network end to end on a synthetic flight and report
//! held-out metrics.
//!
//! Run with: cargo run --release --example train_and_evaluate

use ndarray::Array2;

use overlimit::dataset::{apply_minmax, build_windows, fit_minmax, split_80_20};
use overlimit::features::select_features;
use overlimit::labeling::label_overlimit;
use overlimit::loss::{classify, ConfusionMatrix};
use overlimit::lstm::forward_batch;
use overlimit::qar::generate_synthetic;
use overlimit::train::{train, TrainConfig};
use overlimit::util::{derive_seed, seed_tag};

fn main() -> overlimit::Result<()> {
    // Label and select features exactly as the earlier examples do.
    let table = generate_synthetic(42, 1200, 8, 0.05)?;
    let series = label_overlimit(&table.numeric_column("G")?)?;
    let report = select_features(&table, &series, "G", 0.05)?;
    println!("features: {}", report.selected.join(", "));

    // Stack the selected columns, scale each feature to [0, 1], and cut
    // sliding windows: a window covers time_step seconds and is labeled
    // by the second that follows it, so the network learns to warn early.
    let config = TrainConfig {
        time_step: 10,
        units: 20,
        epochs: 40,
        ..TrainConfig::default()
    };
    let mut rows = Array2::zeros((table.row_count(), report.selected.len()));
    for (j, name) in report.selected.iter().enumerate() {
        for (i, v) in table.numeric_column(name)?.into_iter().enumerate() {
            rows[(i, j)] = v;
        }
    }
    let stats = fit_minmax(&rows.view())?;
    let normed = apply_minmax(&rows.view(), &stats)?;
    let windows = build_windows(&normed.view(), &series.labels, config.time_step)?;
    let split = split_80_20(
        windows.len(),
        derive_seed(config.seed, &[seed_tag::SPLIT]),
    )?;
    println!(
        "{} windows ({} train / {} held out)",
        windows.len(),
        split.train.len(),
        split.test.len()
    );

    // Mini-batch Adam over an exact gradient; the loss weights mistakes
    // on the rare over-limit class more heavily than false alarms.
    let (params, history) = train(&windows, &split, &config)?;
    println!();
    println!("epoch  train_loss  train_acc  test_acc");
    for stats in history.epochs.iter().step_by(8) {
        println!(
            "{:>5}  {:>10.6}  {:>9.4}  {:>8.4}",
            stats.epoch, stats.train_loss, stats.train_accuracy, stats.test_accuracy
        );
    }
    if let Some(last) = history.epochs.last() {
        println!(
            "{:>5}  {:>10.6}  {:>9.4}  {:>8.4}",
            last.epoch, last.train_loss, last.train_accuracy, last.test_accuracy
        );
    }

    let probs = forward_batch(&params, &windows, &split.test)?;
    let preds = classify(&probs, config.threshold)?;
    let actual: Vec<u8> = split.test.iter().map(|&i| windows.labels[i]).collect();
    let matrix = ConfusionMatrix::from_labels(&actual, &preds)?;
    println!();
    print!("{}", matrix.to_report(config.threshold));
    Ok(())
}
