//! Replay a recorder feed through a trained model, printing one warning
//! line per second the way a cockpit-side monitor would.
//!
//! Run with: cargo run --release --example streaming_warning

use std::io::Cursor;

use ndarray::Array2;

use overlimit::dataset::{apply_minmax, build_windows, fit_minmax, split_80_20};
use overlimit::features::select_features;
use overlimit::labeling::label_overlimit;
use overlimit::model::ModelMeta;
use overlimit::qar::generate_synthetic;
use overlimit::stream::{warn_stream, WarnOptions};
use overlimit::train::{train, TrainConfig};
use overlimit::util::{derive_seed, seed_tag};

fn main() -> overlimit::Result<()> {
    // Train a small model on one synthetic flight.
    let table = generate_synthetic(42, 900, 6, 0.06)?;
    let series = label_overlimit(&table.numeric_column("G")?)?;
    let report = select_features(&table, &series, "G", 0.05)?;
    let features = report.selected.clone();
    println!("features: {}", features.join(", "));

    let config = TrainConfig {
        time_step: 5,
        units: 16,
        epochs: 30,
        ..TrainConfig::default()
    };
    let mut rows = Array2::zeros((table.row_count(), features.len()));
    for (j, name) in features.iter().enumerate() {
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
    let (params, history) = train(&windows, &split, &config)?;
    let costs = history.costs;

    // Freeze everything inference needs: the feature list and order, the
    // scaling fitted at training time, and the decision threshold. A
    // deployed monitor would load this from model.json instead.
    let meta = ModelMeta {
        time_step: config.time_step,
        units: config.units,
        features: features.clone(),
        g_column: "G".to_string(),
        mins: stats.mins.clone(),
        maxs: stats.maxs.clone(),
        seed: config.seed,
        threshold: config.threshold,
        squash: config.squash.as_str().to_string(),
        cost_mode: config.cost_mode.as_str().to_string(),
        cost_01: costs.cost_01,
        cost_10: costs.cost_10,
    };

    // Replay a fresh flight the model has never seen. The stream carries
    // raw values; normalization happens inside with the frozen stats.
    // The first time_step seconds warm the buffer up; from then on each
    // line predicts the NEXT second, one step ahead of the data.
    let unseen = generate_synthetic(1337, 60, 6, 0.06)?;
    let csv = unseen.to_csv_string()?;
    let mut out = Vec::new();
    let summary = warn_stream(
        &params,
        &meta,
        Cursor::new(csv.into_bytes()),
        &mut out,
        &WarnOptions::default(),
    )?;

    println!();
    println!("second  probability  status");
    for line in String::from_utf8(out).expect("output is utf-8").lines() {
        let mut parts = line.split('\t');
        let (ts, prob, status) = (
            parts.next().unwrap_or(""),
            parts.next().unwrap_or(""),
            parts.next().unwrap_or(""),
        );
        println!("{ts:>6}  {prob:>11}  {status}");
    }
    println!();
    println!(
        "{} seconds replayed, {} predictions, {} alerts",
        summary.rows,
        summary.predictions(),
        summary.alerts
    );
    Ok(())
}
