//! Generate a synthetic flight, then label its over-limit seconds.
//!
//! Run with: cargo run --example synthetic_flight

use overlimit::labeling::label_overlimit;
use overlimit::qar::generate_synthetic;

fn main() -> overlimit::Result<()> {
    // One hour at 1 Hz: a monitored channel G around 1.0 with injected
    // spikes, plus companion attributes that lead or track the spikes.
    let table = generate_synthetic(42, 3600, 8, 0.05)?;
    println!(
        "{} seconds x {} attributes",
        table.row_count(),
        table.columns().len()
    );
    for col in table.columns() {
        println!("  {} ({})", col.name, col.kind.as_str());
    }

    let g = table.numeric_column("G")?;
    let series = label_overlimit(&g)?;
    println!();
    println!("mean      {:.6}", series.stats.mean);
    println!("sigma     {:.6}", series.stats.sigma);
    println!("threshold {:.6}  (mean + 3 sigma)", series.threshold);
    println!(
        "over-limit seconds: {} of {} ({:.2}%)",
        series.overlimit_count(),
        series.len(),
        100.0 * series.overlimit_fraction()
    );

    // Show the first labeled second with one second of context.
    if let Some(first) = series.labels.iter().position(|&l| l == 1) {
        println!();
        println!("first over-limit second is t={first}:");
        let from = first.saturating_sub(2);
        let to = (first + 2).min(series.len() - 1);
        for (t, (value, label)) in g
            .iter()
            .zip(&series.labels)
            .enumerate()
            .take(to + 1)
            .skip(from)
        {
            println!("  t={t:<5} G={value:<10.6} label={label}");
        }
    }
    Ok(())
}
