//! Rank recorder attributes by rank correlation against the over-limit
//! labels and keep the informative ones.
//!
//! Run with: cargo run --example feature_selection

use overlimit::features::select_features;
use overlimit::labeling::label_overlimit;
use overlimit::qar::generate_synthetic;

fn main() -> overlimit::Result<()> {
    let table = generate_synthetic(7, 1800, 10, 0.05)?;
    let g = table.numeric_column("G")?;
    let series = label_overlimit(&g)?;
    println!(
        "{} seconds, {} over-limit",
        series.len(),
        series.overlimit_count()
    );

    // Correlate every attribute except the monitored channel itself
    // against the labels; keep |r_s| strictly above 0.05. Correlation is
    // computed on average ranks, so ties (and the binary labels are all
    // ties) are handled exactly.
    let report = select_features(&table, &series, "G", 0.05)?;
    println!();
    print!("{}", report.to_text());
    println!();
    println!("selected features, strongest first:");
    for name in &report.selected {
        println!("  {name}");
    }
    Ok(())
}
