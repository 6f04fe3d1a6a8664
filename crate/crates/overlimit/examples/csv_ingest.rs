//! Ingest a raw recorder CSV: declared schema, text-label conversion, and
//! resampling to one row per second.
//!
//! Run with: cargo run --example csv_ingest

use overlimit::qar::{
    convert_text_labels, parse_table, resample_1hz, ColumnKind, Schema, TextCodebook,
};

fn main() -> overlimit::Result<()> {
    // A recorder excerpt: 4 Hz samples, a text-valued gear column, and a
    // binary warning flag. TIME repeats within each second.
    let raw_csv = "\
TIME,G,GEAR POSITION,STALL WARNING
1000,0.98,DOWN,0
1000,1.01,DOWN,0
1000,0.99,DOWN,0
1000,1.02,DOWN,0
1001,1.00,UP,0
1001,1.04,UP,1
1001,1.07,UP,1
1001,1.38,UP,1
1002,1.21,UP,1
1002,1.02,UP,0
1002,0.99,UP,0
1002,0.97,UP,0
";

    let mut schema = Schema::new();
    schema.declare("G", ColumnKind::Continuous)?;
    schema.declare("GEAR POSITION", ColumnKind::Continuous)?;
    schema.declare("STALL WARNING", ColumnKind::Binary)?;

    let raw = parse_table(raw_csv.as_bytes(), &schema)?;
    println!("raw rows: {}", raw.row_count());

    // The built-in codebook covers common recorder labels (gear select,
    // weight-on-wheels, autopilot and autothrottle states); mappings for
    // anything else merge in as "attribute/label = code" lines.
    let mut codebook = TextCodebook::builtin();
    codebook.extend_from_text(
        "GEAR POSITION/DOWN = 0\n\
         GEAR POSITION/UP = 1\n",
    )?;
    let converted = convert_text_labels(&raw, &codebook)?;

    // Continuous columns average within each second; binary columns take
    // the majority vote (ties round up).
    let resampled = resample_1hz(&converted)?;
    println!("resampled rows: {}", resampled.row_count());
    println!();
    print!("{}", resampled.to_csv_string()?);
    Ok(())
}
