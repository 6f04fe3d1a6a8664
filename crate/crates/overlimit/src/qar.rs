//! Flight-recorder table ingest: CSV parsing against a declared schema,
//! text-label conversion through a codebook, 1 Hz resampling, and a
//! seeded synthetic generator for testing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column kind declared by the schema. Continuous channels average under
/// resampling; binary flags take the per-second mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Binary,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
        }
    }
}

/// One table cell: either a finite number or a raw text label awaiting
/// codebook conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Cell>,
}

/// A recorder table: named columns plus one integer-second timestamp per
/// row. Timestamps are non-decreasing; repeated values mark sub-second
/// samples of the same second. Tables are immutable after construction;
/// every transformation returns a new table.
#[derive(Debug, Clone)]
pub struct QarTable {
    columns: Vec<Column>,
    timestamps: Vec<i64>,
}

impl QarTable {
    pub fn new(columns: Vec<Column>, timestamps: Vec<i64>) -> Result<Self> {
        for col in &columns {
            if col.values.len() != timestamps.len() {
                return Err(Error::Shape(format!(
                    "column {:?} has {} rows but the table has {} timestamps",
                    col.name,
                    col.values.len(),
                    timestamps.len()
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for col in &columns {
            if !seen.insert(col.name.clone()) {
                return Err(Error::Schema(format!("duplicate column {:?}", col.name)));
            }
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("timestamps must be non-decreasing".into()));
        }
        Ok(QarTable {
            columns,
            timestamps,
        })
    }

    pub fn row_count(&self) -> usize {
        self.timestamps.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Extract one column as numbers. Errors if any cell is still text.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::Schema(format!("no column named {:?}", name)))?;
        col.values
            .iter()
            .map(|c| match c {
                Cell::Num(v) => Ok(*v),
                Cell::Text(s) => Err(Error::State(format!(
                    "column {:?} still holds text cell {:?}; convert text labels first",
                    name, s
                ))),
            })
            .collect()
    }

    /// True when every cell in the table is numeric.
    pub fn is_numeric(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.values.iter().all(|v| matches!(v, Cell::Num(_))))
    }

    /// Write the table as CSV with a leading TIME column.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["TIME".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        writeln!(w, "{}", header.join(","))?;
        for row in 0..self.row_count() {
            let mut fields = vec![self.timestamps[row].to_string()];
            for col in &self.columns {
                fields.push(col.values[row].to_string());
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Numeric(format!("non-utf8 csv: {e}")))
    }
}

/// Declares each data column's kind. Every data column in a parsed file
/// must be declared here, and every declared column must be present.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    kinds: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn declare(&mut self, name: &str, kind: ColumnKind) -> Result<()> {
        if self.kinds.insert(name.to_string(), kind).is_some() {
            return Err(Error::Schema(format!("column {:?} declared twice", name)));
        }
        Ok(())
    }

    pub fn kind(&self, name: &str) -> Option<ColumnKind> {
        self.kinds.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kinds.keys().map(|s| s.as_str())
    }

    /// Parse lines of `name = continuous|binary`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind) = line.rsplit_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `name = continuous|binary`, got {:?}", line),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "empty column name".into(),
                });
            }
            let kind = match kind.trim() {
                "continuous" => ColumnKind::Continuous,
                "binary" => ColumnKind::Binary,
                other => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        msg: format!("unknown column kind {:?}", other),
                    })
                }
            };
            schema.declare(name, kind).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(schema)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.kinds {
            out.push_str(name);
            out.push_str(" = ");
            out.push_str(kind.as_str());
            out.push('\n');
        }
        out
    }
}

/// Maps `(attribute, text label)` pairs to numeric codes. Within one
/// attribute the mapping is injective: distinct labels get distinct codes.
#[derive(Debug, Clone, Default)]
pub struct TextCodebook {
    entries: BTreeMap<(String, String), f64>,
}

impl TextCodebook {
    pub fn new() -> Self {
        TextCodebook::default()
    }

    /// Codebook for the standard recorder flag attributes.
    pub fn builtin() -> Self {
        let mut book = TextCodebook::new();
        let defaults: &[(&str, &str, f64)] = &[
            ("GEAR SELECT DOWN", "NaN", 0.0),
            ("GEAR SELECT DOWN", "DOWN", 1.0),
            ("WOW INDICATE INAIR", "FALSE", 0.0),
            ("WOW INDICATE INAIR", "TRUE", 1.0),
            ("A/T ENGAGED", "DISENGD", 0.0),
            ("A/T ENGAGED", "ENGAGED", 1.0),
            ("ANY A/P ENGAGED", "ON", 0.0),
            ("ANY A/P ENGAGED", "OFF", 1.0),
        ];
        for (attr, label, code) in defaults {
            book.insert(attr, label, *code)
                .expect("builtin codebook is injective");
        }
        book
    }

    pub fn insert(&mut self, attribute: &str, label: &str, code: f64) -> Result<()> {
        if !code.is_finite() {
            return Err(Error::Domain(format!(
                "code for {attribute:?}/{label:?} must be finite"
            )));
        }
        for ((attr, other_label), other_code) in &self.entries {
            if attr == attribute && other_label != label && *other_code == code {
                return Err(Error::Schema(format!(
                    "attribute {:?}: labels {:?} and {:?} would share code {}",
                    attribute, other_label, label, code
                )));
            }
        }
        self.entries
            .insert((attribute.to_string(), label.to_string()), code);
        Ok(())
    }

    pub fn code(&self, attribute: &str, label: &str) -> Option<f64> {
        self.entries
            .get(&(attribute.to_string(), label.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Extend from lines of `attribute/label = code`. The attribute and
    /// label are split at the last `/` so attribute names may themselves
    /// contain slashes.
    pub fn extend_from_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, code) = line.rsplit_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `attribute/label = code`, got {:?}", line),
            })?;
            let (attribute, label) = key.trim().rsplit_once('/').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `attribute/label`, got {:?}", key.trim()),
            })?;
            let code: f64 = code.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("bad numeric code {:?}", code.trim()),
            })?;
            self.insert(attribute.trim(), label.trim(), code)
                .map_err(|e| Error::Parse {
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(())
    }
}

/// Name reserved for the timestamp column, matched case-insensitively.
pub const TIME_COLUMN: &str = "TIME";

fn is_time_column(name: &str) -> bool {
    name.eq_ignore_ascii_case(TIME_COLUMN)
}

/// Parse a cell: numeric when it parses to a finite float, text otherwise.
/// Non-finite spellings like `NaN` stay text so the codebook can assign
/// them a meaning.
fn parse_cell(field: &str) -> Cell {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Num(v),
        _ => Cell::Text(field.to_string()),
    }
}

/// Parse a recorder CSV against `schema`. The first line is the header; a
/// column named `TIME` (any case) supplies integer-second timestamps
/// (fractional values are floored), otherwise the row index is used.
/// Every data column must be declared in the schema and every declared
/// column must appear.
pub fn parse_table<R: BufRead>(reader: R, schema: &Schema) -> Result<QarTable> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::Parse {
            line: 1,
            msg: "empty input, expected a header row".into(),
        }),
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();

    let mut time_index = None;
    let mut data: Vec<(usize, Column)> = Vec::new();
    for (idx, name) in names.iter().enumerate() {
        if is_time_column(name) {
            if time_index.is_some() {
                return Err(Error::Schema("more than one TIME column".into()));
            }
            time_index = Some(idx);
            continue;
        }
        if name.is_empty() {
            return Err(Error::Schema(format!("empty column name at field {}", idx + 1)));
        }
        let kind = schema
            .kind(name)
            .ok_or_else(|| Error::Schema(format!("column {:?} is not declared in the schema", name)))?;
        if data.iter().any(|(_, c)| &c.name == name) {
            return Err(Error::Schema(format!("duplicate column {:?}", name)));
        }
        data.push((
            idx,
            Column {
                name: name.clone(),
                kind,
                values: Vec::new(),
            },
        ));
    }
    for declared in schema.names() {
        if !data.iter().any(|(_, c)| c.name == declared) {
            return Err(Error::Schema(format!(
                "declared column {:?} is missing from the header",
                declared
            )));
        }
    }

    let mut timestamps: Vec<i64> = Vec::new();
    for (zero_idx, line) in lines {
        let line = line?;
        let line_no = zero_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let ts = match time_index {
            Some(ti) => {
                let raw = fields[ti];
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad timestamp {:?}", raw),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("non-finite timestamp {:?}", raw),
                    });
                }
                v.floor() as i64
            }
            None => timestamps.len() as i64,
        };
        if let Some(&prev) = timestamps.last() {
            if ts < prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("timestamp {} decreases below {}", ts, prev),
                });
            }
        }
        timestamps.push(ts);
        for (field_idx, col) in data.iter_mut() {
            col.values.push(parse_cell(fields[*field_idx]));
        }
    }

    QarTable::new(data.into_iter().map(|(_, c)| c).collect(), timestamps)
}

/// Parse a CSV whose cells must all be numeric, building the schema from
/// the header (every column continuous). This is how pipeline artifacts
/// such as resampled or labeled tables are read back: column kinds only
/// matter for resampling, which has already happened by then.
pub fn read_numeric_table<R: BufRead>(mut reader: R) -> Result<QarTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header = text.lines().next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty input, expected a header row".into(),
    })?;
    let mut schema = Schema::new();
    for name in header.split(',').map(str::trim) {
        if is_time_column(name) {
            continue;
        }
        if name.is_empty() {
            return Err(Error::Schema("empty column name in header".into()));
        }
        schema.declare(name, ColumnKind::Continuous)?;
    }
    let table = parse_table(text.as_bytes(), &schema)?;
    for col in table.columns() {
        for (row, cell) in col.values.iter().enumerate() {
            if let Cell::Text(text) = cell {
                return Err(Error::Parse {
                    line: row + 2,
                    msg: format!(
                        "column {:?} holds non-numeric value {:?}; run the ingest conversion first",
                        col.name, text
                    ),
                });
            }
        }
    }
    Ok(table)
}

/// Replace every text cell with its codebook code. Unmapped labels are an
/// error naming both the attribute and the label.
pub fn convert_text_labels(table: &QarTable, codebook: &TextCodebook) -> Result<QarTable> {
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let mut values = Vec::with_capacity(col.values.len());
        for cell in &col.values {
            match cell {
                Cell::Num(v) => values.push(Cell::Num(*v)),
                Cell::Text(label) => match codebook.code(&col.name, label) {
                    Some(code) => values.push(Cell::Num(code)),
                    None => {
                        return Err(Error::UnmappedLabel {
                            attribute: col.name.clone(),
                            label: label.clone(),
                        })
                    }
                },
            }
        }
        columns.push(Column {
            name: col.name.clone(),
            kind: col.kind,
            values,
        });
    }
    QarTable::new(columns, table.timestamps.clone())
}

/// Collapse sub-second rows to one row per second. Continuous columns take
/// the mean over the second; binary columns take the mode with ties going
/// to 1. Requires a fully numeric table, and binary cells must be 0 or 1.
pub fn resample_1hz(table: &QarTable) -> Result<QarTable> {
    for col in &table.columns {
        for (row, cell) in col.values.iter().enumerate() {
            match cell {
                Cell::Num(v) => {
                    if col.kind == ColumnKind::Binary && *v != 0.0 && *v != 1.0 {
                        return Err(Error::Domain(format!(
                            "binary column {:?} row {} holds non-binary value {}",
                            col.name,
                            row + 1,
                            v
                        )));
                    }
                }
                Cell::Text(s) => {
                    return Err(Error::State(format!(
                        "column {:?} row {} still holds text cell {:?}; convert text labels first",
                        col.name,
                        row + 1,
                        s
                    )))
                }
            }
        }
    }

    // Timestamps are non-decreasing, so rows of one second are contiguous.
    let mut groups: Vec<(i64, std::ops::Range<usize>)> = Vec::new();
    let mut start = 0usize;
    while start < table.timestamps.len() {
        let ts = table.timestamps[start];
        let mut end = start + 1;
        while end < table.timestamps.len() && table.timestamps[end] == ts {
            end += 1;
        }
        groups.push((ts, start..end));
        start = end;
    }

    let mut columns = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let mut values = Vec::with_capacity(groups.len());
        for (_, range) in &groups {
            let nums = col.values[range.clone()].iter().map(|c| match c {
                Cell::Num(v) => *v,
                Cell::Text(_) => unreachable!("text cells rejected above"),
            });
            let value = match col.kind {
                ColumnKind::Continuous => {
                    let (sum, n) = nums.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    sum / n as f64
                }
                ColumnKind::Binary => {
                    let (ones, n) = nums.fold((0usize, 0usize), |(o, n), v| {
                        (o + (v == 1.0) as usize, n + 1)
                    });
                    // Mode with ties resolved to 1.
                    if 2 * ones >= n {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            values.push(Cell::Num(value));
        }
        columns.push(Column {
            name: col.name.clone(),
            kind: col.kind,
            values,
        });
    }
    QarTable::new(columns, groups.into_iter().map(|(ts, _)| ts).collect())
}

/// Seeded synthetic flight table for tests and demos.
///
/// The monitored channel `G` rides a slow oscillation around 1.0 and jumps
/// by roughly 1.0 on randomly injected over-limit seconds, far past the
/// three-sigma band of its baseline. Companion columns cycle through four
/// patterns so both feature selection and next-second prediction have
/// signal to find:
///
/// * `WARN FLAG n` (binary): high when an over-limit second is current or
///   one second ahead, with 5% of values flipped.
/// * `PRECURSOR n` (continuous): ramps up ahead of an over-limit second
///   (0.25 three seconds out, 0.5 two out, 0.8 one out, 1.0 at the event)
///   plus noise.
/// * `NOISE CHAN n` (continuous): uniform noise, uncorrelated.
/// * `MODE SWITCH n` (binary): random flag, uncorrelated.
///
/// Same seed and arguments always produce a bitwise-identical table.
pub fn generate_synthetic(
    seed: u64,
    seconds: usize,
    attributes: usize,
    overlimit_rate: f64,
) -> Result<QarTable> {
    if !(overlimit_rate > 0.0 && overlimit_rate < 0.5) {
        return Err(Error::Argument(format!(
            "overlimit_rate must lie in (0, 0.5), got {overlimit_rate}"
        )));
    }
    if attributes < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 attributes (monitored channel plus one companion), got {attributes}"
        )));
    }
    if seconds == 0 {
        return Err(Error::Argument("seconds must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spikes: Vec<bool> = (0..seconds).map(|_| rng.gen::<f64>() < overlimit_rate).collect();
    let spike_at = |t: usize| t < seconds && spikes[t];

    let mut columns = Vec::with_capacity(attributes);

    let mut g_values = Vec::with_capacity(seconds);
    for (t, &spike) in spikes.iter().enumerate() {
        let base = 1.0 + 0.05 * (t as f64 * std::f64::consts::TAU / 97.0).sin();
        let noise = (rng.gen::<f64>() - 0.5) * 0.04;
        let jump = if spike {
            1.0 + (rng.gen::<f64>() - 0.5) * 0.1
        } else {
            0.0
        };
        g_values.push(Cell::Num(base + noise + jump));
    }
    columns.push(Column {
        name: "G".to_string(),
        kind: ColumnKind::Continuous,
        values: g_values,
    });

    for ci in 0..attributes - 1 {
        let (name, kind) = match ci % 4 {
            0 => (format!("WARN FLAG {}", ci + 1), ColumnKind::Binary),
            1 => (format!("PRECURSOR {}", ci + 1), ColumnKind::Continuous),
            2 => (format!("NOISE CHAN {}", ci + 1), ColumnKind::Continuous),
            _ => (format!("MODE SWITCH {}", ci + 1), ColumnKind::Binary),
        };
        let mut values = Vec::with_capacity(seconds);
        for t in 0..seconds {
            let v = match ci % 4 {
                0 => {
                    let armed = spike_at(t) || spike_at(t + 1);
                    let flip = rng.gen::<f64>() < 0.05;
                    ((armed != flip) as u8) as f64
                }
                1 => {
                    let ramp = if spike_at(t) {
                        1.0
                    } else if spike_at(t + 1) {
                        0.8
                    } else if spike_at(t + 2) {
                        0.5
                    } else if spike_at(t + 3) {
                        0.25
                    } else {
                        0.0
                    };
                    ramp + (rng.gen::<f64>() - 0.5) * 0.1
                }
                2 => rng.gen::<f64>(),
                _ => (rng.gen::<f64>() < 0.3) as u8 as f64,
            };
            values.push(Cell::Num(v));
        }
        columns.push(Column { name, kind, values });
    }

    let timestamps = (0..seconds as i64).collect();
    QarTable::new(columns, timestamps)
}

/// Derive a schema describing a table's columns.
pub fn schema_of(table: &QarTable) -> Schema {
    let mut schema = Schema::new();
    for col in table.columns() {
        schema
            .declare(&col.name, col.kind)
            .expect("table columns are unique");
    }
    schema
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn schema(decls: &[(&str, ColumnKind)]) -> Schema {
        let mut s = Schema::new();
        for (name, kind) in decls {
            s.declare(name, *kind).unwrap();
        }
        s
    }

    #[test]
    fn parses_header_and_rows_with_time_column() {
        let csv = "TIME,G,FLAG\n100,1.5,TRUE\n100,1.7,TRUE\n101,1.6,FALSE\n";
        let s = schema(&[("G", ColumnKind::Continuous), ("FLAG", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.timestamps(), &[100, 100, 101]);
        assert_eq!(t.column("G").unwrap().values[1], Cell::Num(1.7));
        assert_eq!(t.column("FLAG").unwrap().values[2], Cell::Text("FALSE".into()));
    }

    #[test]
    fn missing_time_column_uses_row_index() {
        let csv = "G\n1.0\n2.0\n";
        let s = schema(&[("G", ColumnKind::Continuous)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        assert_eq!(t.timestamps(), &[0, 1]);
    }

    #[test]
    fn fractional_timestamps_floor_to_the_containing_second() {
        let csv = "TIME,G\n10.25,1.0\n10.75,2.0\n11.5,3.0\n";
        let s = schema(&[("G", ColumnKind::Continuous)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        assert_eq!(t.timestamps(), &[10, 10, 11]);
    }

    #[test]
    fn nan_spelling_stays_text_for_the_codebook() {
        // f64::from_str accepts "NaN"; the parser must not let that bypass
        // label conversion.
        let csv = "GEAR SELECT DOWN\nNaN\nDOWN\n";
        let s = schema(&[("GEAR SELECT DOWN", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        assert_eq!(
            t.column("GEAR SELECT DOWN").unwrap().values[0],
            Cell::Text("NaN".into())
        );
    }

    #[test]
    fn undeclared_column_is_a_schema_error() {
        let csv = "G,EXTRA\n1.0,2.0\n";
        let s = schema(&[("G", ColumnKind::Continuous)]);
        let err = parse_table(Cursor::new(csv), &s).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        assert!(err.to_string().contains("EXTRA"));
    }

    #[test]
    fn declared_but_absent_column_is_a_schema_error() {
        let csv = "G\n1.0\n";
        let s = schema(&[("G", ColumnKind::Continuous), ("MISSING", ColumnKind::Binary)]);
        let err = parse_table(Cursor::new(csv), &s).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        assert!(err.to_string().contains("MISSING"));
    }

    #[test]
    fn ragged_row_reports_its_line_number() {
        let csv = "G,H\n1.0,2.0\n3.0\n";
        let s = schema(&[("G", ColumnKind::Continuous), ("H", ColumnKind::Continuous)]);
        let err = parse_table(Cursor::new(csv), &s).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let csv = "TIME,G\n5,1.0\n4,1.0\n";
        let s = schema(&[("G", ColumnKind::Continuous)]);
        let err = parse_table(Cursor::new(csv), &s).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_body_yields_zero_rows() {
        let csv = "TIME,G\n";
        let s = schema(&[("G", ColumnKind::Continuous)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn builtin_codebook_covers_the_standard_flags() {
        let book = TextCodebook::builtin();
        assert_eq!(book.code("GEAR SELECT DOWN", "NaN"), Some(0.0));
        assert_eq!(book.code("GEAR SELECT DOWN", "DOWN"), Some(1.0));
        assert_eq!(book.code("WOW INDICATE INAIR", "FALSE"), Some(0.0));
        assert_eq!(book.code("WOW INDICATE INAIR", "TRUE"), Some(1.0));
        assert_eq!(book.code("A/T ENGAGED", "DISENGD"), Some(0.0));
        assert_eq!(book.code("A/T ENGAGED", "ENGAGED"), Some(1.0));
        assert_eq!(book.code("ANY A/P ENGAGED", "ON"), Some(0.0));
        assert_eq!(book.code("ANY A/P ENGAGED", "OFF"), Some(1.0));
    }

    #[test]
    fn codebook_rejects_two_labels_sharing_a_code() {
        let mut book = TextCodebook::new();
        book.insert("F", "A", 1.0).unwrap();
        let err = book.insert("F", "B", 1.0).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        // Re-inserting the same label is fine, and other attributes may
        // reuse the code.
        book.insert("F", "A", 1.0).unwrap();
        book.insert("OTHER", "B", 1.0).unwrap();
    }

    #[test]
    fn codebook_text_format_splits_attribute_and_label_at_the_last_slash() {
        let mut book = TextCodebook::new();
        book.extend_from_text("A/T ENGAGED/DISENGD = 0\nA/T ENGAGED/ENGAGED = 1\n")
            .unwrap();
        assert_eq!(book.code("A/T ENGAGED", "DISENGD"), Some(0.0));
        assert_eq!(book.code("A/T ENGAGED", "ENGAGED"), Some(1.0));
    }

    #[test]
    fn convert_maps_text_and_errors_on_unmapped() {
        let csv = "WOW INDICATE INAIR\nTRUE\nFALSE\nMAYBE\n";
        let s = schema(&[("WOW INDICATE INAIR", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        let err = convert_text_labels(&t, &TextCodebook::builtin()).unwrap_err();
        match err {
            Error::UnmappedLabel { attribute, label } => {
                assert_eq!(attribute, "WOW INDICATE INAIR");
                assert_eq!(label, "MAYBE");
            }
            other => panic!("expected unmapped label, got {other}"),
        }
    }

    #[test]
    fn resample_means_continuous_and_modes_binary_with_ties_to_one() {
        let csv = "TIME,G,FLAG\n\
                   7,1.0,1\n7,2.0,0\n\
                   8,3.0,0\n8,4.0,0\n8,5.0,1\n\
                   9,6.0,1\n";
        let s = schema(&[("G", ColumnKind::Continuous), ("FLAG", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        let r = resample_1hz(&t).unwrap();
        assert_eq!(r.timestamps(), &[7, 8, 9]);
        assert_eq!(r.numeric_column("G").unwrap(), vec![1.5, 4.0, 6.0]);
        // Second 7 ties 1-1 and resolves to 1; second 8 is majority 0.
        assert_eq!(r.numeric_column("FLAG").unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn resample_rejects_text_cells() {
        let csv = "FLAG\nTRUE\n";
        let s = schema(&[("FLAG", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        let err = resample_1hz(&t).unwrap_err();
        assert!(matches!(err, Error::State(_)), "{err}");
    }

    #[test]
    fn resample_rejects_non_binary_values_in_binary_columns() {
        let csv = "FLAG\n2\n";
        let s = schema(&[("FLAG", ColumnKind::Binary)]);
        let t = parse_table(Cursor::new(csv), &s).unwrap();
        let err = resample_1hz(&t).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn resample_keeps_strictly_increasing_seconds() {
        let t = generate_synthetic(3, 50, 3, 0.1).unwrap();
        let r = resample_1hz(&t).unwrap();
        assert!(r.timestamps().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(r.row_count(), 50);
    }

    #[test]
    fn synthetic_is_bitwise_reproducible() {
        let a = generate_synthetic(99, 200, 6, 0.05).unwrap();
        let b = generate_synthetic(99, 200, 6, 0.05).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        let c = generate_synthetic(100, 200, 6, 0.05).unwrap();
        assert_ne!(a.to_csv_string().unwrap(), c.to_csv_string().unwrap());
    }

    #[test]
    fn synthetic_has_monitored_channel_and_a_binary_companion() {
        let t = generate_synthetic(1, 100, 2, 0.1).unwrap();
        assert_eq!(t.columns().len(), 2);
        assert_eq!(t.columns()[0].name, "G");
        assert_eq!(t.columns()[0].kind, ColumnKind::Continuous);
        assert_eq!(t.columns()[1].kind, ColumnKind::Binary);
        let flags = t.numeric_column(&t.columns()[1].name.clone()).unwrap();
        assert!(flags.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn synthetic_rejects_bad_arguments() {
        assert!(matches!(
            generate_synthetic(1, 10, 2, 0.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            generate_synthetic(1, 10, 2, 0.5),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            generate_synthetic(1, 10, 1, 0.1),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            generate_synthetic(1, 0, 2, 0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn csv_round_trip_preserves_values_exactly() {
        let t = generate_synthetic(7, 80, 5, 0.08).unwrap();
        let csv = t.to_csv_string().unwrap();
        let parsed = parse_table(Cursor::new(csv.as_bytes()), &schema_of(&t)).unwrap();
        for col in t.columns() {
            assert_eq!(
                parsed.numeric_column(&col.name).unwrap(),
                t.numeric_column(&col.name).unwrap(),
                "column {}",
                col.name
            );
        }
        assert_eq!(parsed.timestamps(), t.timestamps());
    }

    #[test]
    fn numeric_reader_needs_no_schema() {
        let csv = "TIME,G,WARN FLAG 1\n0,1.25,0\n1,1.5,1\n";
        let t = read_numeric_table(Cursor::new(csv.as_bytes())).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.numeric_column("G").unwrap(), vec![1.25, 1.5]);
        assert_eq!(t.timestamps(), &[0, 1]);
    }

    #[test]
    fn numeric_reader_rejects_text_cells() {
        let csv = "TIME,G,MODE\n0,1.25,CLIMB\n";
        let err = read_numeric_table(Cursor::new(csv.as_bytes())).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("CLIMB"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn numeric_reader_rejects_empty_input() {
        assert!(matches!(
            read_numeric_table(Cursor::new(b"".as_slice())),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
