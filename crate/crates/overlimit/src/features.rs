//! Feature selection by Spearman rank correlation against the over-limit
//! labels.
//!
//! Ranks are average ranks over ties and the coefficient is the Pearson
//! correlation of the two rank vectors. The popular 1 - 6*sum(d^2)/...
//! shortcut is wrong under ties, and labels are almost all ties, so it is
//! deliberately not used here.

use crate::error::{Error, Result};
use crate::labeling::LabelSeries;
use crate::qar::QarTable;

/// Average ranks (1-based) with ties sharing the mean of their positions.
/// `[1, 2, 2, 3]` ranks to `[1, 2.5, 2.5, 4]`.
pub fn rank_with_ties(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Argument("cannot rank an empty series".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite value {v} at row {} cannot be ranked",
                i + 1
            )));
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values compare"));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the average 1-based rank.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Spearman rank correlation with tie-aware average ranks. Constant input
/// on either side leaves the coefficient undefined and is an error naming
/// the offending side.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 paired observations, got {}",
            x.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) {
        return Err(Error::UndefinedCorrelation(
            "first series is constant".into(),
        ));
    }
    if constant(y) {
        return Err(Error::UndefinedCorrelation(
            "second series is constant".into(),
        ));
    }
    let rx = rank_with_ties(x)?;
    let ry = rank_with_ties(y)?;
    let r = pearson(&rx, &ry);
    if !r.is_finite() {
        return Err(Error::Numeric("correlation did not evaluate to a finite value".into()));
    }
    // Rounding can push the magnitude a hair past 1.
    Ok(r.clamp(-1.0, 1.0))
}

/// One attribute's correlation against the labels. `r_s` is `None` when
/// the attribute is constant and the coefficient is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub attribute: String,
    pub r_s: Option<f64>,
}

/// Selection outcome: all candidate rows sorted by |r_s| descending
/// (undefined rows last, original order preserved among equals), plus the
/// names that passed the threshold, in the same order.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
    pub threshold: f64,
    pub selected: Vec<String>,
}

impl CorrelationReport {
    /// Aligned text table: attribute, r_s, selected flag.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# spearman correlation vs labels, threshold |r_s| > {}\n", self.threshold));
        let name_w = self
            .rows
            .iter()
            .map(|r| r.attribute.len())
            .chain(["attribute".len()])
            .max()
            .unwrap_or(9);
        let fmt_r = |r: &Option<f64>| match r {
            Some(v) => format!("{v:.6}"),
            None => "undefined".to_string(),
        };
        let r_w = self
            .rows
            .iter()
            .map(|r| fmt_r(&r.r_s).len())
            .chain(["r_s".len()])
            .max()
            .unwrap_or(3);
        out.push_str(&format!(
            "{:<name_w$}  {:>r_w$}  selected\n",
            "attribute", "r_s"
        ));
        for row in &self.rows {
            let selected = if self.selected.contains(&row.attribute) {
                "yes"
            } else {
                "no"
            };
            out.push_str(&format!(
                "{:<name_w$}  {:>r_w$}  {}\n",
                row.attribute,
                fmt_r(&row.r_s),
                selected
            ));
        }
        out
    }
}

/// Correlate every numeric column except the monitored channel against the
/// labels and keep those with |r_s| strictly above `threshold`. Constant
/// columns are reported as undefined and never selected. Constant labels
/// make every coefficient undefined and are rejected outright.
pub fn select_features(
    table: &QarTable,
    labels: &LabelSeries,
    g_column: &str,
    threshold: f64,
) -> Result<CorrelationReport> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Argument(format!(
            "selection threshold must lie in [0, 1), got {threshold}"
        )));
    }
    if table.row_count() != labels.len() {
        return Err(Error::Argument(format!(
            "table has {} rows but labels have {}",
            table.row_count(),
            labels.len()
        )));
    }
    if table.column(g_column).is_none() {
        return Err(Error::Schema(format!(
            "monitored channel {:?} is not a table column",
            g_column
        )));
    }
    let label_f: Vec<f64> = labels.labels.iter().map(|&l| l as f64).collect();
    if label_f.iter().all(|&l| l == label_f[0]) {
        return Err(Error::Degenerate(
            "labels are all one class; correlation against them is undefined".into(),
        ));
    }

    let mut rows = Vec::new();
    for col in table.columns() {
        if col.name == g_column {
            continue;
        }
        let values = table.numeric_column(&col.name)?;
        let r_s = match spearman(&values, &label_f) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(CorrelationRow {
            attribute: col.name.clone(),
            r_s,
        });
    }

    // Sort by |r_s| descending; undefined rows sink to the bottom. The
    // sort is stable, so equal magnitudes keep table order.
    rows.sort_by(|a, b| {
        let ka = a.r_s.map(f64::abs);
        let kb = b.r_s.map(f64::abs);
        match (ka, kb) {
            (Some(x), Some(y)) => y.partial_cmp(&x).expect("finite correlations"),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });

    let selected = rows
        .iter()
        .filter(|r| r.r_s.map(|v| v.abs() > threshold).unwrap_or(false))
        .map(|r| r.attribute.clone())
        .collect();

    Ok(CorrelationReport {
        rows,
        threshold,
        selected,
    })
}
