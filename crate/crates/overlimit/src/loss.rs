//! Binary cross-entropy, its cost-sensitive variant, and confusion-matrix
//! metrics.
//!
//! Class convention: label 0 is the normal (positive) class, label 1 the
//! over-limit (negative) class. The cost weights counter the imbalance by
//! weighting each class's log-loss term with the other class's frequency:
//! a rare over-limit class makes normal-side mistakes cheap and
//! over-limit-side mistakes expensive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_EPSILON, 1 - PROB_EPSILON]` inside
/// the loss so a saturated prediction cannot produce an infinite loss.
pub const PROB_EPSILON: f64 = 1e-12;

/// Misclassification weights. `cost_01` scales the label-1 (over-limit)
/// log-loss term and `cost_10` the label-0 (normal) term, so setting
/// `cost_01` high makes a missed over-limit second expensive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub cost_01: f64,
    pub cost_10: f64,
}

impl CostMatrix {
    pub fn new(cost_01: f64, cost_10: f64) -> Result<Self> {
        if !(cost_01.is_finite() && cost_10.is_finite()) || cost_01 < 0.0 || cost_10 < 0.0 {
            return Err(Error::Argument(format!(
                "costs must be finite and non-negative, got ({cost_01}, {cost_10})"
            )));
        }
        Ok(CostMatrix { cost_01, cost_10 })
    }

    /// Equal weights; turns the cost-sensitive loss into plain BCE.
    pub fn unit() -> Self {
        CostMatrix {
            cost_01: 1.0,
            cost_10: 1.0,
        }
    }

    /// Derive weights from class frequencies: `cost_01` is the fraction of
    /// label-0 samples and `cost_10` the fraction of label-1 samples.
    /// Cross-applied to the opposite class's loss term, a 3% over-limit
    /// rate weights over-limit mistakes at 0.97 and normal mistakes at
    /// 0.03. A single-class set would zero one weight and is rejected.
    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Argument("cannot derive costs from no labels".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Argument(format!("label {bad} is not 0 or 1")));
        }
        let ones = labels.iter().filter(|&&l| l == 1).count();
        let zeros = labels.len() - ones;
        if ones == 0 || zeros == 0 {
            return Err(Error::Degenerate(format!(
                "labels contain a single class ({} zeros, {} ones); cost weights would vanish",
                zeros, ones
            )));
        }
        Ok(CostMatrix {
            cost_01: zeros as f64 / labels.len() as f64,
            cost_10: ones as f64 / labels.len() as f64,
        })
    }
}

fn check_pairs(labels: &[u8], probs: &[f64]) -> Result<()> {
    if labels.len() != probs.len() {
        return Err(Error::Argument(format!(
            "{} labels but {} probabilities",
            labels.len(),
            probs.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Argument("cannot average over zero samples".into()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Argument(format!("label {bad} is not 0 or 1")));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("non-finite probability {bad}")));
    }
    Ok(())
}

/// Cost-sensitive binary cross-entropy: the mean over samples of
/// `-(y log p * cost_01 + (1 - y) log(1 - p) * cost_10)` with clipped
/// probabilities.
pub fn cs_bce(labels: &[u8], probs: &[f64], costs: &CostMatrix) -> Result<f64> {
    check_pairs(labels, probs)?;
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(probs) {
        let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
        total -= if y == 1 {
            p.ln() * costs.cost_01
        } else {
            (1.0 - p).ln() * costs.cost_10
        };
    }
    let loss = total / labels.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss evaluated to {loss}")));
    }
    Ok(loss)
}

/// Plain binary cross-entropy; exactly the cost-sensitive loss with unit
/// weights (same code path, so they agree bit for bit).
pub fn bce(labels: &[u8], probs: &[f64]) -> Result<f64> {
    cs_bce(labels, probs, &CostMatrix::unit())
}

/// Gradient of the mean cost-sensitive loss with respect to each
/// pre-sigmoid logit, assuming `p = sigmoid(logit)`:
/// `(cost_01 * y * (p - 1) + cost_10 * (1 - y) * p) / n`.
pub fn cs_bce_grad_logit(labels: &[u8], probs: &[f64], costs: &CostMatrix) -> Result<Vec<f64>> {
    check_pairs(labels, probs)?;
    let n = labels.len() as f64;
    Ok(labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            if y == 1 {
                costs.cost_01 * (p - 1.0) / n
            } else {
                costs.cost_10 * p / n
            }
        })
        .collect())
}

/// Threshold probabilities into labels: probability of the over-limit
/// class at or above `threshold` predicts 1.
pub fn classify(probs: &[f64], threshold: f64) -> Result<Vec<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!(
            "decision threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("non-finite probability {bad}")));
    }
    Ok(probs.iter().map(|&p| (p >= threshold) as u8).collect())
}

/// Confusion counts under the label-0-positive convention: a true
/// positive is a correctly predicted normal second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(actual: &[u8], predicted: &[u8]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Argument(format!(
                "{} actual labels but {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        if actual.is_empty() {
            return Err(Error::Argument("cannot tabulate zero samples".into()));
        }
        if let Some(bad) = actual.iter().chain(predicted).find(|&&l| l > 1) {
            return Err(Error::Argument(format!("label {bad} is not 0 or 1")));
        }
        let mut cm = ConfusionMatrix {
            true_pos: 0,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
        };
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a, p) {
                (0, 0) => cm.true_pos += 1,
                (1, 0) => cm.false_pos += 1,
                (1, 1) => cm.true_neg += 1,
                (0, 1) => cm.false_neg += 1,
                _ => unreachable!("labels validated above"),
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }

    /// Precision of the normal class. `None` when nothing was predicted
    /// normal; an undefined ratio is never reported as 0.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_pos;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    /// Recall of the normal class. `None` when no sample was normal.
    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_neg;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    /// Recall of the over-limit class: the fraction of real over-limit
    /// seconds the model caught. `None` when no sample was over-limit.
    pub fn overlimit_recall(&self) -> Option<f64> {
        let denom = self.true_neg + self.false_pos;
        (denom > 0).then(|| self.true_neg as f64 / denom as f64)
    }

    /// Key-value report, one metric per line. Undefined ratios print as
    /// `undefined`. Stable across runs given equal counts.
    pub fn to_report(&self, threshold: f64) -> String {
        let opt = |v: Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "undefined".to_string(),
        };
        let mut out = String::new();
        out.push_str("# positive class = 0 (normal), negative class = 1 (over-limit)\n");
        out.push_str(&format!("threshold\t{threshold}\n"));
        out.push_str(&format!("samples\t{}\n", self.total()));
        out.push_str(&format!("true_pos\t{}\n", self.true_pos));
        out.push_str(&format!("false_pos\t{}\n", self.false_pos));
        out.push_str(&format!("true_neg\t{}\n", self.true_neg));
        out.push_str(&format!("false_neg\t{}\n", self.false_neg));
        out.push_str(&format!("accuracy\t{}\n", self.accuracy()));
        out.push_str(&format!("precision\t{}\n", opt(self.precision())));
        out.push_str(&format!("recall\t{}\n", opt(self.recall())));
        out.push_str(&format!("f1\t{}\n", opt(self.f1())));
        out.push_str(&format!("overlimit_recall\t{}\n", opt(self.overlimit_recall())));
        out
    }
}
