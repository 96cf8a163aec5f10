//! Jackknife-bagged univariate feature scoring, ranking/thresholding, and
//! per-fold z-score normalization.
//!
//! The robust score of a feature is the minimum over all leave-one-subject-
//! out replicates of the absolute Welch t statistic, so a feature only
//! scores high when it separates the groups in every replicate. Features
//! with zero variance score 0 and are never selected.

use crate::dataset::ClassLabel;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("each class needs >= 3 subjects so every jackknife replicate keeps >= 2; got {controls} controls, {patients} patients")]
    ClassTooSmall { controls: usize, patients: usize },
    #[error("labels length {labels} does not match matrix rows {rows}")]
    ShapeMismatch { labels: usize, rows: usize },
    #[error("requested {requested} features but only {available} exist")]
    CountOutOfRange { requested: usize, available: usize },
    #[error("p-value threshold {0} selects no feature")]
    EmptySelection(f64),
    #[error("selected feature {feature} has (near-)zero training variance")]
    ZeroVariance { feature: usize },
    #[error("degrees of freedom must be positive, got {0}")]
    BadDegreesOfFreedom(f64),
}

/// How many features to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SelectionMode {
    /// The `count` highest-scoring features.
    Count { count: usize },
    /// Every feature whose two-sided p-value is at or below the threshold.
    PValue { threshold: f64 },
}

/// Per-feature z-score parameters estimated on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Outcome of scoring + ranking + normalization on one training set.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    /// Robust score per feature (min over jackknife replicates of |t|).
    pub scores: Vec<f64>,
    /// Selected feature indices, sorted by descending score
    /// (ties broken by ascending index).
    pub selected: Vec<usize>,
    pub mode: SelectionMode,
    /// Choices the robust score bakes in, echoed for audit.
    pub t_statistic: &'static str,
    pub aggregation: &'static str,
}

/// Jackknife-bagged score per feature (column of `x`).
///
/// For each subject k, the two-sample Welch t of every feature is computed
/// on the data with subject k removed; the score is min_k |t^(k)|.
pub fn jackknife_t_scores(
    x: &DMatrix<f64>,
    labels: &[ClassLabel],
) -> Result<Vec<f64>, SelectionError> {
    let k = x.nrows();
    if labels.len() != k {
        return Err(SelectionError::ShapeMismatch { labels: labels.len(), rows: k });
    }
    let n_pat = labels.iter().filter(|l| **l == ClassLabel::Patient).count();
    let n_ctl = k - n_pat;
    if n_pat < 3 || n_ctl < 3 {
        return Err(SelectionError::ClassTooSmall { controls: n_ctl, patients: n_pat });
    }
    let scores: Vec<f64> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            // class sums over the full set, then O(1) downdates per replicate
            let col = x.column(j);
            let mut sum = [0.0f64; 2];
            let mut sumsq = [0.0f64; 2];
            for (i, &label) in labels.iter().enumerate() {
                let c = class_of(label);
                let v = col[i];
                sum[c] += v;
                sumsq[c] += v * v;
            }
            let n = [n_ctl as f64, n_pat as f64];
            let mut min_abs_t = f64::INFINITY;
            for (i, &label) in labels.iter().enumerate() {
                let c = class_of(label);
                let v = col[i];
                let mut s = sum;
                let mut ss = sumsq;
                let mut nn = n;
                s[c] -= v;
                ss[c] -= v * v;
                nn[c] -= 1.0;
                let t = welch_t_from_moments(s, ss, nn);
                min_abs_t = min_abs_t.min(t.abs());
            }
            min_abs_t
        })
        .collect();
    Ok(scores)
}

fn class_of(label: ClassLabel) -> usize {
    match label {
        ClassLabel::Control => 0,
        ClassLabel::Patient => 1,
    }
}

fn welch_t_from_moments(sum: [f64; 2], sumsq: [f64; 2], n: [f64; 2]) -> f64 {
    let m0 = sum[0] / n[0];
    let m1 = sum[1] / n[1];
    // sample variances; cancellation can produce tiny negatives
    let v0 = ((sumsq[0] - sum[0] * m0) / (n[0] - 1.0)).max(0.0);
    let v1 = ((sumsq[1] - sum[1] * m1) / (n[1] - 1.0)).max(0.0);
    let denom = (v0 / n[0] + v1 / n[1]).sqrt();
    if denom == 0.0 {
        // zero-variance convention: no signal, t = 0
        return 0.0;
    }
    (m1 - m0) / denom
}

/// Two-sided Student p-value via the regularized incomplete beta:
/// p = I_{df/(df+t²)}(df/2, 1/2).
pub fn t_to_pvalue(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if !t.is_finite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Rank features by descending score and keep the requested subset.
/// `df` is only consulted by the p-value threshold mode.
pub fn select(
    scores: &[f64],
    mode: SelectionMode,
    df: f64,
) -> Result<SelectionResult, SelectionError> {
    if df <= 0.0 {
        return Err(SelectionError::BadDegreesOfFreedom(df));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let selected = match mode {
        SelectionMode::Count { count } => {
            if count > scores.len() {
                return Err(SelectionError::CountOutOfRange {
                    requested: count,
                    available: scores.len(),
                });
            }
            order.truncate(count);
            order
        }
        SelectionMode::PValue { threshold } => {
            // zero-variance features (score 0) are never selected
            let kept: Vec<usize> = order
                .into_iter()
                .filter(|&i| scores[i] > 0.0 && t_to_pvalue(scores[i], df) <= threshold)
                .collect();
            if kept.is_empty() {
                return Err(SelectionError::EmptySelection(threshold));
            }
            kept
        }
    };
    Ok(SelectionResult {
        scores: scores.to_vec(),
        selected,
        mode,
        t_statistic: "welch",
        aggregation: "min_abs_jackknife",
    })
}

/// Per-feature mean and sample standard deviation of the selected columns.
pub fn zscore_fit(
    x: &DMatrix<f64>,
    selected: &[usize],
) -> Result<ZScoreParams, SelectionError> {
    let k = x.nrows() as f64;
    let mut mean = Vec::with_capacity(selected.len());
    let mut sd = Vec::with_capacity(selected.len());
    for &j in selected {
        let col = x.column(j);
        let m = col.sum() / k;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1.0);
        let s = var.sqrt();
        if s <= 1e-12 {
            return Err(SelectionError::ZeroVariance { feature: j });
        }
        mean.push(m);
        sd.push(s);
    }
    Ok(ZScoreParams { mean, sd })
}

/// Extract and standardize the selected entries of one subject row.
pub fn zscore_apply(row: &[f64], selected: &[usize], params: &ZScoreParams) -> Vec<f64> {
    selected
        .iter()
        .enumerate()
        .map(|(i, &j)| (row[j] - params.mean[i]) / params.sd[i])
        .collect()
}
