//! Leave-one-out cross-validation with in-fold feature selection and
//! normalization, confusion-matrix metrics, and grid search over (C, γ).
//!
//! Selection and z-score parameters are refit on the K−1 training subjects
//! of every fold; the held-out subject only ever passes through transforms
//! estimated without it. The sweep over the number of selected features
//! runs outside the fold loop; reports flag that bias explicitly.

use crate::dataset::{ClassLabel, FeatureTag};
use crate::selection::{
    jackknife_t_scores, select, zscore_apply, zscore_fit, SelectionError, SelectionMode,
};
use crate::svm::{decision_value, train as svm_train, KernelSpec, SvmError, TrainConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 subjects per class, got {controls} controls / {patients} patients")]
    CohortTooSmall { controls: usize, patients: usize },
    #[error("labels/ids/features disagree on subject count")]
    ShapeMismatch,
    #[error("fold {fold} (subject '{id}'): {source}")]
    FoldSelection {
        fold: usize,
        id: String,
        #[source]
        source: SelectionError,
    },
    #[error("fold {fold} (subject '{id}'): {source}")]
    FoldTraining {
        fold: usize,
        id: String,
        #[source]
        source: SvmError,
    },
    #[error("fold {fold} (subject '{id}'): {message}")]
    FoldOther { fold: usize, id: String, message: String },
    #[error("metrics need both classes among the true labels")]
    MissingClass,
    #[error("metrics need equal-length prediction and truth lists")]
    LengthMismatch,
    #[error("grid specification is empty")]
    EmptyGrid,
}

/// Confusion-matrix summary; patients are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub error: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Standard ratios from predicted and true ±1 labels.
pub fn metrics(predicted: &[f64], truth: &[f64]) -> Result<Metrics, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch);
    }
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p >= 0.0, t >= 0.0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let positives = tp + fn_;
    let negatives = tn + fp;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::MissingClass);
    }
    let k = predicted.len() as f64;
    let accuracy = (tp + tn) as f64 / k;
    Ok(Metrics {
        accuracy,
        error: 1.0 - accuracy,
        sensitivity: tp as f64 / positives as f64,
        specificity: tn as f64 / negatives as f64,
    })
}

/// One held-out subject's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectOutcome {
    pub id: String,
    pub true_label: ClassLabel,
    pub predicted_label: ClassLabel,
    pub decision_value: f64,
    pub n_selected: usize,
}

/// Full cross-validation report; serialized as the report JSON.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub metrics: Metrics,
    pub per_subject: Vec<SubjectOutcome>,
    pub selected_features_per_fold: Vec<Vec<FeatureTag>>,
    /// Echo of everything needed to reproduce the run.
    pub config: serde_json::Value,
    pub seed: u64,
}

/// Configuration of one LOOCV run of the standard pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoocvConfig {
    pub kernel: KernelSpec,
    pub c: f64,
    pub selection: SelectionMode,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
}

impl LoocvConfig {
    pub fn new(kernel: KernelSpec, c: f64, selection: SelectionMode) -> Self {
        Self { kernel, c, selection, svm_tol: 1e-3, svm_max_iter: 200_000 }
    }
}

pub(crate) struct FoldResult {
    pub predicted: f64,
    pub decision: f64,
    pub selected: Vec<usize>,
}

/// Run every leave-one-out fold of `fold_fn` in parallel, in fold order.
/// Errors surface in fold order, independent of scheduling.
pub(crate) fn run_folds<F>(k: usize, fold_fn: F) -> Result<Vec<FoldResult>, EvalError>
where
    F: Fn(usize) -> Result<FoldResult, EvalError> + Sync + Send,
{
    let results: Vec<Result<FoldResult, EvalError>> =
        (0..k).into_par_iter().map(fold_fn).collect();
    results.into_iter().collect()
}

fn check_cohort(labels: &[ClassLabel]) -> Result<(), EvalError> {
    let patients = labels.iter().filter(|l| **l == ClassLabel::Patient).count();
    let controls = labels.len() - patients;
    if patients < 2 || controls < 2 {
        return Err(EvalError::CohortTooSmall { controls, patients });
    }
    Ok(())
}

/// Standard pipeline fold: jackknife scores, selection, z-score, SVM, all on
/// the training rows only; returns the held-out decision.
fn pipeline_fold(
    features: &DMatrix<f64>,
    labels: &[ClassLabel],
    ids: &[String],
    cfg: &LoocvConfig,
    test: usize,
) -> Result<FoldResult, EvalError> {
    let k = features.nrows();
    let train_idx: Vec<usize> = (0..k).filter(|&i| i != test).collect();
    let train = features.select_rows(&train_idx);
    let train_labels: Vec<ClassLabel> = train_idx.iter().map(|&i| labels[i]).collect();
    let sel_err = |source| EvalError::FoldSelection { fold: test, id: ids[test].clone(), source };
    let scores = jackknife_t_scores(&train, &train_labels).map_err(sel_err)?;
    let df = (train_idx.len() as f64 - 2.0).max(1.0);
    let selection = select(&scores, cfg.selection, df)
        .map_err(|source| EvalError::FoldSelection { fold: test, id: ids[test].clone(), source })?;
    let params = zscore_fit(&train, &selection.selected)
        .map_err(|source| EvalError::FoldSelection { fold: test, id: ids[test].clone(), source })?;
    let samples: Vec<Vec<f64>> = train_idx
        .iter()
        .map(|&i| {
            zscore_apply(features.row(i).transpose().as_slice(), &selection.selected, &params)
        })
        .collect();
    let ys: Vec<f64> = train_labels.iter().map(|l| l.y()).collect();
    let mut tc = TrainConfig::new(cfg.c, cfg.kernel);
    tc.tol = cfg.svm_tol;
    tc.max_iter = cfg.svm_max_iter;
    let model = svm_train(&samples, &ys, &tc)
        .map_err(|source| EvalError::FoldTraining { fold: test, id: ids[test].clone(), source })?;
    let test_row =
        zscore_apply(features.row(test).transpose().as_slice(), &selection.selected, &params);
    let decision = decision_value(&model, &test_row)
        .map_err(|source| EvalError::FoldTraining { fold: test, id: ids[test].clone(), source })?;
    Ok(FoldResult {
        predicted: if decision >= 0.0 { 1.0 } else { -1.0 },
        decision,
        selected: selection.selected,
    })
}

/// Leave-one-out cross-validation of the coefficient-feature pipeline.
///
/// `tag` renders a raw feature index into the report's tuple form; `seed` is
/// echoed into the report (the run itself is deterministic).
pub fn loocv_tagged(
    features: &DMatrix<f64>,
    labels: &[ClassLabel],
    ids: &[String],
    cfg: &LoocvConfig,
    tag: &(dyn Fn(usize) -> FeatureTag + Sync),
    seed: u64,
) -> Result<CvReport, EvalError> {
    if labels.len() != features.nrows() || ids.len() != features.nrows() {
        return Err(EvalError::ShapeMismatch);
    }
    check_cohort(labels)?;
    let k = features.nrows();
    let folds = run_folds(k, |test| pipeline_fold(features, labels, ids, cfg, test))?;
    assemble_report(labels, ids, cfg, &folds, tag, seed)
}

fn assemble_report(
    labels: &[ClassLabel],
    ids: &[String],
    cfg: &LoocvConfig,
    folds: &[FoldResult],
    tag: &(dyn Fn(usize) -> FeatureTag + Sync),
    seed: u64,
) -> Result<CvReport, EvalError> {
    let predicted: Vec<f64> = folds.iter().map(|f| f.predicted).collect();
    let truth: Vec<f64> = labels.iter().map(|l| l.y()).collect();
    let metrics = metrics(&predicted, &truth)?;
    let per_subject = folds
        .iter()
        .enumerate()
        .map(|(i, f)| SubjectOutcome {
            id: ids[i].clone(),
            true_label: labels[i],
            predicted_label: ClassLabel::from_y(f.predicted),
            decision_value: f.decision,
            n_selected: f.selected.len(),
        })
        .collect();
    let selected_features_per_fold = folds
        .iter()
        .map(|f| f.selected.iter().map(|&j| tag(j)).collect())
        .collect();
    Ok(CvReport {
        metrics,
        per_subject,
        selected_features_per_fold,
        config: serde_json::json!({
            "pipeline": "coefficient_svm",
            "kernel": cfg.kernel,
            "c": cfg.c,
            "selection": cfg.selection,
            "svm_tol": cfg.svm_tol,
            "svm_max_iter": cfg.svm_max_iter,
            "t_statistic": "welch",
            "aggregation": "min_abs_jackknife",
            "selection_sweep_bias": "outside_cv",
        }),
        seed,
    })
}

/// Exponent grid for the (C, γ) search; values are 2^exp, γ optionally
/// scaled by a constant factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_exponents: (i32, i32),
    pub gamma_exponents: (i32, i32),
    #[serde(default = "default_gamma_scale")]
    pub gamma_scale: f64,
}

fn default_gamma_scale() -> f64 {
    1.0
}

impl GridSpec {
    /// The default search range: C = 2^0 … 2^20, γ = 2^−15 … 2^0.
    pub fn standard() -> Self {
        Self { c_exponents: (0, 20), gamma_exponents: (-15, 0), gamma_scale: 1.0 }
    }

    pub fn c_values(&self) -> Vec<(i32, f64)> {
        (self.c_exponents.0..=self.c_exponents.1)
            .map(|e| (e, (2.0f64).powi(e)))
            .collect()
    }

    pub fn gamma_values(&self) -> Vec<(i32, f64)> {
        (self.gamma_exponents.0..=self.gamma_exponents.1)
            .map(|e| (e, self.gamma_scale * (2.0f64).powi(e)))
            .collect()
    }
}

/// One cell of the accuracy surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridCell {
    pub c_exp: i32,
    pub gamma_exp: i32,
    pub n_features: usize,
    pub accuracy: f64,
}

/// Grid-search outcome: the argmax configuration (ties broken toward fewer
/// features, then smaller C, then smaller γ), its full report, and the
/// whole accuracy surface.
#[derive(Debug, Clone, Serialize)]
pub struct GridSearchResult {
    pub best_count: usize,
    pub best_c_exp: i32,
    pub best_gamma_exp: i32,
    pub best_accuracy: f64,
    pub report: CvReport,
    pub surface: Vec<GridCell>,
}

/// LOOCV accuracy over every (feature count, C, γ) cell with an RBF kernel.
/// Per-fold jackknife scores are shared across cells: selection depends on
/// the training split only, never on (C, γ).
pub fn grid_search(
    features: &DMatrix<f64>,
    labels: &[ClassLabel],
    ids: &[String],
    grid: &GridSpec,
    counts: &[usize],
    tag: &(dyn Fn(usize) -> FeatureTag + Sync),
    seed: u64,
) -> Result<GridSearchResult, EvalError> {
    if labels.len() != features.nrows() || ids.len() != features.nrows() {
        return Err(EvalError::ShapeMismatch);
    }
    check_cohort(labels)?;
    let c_values = grid.c_values();
    let gamma_values = grid.gamma_values();
    if c_values.is_empty() || gamma_values.is_empty() || counts.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let k = features.nrows();
    let n_cells = counts.len() * c_values.len() * gamma_values.len();

    // each fold returns a correctness bit per cell, in cell order; errors
    // surface in fold order, independent of scheduling
    let fold_results: Vec<Result<Vec<bool>, EvalError>> = (0..k)
        .into_par_iter()
        .map(|test| -> Result<Vec<bool>, EvalError> {
            let train_idx: Vec<usize> = (0..k).filter(|&i| i != test).collect();
            let train = features.select_rows(&train_idx);
            let train_labels: Vec<ClassLabel> = train_idx.iter().map(|&i| labels[i]).collect();
            let fold_err = |source| EvalError::FoldSelection {
                fold: test,
                id: ids[test].clone(),
                source,
            };
            let scores = jackknife_t_scores(&train, &train_labels).map_err(fold_err)?;
            let df = (train_idx.len() as f64 - 2.0).max(1.0);
            let ys: Vec<f64> = train_labels.iter().map(|l| l.y()).collect();
            let mut bits = Vec::with_capacity(n_cells);
            for &count in counts {
                let selection = select(&scores, SelectionMode::Count { count }, df)
                    .map_err(|source| EvalError::FoldSelection {
                        fold: test,
                        id: ids[test].clone(),
                        source,
                    })?;
                let params = zscore_fit(&train, &selection.selected).map_err(|source| {
                    EvalError::FoldSelection { fold: test, id: ids[test].clone(), source }
                })?;
                let samples: Vec<Vec<f64>> = train_idx
                    .iter()
                    .map(|&i| {
                        zscore_apply(
                            features.row(i).transpose().as_slice(),
                            &selection.selected,
                            &params,
                        )
                    })
                    .collect();
                let test_row = zscore_apply(
                    features.row(test).transpose().as_slice(),
                    &selection.selected,
                    &params,
                );
                for &(_, c) in &c_values {
                    for &(_, gamma) in &gamma_values {
                        let tc = TrainConfig::new(c, KernelSpec::Rbf { gamma });
                        let model = svm_train(&samples, &ys, &tc).map_err(|source| {
                            EvalError::FoldTraining { fold: test, id: ids[test].clone(), source }
                        })?;
                        let d = decision_value(&model, &test_row).map_err(|source| {
                            EvalError::FoldTraining { fold: test, id: ids[test].clone(), source }
                        })?;
                        let predicted = if d >= 0.0 { 1.0 } else { -1.0 };
                        bits.push(predicted == labels[test].y());
                    }
                }
            }
            Ok(bits)
        })
        .collect();
    let per_fold: Vec<Vec<bool>> = fold_results.into_iter().collect::<Result<_, _>>()?;

    let mut surface = Vec::with_capacity(n_cells);
    let mut cell = 0usize;
    let mut best: Option<(f64, usize, i32, i32)> = None;
    for &count in counts {
        for &(c_exp, _) in &c_values {
            for &(g_exp, _) in &gamma_values {
                let correct = per_fold.iter().filter(|bits| bits[cell]).count();
                let accuracy = correct as f64 / k as f64;
                surface.push(GridCell { c_exp, gamma_exp: g_exp, n_features: count, accuracy });
                // strict improvement keeps the lexicographically first argmax
                if best.map(|(a, ..)| accuracy > a).unwrap_or(true) {
                    best = Some((accuracy, count, c_exp, g_exp));
                }
                cell += 1;
            }
        }
    }
    let (best_accuracy, best_count, best_c_exp, best_gamma_exp) = best.unwrap();
    let cfg = LoocvConfig::new(
        KernelSpec::Rbf { gamma: grid.gamma_scale * (2.0f64).powi(best_gamma_exp) },
        (2.0f64).powi(best_c_exp),
        SelectionMode::Count { count: best_count },
    );
    let mut report = loocv_tagged(features, labels, ids, &cfg, tag, seed)?;
    report.config["pipeline"] = "coefficient_svm_grid".into();
    report.config["grid"] = serde_json::to_value(grid).unwrap();
    Ok(GridSearchResult {
        best_count,
        best_c_exp,
        best_gamma_exp,
        best_accuracy,
        report,
        surface,
    })
}

/// CSV rendering of the accuracy surface: `C_exp,gamma_exp,n_features,accuracy`.
pub fn surface_csv(surface: &[GridCell]) -> String {
    let mut out = String::from("C_exp,gamma_exp,n_features,accuracy\n");
    for cell in surface {
        out.push_str(&format!(
            "{},{},{},{}\n",
            cell.c_exp, cell.gamma_exp, cell.n_features, cell.accuracy
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::coefficient_tag;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn tag20(j: usize) -> FeatureTag {
        coefficient_tag(j, 20)
    }

    fn synthetic_features(
        k: usize,
        n: usize,
        planted: &[usize],
        effect: f64,
        seed: u64,
    ) -> (DMatrix<f64>, Vec<ClassLabel>, Vec<String>) {
        let labels: Vec<ClassLabel> = (0..k)
            .map(|i| if i % 2 == 0 { ClassLabel::Control } else { ClassLabel::Patient })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(k, n);
        for i in 0..k {
            for j in 0..n {
                let mut v: f64 = rng.sample(StandardNormal);
                if planted.contains(&j) && labels[i] == ClassLabel::Patient {
                    v += effect;
                }
                x[(i, j)] = v;
            }
        }
        let ids = (0..k).map(|i| format!("s{i:03}")).collect();
        (x, labels, ids)
    }

    #[test]
    fn metrics_trivial_cases() {
        let all_right = metrics(&[1.0, -1.0, 1.0], &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(
            (all_right.accuracy, all_right.error, all_right.sensitivity, all_right.specificity),
            (1.0, 0.0, 1.0, 1.0)
        );
        let all_wrong = metrics(&[-1.0, 1.0, -1.0], &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(
            (all_wrong.accuracy, all_wrong.error, all_wrong.sensitivity, all_wrong.specificity),
            (0.0, 1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn metrics_ratios_on_a_mixed_confusion() {
        // 22 of 23 patients and 23 of 25 controls correct
        let mut predicted = Vec::new();
        let mut truth = Vec::new();
        for i in 0..23 {
            truth.push(1.0);
            predicted.push(if i < 22 { 1.0 } else { -1.0 });
        }
        for i in 0..25 {
            truth.push(-1.0);
            predicted.push(if i < 23 { -1.0 } else { 1.0 });
        }
        let m = metrics(&predicted, &truth).unwrap();
        assert!((m.sensitivity - 0.9565).abs() < 5e-5);
        assert!((m.specificity - 0.92).abs() < 1e-12);
        assert!((m.accuracy - 0.9375).abs() < 1e-12);
        assert_eq!(m.accuracy + m.error, 1.0);
    }

    #[test]
    fn metrics_arithmetic_contract() {
        // 3 errors among 48 subjects -> accuracy 0.9375
        let mut predicted = vec![1.0; 24];
        predicted.extend(vec![-1.0; 24]);
        let mut truth = predicted.clone();
        truth[0] = -1.0;
        truth[1] = -1.0;
        truth[30] = 1.0;
        let m = metrics(&predicted, &truth).unwrap();
        assert_eq!(m.accuracy, 45.0 / 48.0);
    }

    #[test]
    fn metrics_validation() {
        assert!(matches!(metrics(&[1.0], &[1.0, 1.0]), Err(EvalError::LengthMismatch)));
        assert!(matches!(metrics(&[1.0, 1.0], &[1.0, 1.0]), Err(EvalError::MissingClass)));
    }

    #[test]
    fn planted_cohort_reaches_high_accuracy() {
        let planted: Vec<usize> = (0..10).map(|i| i * 37).collect();
        let (x, labels, ids) = synthetic_features(24, 400, &planted, 3.0, 11);
        let cfg = LoocvConfig::new(
            KernelSpec::Rbf { gamma: 2f64.powi(-7) },
            2f64.powi(5),
            SelectionMode::Count { count: 10 },
        );
        let report = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 0).unwrap();
        assert!(
            report.metrics.accuracy >= 0.9,
            "accuracy {}",
            report.metrics.accuracy
        );
        assert_eq!(report.per_subject.len(), 24);
        assert!(report.per_subject.iter().all(|s| s.n_selected == 10));
    }

    #[test]
    fn loocv_is_deterministic() {
        let (x, labels, ids) = synthetic_features(16, 120, &[5], 2.0, 3);
        let cfg = LoocvConfig::new(
            KernelSpec::Rbf { gamma: 0.01 },
            8.0,
            SelectionMode::Count { count: 4 },
        );
        let a = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 9).unwrap();
        let b = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn null_cohort_stays_near_chance() {
        // pure-noise features: mean LOOCV accuracy over seeds hovers at 1/2
        let mut accs = Vec::new();
        for seed in 0..10 {
            let (x, labels, ids) = synthetic_features(20, 200, &[], 0.0, 500 + seed);
            let cfg = LoocvConfig::new(
                KernelSpec::Rbf { gamma: 2f64.powi(-7) },
                2f64.powi(5),
                SelectionMode::Count { count: 10 },
            );
            let report = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, seed).unwrap();
            accs.push(report.metrics.accuracy);
        }
        // single runs swing widely (selection on noise); the mean is chance
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((0.30..=0.70).contains(&mean), "mean accuracy {mean}");
    }

    #[test]
    fn pvalue_threshold_mode_runs_in_loop() {
        // the externally-fixed-threshold protocol: selection keeps whatever
        // clears p <= 0.002 inside each fold
        let planted: Vec<usize> = (0..8).collect();
        let (x, labels, ids) = synthetic_features(24, 300, &planted, 3.0, 77);
        let cfg = LoocvConfig::new(
            KernelSpec::Rbf { gamma: 2f64.powi(-6) },
            2f64.powi(4),
            SelectionMode::PValue { threshold: 0.002 },
        );
        let report = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 0).unwrap();
        assert!(report.metrics.accuracy >= 0.85, "accuracy {}", report.metrics.accuracy);
        for s in &report.per_subject {
            assert!(s.n_selected >= 1, "threshold selected nothing in a fold");
        }
    }

    #[test]
    fn errors_are_annotated_with_fold() {
        // class sizes 2/2: every fold's training set breaks the jackknife
        let (x, labels, ids) = synthetic_features(4, 20, &[], 0.0, 1);
        let cfg = LoocvConfig::new(KernelSpec::Linear, 1.0, SelectionMode::Count { count: 2 });
        let err = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 0).unwrap_err();
        assert!(err.to_string().contains("fold 0"), "{err}");
        assert!(err.to_string().contains("s000"), "{err}");
    }

    #[test]
    fn standard_grid_dimensions() {
        let g = GridSpec::standard();
        assert_eq!(g.c_values().len(), 21);
        assert_eq!(g.gamma_values().len(), 16);
        assert_eq!(g.c_values()[0].1, 1.0);
        assert_eq!(g.c_values()[20].1, 1048576.0);
        assert_eq!(g.gamma_values()[0].1, 2f64.powi(-15));
        assert_eq!(g.gamma_values()[15].1, 1.0);
    }

    #[test]
    fn single_cell_grid_equals_plain_loocv() {
        let (x, labels, ids) = synthetic_features(16, 80, &[3, 17], 2.5, 21);
        let grid = GridSpec { c_exponents: (3, 3), gamma_exponents: (-4, -4), gamma_scale: 1.0 };
        let gs = grid_search(&x, &labels, &ids, &grid, &[5], &tag20, 0).unwrap();
        assert_eq!(gs.surface.len(), 1);
        let cfg = LoocvConfig::new(
            KernelSpec::Rbf { gamma: 2f64.powi(-4) },
            2f64.powi(3),
            SelectionMode::Count { count: 5 },
        );
        let plain = loocv_tagged(&x, &labels, &ids, &cfg, &tag20, 0).unwrap();
        assert_eq!(gs.best_accuracy, plain.metrics.accuracy);
        assert_eq!(gs.report.metrics.accuracy, plain.metrics.accuracy);
    }

    #[test]
    fn grid_argmax_tie_breaking_is_lexicographic() {
        let (x, labels, ids) = synthetic_features(12, 60, &[7], 4.0, 31);
        let grid = GridSpec { c_exponents: (0, 2), gamma_exponents: (-6, -5), gamma_scale: 1.0 };
        let gs = grid_search(&x, &labels, &ids, &grid, &[1, 2], &tag20, 0).unwrap();
        // the best cell is the first in (count, C, gamma) order achieving max
        let max = gs
            .surface
            .iter()
            .map(|c| c.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        let first = gs
            .surface
            .iter()
            .find(|c| c.accuracy == max)
            .unwrap();
        assert_eq!(
            (gs.best_count, gs.best_c_exp, gs.best_gamma_exp),
            (first.n_features, first.c_exp, first.gamma_exp)
        );
    }

    #[test]
    fn plateau_on_planted_cohort() {
        // a planted cohort shows a contiguous region of near-optimal cells
        let planted: Vec<usize> = (0..6).collect();
        let (x, labels, ids) = synthetic_features(20, 150, &planted, 3.0, 41);
        let grid = GridSpec { c_exponents: (0, 8), gamma_exponents: (-10, -3), gamma_scale: 1.0 };
        let gs = grid_search(&x, &labels, &ids, &grid, &[6], &tag20, 0).unwrap();
        let max = gs.surface.iter().map(|c| c.accuracy).fold(0.0, f64::max);
        let tolerance = 1.0 / 20.0; // within one misclassification of the max
        let plateau = gs
            .surface
            .iter()
            .filter(|c| c.accuracy >= max - tolerance)
            .count();
        assert!(
            plateau as f64 >= 0.2 * gs.surface.len() as f64,
            "plateau {plateau} of {}",
            gs.surface.len()
        );
    }

    #[test]
    fn surface_csv_format() {
        let cells = [GridCell { c_exp: 0, gamma_exp: -15, n_features: 10, accuracy: 0.9375 }];
        let csv = surface_csv(&cells);
        assert_eq!(csv, "C_exp,gamma_exp,n_features,accuracy\n0,-15,10,0.9375\n");
    }
}
