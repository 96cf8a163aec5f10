//! Reference classifiers on landmark (PDM) features: univariate selection
//! with an SVM, PCA with an SVM, and per-side PCA with Fisher's linear
//! discriminant. All of them reuse the leave-one-out protocol with every
//! data-dependent step (selection, PCA, z-score) refit inside the fold.

use crate::dataset::{ClassLabel, Cohort, FeatureTag, Side};
use crate::evaluate::{metrics, CvReport, EvalError, FoldResult, LoocvConfig, SubjectOutcome};
use crate::pdm::{coeffs_to_pdm, shared_tessellation};
use crate::selection::{zscore_apply, zscore_fit, SelectionMode};
use crate::svm::{decision_value, train as svm_train, TrainConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("requested {requested} components, but only {available} are available")]
    ComponentsOutOfRange { requested: usize, available: usize },
    #[error("class means coincide; the discriminant direction is undefined")]
    CoincidentMeans,
    #[error("within-class scatter is singular even after regularization")]
    SingularScatter,
    #[error("labels length {labels} does not match data rows {rows}")]
    ShapeMismatch { labels: usize, rows: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Pdm(#[from] crate::pdm::PdmError),
}

/// Principal-component model fitted on training rows.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// Orthonormal components, one per row, by descending eigenvalue.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Top-k principal components of the rows of `x`.
///
/// When the dimension exceeds the subject count the eigenproblem is solved
/// on the K x K Gram matrix of centered rows (the covariance has rank at
/// most K−1, with the same nonzero spectrum). Component signs follow a
/// fixed convention: the entry of largest magnitude is made positive.
pub fn pca_fit(x: &DMatrix<f64>, k: usize) -> Result<PcaModel, BaselineError> {
    let rows = x.nrows();
    let dim = x.ncols();
    let available = rows.saturating_sub(1).min(dim);
    if k == 0 || k > available {
        return Err(BaselineError::ComponentsOutOfRange { requested: k, available });
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let (eigenvalues, components) = if dim > rows {
        // dual route: eigen of the Gram matrix, lifted back to feature space
        let gram = &centered * centered.transpose() / (rows as f64 - 1.0);
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut comps = DMatrix::zeros(k, dim);
        let mut vals = Vec::with_capacity(k);
        for (slot, &i) in order.iter().take(k).enumerate() {
            let lambda = eig.eigenvalues[i].max(0.0);
            if lambda <= 1e-12 * eig.eigenvalues[order[0]].max(1e-300) {
                return Err(BaselineError::ComponentsOutOfRange { requested: k, available: slot });
            }
            let lifted = centered.transpose() * eig.eigenvectors.column(i);
            let lifted = lifted.normalize();
            comps.set_row(slot, &lifted.transpose());
            vals.push(lambda);
        }
        (vals, comps)
    } else {
        let cov = centered.transpose() * &centered / (rows as f64 - 1.0);
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut comps = DMatrix::zeros(k, dim);
        let mut vals = Vec::with_capacity(k);
        for (slot, &i) in order.iter().take(k).enumerate() {
            comps.set_row(slot, &eig.eigenvectors.column(i).transpose());
            vals.push(eig.eigenvalues[i].max(0.0));
        }
        (vals, comps)
    };
    let mut components = components;
    for mut row in components.row_iter_mut() {
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            row.neg_mut();
        }
    }
    Ok(PcaModel { mean, components, eigenvalues })
}

/// Project one row onto the component scores.
pub fn pca_project(model: &PcaModel, row: &[f64]) -> Vec<f64> {
    let x = DVector::from_column_slice(row) - &model.mean;
    (&model.components * x).iter().cloned().collect()
}

/// Fisher's linear discriminant in the projected space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FldModel {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

/// w = S_w⁻¹ (μ₊ − μ₋), threshold at the midpoint of the projected means.
pub fn fld_train(z: &DMatrix<f64>, labels: &[ClassLabel]) -> Result<FldModel, BaselineError> {
    let rows = z.nrows();
    let dim = z.ncols();
    if labels.len() != rows {
        return Err(BaselineError::ShapeMismatch { labels: labels.len(), rows });
    }
    let mut mean_pos = DVector::zeros(dim);
    let mut mean_neg = DVector::zeros(dim);
    let mut n_pos = 0.0;
    let mut n_neg = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = z.row(i).transpose();
        if label == ClassLabel::Patient {
            mean_pos += row;
            n_pos += 1.0;
        } else {
            mean_neg += row;
            n_neg += 1.0;
        }
    }
    mean_pos /= n_pos;
    mean_neg /= n_neg;
    let delta = &mean_pos - &mean_neg;
    if delta.norm() < 1e-12 {
        return Err(BaselineError::CoincidentMeans);
    }
    let mut scatter = DMatrix::zeros(dim, dim);
    for (i, &label) in labels.iter().enumerate() {
        let mu = if label == ClassLabel::Patient { &mean_pos } else { &mean_neg };
        let d = z.row(i).transpose() - mu;
        scatter += &d * d.transpose();
    }
    let eps = 1e-9 * scatter.trace() / dim as f64;
    for i in 0..dim {
        scatter[(i, i)] += eps.max(1e-300);
    }
    let weights = scatter
        .lu()
        .solve(&delta)
        .ok_or(BaselineError::SingularScatter)?;
    let threshold = 0.5 * (weights.dot(&mean_pos) + weights.dot(&mean_neg));
    Ok(FldModel { weights: weights.iter().cloned().collect(), threshold })
}

/// Signed distance from the threshold along w (positive side = patients).
pub fn fld_decision(model: &FldModel, row: &[f64]) -> f64 {
    let proj: f64 = model.weights.iter().zip(row).map(|(w, x)| w * x).sum();
    proj - model.threshold
}

/// ±1 prediction; sign(0) = +1.
pub fn fld_predict(model: &FldModel, row: &[f64]) -> f64 {
    if fld_decision(model, row) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Which landmark-feature pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum PdmVariant {
    /// Jackknife selection + z-score + SVM on flattened landmark features,
    /// both sides concatenated.
    UnivariateSvm { subdivision: u32, count: usize },
    /// PCA scores (z-scored) + SVM, both sides concatenated.
    PcaSvm { subdivision: u32, components: usize },
    /// Per-side PCA + Fisher's linear discriminant.
    PcaFld { subdivision: u32, components: usize, side: Side },
}

/// Flattened landmark features of one cohort side (or both): vertex-major,
/// axes innermost, left before right.
pub fn pdm_features(
    cohort: &Cohort,
    subdivision: u32,
    sides: &[Side],
) -> Result<DMatrix<f64>, BaselineError> {
    let tess = shared_tessellation(subdivision)?;
    let per_side = 3 * tess.len();
    let mut out = DMatrix::zeros(cohort.subjects.len(), per_side * sides.len());
    for (i, subject) in cohort.subjects.iter().enumerate() {
        for (s, &side) in sides.iter().enumerate() {
            let pdm = coeffs_to_pdm(subject.side(side), &tess);
            for (v, p) in pdm.landmarks().iter().enumerate() {
                let base = s * per_side + v * 3;
                out[(i, base)] = p.x;
                out[(i, base + 1)] = p.y;
                out[(i, base + 2)] = p.z;
            }
        }
    }
    Ok(out)
}

fn landmark_tag(feature: usize, n_vertices: usize, sides: &[Side]) -> FeatureTag {
    let per_side = 3 * n_vertices;
    let side = sides[feature / per_side];
    let rem = feature % per_side;
    let axis = ['x', 'y', 'z'][rem % 3];
    FeatureTag::Landmark { side, vertex: rem / 3, axis }
}

/// Run one comparison pipeline under LOOCV. The SVM variants use the given
/// (kernel, C); the FLD variant ignores them.
pub fn pdm_pipeline(
    cohort: &Cohort,
    variant: PdmVariant,
    svm_config: &LoocvConfig,
    seed: u64,
) -> Result<CvReport, BaselineError> {
    let labels = cohort.labels();
    let ids = cohort.ids();
    match variant {
        PdmVariant::UnivariateSvm { subdivision, count } => {
            let sides = [Side::Left, Side::Right];
            let features = pdm_features(cohort, subdivision, &sides)?;
            let tess_len = shared_tessellation(subdivision)?.len();
            let mut cfg = *svm_config;
            cfg.selection = SelectionMode::Count { count };
            let mut report = crate::evaluate::loocv_tagged(
                &features,
                &labels,
                &ids,
                &cfg,
                &move |j| landmark_tag(j, tess_len, &sides),
                seed,
            )?;
            report.config["pipeline"] = "pdm_univariate_svm".into();
            report.config["subdivision"] = subdivision.into();
            Ok(report)
        }
        PdmVariant::PcaSvm { subdivision, components } => {
            let sides = [Side::Left, Side::Right];
            let features = pdm_features(cohort, subdivision, &sides)?;
            pca_loocv(
                &features,
                &labels,
                &ids,
                components,
                PcaClassifier::Svm(svm_config),
                serde_json::json!({
                    "pipeline": "pdm_pca_svm",
                    "subdivision": subdivision,
                    "components": components,
                    "kernel": svm_config.kernel,
                    "c": svm_config.c,
                    "pca_zscore": true,
                }),
                seed,
            )
        }
        PdmVariant::PcaFld { subdivision, components, side } => {
            let features = pdm_features(cohort, subdivision, &[side])?;
            pca_loocv(
                &features,
                &labels,
                &ids,
                components,
                PcaClassifier::Fld,
                serde_json::json!({
                    "pipeline": "pdm_pca_fld",
                    "subdivision": subdivision,
                    "components": components,
                    "side": side,
                    "pca_zscore": false,
                }),
                seed,
            )
        }
    }
}

enum PcaClassifier<'a> {
    Svm(&'a LoocvConfig),
    Fld,
}

fn pca_loocv(
    features: &DMatrix<f64>,
    labels: &[ClassLabel],
    ids: &[String],
    components: usize,
    classifier: PcaClassifier,
    config: serde_json::Value,
    seed: u64,
) -> Result<CvReport, BaselineError> {
    let k = features.nrows();
    let folds: Vec<FoldResult> = crate::evaluate::run_folds(k, |test| {
        let train_idx: Vec<usize> = (0..k).filter(|&i| i != test).collect();
        let train = features.select_rows(&train_idx);
        let train_labels: Vec<ClassLabel> = train_idx.iter().map(|&i| labels[i]).collect();
        let annotate = |message: String| EvalError::FoldOther {
            fold: test,
            id: ids[test].clone(),
            message,
        };
        let pca = pca_fit(&train, components).map_err(|e| annotate(e.to_string()))?;
        let mut projected = DMatrix::zeros(train_idx.len(), components);
        for (r, &i) in train_idx.iter().enumerate() {
            let scores = pca_project(&pca, features.row(i).transpose().as_slice());
            for (c, v) in scores.into_iter().enumerate() {
                projected[(r, c)] = v;
            }
        }
        let test_scores = pca_project(&pca, features.row(test).transpose().as_slice());
        match &classifier {
            PcaClassifier::Svm(cfg) => {
                let all: Vec<usize> = (0..components).collect();
                let params = zscore_fit(&projected, &all).map_err(|source| {
                    EvalError::FoldSelection { fold: test, id: ids[test].clone(), source }
                })?;
                let samples: Vec<Vec<f64>> = (0..projected.nrows())
                    .map(|r| {
                        zscore_apply(projected.row(r).transpose().as_slice(), &all, &params)
                    })
                    .collect();
                let ys: Vec<f64> = train_labels.iter().map(|l| l.y()).collect();
                let mut tc = TrainConfig::new(cfg.c, cfg.kernel);
                tc.tol = cfg.svm_tol;
                tc.max_iter = cfg.svm_max_iter;
                let model = svm_train(&samples, &ys, &tc).map_err(|source| {
                    EvalError::FoldTraining { fold: test, id: ids[test].clone(), source }
                })?;
                let test_row = zscore_apply(&test_scores, &all, &params);
                let decision = decision_value(&model, &test_row).map_err(|source| {
                    EvalError::FoldTraining { fold: test, id: ids[test].clone(), source }
                })?;
                Ok(FoldResult {
                    predicted: if decision >= 0.0 { 1.0 } else { -1.0 },
                    decision,
                    selected: (0..components).collect(),
                })
            }
            PcaClassifier::Fld => {
                let model =
                    fld_train(&projected, &train_labels).map_err(|e| annotate(e.to_string()))?;
                let decision = fld_decision(&model, &test_scores);
                Ok(FoldResult {
                    predicted: if decision >= 0.0 { 1.0 } else { -1.0 },
                    decision,
                    selected: (0..components).collect(),
                })
            }
        }
    })?;

    let predicted: Vec<f64> = folds.iter().map(|f| f.predicted).collect();
    let truth: Vec<f64> = labels.iter().map(|l| l.y()).collect();
    let m = metrics(&predicted, &truth)?;
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
        .map(|f| f.selected.iter().map(|&rank| FeatureTag::Component { rank }).collect())
        .collect();
    Ok(CvReport {
        metrics: m,
        per_subject,
        selected_features_per_fold,
        config,
        seed,
    })
}

/// Accuracy over a sweep of component counts (the eigenvector-count curve).
pub fn pca_component_sweep(
    cohort: &Cohort,
    variant_for: impl Fn(usize) -> PdmVariant,
    svm_config: &LoocvConfig,
    counts: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64)>, BaselineError> {
    counts
        .iter()
        .map(|&count| {
            let report = pdm_pipeline(cohort, variant_for(count), svm_config, seed)?;
            Ok((count, report.metrics.accuracy))
        })
        .collect()
}
