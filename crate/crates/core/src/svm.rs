//! Soft-margin binary SVM: SMO solver for the dual problem, linear and RBF
//! kernels, deterministic maximal-violating-pair working-set selection.
//!
//! The solver minimizes f(α) = ½ αᵀQα − Σα subject to yᵀα = 0 and
//! 0 ≤ α ≤ C, with Q_ij = y_i y_j K(x_i, x_j). Convergence is declared when
//! the maximal KKT violation m(α) − M(α) drops to `tol`. Ties in the pair
//! selection break toward the lower index, so training is deterministic.
//! sign(0) is defined as +1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("vectors have different lengths: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("cost parameter must be positive, got {0}")]
    BadCost(f64),
    #[error("rbf gamma must be finite and positive, got {0}")]
    BadGamma(f64),
    #[error("labels must be -1 or +1, got {0}")]
    BadLabel(f64),
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    fn validate(&self) -> Result<(), SvmError> {
        if let KernelSpec::Rbf { gamma } = self {
            if !gamma.is_finite() || *gamma <= 0.0 {
                return Err(SvmError::BadGamma(*gamma));
            }
        }
        Ok(())
    }
}

/// Kernel evaluation; linear is the dot product, rbf is exp(−γ‖u−v‖²).
pub fn kernel_eval(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64, SvmError> {
    if u.len() != v.len() {
        return Err(SvmError::DimensionMismatch(u.len(), v.len()));
    }
    Ok(kernel_unchecked(spec, u, v))
}

fn kernel_unchecked(spec: &KernelSpec, u: &[f64], v: &[f64]) -> f64 {
    match spec {
        KernelSpec::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// Solver knobs; the defaults match the tolerances used throughout.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub c: f64,
    pub kernel: KernelSpec,
    pub tol: f64,
    pub max_iter: usize,
    /// Record the dual objective after every working-pair update.
    pub record_objective: bool,
}

impl TrainConfig {
    pub fn new(c: f64, kernel: KernelSpec) -> Self {
        Self { c, kernel, tol: 1e-3, max_iter: 200_000, record_objective: false }
    }
}

/// Trained model; immutable.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub support_vectors: Vec<Vec<f64>>,
    /// α_k y_k per support vector.
    pub dual_weights: Vec<f64>,
    /// Training-set indices of the support vectors.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub c: f64,
    /// Final maximal KKT violation m(α) − M(α).
    pub kkt_violation: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective Σα − ½αᵀQα at the returned point.
    pub dual_objective: f64,
    /// Objective after each update, when requested.
    pub objective_trace: Option<Vec<f64>>,
}

/// Train by sequential minimal optimization. On hitting `max_iter` the model
/// is still returned, flagged unconverged, with the achieved violation.
pub fn train(samples: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<SvmModel, SvmError> {
    cfg.kernel.validate()?;
    if cfg.c <= 0.0 || !cfg.c.is_finite() {
        return Err(SvmError::BadCost(cfg.c));
    }
    let k = samples.len();
    if k < 2 {
        return Err(SvmError::TooFewSamples(k));
    }
    if y.len() != k {
        return Err(SvmError::DimensionMismatch(y.len(), k));
    }
    for &label in y {
        if label != 1.0 && label != -1.0 {
            return Err(SvmError::BadLabel(label));
        }
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(SvmError::SingleClass);
    }
    let dim = samples[0].len();
    for s in samples {
        if s.len() != dim {
            return Err(SvmError::DimensionMismatch(s.len(), dim));
        }
    }

    // dense Gram matrix; cohort sizes here stay well under 200
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = kernel_unchecked(&cfg.kernel, &samples[i], &samples[j]);
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }

    let c = cfg.c;
    let mut alpha = vec![0.0f64; k];
    // gradient of f(α) = ½αᵀQα − Σα, starting at α = 0
    let mut grad = vec![-1.0f64; k];
    let mut objective = 0.0f64; // maximization form W(α) = Σα − ½αᵀQα
    let mut trace = cfg.record_objective.then(Vec::new);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;

    while iterations < cfg.max_iter {
        // maximal violating pair over I_up / I_low on −y∇f
        let mut i_up = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_low = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..k {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = t;
            }
        }
        violation = m_up - m_low;
        if violation <= cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_up, j_low);

        // two-variable subproblem along α_i += y_i δ, α_j −= y_j δ
        let eta = gram[i][i] + gram[j][j] - 2.0 * gram[i][j];
        let unclipped = violation / eta.max(1e-12);
        let max_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let max_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let delta = unclipped.min(max_i).min(max_j);
        let di = y[i] * delta;
        let dj = -y[j] * delta;
        alpha[i] += di;
        alpha[j] += dj;
        for t in 0..k {
            grad[t] += y[t] * (y[i] * gram[t][i] * di + y[j] * gram[t][j] * dj);
        }
        // ΔW = δ(m_up − m_low) − ½ η δ²  (exact for the quadratic)
        objective += delta * violation - 0.5 * eta * delta * delta;
        if let Some(tr) = trace.as_mut() {
            tr.push(objective);
        }
    }

    // bias from free support vectors; fall back to the violation midpoint
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..k {
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += -y[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..k {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up {
                m_up = m_up.max(v);
            }
            if in_low {
                m_low = m_low.min(v);
            }
        }
        0.5 * (m_up + m_low)
    };

    let mut support_vectors = Vec::new();
    let mut dual_weights = Vec::new();
    let mut support_indices = Vec::new();
    for t in 0..k {
        if alpha[t] > 1e-12 {
            support_vectors.push(samples[t].clone());
            dual_weights.push(alpha[t] * y[t]);
            support_indices.push(t);
        }
    }
    Ok(SvmModel {
        kernel: cfg.kernel,
        support_vectors,
        dual_weights,
        support_indices,
        bias,
        c,
        kkt_violation: violation,
        converged,
        iterations,
        dual_objective: objective,
        objective_trace: trace,
    })
}

/// Σ_k (α_k y_k) K(sv_k, x) + b.
pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    let mut sum = model.bias;
    for (sv, w) in model.support_vectors.iter().zip(&model.dual_weights) {
        sum += w * kernel_eval(&model.kernel, sv, x)?;
    }
    Ok(sum)
}

/// Class label in ±1; sign(0) = +1.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    Ok(if decision_value(model, x)? >= 0.0 { 1.0 } else { -1.0 })
}

/// Largest KKT violation of the model over a labelled set (its training set,
/// normally): α=0 points must satisfy y·f ≥ 1−v, bounded ones y·f ≤ 1+v,
/// free support vectors |y·f − 1| ≤ v.
pub fn max_kkt_violation(model: &SvmModel, samples: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut alpha = vec![0.0; samples.len()];
    for (slot, &idx) in model.support_indices.iter().enumerate() {
        alpha[idx] = model.dual_weights[slot].abs();
    }
    let mut worst = 0.0f64;
    for (t, sample) in samples.iter().enumerate() {
        let margin = y[t] * decision_value(model, sample).expect("dimensions match");
        let v = if alpha[t] <= 1e-12 {
            1.0 - margin // must be >= 1
        } else if alpha[t] >= model.c - 1e-12 {
            margin - 1.0 // must be <= 1
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// |Σ α_k y_k|, which the equality constraint keeps at zero.
pub fn equality_residual(model: &SvmModel) -> f64 {
    model.dual_weights.iter().sum::<f64>().abs()
}
