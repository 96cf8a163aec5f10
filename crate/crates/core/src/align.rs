//! Pose normalization and rigid alignment: translation removal, rotation
//! normalization from the first-order ellipsoid, closed-form rigid
//! Procrustes superposition, and iterative template averaging.

use crate::pdm::PdmSurface;
use crate::spharm::{
    basis_count, synthesize, BasisIndex, CoefficientSet, SphericalCoordinate, SpharmError,
};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("rotation matrix is not special orthogonal (|R^T R - I| = {orthogonality:e}, det = {det})")]
    NotARotation { orthogonality: f64, det: f64 },
    #[error("degree-1 coefficients are rank deficient (singular values {0:?})")]
    RankDeficientEllipsoid([f64; 3]),
    #[error("first-order ellipsoid axes are ambiguous: singular values {0:?} too close")]
    AmbiguousAxes([f64; 3]),
    #[error("coefficient set must include degree 1 for ellipsoid normalization")]
    MissingDegreeOne,
    #[error("landmark sets must have equal size >= 3; got {source_len} and {target_len}")]
    LandmarkMismatch { source_len: usize, target_len: usize },
    #[error("source landmarks are collinear; rotation is not determined")]
    DegenerateConfiguration,
    #[error("template building needs at least two subjects")]
    TooFewSubjects,
    #[error(transparent)]
    Spharm(#[from] SpharmError),
}

/// Proper rigid motion: rotation then translation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, AlignError> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(AlignError::NotARotation { orthogonality: orth, det });
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Composition: `self` after `other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Population-average landmark surface.
#[derive(Debug, Clone)]
pub struct Template {
    pub landmarks: Vec<Vector3<f64>>,
    pub iterations: u32,
    pub converged: bool,
}

/// Zero the degree-0 coefficient; the synthesized surface centroid under the
/// uniform sphere measure moves to the origin (the constant harmonic is the
/// only basis function with nonzero mean).
pub fn remove_translation(coeffs: &CoefficientSet) -> CoefficientSet {
    let mut out = coeffs.clone();
    out.set(BasisIndex::new(0, 0).unwrap(), Vector3::zeros());
    out
}

/// Rotate every coefficient vector by R and add the translation to the
/// degree-0 term (scaled by 2√π so that the synthesized offset equals t).
pub fn apply_transform_coeffs(coeffs: &CoefficientSet, t: &RigidTransform) -> CoefficientSet {
    let rotated = coeffs.coeffs().iter().map(|c| t.rotation * c).collect();
    let mut out =
        CoefficientSet::from_coeffs(coeffs.max_degree(), rotated).expect("same length");
    let zero = BasisIndex::new(0, 0).unwrap();
    let scale = 2.0 * std::f64::consts::PI.sqrt();
    out.set(zero, out.get(zero) + t.translation * scale);
    out
}

/// Re-express a coefficient set under a rotation of the parameter sphere:
/// the new surface is v'(ω) = v(ρ(ω)) with ρ the given rotation of unit
/// directions. Because rotations preserve each degree subspace, resampling
/// at the rotated parameters and refitting recovers the rotated expansion
/// exactly (up to least-squares conditioning).
pub fn rotate_parameterization(
    coeffs: &CoefficientSet,
    rotation: &Matrix3<f64>,
) -> Result<CoefficientSet, AlignError> {
    let n = resample_subdivision(coeffs.max_degree());
    let tess = crate::pdm::shared_tessellation(n).expect("fixed subdivision is valid");
    let rotated_params: Vec<SphericalCoordinate> = tess
        .params()
        .iter()
        .map(|c| SphericalCoordinate::from_unit_vector(&(rotation * c.unit_vector())))
        .collect();
    let sampled = synthesize(coeffs, &rotated_params);
    let fitter = crate::pdm::shared_basis_fit(n, coeffs.max_degree())?;
    Ok(fitter.solve(&sampled.points))
}

fn resample_subdivision(max_degree: u32) -> u32 {
    // 10n^2 + 2 >= 4 (L+1)^2 keeps the refit well conditioned; 20 covers
    // every supported degree and matches the standard landmark count.
    let needed = 4 * basis_count(max_degree);
    let mut n = 20u32;
    while ((10 * n * n + 2) as usize) < needed {
        n += 1;
    }
    n
}

/// Normalize the parameterization's rotation from the first-order ellipsoid:
/// after the returned rotation is applied, the θ=0 pole of the parameter
/// sphere maps to the longest principal axis of the degree-1 ellipsoid and
/// φ=0 to the second axis.
///
/// Sign convention (the SVD leaves a 4-fold sign ambiguity): the
/// longest-axis parameter direction is flipped to have positive dot product
/// with +z (ties fall back to +x, then +y), the second-axis direction with
/// +x (ties: +y, then +z); the third axis is their cross product, so the
/// rotation is always proper.
pub fn ellipsoid_rotation(
    coeffs: &CoefficientSet,
) -> Result<(CoefficientSet, RigidTransform), AlignError> {
    if coeffs.max_degree() < 1 {
        return Err(AlignError::MissingDegreeOne);
    }
    let m = degree_one_matrix(coeffs);
    let svd = m.svd(true, true);
    let s = svd.singular_values;
    let sv = [s[0], s[1], s[2]];
    if sv[2] < 1e-8 * sv[0] {
        return Err(AlignError::RankDeficientEllipsoid(sv));
    }
    if (sv[0] - sv[1]) < 1e-8 * sv[0] || (sv[1] - sv[2]) < 1e-8 * sv[0] {
        return Err(AlignError::AmbiguousAxes(sv));
    }
    let v_t = svd.v_t.expect("svd with v");
    let mut v1: Vector3<f64> = v_t.row(0).transpose();
    let mut v2: Vector3<f64> = v_t.row(1).transpose();
    orient(&mut v1, [2, 0, 1]);
    orient(&mut v2, [0, 1, 2]);
    let v3 = v1.cross(&v2);
    let mut rotation = Matrix3::zeros();
    rotation.set_column(0, &v2);
    rotation.set_column(1, &v3);
    rotation.set_column(2, &v1);
    let normalized = rotate_parameterization(coeffs, &rotation)?;
    Ok((normalized, RigidTransform::new(rotation, Vector3::zeros())?))
}

/// The 3x3 map M with v₁(u) = √(3/4π) · M · u for the degree-1 part of the
/// expansion; u is the unit direction of the parameter point.
fn degree_one_matrix(coeffs: &CoefficientSet) -> Matrix3<f64> {
    let c_m1 = coeffs.get(BasisIndex::new(1, -1).unwrap());
    let c_0 = coeffs.get(BasisIndex::new(1, 0).unwrap());
    let c_p1 = coeffs.get(BasisIndex::new(1, 1).unwrap());
    // basis values at direction u: (Y_1^-1, Y_1^0, Y_1^1) ∝ (-u_y, u_z, -u_x)
    let mut m = Matrix3::zeros();
    m.set_column(0, &(-c_p1));
    m.set_column(1, &(-c_m1));
    m.set_column(2, &c_0);
    m
}

fn orient(v: &mut Vector3<f64>, axis_preference: [usize; 3]) {
    for axis in axis_preference {
        if v[axis].abs() > 1e-12 {
            if v[axis] < 0.0 {
                *v = -*v;
            }
            return;
        }
    }
}

/// Closed-form least-squares rigid superposition of `source` onto `target`
/// (rotation + translation, no scaling, reflections excluded).
pub fn procrustes_rigid(
    source: &PdmSurface,
    target: &PdmSurface,
) -> Result<RigidTransform, AlignError> {
    procrustes_points(source.landmarks(), target.landmarks())
}

/// Landmark-slice form of [`procrustes_rigid`].
pub fn procrustes_points(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<RigidTransform, AlignError> {
    if source.len() != target.len() || source.len() < 3 {
        return Err(AlignError::LandmarkMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    let n = source.len() as f64;
    let sc = source.iter().sum::<Vector3<f64>>() / n;
    let tc = target.iter().sum::<Vector3<f64>>() / n;
    let mut cross = Matrix3::zeros();
    let mut source_scatter = Matrix3::zeros();
    for (s, t) in source.iter().zip(target.iter()) {
        let sd = s - sc;
        let td = t - tc;
        cross += sd * td.transpose();
        source_scatter += sd * sd.transpose();
    }
    // collinear (or coincident) source: second singular value vanishes
    let src_svals = source_scatter.svd(false, false).singular_values;
    if src_svals[1] <= 1e-12 * src_svals[0].max(1e-300) {
        return Err(AlignError::DegenerateConfiguration);
    }
    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v");
    let d = (v_t.transpose() * u.transpose()).determinant();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = v_t.transpose() * correction * u.transpose();
    let translation = tc - rotation * sc;
    RigidTransform::new(rotation, translation)
}

/// Iterative average template: align every subject to the current template,
/// re-average, and repeat until the RMS landmark change drops below `tol`
/// (or `max_iter` is reached; non-convergence is reported, not an error).
/// Returns the template and the per-subject transforms onto it.
pub fn build_template(
    population: &[PdmSurface],
    tol: f64,
    max_iter: u32,
) -> Result<(Template, Vec<RigidTransform>), AlignError> {
    if population.len() < 2 {
        return Err(AlignError::TooFewSubjects);
    }
    let n_landmarks = population[0].len();
    for s in population {
        if s.len() != n_landmarks {
            return Err(AlignError::LandmarkMismatch {
                source_len: s.len(),
                target_len: n_landmarks,
            });
        }
    }
    let average = |surfaces: &[Vec<Vector3<f64>>]| -> Vec<Vector3<f64>> {
        let mut mean = vec![Vector3::zeros(); n_landmarks];
        for s in surfaces {
            for (m, p) in mean.iter_mut().zip(s.iter()) {
                *m += p;
            }
        }
        let k = surfaces.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        mean
    };

    let raw: Vec<Vec<Vector3<f64>>> =
        population.iter().map(|s| s.landmarks().to_vec()).collect();
    let mut template = average(&raw);
    let mut transforms = vec![RigidTransform::identity(); population.len()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let per_subject: Vec<Result<(RigidTransform, Vec<Vector3<f64>>), AlignError>> =
            population
                .par_iter()
                .map(|subject| {
                    let t = procrustes_points(subject.landmarks(), &template)?;
                    let aligned =
                        subject.landmarks().iter().map(|p| t.apply_point(p)).collect();
                    Ok((t, aligned))
                })
                .collect();
        let results: Vec<(RigidTransform, Vec<Vector3<f64>>)> =
            per_subject.into_iter().collect::<Result<_, _>>()?;
        let aligned: Vec<Vec<Vector3<f64>>> = results.iter().map(|(_, a)| a.clone()).collect();
        transforms = results.into_iter().map(|(t, _)| t).collect();
        let new_template = average(&aligned);
        let rms = (template
            .iter()
            .zip(new_template.iter())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / n_landmarks as f64)
            .sqrt();
        template = new_template;
        if rms < tol {
            converged = true;
            break;
        }
    }
    Ok((Template { landmarks: template, iterations, converged }, transforms))
}
