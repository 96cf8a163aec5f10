//! Seeded synthetic cohorts with a known base shape, per-subject coefficient
//! noise, optional planted group effects, and per-subject rigid jitter —
//! the ground truth every pipeline stage is validated against.
//!
//! Two planting mechanisms exist. Geometric deformations add a Gaussian
//! bump along the radial direction in landmark space and refit to
//! coefficients, so "localized" is geometrically true; they drive the
//! group-statistics checks. Coefficient shifts add a constant to chosen
//! coefficient components, giving exact control over informative-feature
//! count and effect size; they drive the selection and classification
//! checks.

use crate::align::{apply_transform_coeffs, RigidTransform};
use crate::dataset::{feature_index, ClassLabel, Side, SubjectRecord};
use crate::pdm::{shared_basis_fit, shared_tessellation};
use crate::runtime::derive_rng;
use crate::spharm::{
    synthesize, BasisIndex, CoefficientSet, SphericalCoordinate, SpharmError,
};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("group sizes must be at least 2, got {controls} controls / {patients} patients")]
    GroupTooSmall { controls: usize, patients: usize },
    #[error("coefficient noise must be non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("deformation width must be positive, got {0}")]
    BadWidth(f64),
    #[error("ellipsoid semi-axes must be positive, got ({0}, {1}, {2})")]
    BadSemiAxes(f64, f64, f64),
    #[error("coefficient shift targets degree {got}, but the cohort degree is {max}")]
    ShiftOutOfRange { got: u32, max: u32 },
    #[error(transparent)]
    Spharm(#[from] SpharmError),
    #[error(transparent)]
    Pdm(#[from] crate::pdm::PdmError),
}

/// A localized radial bump applied to one group.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeformationSpec {
    pub center_theta: f64,
    pub center_phi: f64,
    /// Angular width σ_w of the Gaussian profile, radians.
    pub width: f64,
    /// Signed amplitude along the radial direction, mm.
    pub amplitude: f64,
    pub group: ClassLabel,
    pub side: Side,
}

/// A constant offset on one coefficient component of one group.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoefficientShift {
    pub side: Side,
    pub l: u32,
    pub m: i32,
    /// 0 = x, 1 = y, 2 = z.
    pub axis: usize,
    pub delta: f64,
    pub group: ClassLabel,
}

/// Everything needed to generate a cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortSpec {
    pub name: String,
    pub controls: usize,
    pub patients: usize,
    #[serde(rename = "L")]
    pub max_degree: u32,
    /// Standard deviation of the iid Gaussian noise added to every
    /// coefficient component, both sides.
    pub coeff_noise: f64,
    /// Maximum rotation angle of the per-subject rigid jitter, radians.
    #[serde(default)]
    pub rotation_jitter: f64,
    /// Half-width of the uniform per-axis translation jitter, mm.
    #[serde(default)]
    pub translation_jitter: f64,
    #[serde(default)]
    pub deformations: Vec<DeformationSpec>,
    #[serde(default)]
    pub coefficient_shifts: Vec<CoefficientShift>,
    /// Tessellation used to apply geometric deformations before refitting.
    #[serde(default = "default_deform_subdivision")]
    pub deform_subdivision: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_deform_subdivision() -> u32 {
    20
}

/// Ground truth emitted next to a generated cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Feature positions of every planted coefficient shift.
    pub planted_features: Vec<usize>,
    /// Vertices inside the half-maximum disc of each deformation.
    pub affected_vertices: Vec<Vec<usize>>,
    pub deformations: Vec<DeformationSpec>,
    pub coefficient_shifts: Vec<CoefficientShift>,
    pub seed: u64,
}

/// Generate a cohort: N = controls + patients subjects, controls first.
///
/// Per subject, in order: base + coefficient noise, planted coefficient
/// shifts for the subject's group, geometric deformations (bump in landmark
/// space, refit at the cohort degree), then the rigid jitter. Each subject
/// draws from its own generator derived from (seed, subject index), so the
/// cohort is reproducible and parallel generation is order-independent.
pub fn make_cohort(
    spec: &CohortSpec,
    base: &CoefficientSet,
) -> Result<(Vec<SubjectRecord>, GroundTruth), SynthError> {
    if spec.controls < 2 || spec.patients < 2 {
        return Err(SynthError::GroupTooSmall {
            controls: spec.controls,
            patients: spec.patients,
        });
    }
    if spec.coeff_noise < 0.0 {
        return Err(SynthError::NegativeNoise(spec.coeff_noise));
    }
    for d in &spec.deformations {
        if d.width <= 0.0 {
            return Err(SynthError::BadWidth(d.width));
        }
    }
    for s in &spec.coefficient_shifts {
        if s.l > spec.max_degree {
            return Err(SynthError::ShiftOutOfRange { got: s.l, max: spec.max_degree });
        }
    }
    let tess = shared_tessellation(spec.deform_subdivision)?;
    let needs_refit = !spec.deformations.is_empty();
    let fitter = if needs_refit {
        Some(shared_basis_fit(spec.deform_subdivision, spec.max_degree)?)
    } else {
        None
    };

    let total = spec.controls + spec.patients;
    let subject_results: Vec<Result<SubjectRecord, SynthError>> = (0..total)
        .into_par_iter()
        .map(|i| -> Result<SubjectRecord, SynthError> {
            let label = if i < spec.controls { ClassLabel::Control } else { ClassLabel::Patient };
            let mut rng = derive_rng(spec.seed, i as u64);
            let mut sides = [Side::Left, Side::Right].map(|side| {
                let mut set = resize_to(base, spec.max_degree);
                for c in set.coeffs_mut() {
                    c.x += spec.coeff_noise * rng.sample::<f64, _>(StandardNormal);
                    c.y += spec.coeff_noise * rng.sample::<f64, _>(StandardNormal);
                    c.z += spec.coeff_noise * rng.sample::<f64, _>(StandardNormal);
                }
                (side, set)
            });
            for (side, set) in sides.iter_mut() {
                for shift in &spec.coefficient_shifts {
                    if shift.group == label && shift.side == *side {
                        let idx = BasisIndex::new(shift.l, shift.m)
                            .map_err(SynthError::Spharm)?;
                        let mut v = set.get(idx);
                        v[shift.axis] += shift.delta;
                        set.set(idx, v);
                    }
                }
                let bumps: Vec<&DeformationSpec> = spec
                    .deformations
                    .iter()
                    .filter(|d| d.group == label && d.side == *side)
                    .collect();
                if !bumps.is_empty() {
                    let mut landmarks = synthesize(set, tess.params()).points;
                    for d in bumps {
                        apply_bump(&mut landmarks, tess.params(), d);
                    }
                    *set = fitter.as_ref().unwrap().solve(&landmarks);
                }
            }
            let [(_, mut left), (_, mut right)] = sides;
            if spec.rotation_jitter > 0.0 || spec.translation_jitter > 0.0 {
                let jitter = random_rigid(&mut rng, spec.rotation_jitter, spec.translation_jitter);
                left = apply_transform_coeffs(&left, &jitter);
                right = apply_transform_coeffs(&right, &jitter);
            }
            let id = match label {
                ClassLabel::Control => format!("{}-ctl{:03}", spec.name, i),
                ClassLabel::Patient => format!("{}-pat{:03}", spec.name, i - spec.controls),
            };
            Ok(SubjectRecord { id, label, left, right })
        })
        .collect();
    let subjects: Vec<SubjectRecord> = subject_results.into_iter().collect::<Result<_, _>>()?;

    let planted_features = spec
        .coefficient_shifts
        .iter()
        .map(|s| {
            feature_index(
                s.side,
                BasisIndex::new(s.l, s.m).expect("validated above"),
                s.axis,
                spec.max_degree,
            )
        })
        .collect();
    let affected_vertices = spec
        .deformations
        .iter()
        .map(|d| {
            let half_max = d.width * (2.0 * (2.0f64).ln()).sqrt();
            tess.params()
                .iter()
                .enumerate()
                .filter(|(_, p)| great_circle_distance(p, d) <= half_max)
                .map(|(v, _)| v)
                .collect()
        })
        .collect();
    Ok((
        subjects,
        GroundTruth {
            planted_features,
            affected_vertices,
            deformations: spec.deformations.clone(),
            coefficient_shifts: spec.coefficient_shifts.clone(),
            seed: spec.seed,
        },
    ))
}

fn resize_to(base: &CoefficientSet, max_degree: u32) -> CoefficientSet {
    if base.max_degree() == max_degree {
        return base.clone();
    }
    let mut out = CoefficientSet::zeros(max_degree);
    for (idx, c) in base.iter() {
        if idx.degree() <= max_degree {
            out.set(idx, *c);
        }
    }
    out
}

fn great_circle_distance(p: &SphericalCoordinate, d: &DeformationSpec) -> f64 {
    let a = p.unit_vector();
    let b = SphericalCoordinate::new(d.center_theta, d.center_phi)
        .map(|c| c.unit_vector())
        .unwrap_or_else(|_| {
            Vector3::new(
                d.center_theta.sin() * d.center_phi.cos(),
                d.center_theta.sin() * d.center_phi.sin(),
                d.center_theta.cos(),
            )
        });
    a.dot(&b).clamp(-1.0, 1.0).acos()
}

fn apply_bump(
    landmarks: &mut [Vector3<f64>],
    params: &[SphericalCoordinate],
    d: &DeformationSpec,
) {
    for (point, param) in landmarks.iter_mut().zip(params) {
        let dist = great_circle_distance(param, d);
        let w = (-dist * dist / (2.0 * d.width * d.width)).exp();
        *point += param.unit_vector() * (d.amplitude * w);
    }
}

fn random_rigid(rng: &mut ChaCha8Rng, max_angle: f64, max_translation: f64) -> RigidTransform {
    let rotation = if max_angle > 0.0 {
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ));
        let angle = rng.random_range(-max_angle..=max_angle);
        *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
    } else {
        Matrix3::identity()
    };
    let translation = if max_translation > 0.0 {
        Vector3::new(
            rng.random_range(-max_translation..=max_translation),
            rng.random_range(-max_translation..=max_translation),
            rng.random_range(-max_translation..=max_translation),
        )
    } else {
        Vector3::zeros()
    };
    RigidTransform::new(rotation, translation).expect("construction is proper")
}

/// Coefficients of the axis-aligned ellipsoid with semi-axes (a, b, c),
/// obtained by fitting the analytic surface on the standard tessellation.
pub fn base_ellipsoid(a: f64, b: f64, c: f64, max_degree: u32) -> Result<CoefficientSet, SynthError> {
    if a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return Err(SynthError::BadSemiAxes(a, b, c));
    }
    let tess = shared_tessellation(20)?;
    let points: Vec<Vector3<f64>> = tess
        .params()
        .iter()
        .map(|p| {
            let u = p.unit_vector();
            Vector3::new(a * u.x, b * u.y, c * u.z)
        })
        .collect();
    let fitter = shared_basis_fit(20, max_degree)?;
    Ok(fitter.solve(&points))
}
