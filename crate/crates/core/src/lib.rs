//! Shape analysis and classification on spherical-harmonic surface models.
//!
//! The crate covers the full pipeline: real spherical-harmonic surface
//! representation ([`spharm`]), pose normalization and rigid alignment
//! ([`align`]), landmark sampling on a fixed sphere tessellation ([`pdm`]),
//! cohort ingestion and feature vectors ([`dataset`]), jackknife-bagged
//! univariate feature selection ([`selection`]), a soft-margin SVM trained
//! by SMO ([`svm`]), leave-one-out evaluation with in-fold selection and
//! grid search ([`evaluate`]), per-vertex Hotelling T² group statistics with
//! permutation correction ([`stats`]), reference classifiers on landmark
//! features ([`baselines`]), and seeded synthetic cohort generation
//! ([`synth`]).

pub mod align;
pub mod baselines;
pub mod dataset;
pub mod evaluate;
pub mod pdm;
pub mod runtime;
pub mod selection;
pub mod spharm;
pub mod stats;
pub mod svm;
pub mod synth;

pub use align::RigidTransform;
pub use dataset::{ClassLabel, Cohort, Side, SubjectRecord};
pub use pdm::{PdmSurface, SphereTessellation};
pub use spharm::{BasisIndex, CoefficientSet, SphericalCoordinate, SurfaceSampling};
