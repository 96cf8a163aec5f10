//! End-to-end checks of the landmark-feature comparison pipelines against
//! the coefficient pipeline on shared synthetic cohorts.

use spharm_core::baselines::{pca_component_sweep, pdm_pipeline, PdmVariant};
use spharm_core::dataset::{coefficient_tag, ClassLabel, Cohort, Side};
use spharm_core::evaluate::{loocv_tagged, LoocvConfig};
use spharm_core::selection::SelectionMode;
use spharm_core::svm::KernelSpec;
use spharm_core::synth::{base_ellipsoid, make_cohort, CoefficientShift, CohortSpec};

fn planted_cohort(seed: u64, delta: f64) -> Cohort {
    let shifts = vec![
        CoefficientShift { side: Side::Left, l: 2, m: 1, axis: 0, delta, group: ClassLabel::Patient },
        CoefficientShift { side: Side::Left, l: 3, m: -2, axis: 2, delta, group: ClassLabel::Patient },
        CoefficientShift { side: Side::Left, l: 4, m: 0, axis: 1, delta, group: ClassLabel::Patient },
    ];
    let base = base_ellipsoid(10.0, 8.0, 12.0, 8).unwrap();
    let spec = CohortSpec {
        name: "baseline-test".into(),
        controls: 10,
        patients: 10,
        max_degree: 8,
        coeff_noise: 0.05,
        rotation_jitter: 0.0,
        translation_jitter: 0.0,
        deformations: vec![],
        coefficient_shifts: shifts,
        deform_subdivision: 8,
        seed,
    };
    let (subjects, _) = make_cohort(&spec, &base).unwrap();
    Cohort { name: spec.name, max_degree: 8, subjects }
}

fn svm_config() -> LoocvConfig {
    LoocvConfig::new(
        KernelSpec::Rbf { gamma: 2f64.powi(-5) },
        2f64.powi(4),
        SelectionMode::Count { count: 3 },
    )
}

#[test]
fn coefficient_and_pdm_reports_share_the_schema() {
    let cohort = planted_cohort(1, 0.3);
    let features = cohort.feature_matrix();
    let labels = cohort.labels();
    let ids = cohort.ids();
    let coeff_report =
        loocv_tagged(&features, &labels, &ids, &svm_config(), &|j| coefficient_tag(j, 8), 0)
            .unwrap();
    let pdm_report = pdm_pipeline(
        &cohort,
        PdmVariant::UnivariateSvm { subdivision: 4, count: 3 },
        &svm_config(),
        0,
    )
    .unwrap();
    let a = serde_json::to_value(&coeff_report).unwrap();
    let b = serde_json::to_value(&pdm_report).unwrap();
    let keys = |v: &serde_json::Value| -> Vec<String> {
        v.as_object().unwrap().keys().cloned().collect()
    };
    assert_eq!(keys(&a), keys(&b), "report schemas must match");
    assert_eq!(pdm_report.per_subject.len(), cohort.subjects.len());
}

#[test]
fn pca_svm_runs_and_null_cohort_stays_near_chance() {
    let mut accs = Vec::new();
    for seed in 0..6 {
        let cohort = planted_cohort(100 + seed, 0.0); // delta 0: null
        let report = pdm_pipeline(
            &cohort,
            PdmVariant::PcaSvm { subdivision: 2, components: 5 },
            &svm_config(),
            seed,
        )
        .unwrap();
        accs.push(report.metrics.accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((0.25..=0.75).contains(&mean), "null pca+svm mean accuracy {mean}");
}

#[test]
fn pca_fld_localizes_the_planted_side() {
    let cohort = planted_cohort(7, 0.5);
    let left = pdm_pipeline(
        &cohort,
        PdmVariant::PcaFld { subdivision: 4, components: 5, side: Side::Left },
        &svm_config(),
        0,
    )
    .unwrap();
    let right = pdm_pipeline(
        &cohort,
        PdmVariant::PcaFld { subdivision: 4, components: 5, side: Side::Right },
        &svm_config(),
        0,
    )
    .unwrap();
    // the effect was planted on the left side only
    assert!(
        left.metrics.accuracy >= right.metrics.accuracy,
        "left {} < right {}",
        left.metrics.accuracy,
        right.metrics.accuracy
    );
    assert!(left.metrics.accuracy >= 0.75, "left accuracy {}", left.metrics.accuracy);
}

#[test]
fn pca_component_sweep_emits_a_curve() {
    let cohort = planted_cohort(9, 0.5);
    let counts = [1usize, 3, 5, 8];
    let curve = pca_component_sweep(
        &cohort,
        |components| PdmVariant::PcaSvm { subdivision: 4, components },
        &svm_config(),
        &counts,
        0,
    )
    .unwrap();
    assert_eq!(curve.len(), counts.len());
    for ((count, acc), expected) in curve.iter().zip(counts.iter()) {
        assert_eq!(count, expected);
        assert!((0.0..=1.0).contains(acc));
    }
    let best = curve.iter().map(|(_, a)| *a).fold(0.0, f64::max);
    assert!(best >= 0.7, "no component count separates the planted cohort: {curve:?}");
}
