//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see them).
//!
//! Thresholds are fixed here, not tuned at runtime; Monte-Carlo checks run
//! on fixed seeds so the suite is deterministic.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spharm_core::align::{
    apply_transform_coeffs, build_template, procrustes_rigid, RigidTransform,
};
use spharm_core::dataset::{build_feature_vector, coefficient_tag, ClassLabel, FeatureTag, Side};
use spharm_core::evaluate::{grid_search, loocv_tagged, GridSpec, LoocvConfig};
use spharm_core::pdm::{coeffs_to_pdm, icosphere, shared_tessellation, PdmSurface};
use spharm_core::selection::SelectionMode;
use spharm_core::spharm::{
    assoc_legendre, basis_count, basis_matrix, fit, synthesize, CoefficientSet,
    SphericalCoordinate,
};
use spharm_core::stats::permutation_map;
use spharm_core::svm::{
    equality_residual, kernel_eval, max_kkt_violation, predict, train, KernelSpec, TrainConfig,
};
use spharm_core::synth::{
    base_ellipsoid, make_cohort, CoefficientShift, CohortSpec, DeformationSpec,
};
use std::time::Instant;

fn random_coeffs(max_degree: u32, seed: u64) -> CoefficientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..basis_count(max_degree))
        .map(|_| {
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    CoefficientSet::from_coeffs(max_degree, coeffs).unwrap()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = nalgebra::Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ));
    *nalgebra::Rotation3::from_axis_angle(&axis, rng.random_range(0.1..3.0)).matrix()
}

#[test]
fn criterion_1_basis_correctness() {
    let start = Instant::now();

    // all-pairs orthonormality up to l = 8 under Gauss-Legendre quadrature
    let grid = spharm_oracle::sphere_quadrature(24, 40);
    let params: Vec<SphericalCoordinate> = grid
        .iter()
        .map(|&(t, p, _)| SphericalCoordinate::new(t, p).unwrap())
        .collect();
    let b = basis_matrix(&params, 8);
    let n = b.ncols();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let mut inner = 0.0;
            for (k, &(_, _, w)) in grid.iter().enumerate() {
                inner += w * b[(k, i)] * b[(k, j)];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - expect).abs());
        }
    }
    assert!(worst < 1e-6, "orthonormality defect {worst}");

    // recurrence against the exact rational oracle, all (l, m) to l = 25
    let xs = [-0.999, -0.75, -0.31, 0.0, 0.123456, 0.5, 0.87, 0.999];
    let oracle = spharm_oracle::ExactLegendreTable::new(25);
    let mut worst_rel = 0.0f64;
    for l in 0..=25u32 {
        for m in 0..=l {
            for &x in &xs {
                let got = assoc_legendre(l, m, x).unwrap();
                let want = oracle.eval(l, m, x);
                worst_rel = worst_rel.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    assert!(worst_rel < 1e-10, "legendre deviation {worst_rel}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 1 took {elapsed:?}");
    println!(
        "PASS criterion 1: orthonormality defect {worst:.2e} (< 1e-6), \
         legendre vs oracle {worst_rel:.2e} (< 1e-10), {elapsed:.2?} (< 10 s)"
    );
}

#[test]
fn criterion_2_round_trip() {
    let start = Instant::now();
    let tess = icosphere(20).unwrap();
    assert_eq!(tess.len(), 4002);
    let coeffs = random_coeffs(12, 2024);
    let sampled = synthesize(&coeffs, tess.params());
    let refit = fit(&sampled, 12).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in coeffs.coeffs().iter().zip(refit.coeffs()) {
        worst = worst.max((a - b).norm() / a.norm().max(1.0));
    }
    assert!(worst <= 1e-8, "round-trip relative error {worst}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "criterion 2 took {elapsed:?}");
    println!(
        "PASS criterion 2: L=12 round-trip on 4002 vertices, relative error {worst:.2e} \
         (<= 1e-8), {elapsed:.2?} (< 5 s)"
    );
}

#[test]
fn criterion_3_counting_contracts() {
    assert_eq!(basis_count(20), 441);
    let subject = spharm_core::dataset::SubjectRecord {
        id: "x".into(),
        label: ClassLabel::Control,
        left: CoefficientSet::zeros(20),
        right: CoefficientSet::zeros(20),
    };
    assert_eq!(build_feature_vector(&subject).len(), 2646);
    assert_eq!(icosphere(20).unwrap().len(), 4002);
    assert_eq!(icosphere(8).unwrap().len(), 642);
    println!(
        "PASS criterion 3: 441 coefficients at L=20, 2646 features, \
         icosphere(20) = 4002 vertices, icosphere(8) = 642 vertices"
    );
}

#[test]
fn criterion_4_alignment() {
    // transform commutation on coefficient sets
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst_commute = 0.0f64;
    for _ in 0..5 {
        let c = random_coeffs(8, rng.random());
        let t = RigidTransform::new(
            random_rotation(&mut rng),
            Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        )
        .unwrap();
        let params: Vec<SphericalCoordinate> = (0..300)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                SphericalCoordinate::new(z.acos(), rng.random_range(0.0..std::f64::consts::TAU))
                    .unwrap()
            })
            .collect();
        let via_coeffs = synthesize(&apply_transform_coeffs(&c, &t), &params);
        let via_points = synthesize(&c, &params);
        for (a, b) in via_coeffs.points.iter().zip(&via_points.points) {
            worst_commute =
                worst_commute.max((a - t.apply_point(b)).norm() / (1.0 + a.norm()));
        }
    }
    assert!(worst_commute <= 1e-10, "commutation defect {worst_commute}");

    // procrustes recovery of forward-constructed transforms
    let tess = shared_tessellation(8).unwrap();
    let mut worst_proc = 0.0f64;
    for trial in 0..5 {
        let c = random_coeffs(6, 4400 + trial);
        let p = coeffs_to_pdm(&c, &tess);
        let truth = RigidTransform::new(
            random_rotation(&mut rng),
            Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        )
        .unwrap();
        let moved = PdmSurface::from_raw(
            8,
            p.landmarks().iter().map(|q| truth.apply_point(q)).collect(),
        );
        let got = procrustes_rigid(&p, &moved).unwrap();
        worst_proc = worst_proc
            .max((got.rotation() - truth.rotation()).norm())
            .max((got.translation() - truth.translation()).norm() / 10.0);
    }
    assert!(worst_proc <= 1e-10, "procrustes recovery defect {worst_proc}");

    // template convergence on a 50-subject cohort
    let base = base_ellipsoid(10.0, 8.0, 12.0, 12).unwrap();
    let spec = CohortSpec {
        name: "tmpl".into(),
        controls: 25,
        patients: 25,
        max_degree: 12,
        coeff_noise: 0.05,
        rotation_jitter: 0.25,
        translation_jitter: 2.0,
        deformations: vec![],
        coefficient_shifts: vec![],
        deform_subdivision: 20,
        seed: 4040,
    };
    let (subjects, _) = make_cohort(&spec, &base).unwrap();
    let tess20 = shared_tessellation(20).unwrap();
    let pdms: Vec<PdmSurface> = subjects
        .iter()
        .map(|s| coeffs_to_pdm(&s.left, &tess20))
        .collect();
    let (template, _) = build_template(&pdms, 1e-7, 100).unwrap();
    assert!(
        template.converged && template.iterations <= 100,
        "template: converged {} after {} iterations",
        template.converged,
        template.iterations
    );
    println!(
        "PASS criterion 4: commutation {worst_commute:.2e} (<= 1e-10), procrustes recovery \
         {worst_proc:.2e} (<= 1e-10), 50-subject template converged in {} iterations (<= 100)",
        template.iterations
    );
}

#[test]
fn criterion_5_svm() {
    // KKT on a battery of trained models
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_kkt = 0.0f64;
    let mut models = 0;
    for &(separation, c, kernel) in &[
        (6.0, 100.0, KernelSpec::Linear),
        (1.0, 1.0, KernelSpec::Rbf { gamma: 0.5 }),
        (2.0, 1048576.0, KernelSpec::Linear),
        (0.5, 10.0, KernelSpec::Rbf { gamma: 2.0 }),
    ] {
        let k = 24;
        let xs: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let label = if i % 2 == 0 { -1.0 } else { 1.0 };
                vec![
                    label * separation / 2.0 + 0.4 * rng.sample::<f64, _>(StandardNormal),
                    0.4 * rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        let ys: Vec<f64> = (0..k).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let model = train(&xs, &ys, &TrainConfig::new(c, kernel)).unwrap();
        assert!(model.converged, "training did not converge");
        assert!(equality_residual(&model) <= 1e-8);
        worst_kkt = worst_kkt.max(max_kkt_violation(&model, &xs, &ys));
        models += 1;
    }
    assert!(worst_kkt <= 1e-3 + 1e-12, "KKT violation {worst_kkt}");

    // dual objective against exhaustive QP for K <= 8
    let mut worst_gap = 0.0f64;
    for trial in 0..8u64 {
        let k = 4 + (trial as usize % 3) * 2; // 4, 6, 8
        let mut trng = ChaCha8Rng::seed_from_u64(5500 + trial);
        let xs: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                vec![
                    trng.sample::<f64, _>(StandardNormal),
                    trng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        let ys: Vec<f64> = (0..k).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let kernel = KernelSpec::Rbf { gamma: 0.7 };
        let mut cfg = TrainConfig::new(3.0, kernel);
        cfg.tol = 1e-8;
        let model = train(&xs, &ys, &cfg).unwrap();
        let gram: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| kernel_eval(&kernel, &xs[i], &xs[j]).unwrap())
                    .collect()
            })
            .collect();
        let (_, best) = spharm_oracle::solve_dual_qp(&gram, &ys, 3.0);
        worst_gap = worst_gap.max((model.dual_objective - best).abs() / best.abs().max(1e-12));
    }
    assert!(worst_gap <= 1e-4, "dual objective gap {worst_gap}");

    // XOR: linear fails, rbf separates
    let xor_x = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let xor_y = [1.0, 1.0, -1.0, -1.0];
    let linear = train(&xor_x, &xor_y, &TrainConfig::new(100.0, KernelSpec::Linear)).unwrap();
    let linear_errors = xor_x
        .iter()
        .zip(&xor_y)
        .filter(|(x, &y)| predict(&linear, x).unwrap() != y)
        .count();
    assert!(linear_errors > 0, "xor must not be linearly separable");
    let rbf = train(
        &xor_x,
        &xor_y,
        &TrainConfig::new(100.0, KernelSpec::Rbf { gamma: 1.0 }),
    )
    .unwrap();
    let rbf_errors = xor_x
        .iter()
        .zip(&xor_y)
        .filter(|(x, &y)| predict(&rbf, x).unwrap() != y)
        .count();
    assert_eq!(rbf_errors, 0, "rbf must separate xor");

    // Keerthi-Lin small-gamma limit on the blob grid
    let mut brng = ChaCha8Rng::seed_from_u64(5599);
    let k = 20;
    let xs: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let label = if i % 2 == 0 { -1.0 } else { 1.0 };
            vec![
                label + 0.4 * brng.sample::<f64, _>(StandardNormal),
                0.4 * brng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect();
    let ys: Vec<f64> = (0..k).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
    let c_hat = 1.0;
    let gamma = 1e-6;
    let linear = train(&xs, &ys, &TrainConfig::new(c_hat, KernelSpec::Linear)).unwrap();
    let rbf = train(
        &xs,
        &ys,
        &TrainConfig::new(c_hat / (2.0 * gamma), KernelSpec::Rbf { gamma }),
    )
    .unwrap();
    let mut agree = 0;
    let mut total = 0;
    for i in -10..=10 {
        for j in -10..=10 {
            let p = vec![i as f64 * 0.4, j as f64 * 0.4];
            total += 1;
            if predict(&linear, &p).unwrap() == predict(&rbf, &p).unwrap() {
                agree += 1;
            }
        }
    }
    let agreement = agree as f64 / total as f64;
    assert!(agreement >= 0.99, "keerthi-lin agreement {agreement}");

    println!(
        "PASS criterion 5: KKT violation {worst_kkt:.2e} over {models} models (<= 1e-3), \
         dual gap vs brute force {worst_gap:.2e} (<= 1e-4), xor linear errors {linear_errors} / \
         rbf errors 0, small-gamma agreement {agreement:.3} (>= 0.99)"
    );
}

fn null_features(k: usize, n: usize, seed: u64) -> (DMatrix<f64>, Vec<ClassLabel>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(k, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut labels: Vec<ClassLabel> = (0..k)
        .map(|i| if i < k / 2 { ClassLabel::Control } else { ClassLabel::Patient })
        .collect();
    // label permutation: shuffle labels relative to the data
    labels.shuffle(&mut rng);
    let ids = (0..k).map(|i| format!("s{i:03}")).collect();
    (x, labels, ids)
}

#[test]
fn criterion_6_no_leakage() {
    let start = Instant::now();
    let runs = 100;
    let cfg = LoocvConfig::new(
        KernelSpec::Rbf { gamma: 2f64.powi(-7) },
        2f64.powi(5),
        SelectionMode::Count { count: 10 },
    );
    let tag = |j: usize| coefficient_tag(j, 20);
    let mut sum = 0.0;
    for seed in 0..runs {
        let (x, labels, ids) = null_features(48, 2646, 600_000 + seed);
        let report = loocv_tagged(&x, &labels, &ids, &cfg, &tag, seed).unwrap();
        sum += report.metrics.accuracy;
    }
    let mean = sum / runs as f64;
    assert!(
        (0.45..=0.55).contains(&mean),
        "permuted-label mean accuracy {mean} outside [0.45, 0.55]"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "criterion 6 took {elapsed:?}");
    println!(
        "PASS criterion 6: mean LOOCV accuracy {mean:.4} over {runs} permuted-label null \
         cohorts (in [0.45, 0.55]), {elapsed:.2?} (< 5 min)"
    );
}

/// The planted cohort of criterion 7: 10 informative coefficient features at
/// effect size 3 SD among 2646, K = 48, no pose jitter.
fn planted_cohort() -> (DMatrix<f64>, Vec<ClassLabel>, Vec<String>, Vec<usize>, spharm_core::dataset::Cohort) {
    let noise = 0.05;
    let shifts: Vec<CoefficientShift> = [
        (2u32, 1i32, 0usize),
        (2, -1, 1),
        (3, 0, 2),
        (3, 2, 0),
        (4, -3, 1),
        (4, 1, 2),
        (5, 0, 0),
        (5, -4, 1),
        (6, 3, 2),
        (6, -2, 0),
    ]
    .iter()
    .map(|&(l, m, axis)| CoefficientShift {
        side: Side::Left,
        l,
        m,
        axis,
        delta: 3.0 * noise,
        group: ClassLabel::Patient,
    })
    .collect();
    let base = base_ellipsoid(10.0, 8.0, 12.0, 20).unwrap();
    let spec = CohortSpec {
        name: "planted".into(),
        controls: 24,
        patients: 24,
        max_degree: 20,
        coeff_noise: noise,
        rotation_jitter: 0.0,
        translation_jitter: 0.0,
        deformations: vec![],
        coefficient_shifts: shifts,
        deform_subdivision: 20,
        seed: 7777,
    };
    let (subjects, truth) = make_cohort(&spec, &base).unwrap();
    let cohort = spharm_core::dataset::Cohort {
        name: spec.name.clone(),
        max_degree: 20,
        subjects,
    };
    let features = cohort.feature_matrix();
    let labels = cohort.labels();
    let ids = cohort.ids();
    (features, labels, ids, truth.planted_features, cohort)
}

#[test]
fn criterion_7_synthetic_discrimination() {
    let start = Instant::now();
    let (features, labels, ids, _planted, cohort) = planted_cohort();

    // coefficient pipeline over the full default grid
    let grid = GridSpec::standard();
    let tag20 = |j: usize| coefficient_tag(j, 20);
    let coeff = grid_search(&features, &labels, &ids, &grid, &[10], &tag20, 0).unwrap();
    assert!(
        coeff.best_accuracy >= 0.90,
        "coefficient-pipeline accuracy {}",
        coeff.best_accuracy
    );

    // the same cohort through PDM-univariate features (642 landmarks/side)
    let pdm_x = spharm_core::baselines::pdm_features(&cohort, 8, &[Side::Left, Side::Right])
        .unwrap();
    let pdm_tag = |j: usize| FeatureTag::Landmark {
        side: if j < 642 * 3 { Side::Left } else { Side::Right },
        vertex: (j % (642 * 3)) / 3,
        axis: ['x', 'y', 'z'][j % 3],
    };
    let pdm = grid_search(&pdm_x, &labels, &ids, &grid, &[10], &pdm_tag, 0).unwrap();
    let gap = coeff.best_accuracy - pdm.best_accuracy;
    assert!(
        gap >= 0.05,
        "coefficient {} vs pdm {} (gap {gap})",
        coeff.best_accuracy,
        pdm.best_accuracy
    );
    let elapsed = start.elapsed();
    println!(
        "PASS criterion 7: coefficient grid accuracy {:.4} (>= 0.90) vs PDM-univariate \
         {:.4}, gap {gap:.4} (>= 0.05), {elapsed:.2?}",
        coeff.best_accuracy, pdm.best_accuracy
    );
}

#[test]
fn criterion_8_group_stats_calibration() {
    let start = Instant::now();

    // null calibration: 50 repetitions of identically-distributed groups
    let tess = shared_tessellation(4).unwrap();
    let reps = 50;
    let mut false_positives = 0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(880_000 + rep);
        let mut groups = Vec::new();
        for _ in 0..2 {
            let group: Vec<PdmSurface> = (0..10)
                .map(|_| {
                    let landmarks = tess
                        .vertices()
                        .iter()
                        .map(|dir| {
                            dir * 10.0
                                + Vector3::new(
                                    0.2 * rng.sample::<f64, _>(StandardNormal),
                                    0.2 * rng.sample::<f64, _>(StandardNormal),
                                    0.2 * rng.sample::<f64, _>(StandardNormal),
                                )
                        })
                        .collect();
                    PdmSurface::from_raw(4, landmarks)
                })
                .collect();
            groups.push(group);
        }
        let map = permutation_map(&groups[0], &groups[1], 1000, rep).unwrap();
        if map.p_corrected.iter().any(|&p| p < 0.05) {
            false_positives += 1;
        }
    }
    // binomial margin: 0.05 + 2.58 sqrt(0.05*0.95/50) -> at most 6 of 50
    assert!(
        false_positives <= 6,
        "null FWER {false_positives}/{reps} repetitions"
    );

    // planted deformation: 3x noise SD over the 5% half-maximum disc
    let base = base_ellipsoid(10.0, 10.0, 10.0, 12).unwrap();
    let coeff_noise = 0.02;
    // pilot: landmark-coordinate noise SD implied by the coefficient noise
    let pilot_spec = CohortSpec {
        name: "pilot".into(),
        controls: 8,
        patients: 8,
        max_degree: 12,
        coeff_noise,
        rotation_jitter: 0.0,
        translation_jitter: 0.0,
        deformations: vec![],
        coefficient_shifts: vec![],
        deform_subdivision: 8,
        seed: 881,
    };
    let (pilot, _) = make_cohort(&pilot_spec, &base).unwrap();
    let tess8 = shared_tessellation(8).unwrap();
    let pilot_pdms: Vec<PdmSurface> = pilot
        .iter()
        .map(|s| coeffs_to_pdm(&s.left, &tess8))
        .collect();
    let mut var_sum = 0.0;
    let mut var_count = 0usize;
    for v in 0..tess8.len() {
        for axis in 0..3 {
            let vals: Vec<f64> = pilot_pdms.iter().map(|p| p.landmarks()[v][axis]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            var_sum +=
                vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (vals.len() - 1) as f64;
            var_count += 1;
        }
    }
    let noise_sd = (var_sum / var_count as f64).sqrt();

    // width chosen so the half-maximum disc covers 5% of the sphere
    let half_max_radius = (0.9f64).acos(); // cap area fraction (1-cos d)/2 = 0.05
    let width = half_max_radius / (2.0 * (2.0f64).ln()).sqrt();
    let deform = DeformationSpec {
        center_theta: 1.1,
        center_phi: 0.7,
        width,
        amplitude: 3.0 * noise_sd,
        group: ClassLabel::Patient,
        side: Side::Left,
    };
    let spec = CohortSpec {
        name: "bump".into(),
        controls: 24,
        patients: 24,
        max_degree: 12,
        coeff_noise,
        rotation_jitter: 0.0,
        translation_jitter: 0.0,
        deformations: vec![deform],
        coefficient_shifts: vec![],
        deform_subdivision: 8,
        seed: 882,
    };
    let (subjects, truth) = make_cohort(&spec, &base).unwrap();
    let controls: Vec<PdmSurface> = subjects
        .iter()
        .filter(|s| s.label == ClassLabel::Control)
        .map(|s| coeffs_to_pdm(&s.left, &tess8))
        .collect();
    let patients: Vec<PdmSurface> = subjects
        .iter()
        .filter(|s| s.label == ClassLabel::Patient)
        .map(|s| coeffs_to_pdm(&s.left, &tess8))
        .collect();
    let map = permutation_map(&patients, &controls, 2000, 883).unwrap();
    let planted = &truth.affected_vertices[0];
    assert!(
        planted.len() >= (0.04 * tess8.len() as f64) as usize,
        "planted disc too small: {} of {}",
        planted.len(),
        tess8.len()
    );
    let recovered = planted
        .iter()
        .filter(|&&v| map.p_corrected[v] < 0.05)
        .count();
    let rate = recovered as f64 / planted.len() as f64;
    assert!(
        rate >= 0.80,
        "planted recovery {recovered}/{} = {rate}",
        planted.len()
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "criterion 8 took {elapsed:?}");
    println!(
        "PASS criterion 8: null FWER {false_positives}/{reps} (<= 6), planted recovery \
         {recovered}/{} = {rate:.3} (>= 0.80) at amplitude 3 x noise SD ({:.4}), \
         {elapsed:.2?} (< 10 min)",
        planted.len(),
        3.0 * noise_sd
    );
}

#[test]
fn criterion_9_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_spharm");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cohort.json");
    std::fs::write(
        &config,
        r#"{
            "name": "det",
            "controls": 5,
            "patients": 5,
            "L": 6,
            "coeff_noise": 0.05,
            "rotation_jitter": 0.1,
            "translation_jitter": 0.5,
            "base": { "ellipsoid": [10.0, 8.0, 12.0] },
            "coefficient_shifts": [
                { "side": "left", "l": 2, "m": 0, "axis": 0, "delta": 0.3, "group": "patient" }
            ]
        }"#,
    )
    .unwrap();

    // a SURF v1 input for the fit subcommand
    let surf_path = dir.path().join("shape.surf");
    {
        let tess = icosphere(5).unwrap();
        let mut surf = String::from("SURF v1\n");
        for p in tess.params() {
            let u = p.unit_vector();
            surf.push_str(&format!(
                "{} {} {} {} {}\n",
                p.theta(),
                p.phi(),
                10.0 * u.x,
                8.0 * u.y,
                12.0 * u.z
            ));
        }
        std::fs::write(&surf_path, surf).unwrap();
    }

    // every subcommand runs; all artifact bytes are compared
    let run = |threads: &str| -> Vec<(String, Vec<u8>)> {
        let out = dir.path().join("out");
        if out.exists() {
            std::fs::remove_dir_all(&out).unwrap();
        }
        let sim = Command::new(bin)
            .args(["--seed", "11", "--threads", threads, "simulate"])
            .args(["--config", config.to_str().unwrap()])
            .args(["--out", out.join("cohort").to_str().unwrap()])
            .output()
            .unwrap();
        assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
        let fit = Command::new(bin)
            .args(["--seed", "11", "--threads", threads, "fit"])
            .args(["--input", surf_path.to_str().unwrap(), "--degree", "4"])
            .args(["--out", out.join("fit").to_str().unwrap()])
            .output()
            .unwrap();
        assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
        let manifest = out.join("cohort/manifest.json");
        let align = Command::new(bin)
            .args(["--seed", "11", "--threads", threads, "align"])
            .args(["--manifest", manifest.to_str().unwrap(), "--subdiv", "8"])
            .args(["--out", out.join("align").to_str().unwrap()])
            .output()
            .unwrap();
        assert!(align.status.success(), "{}", String::from_utf8_lossy(&align.stderr));
        let aligned_manifest = out.join("align/manifest.json");
        let per_manifest: [(&str, Vec<&str>); 6] = [
            ("pdm", vec![]), // replaced below; placeholder keeps ordering clear
            ("loocv", vec!["--count", "3"]),
            ("grid", vec![
                "--c-exp-min", "2", "--c-exp-max", "3",
                "--gamma-exp-min", "-6", "--gamma-exp-max", "-5",
                "--counts", "2,3",
            ]),
            ("stats", vec!["--side", "left", "--subdiv", "3", "--permutations", "150"]),
            ("select", vec!["--count", "5"]),
            ("baseline", vec!["--variant", "pca-fld", "--components", "3", "--subdiv", "3"]),
        ];
        for (cmd, extra) in per_manifest {
            let st = if cmd == "pdm" {
                Command::new(bin)
                    .args(["--seed", "11", "--threads", threads, "pdm"])
                    .args(["--coeffs", out.join("fit/shape.spharm").to_str().unwrap()])
                    .args(["--subdiv", "6"])
                    .args(["--out", out.join("pdm").to_str().unwrap()])
                    .output()
                    .unwrap()
            } else {
                Command::new(bin)
                    .args(["--seed", "11", "--threads", threads, cmd])
                    .args(["--manifest", aligned_manifest.to_str().unwrap()])
                    .args(extra)
                    .args(["--out", out.join(cmd).to_str().unwrap()])
                    .output()
                    .unwrap()
            };
            assert!(st.status.success(), "{cmd}: {}", String::from_utf8_lossy(&st.stderr));
        }
        let mut files = Vec::new();
        collect_files(&out, &out, &mut files);
        files.sort();
        files
            .into_iter()
            .map(|rel| {
                let bytes = std::fs::read(out.join(&rel)).unwrap();
                (rel, bytes)
            })
            .collect()
    };

    let first = run("1");
    let second = run("1");
    assert_eq!(first.len(), second.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "repeat run differs in {name_a}");
    }
    let parallel = run("4");
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&parallel) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "--threads changed bytes of {name_a}");
    }
    println!(
        "PASS criterion 9: {} artifacts byte-identical across repeated runs and \
         --threads 1 vs 4",
        first.len()
    );
}

fn collect_files(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<String>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).unwrap().to_string_lossy().into_owned());
        }
    }
}
