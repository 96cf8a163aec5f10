//! Command-line front end for the shape-classification pipeline.
//!
//! Every subcommand is file-based and reproducible: all randomness flows
//! from `--seed`, `--threads` only changes wall time, outputs are written
//! atomically, and each JSON/CSV artifact embeds the tool version, the seed,
//! and the invoking command line.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde_json::json;
use spharm_core::align::{build_template, ellipsoid_rotation, remove_translation, RigidTransform};
use spharm_core::baselines::{pdm_pipeline, PdmVariant};
use spharm_core::dataset::{
    atomic_write_text, coefficient_tag, load_cohort, load_coeffs, load_manifest, load_surface,
    save_coeffs, save_manifest, save_off, save_pdm, save_report, ClassLabel, Cohort, Manifest,
    ManifestSubject, Side,
};
use spharm_core::evaluate::{
    grid_search, loocv_tagged, surface_csv, GridSpec, LoocvConfig,
};
use spharm_core::pdm::{coeffs_to_pdm, shared_tessellation};
use spharm_core::runtime::with_thread_pool;
use spharm_core::selection::{jackknife_t_scores, select, SelectionMode};
use spharm_core::spharm::{fit, CoefficientSet};
use spharm_core::stats::{permutation_map, statmap_csv};
use spharm_core::svm::KernelSpec;
use spharm_core::synth::{base_ellipsoid, make_cohort, CohortSpec};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "spharm", version, about = "SPHARM shape analysis and classification")]
struct Cli {
    /// Root seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Changes wall time only.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort from a specification JSON.
    Simulate(SimulateArgs),
    /// Fit a sampled surface (SURF v1) to a coefficient file.
    Fit(FitArgs),
    /// Normalize, align, and template-average a cohort.
    Align(AlignArgs),
    /// Sample a coefficient file into a PDM landmark file.
    Pdm(PdmArgs),
    /// Score and rank features on a whole cohort.
    Select(SelectArgs),
    /// Leave-one-out cross-validation of the coefficient pipeline.
    Loocv(LoocvArgs),
    /// Accuracy surface over the (C, gamma, feature count) grid.
    Grid(GridArgs),
    /// Per-vertex Hotelling T2 group statistics with permutation p-values.
    Stats(StatsArgs),
    /// Comparison pipelines on PDM landmark features.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Cohort specification JSON (seed field is overridden by --seed).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Sampled surface in SURF v1 format.
    #[arg(long)]
    input: PathBuf,
    /// Expansion degree L.
    #[arg(long, default_value_t = 20)]
    degree: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Tessellation frequency for the landmark-space alignment.
    #[arg(long, default_value_t = 20)]
    subdiv: u32,
    /// RMS landmark change below which the template has converged (mm).
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PdmArgs {
    /// Coefficient file to sample.
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long, default_value_t = 20)]
    subdiv: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Keep the top COUNT features.
    #[arg(long, conflicts_with = "p_threshold")]
    count: Option<usize>,
    /// Keep features with two-sided p-value at or below this threshold.
    #[arg(long)]
    p_threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KernelKindArg {
    Linear,
    Rbf,
}

#[derive(Args)]
struct LoocvArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = KernelKindArg::Rbf)]
    kernel: KernelKindArg,
    /// C = 2^C_EXP.
    #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
    c_exp: i32,
    /// gamma = 2^GAMMA_EXP (rbf only).
    #[arg(long, default_value_t = -7, allow_negative_numbers = true)]
    gamma_exp: i32,
    #[arg(long, conflicts_with = "p_threshold", default_value_t = 10)]
    count: usize,
    #[arg(long)]
    p_threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    c_exp_min: i32,
    #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
    c_exp_max: i32,
    #[arg(long, default_value_t = -15, allow_negative_numbers = true)]
    gamma_exp_min: i32,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    gamma_exp_max: i32,
    /// Scale factor applied to every gamma value.
    #[arg(long, default_value_t = 1.0)]
    gamma_scale: f64,
    /// Comma-separated feature counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    counts: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    side: SideArg,
    #[arg(long, default_value_t = 20)]
    subdiv: u32,
    #[arg(long, default_value_t = 1000)]
    permutations: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Jackknife selection + SVM on landmark coordinates.
    UnivariateSvm,
    /// PCA scores + SVM.
    PcaSvm,
    /// Per-side PCA + Fisher's linear discriminant.
    PcaFld,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Tessellation frequency (defaults: 20; pca-fld uses 8).
    #[arg(long)]
    subdiv: Option<u32>,
    /// Features kept by univariate-svm.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Components kept by the PCA variants.
    #[arg(long, default_value_t = 15)]
    components: usize,
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    side: SideArg,
    #[arg(long, value_enum, default_value_t = KernelKindArg::Rbf)]
    kernel: KernelKindArg,
    #[arg(long, default_value_t = 5)]
    c_exp: i32,
    #[arg(long, default_value_t = -7, allow_negative_numbers = true)]
    gamma_exp: i32,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let seed = cli.seed;
    let threads = cli.threads;
    let outcome = with_thread_pool(threads, move || run(cli.command, seed));
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// Invoking command line with `--threads` stripped, so the echo (and with it
/// every output byte) is identical for any worker count.
fn command_echo() -> String {
    let args: Vec<String> = std::env::args().collect();
    let mut kept = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--threads" {
            skip = true;
            continue;
        }
        if a.starts_with("--threads=") {
            continue;
        }
        kept.push(a);
    }
    kept.join(" ")
}

fn tool_echo(seed: u64) -> serde_json::Value {
    json!({
        "name": "spharm",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "command": command_echo(),
    })
}

/// Attach the tool echo to a JSON artifact and write it atomically.
fn write_json_artifact<T: serde::Serialize>(value: &T, seed: u64, path: &Path) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("tool".into(), tool_echo(seed));
        }
        None => v = json!({ "tool": tool_echo(seed), "value": v }),
    }
    save_report(&v, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Comment banner for CSV/OFF artifacts.
fn text_banner(seed: u64) -> String {
    format!(
        "# spharm v{} seed={} command: {}\n",
        env!("CARGO_PKG_VERSION"),
        seed,
        command_echo()
    )
}

fn run(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args, seed),
        Command::Fit(args) => fit_surface(args, seed),
        Command::Align(args) => align(args, seed),
        Command::Pdm(args) => pdm_file(args, seed),
        Command::Select(args) => select_features(args, seed),
        Command::Loocv(args) => loocv_run(args, seed),
        Command::Grid(args) => grid_run(args, seed),
        Command::Stats(args) => stats_run(args, seed),
        Command::Baseline(args) => baseline_run(args, seed),
    }
}

/// Base-shape source for simulated cohorts.
#[derive(serde::Deserialize)]
#[serde(rename_all = "snake_case")]
enum BaseShape {
    /// Semi-axes (a, b, c) of an axis-aligned ellipsoid.
    Ellipsoid([f64; 3]),
    /// Path to a coefficient file, relative to the config file.
    Coeffs(PathBuf),
}

#[derive(serde::Deserialize)]
struct SimulateConfig {
    base: BaseShape,
    #[serde(flatten)]
    cohort: CohortSpec,
}

fn simulate(args: SimulateArgs, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config: SimulateConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    config.cohort.seed = seed;
    let base = match &config.base {
        BaseShape::Ellipsoid([a, b, c]) => base_ellipsoid(*a, *b, *c, config.cohort.max_degree)?,
        BaseShape::Coeffs(rel) => {
            let dir = args.config.parent().unwrap_or(Path::new("."));
            load_coeffs(&dir.join(rel))?
        }
    };
    let (subjects, truth) = make_cohort(&config.cohort, &base)?;
    let coeff_dir = args.out.join("coeffs");
    let mut manifest_subjects = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let left = format!("coeffs/{}_left.spharm", s.id);
        let right = format!("coeffs/{}_right.spharm", s.id);
        save_coeffs(&s.left, &coeff_dir.join(format!("{}_left.spharm", s.id)))?;
        save_coeffs(&s.right, &coeff_dir.join(format!("{}_right.spharm", s.id)))?;
        manifest_subjects.push(ManifestSubject {
            id: s.id.clone(),
            label: s.label,
            left: left.into(),
            right: right.into(),
        });
    }
    let manifest = Manifest {
        cohort: config.cohort.name.clone(),
        max_degree: config.cohort.max_degree,
        subjects: manifest_subjects,
    };
    save_manifest(&manifest, &args.out.join("manifest.json"))?;
    write_json_artifact(&truth, seed, &args.out.join("truth.json"))?;
    println!(
        "simulated cohort '{}': {} subjects, L={}, out: {}",
        config.cohort.name,
        subjects.len(),
        config.cohort.max_degree,
        args.out.display()
    );
    Ok(())
}

fn fit_surface(args: FitArgs, _seed: u64) -> Result<()> {
    let surface = load_surface(&args.input)?;
    let coeffs = fit(&surface, args.degree)?;
    let stem = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("surface");
    let path = args.out.join(format!("{stem}.spharm"));
    save_coeffs(&coeffs, &path)?;
    println!(
        "fitted {} samples at L={}: {}",
        surface.len(),
        args.degree,
        path.display()
    );
    Ok(())
}

fn load_cohort_at(path: &Path) -> Result<(Manifest, Cohort)> {
    let manifest = load_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let cohort = load_cohort(&manifest, dir)?;
    Ok((manifest, cohort))
}

fn transform_json(t: &RigidTransform) -> serde_json::Value {
    let r = t.rotation();
    json!({
        "rotation": [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        "translation": [t.translation().x, t.translation().y, t.translation().z],
    })
}

fn align(args: AlignArgs, seed: u64) -> Result<()> {
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let tess = shared_tessellation(args.subdiv)?;

    // pose normalization per subject and side
    struct Normalized {
        id: String,
        label: ClassLabel,
        sides: [CoefficientSet; 2],
        param_rotations: [serde_json::Value; 2],
    }
    let normalized: Vec<Normalized> = cohort
        .subjects
        .iter()
        .map(|s| -> Result<Normalized> {
            let mut sides = Vec::with_capacity(2);
            let mut rots = Vec::with_capacity(2);
            for set in [&s.left, &s.right] {
                let centered = remove_translation(set);
                let (normalized, rotation) = ellipsoid_rotation(&centered)
                    .with_context(|| format!("normalizing subject '{}'", s.id))?;
                sides.push(normalized);
                rots.push(transform_json(&rotation));
            }
            Ok(Normalized {
                id: s.id.clone(),
                label: s.label,
                sides: [sides.remove(0), sides.remove(0)],
                param_rotations: [rots.remove(0), rots.remove(0)],
            })
        })
        .collect::<Result<_>>()?;

    // per-side template building and rigid alignment
    let mut aligned: Vec<[CoefficientSet; 2]> = normalized
        .iter()
        .map(|n| n.sides.clone())
        .collect();
    let mut side_reports = Vec::new();
    for (side_idx, side_name) in ["left", "right"].iter().enumerate() {
        let pdms: Vec<_> = aligned
            .iter()
            .map(|sides| coeffs_to_pdm(&sides[side_idx], &tess))
            .collect();
        let (template, transforms) = build_template(&pdms, args.tol, args.max_iter)?;
        for (sides, t) in aligned.iter_mut().zip(&transforms) {
            sides[side_idx] =
                spharm_core::align::apply_transform_coeffs(&sides[side_idx], t);
        }
        let template_surface =
            spharm_core::pdm::PdmSurface::from_raw(args.subdiv, template.landmarks.clone());
        save_pdm(&template_surface, &args.out.join(format!("template_{side_name}.pdm")))?;
        side_reports.push(json!({
            "side": side_name,
            "iterations": template.iterations,
            "converged": template.converged,
            "transforms": cohort.subjects.iter().zip(&transforms).map(|(s, t)| json!({
                "id": s.id,
                "transform": transform_json(t),
            })).collect::<Vec<_>>(),
        }));
    }

    // write aligned coefficient files + new manifest
    let mut manifest_subjects = Vec::new();
    for (n, sides) in normalized.iter().zip(&aligned) {
        let left = format!("aligned/{}_left.spharm", n.id);
        let right = format!("aligned/{}_right.spharm", n.id);
        save_coeffs(&sides[0], &args.out.join(&left))?;
        save_coeffs(&sides[1], &args.out.join(&right))?;
        manifest_subjects.push(ManifestSubject {
            id: n.id.clone(),
            label: n.label,
            left: left.into(),
            right: right.into(),
        });
    }
    let aligned_manifest = Manifest {
        cohort: manifest.cohort.clone(),
        max_degree: manifest.max_degree,
        subjects: manifest_subjects,
    };
    save_manifest(&aligned_manifest, &args.out.join("manifest.json"))?;
    let report = json!({
        "config": {
            "subdiv": args.subdiv,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "manifest": args.manifest.display().to_string(),
        },
        "parameter_rotations": normalized.iter().map(|n| json!({
            "id": n.id,
            "left": n.param_rotations[0],
            "right": n.param_rotations[1],
        })).collect::<Vec<_>>(),
        "sides": side_reports,
    });
    write_json_artifact(&report, seed, &args.out.join("align_report.json"))?;
    println!(
        "aligned {} subjects on the {}-vertex tessellation: {}",
        aligned.len(),
        tess.len(),
        args.out.display()
    );
    Ok(())
}

fn pdm_file(args: PdmArgs, _seed: u64) -> Result<()> {
    let coeffs = load_coeffs(&args.coeffs)?;
    let tess = shared_tessellation(args.subdiv)?;
    let surface = coeffs_to_pdm(&coeffs, &tess);
    let stem = args
        .coeffs
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("surface");
    let path = args.out.join(format!("{stem}.pdm"));
    save_pdm(&surface, &path)?;
    println!("sampled {} landmarks: {}", surface.len(), path.display());
    Ok(())
}

fn selection_mode(count: Option<usize>, p_threshold: Option<f64>, default_count: usize) -> SelectionMode {
    match (count, p_threshold) {
        (_, Some(threshold)) => SelectionMode::PValue { threshold },
        (Some(count), None) => SelectionMode::Count { count },
        (None, None) => SelectionMode::Count { count: default_count },
    }
}

fn select_features(args: SelectArgs, seed: u64) -> Result<()> {
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let features = cohort.feature_matrix();
    let labels = cohort.labels();
    let scores = jackknife_t_scores(&features, &labels)?;
    let df = (cohort.subjects.len() as f64 - 2.0).max(1.0);
    let mode = selection_mode(args.count, args.p_threshold, 10);
    let result = select(&scores, mode, df)?;
    let tagged: Vec<serde_json::Value> = result
        .selected
        .iter()
        .map(|&j| {
            let mut tag = serde_json::to_value(coefficient_tag(j, manifest.max_degree)).unwrap();
            tag["feature"] = j.into();
            tag["score"] = result.scores[j].into();
            tag["p_value"] = spharm_core::selection::t_to_pvalue(result.scores[j], df).into();
            tag
        })
        .collect();
    let report = json!({
        "cohort": manifest.cohort,
        "n_features": features.ncols(),
        "mode": result.mode,
        "df": df,
        "t_statistic": result.t_statistic,
        "aggregation": result.aggregation,
        "selected": tagged,
    });
    write_json_artifact(&report, seed, &args.out.join("selection.json"))?;
    println!(
        "scored {} features, selected {}: {}",
        features.ncols(),
        result.selected.len(),
        args.out.join("selection.json").display()
    );
    Ok(())
}

fn kernel_spec(kind: KernelKindArg, gamma_exp: i32) -> KernelSpec {
    match kind {
        KernelKindArg::Linear => KernelSpec::Linear,
        KernelKindArg::Rbf => KernelSpec::Rbf { gamma: (2.0f64).powi(gamma_exp) },
    }
}

fn loocv_run(args: LoocvArgs, seed: u64) -> Result<()> {
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let features = cohort.feature_matrix();
    let labels = cohort.labels();
    let ids = cohort.ids();
    let cfg = LoocvConfig::new(
        kernel_spec(args.kernel, args.gamma_exp),
        (2.0f64).powi(args.c_exp),
        selection_mode(Some(args.count), args.p_threshold, 10),
    );
    let max_degree = manifest.max_degree;
    let report = loocv_tagged(&features, &labels, &ids, &cfg, &move |j| {
        coefficient_tag(j, max_degree)
    }, seed)?;
    write_json_artifact(&report, seed, &args.out.join("report.json"))?;
    // one-cell surface sidecar so single runs and grid sweeps plot alike;
    // in threshold mode the feature count is the mean over folds
    let n_features = match cfg.selection {
        SelectionMode::Count { count } => count,
        SelectionMode::PValue { .. } => {
            let total: usize = report.per_subject.iter().map(|s| s.n_selected).sum();
            (total as f64 / report.per_subject.len() as f64).round() as usize
        }
    };
    let cell = spharm_core::evaluate::GridCell {
        c_exp: args.c_exp,
        gamma_exp: args.gamma_exp,
        n_features,
        accuracy: report.metrics.accuracy,
    };
    let csv = format!("{}{}", text_banner(seed), surface_csv(&[cell]));
    atomic_write_text(&args.out.join("surface.csv"), &csv)?;
    println!(
        "loocv on '{}' ({} subjects): accuracy {:.4}, sensitivity {:.4}, specificity {:.4}",
        manifest.cohort,
        cohort.subjects.len(),
        report.metrics.accuracy,
        report.metrics.sensitivity,
        report.metrics.specificity
    );
    Ok(())
}

fn grid_run(args: GridArgs, seed: u64) -> Result<()> {
    if args.counts.is_empty() {
        bail!("--counts must list at least one feature count");
    }
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let features = cohort.feature_matrix();
    let labels = cohort.labels();
    let ids = cohort.ids();
    let grid = GridSpec {
        c_exponents: (args.c_exp_min, args.c_exp_max),
        gamma_exponents: (args.gamma_exp_min, args.gamma_exp_max),
        gamma_scale: args.gamma_scale,
    };
    let max_degree = manifest.max_degree;
    let result = grid_search(&features, &labels, &ids, &grid, &args.counts, &move |j| {
        coefficient_tag(j, max_degree)
    }, seed)?;
    let csv = format!("{}{}", text_banner(seed), surface_csv(&result.surface));
    atomic_write_text(&args.out.join("grid_surface.csv"), &csv)?;
    write_json_artifact(&result, seed, &args.out.join("grid_best.json"))?;
    println!(
        "grid on '{}': best accuracy {:.4} at count={}, C=2^{}, gamma=2^{}",
        manifest.cohort,
        result.best_accuracy,
        result.best_count,
        result.best_c_exp,
        result.best_gamma_exp
    );
    Ok(())
}

fn stats_run(args: StatsArgs, seed: u64) -> Result<()> {
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let side: Side = args.side.into();
    let tess = shared_tessellation(args.subdiv)?;
    let mut controls = Vec::new();
    let mut patients = Vec::new();
    for s in &cohort.subjects {
        let pdm = coeffs_to_pdm(s.side(side), &tess);
        match s.label {
            ClassLabel::Control => controls.push(pdm),
            ClassLabel::Patient => patients.push(pdm),
        }
    }
    let map = permutation_map(&patients, &controls, args.permutations, seed)?;
    let side_name = match side {
        Side::Left => "left",
        Side::Right => "right",
    };
    let csv = format!("{}{}", text_banner(seed), statmap_csv(&map));
    atomic_write_text(&args.out.join(format!("statmap_{side_name}.csv")), &csv)?;

    // mean surface over both groups carries the map for mesh viewers
    let mut mean = vec![Vector3::zeros(); tess.len()];
    for pdm in controls.iter().chain(patients.iter()) {
        for (m, p) in mean.iter_mut().zip(pdm.landmarks()) {
            *m += p;
        }
    }
    let k = (controls.len() + patients.len()) as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    save_off(&mean, tess.faces(), &args.out.join(format!("statmap_{side_name}.off")))?;
    write_json_artifact(
        &json!({
            "cohort": manifest.cohort,
            "side": side_name,
            "subdiv": args.subdiv,
            "n_permutations": args.permutations,
            "significant_raw": map.p_raw.iter().filter(|p| **p < 0.05).count(),
            "significant_corrected": map.p_corrected.iter().filter(|p| **p < 0.05).count(),
        }),
        seed,
        &args.out.join(format!("statmap_{side_name}.json")),
    )?;
    println!(
        "stats on '{}' ({side_name}): {} of {} vertices significant after correction",
        manifest.cohort,
        map.p_corrected.iter().filter(|p| **p < 0.05).count(),
        tess.len()
    );
    Ok(())
}

fn baseline_run(args: BaselineArgs, seed: u64) -> Result<()> {
    let (manifest, cohort) = load_cohort_at(&args.manifest)?;
    let variant = match args.variant {
        VariantArg::UnivariateSvm => PdmVariant::UnivariateSvm {
            subdivision: args.subdiv.unwrap_or(20),
            count: args.count,
        },
        VariantArg::PcaSvm => PdmVariant::PcaSvm {
            subdivision: args.subdiv.unwrap_or(20),
            components: args.components,
        },
        VariantArg::PcaFld => PdmVariant::PcaFld {
            subdivision: args.subdiv.unwrap_or(8),
            components: args.components,
            side: args.side.into(),
        },
    };
    let cfg = LoocvConfig::new(
        kernel_spec(args.kernel, args.gamma_exp),
        (2.0f64).powi(args.c_exp),
        SelectionMode::Count { count: args.count },
    );
    let report = pdm_pipeline(&cohort, variant, &cfg, seed)?;
    write_json_artifact(&report, seed, &args.out.join("baseline_report.json"))?;
    println!(
        "baseline on '{}': accuracy {:.4} ({})",
        manifest.cohort,
        report.metrics.accuracy,
        report.config["pipeline"].as_str().unwrap_or("?")
    );
    Ok(())
}
