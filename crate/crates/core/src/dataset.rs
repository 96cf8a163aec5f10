//! Cohort ingestion, feature-vector construction, and the text file formats
//! every artifact uses (coefficient files, PDM files, manifests, reports).
//!
//! Feature order is fixed: left side then right, coefficients in canonical
//! basis order, axes x/y/z innermost. At degree 20 this is the 2646-long
//! vector (2 sides x 3 axes x 441 coefficients). All floats are serialized
//! with Rust's shortest round-trip formatting, so save/load is exact.

use crate::pdm::PdmSurface;
use crate::spharm::{basis_count, BasisIndex, CoefficientSet, SpharmError};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("subject '{id}': cannot read {path}: {source}")]
    SubjectFile {
        id: String,
        path: PathBuf,
        #[source]
        source: Box<DataError>,
    },
    #[error("subject '{id}': coefficient degree {got} does not match manifest degree {expected}")]
    DegreeMismatch { id: String, got: u32, expected: u32 },
    #[error("manifest has duplicate subject id '{0}'")]
    DuplicateId(String),
    #[error("manifest must contain both classes; found only {0:?}")]
    SingleClass(ClassLabel),
    #[error("manifest lists no subjects")]
    EmptyManifest,
    #[error(transparent)]
    Spharm(#[from] SpharmError),
}

/// Binary class label; patients are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Control,
    Patient,
}

impl ClassLabel {
    /// The ±1 encoding used by the classifiers.
    pub fn y(self) -> f64 {
        match self {
            ClassLabel::Control => -1.0,
            ClassLabel::Patient => 1.0,
        }
    }

    pub fn from_y(y: f64) -> Self {
        if y >= 0.0 {
            ClassLabel::Patient
        } else {
            ClassLabel::Control
        }
    }
}

/// Anatomical side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One subject: id, label, and a coefficient set per side.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub id: String,
    pub label: ClassLabel,
    pub left: CoefficientSet,
    pub right: CoefficientSet,
}

impl SubjectRecord {
    pub fn side(&self, side: Side) -> &CoefficientSet {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// An in-memory cohort with a shared expansion degree.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub name: String,
    pub max_degree: u32,
    pub subjects: Vec<SubjectRecord>,
}

impl Cohort {
    pub fn labels(&self) -> Vec<ClassLabel> {
        self.subjects.iter().map(|s| s.label).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }

    /// K x 6(L+1)^2 feature matrix in subject order.
    pub fn feature_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = feature_len(self.max_degree);
        let mut m = nalgebra::DMatrix::zeros(self.subjects.len(), n);
        for (k, s) in self.subjects.iter().enumerate() {
            for (j, v) in build_feature_vector(s).into_iter().enumerate() {
                m[(k, j)] = v;
            }
        }
        m
    }
}

/// Length of the flattened feature vector at a given degree.
pub fn feature_len(max_degree: u32) -> usize {
    6 * basis_count(max_degree)
}

/// Flat feature position of (side, basis index, axis).
pub fn feature_index(side: Side, index: BasisIndex, axis: usize, max_degree: u32) -> usize {
    debug_assert!(axis < 3);
    let side_offset = match side {
        Side::Left => 0,
        Side::Right => 3 * basis_count(max_degree),
    };
    side_offset + index.flat() * 3 + axis
}

/// Inverse of [`feature_index`].
pub fn feature_tuple(feature: usize, max_degree: u32) -> (Side, BasisIndex, usize) {
    let half = 3 * basis_count(max_degree);
    let (side, rem) = if feature < half {
        (Side::Left, feature)
    } else {
        (Side::Right, feature - half)
    };
    (side, BasisIndex::from_flat(rem / 3), rem % 3)
}

/// Concatenate both sides of a subject into one feature vector.
pub fn build_feature_vector(subject: &SubjectRecord) -> Vec<f64> {
    let mut out = Vec::with_capacity(feature_len(subject.left.max_degree()));
    for set in [&subject.left, &subject.right] {
        for c in set.coeffs() {
            out.extend_from_slice(&[c.x, c.y, c.z]);
        }
    }
    out
}

/// Human-readable tag for a selected feature, reported in JSON output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureTag {
    /// A spherical-harmonic coefficient component.
    Coefficient { side: Side, l: u32, m: i32, axis: char },
    /// A landmark coordinate of a PDM surface.
    Landmark { side: Side, vertex: usize, axis: char },
    /// A principal component score.
    Component { rank: usize },
}

const AXES: [char; 3] = ['x', 'y', 'z'];

/// Tag for a coefficient-space feature index.
pub fn coefficient_tag(feature: usize, max_degree: u32) -> FeatureTag {
    let (side, idx, axis) = feature_tuple(feature, max_degree);
    FeatureTag::Coefficient { side, l: idx.degree(), m: idx.order(), axis: AXES[axis] }
}

// ----------------------------------------------------------------------
// manifest
// ----------------------------------------------------------------------

/// On-disk description of a cohort. Subject paths are resolved relative to
/// the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub cohort: String,
    #[serde(rename = "L")]
    pub max_degree: u32,
    pub subjects: Vec<ManifestSubject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub label: ClassLabel,
    pub left: PathBuf,
    pub right: PathBuf,
}

impl Manifest {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.subjects.is_empty() {
            return Err(DataError::EmptyManifest);
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.id) {
                return Err(DataError::DuplicateId(s.id.clone()));
            }
        }
        let labels: HashSet<ClassLabel> = self.subjects.iter().map(|s| s.label).collect();
        if labels.len() < 2 {
            return Err(DataError::SingleClass(*labels.iter().next().unwrap()));
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DataError> {
    let text = read_text(path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|source| DataError::Json { path: path.to_path_buf(), source })?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|source| DataError::Json { path: path.to_path_buf(), source })?;
    atomic_write_text(path, &text)
}

/// Load every subject listed in a manifest. I/O errors are annotated with
/// the owning subject id.
pub fn load_cohort(manifest: &Manifest, manifest_dir: &Path) -> Result<Cohort, DataError> {
    manifest.validate()?;
    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for s in &manifest.subjects {
        let load_side = |rel: &Path| -> Result<CoefficientSet, DataError> {
            let path = manifest_dir.join(rel);
            let set = load_coeffs(&path).map_err(|e| DataError::SubjectFile {
                id: s.id.clone(),
                path: path.clone(),
                source: Box::new(e),
            })?;
            if set.max_degree() != manifest.max_degree {
                return Err(DataError::DegreeMismatch {
                    id: s.id.clone(),
                    got: set.max_degree(),
                    expected: manifest.max_degree,
                });
            }
            Ok(set)
        };
        subjects.push(SubjectRecord {
            id: s.id.clone(),
            label: s.label,
            left: load_side(&s.left)?,
            right: load_side(&s.right)?,
        });
    }
    Ok(Cohort { name: manifest.cohort.clone(), max_degree: manifest.max_degree, subjects })
}

// ----------------------------------------------------------------------
// coefficient files
// ----------------------------------------------------------------------

/// Write a coefficient file: header `SPHARM v1 L=<L>`, then one
/// `<l> <m> <cx> <cy> <cz>` line per index in canonical order.
pub fn save_coeffs(coeffs: &CoefficientSet, path: &Path) -> Result<(), DataError> {
    let mut text = format!("SPHARM v1 L={}\n", coeffs.max_degree());
    for (idx, c) in coeffs.iter() {
        writeln!(text, "{} {} {} {} {}", idx.degree(), idx.order(), c.x, c.y, c.z).unwrap();
    }
    atomic_write_text(path, &text)
}

pub fn load_coeffs(path: &Path) -> Result<CoefficientSet, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| DataError::Format {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file".into(),
    })?;
    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let degree: u32 = header
        .strip_prefix("SPHARM v1 L=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| fmt_err(1, format!("bad header '{header}', expected 'SPHARM v1 L=<L>'")))?;
    let expected = basis_count(degree);
    let mut coeffs = Vec::with_capacity(expected);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(fmt_err(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let l: u32 = fields[0]
            .parse()
            .map_err(|_| fmt_err(line_no, format!("bad degree '{}'", fields[0])))?;
        let m: i32 = fields[1]
            .parse()
            .map_err(|_| fmt_err(line_no, format!("bad order '{}'", fields[1])))?;
        let idx = BasisIndex::new(l, m)
            .map_err(|e| fmt_err(line_no, e.to_string()))?;
        if idx.flat() != coeffs.len() {
            return Err(fmt_err(
                line_no,
                format!("index ({l},{m}) out of canonical order (expected position {})", coeffs.len()),
            ));
        }
        let mut v = [0.0; 3];
        for (k, f) in fields[2..].iter().enumerate() {
            v[k] = f
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| fmt_err(line_no, format!("bad coefficient '{f}'")))?;
        }
        coeffs.push(Vector3::new(v[0], v[1], v[2]));
    }
    if coeffs.len() != expected {
        return Err(fmt_err(
            text.lines().count(),
            format!("expected {expected} entries for L={degree}, found {}", coeffs.len()),
        ));
    }
    Ok(CoefficientSet::from_coeffs(degree, coeffs)?)
}

// ----------------------------------------------------------------------
// PDM files
// ----------------------------------------------------------------------

/// Write a PDM file: header `PDM v1 n=<n>`, then one `x y z` line per
/// landmark in tessellation order.
pub fn save_pdm(surface: &PdmSurface, path: &Path) -> Result<(), DataError> {
    let mut text = format!("PDM v1 n={}\n", surface.subdivision());
    for p in surface.landmarks() {
        writeln!(text, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    atomic_write_text(path, &text)
}

pub fn load_pdm(path: &Path) -> Result<PdmSurface, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| DataError::Format {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file".into(),
    })?;
    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let n: u32 = header
        .strip_prefix("PDM v1 n=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| fmt_err(1, format!("bad header '{header}', expected 'PDM v1 n=<n>'")))?;
    let expected = (10 * n * n + 2) as usize;
    let mut landmarks = Vec::with_capacity(expected);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(fmt_err(i + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| fmt_err(i + 1, format!("bad coordinate '{f}'")))?;
        }
        landmarks.push(Vector3::new(v[0], v[1], v[2]));
    }
    if landmarks.len() != expected {
        return Err(fmt_err(
            text.lines().count(),
            format!("expected {expected} landmarks for n={n}, found {}", landmarks.len()),
        ));
    }
    Ok(PdmSurface::from_raw(n, landmarks))
}

// ----------------------------------------------------------------------
// sampled surface files
// ----------------------------------------------------------------------

/// Read a sampled surface: header `SURF v1`, then one
/// `theta phi x y z` line per sample.
pub fn load_surface(path: &Path) -> Result<crate::spharm::SurfaceSampling, DataError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let (_, header) = lines
        .next()
        .ok_or_else(|| fmt_err(1, "empty file".into()))?;
    if header.trim() != "SURF v1" {
        return Err(fmt_err(1, format!("bad header '{header}', expected 'SURF v1'")));
    }
    let mut params = Vec::new();
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(fmt_err(i + 1, format!("expected 5 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 5];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| fmt_err(i + 1, format!("bad number '{f}'")))?;
        }
        let coord = crate::spharm::SphericalCoordinate::new(v[0], v[1])
            .map_err(|e| fmt_err(i + 1, e.to_string()))?;
        params.push(coord);
        points.push(Vector3::new(v[2], v[3], v[4]));
    }
    if params.is_empty() {
        return Err(fmt_err(1, "no samples".into()));
    }
    Ok(crate::spharm::SurfaceSampling::new(params, points))
}

/// Write a sampled surface in the `SURF v1` format.
pub fn save_surface(
    sampling: &crate::spharm::SurfaceSampling,
    path: &Path,
) -> Result<(), DataError> {
    let mut text = String::from("SURF v1\n");
    for (c, p) in sampling.params.iter().zip(&sampling.points) {
        writeln!(text, "{} {} {} {} {}", c.theta(), c.phi(), p.x, p.y, p.z).unwrap();
    }
    atomic_write_text(path, &text)
}

// ----------------------------------------------------------------------
// generic text + JSON output
// ----------------------------------------------------------------------

/// Write text through a temporary file in the same directory plus an atomic
/// rename, so a crash never leaves a partial target behind.
pub fn atomic_write_text(path: &Path, text: &str) -> Result<(), DataError> {
    let io_err = |source| DataError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension(format!(
        "tmp.{}",
        std::process::id()
    ));
    std::fs::write(&tmp, text).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Serialize any report structure to pretty JSON, atomically.
pub fn save_report<T: Serialize>(report: &T, path: &Path) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|source| DataError::Json { path: path.to_path_buf(), source })?;
    atomic_write_text(path, &format!("{text}\n"))
}

fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// ASCII OFF export of a triangulated surface.
pub fn save_off(
    vertices: &[Vector3<f64>],
    faces: &[[u32; 3]],
    path: &Path,
) -> Result<(), DataError> {
    let mut text = String::from("OFF\n");
    writeln!(text, "{} {} 0", vertices.len(), faces.len()).unwrap();
    for v in vertices {
        writeln!(text, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in faces {
        writeln!(text, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    atomic_write_text(path, &text)
}
