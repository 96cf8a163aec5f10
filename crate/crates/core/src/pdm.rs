//! Fixed sphere tessellations and landmark surfaces sampled from
//! coefficient sets (the point distribution model).
//!
//! The tessellation is an n-frequency subdivision of the icosahedron:
//! every edge is split into n segments, faces are triangulated, and all
//! vertices are projected to the unit sphere, giving exactly 10n² + 2
//! vertices. Shared vertices are deduplicated by construction — corner,
//! edge, and interior points each have a single canonical owner — so two
//! builds with the same n are bitwise identical.

use crate::spharm::{synthesize, BasisFit, CoefficientSet, SphericalCoordinate, SpharmError};
use nalgebra::Vector3;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdmError {
    #[error("subdivision frequency must lie in 1..=64, got {0}")]
    BadSubdivision(u32),
    #[error("landmark count {got} does not match tessellation vertex count {expected}")]
    LandmarkCountMismatch { got: usize, expected: usize },
}

/// Unit-sphere tessellation shared by every subject of a study.
#[derive(Debug, Clone)]
pub struct SphereTessellation {
    subdivision: u32,
    vertices: Vec<Vector3<f64>>,
    params: Vec<SphericalCoordinate>,
    faces: Vec<[u32; 3]>,
}

impl SphereTessellation {
    pub fn subdivision(&self) -> u32 {
        self.subdivision
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn params(&self) -> &[SphericalCoordinate] {
        &self.params
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }
}

/// Landmarks sampled on a tessellation; correspondence across subjects is
/// positional (landmark k of every subject sits at tessellation vertex k).
#[derive(Debug, Clone, PartialEq)]
pub struct PdmSurface {
    subdivision: u32,
    landmarks: Vec<Vector3<f64>>,
}

impl PdmSurface {
    pub fn new(tess: &SphereTessellation, landmarks: Vec<Vector3<f64>>) -> Result<Self, PdmError> {
        if landmarks.len() != tess.len() {
            return Err(PdmError::LandmarkCountMismatch {
                got: landmarks.len(),
                expected: tess.len(),
            });
        }
        Ok(Self { subdivision: tess.subdivision, landmarks })
    }

    /// Wrap a landmark list whose tessellation is known from context
    /// (file loading, template averaging).
    pub fn from_raw(subdivision: u32, landmarks: Vec<Vector3<f64>>) -> Self {
        Self { subdivision, landmarks }
    }

    pub fn subdivision(&self) -> u32 {
        self.subdivision
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn landmarks(&self) -> &[Vector3<f64>] {
        &self.landmarks
    }

    pub fn landmarks_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.landmarks
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;

// the usual (0, ±1, ±φ) icosahedron, before normalization
const BASE_VERTICES: [[f64; 3]; 12] = [
    [-1.0, GOLDEN, 0.0],
    [1.0, GOLDEN, 0.0],
    [-1.0, -GOLDEN, 0.0],
    [1.0, -GOLDEN, 0.0],
    [0.0, -1.0, GOLDEN],
    [0.0, 1.0, GOLDEN],
    [0.0, -1.0, -GOLDEN],
    [0.0, 1.0, -GOLDEN],
    [GOLDEN, 0.0, -1.0],
    [GOLDEN, 0.0, 1.0],
    [-GOLDEN, 0.0, -1.0],
    [-GOLDEN, 0.0, 1.0],
];

const BASE_FACES: [[u32; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

/// Build the n-frequency icosphere with 10n² + 2 vertices.
pub fn icosphere(n: u32) -> Result<SphereTessellation, PdmError> {
    if !(1..=64).contains(&n) {
        return Err(PdmError::BadSubdivision(n));
    }
    let n = n as usize;
    let corners: Vec<Vector3<f64>> = BASE_VERTICES
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
        .collect();

    // Canonical edge list in first-encounter order over the fixed face list.
    let mut edge_ids: HashMap<(u32, u32), usize> = HashMap::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for f in &BASE_FACES {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let key = (a.min(b), a.max(b));
            edge_ids.entry(key).or_insert_with(|| {
                edges.push(key);
                edges.len() - 1
            });
        }
    }
    debug_assert_eq!(edges.len(), 30);

    let per_edge = n - 1;
    let per_face = if n >= 2 { (n - 1) * (n - 2) / 2 } else { 0 };
    let total = 12 + 30 * per_edge + 20 * per_face;

    let mut vertices = vec![Vector3::zeros(); total];
    vertices[..12].copy_from_slice(&corners);
    // Edge interiors, each owned by the canonical (u < v) direction.
    for (e, &(u, v)) in edges.iter().enumerate() {
        for t in 1..n {
            let p = (corners[u as usize] * (n - t) as f64 + corners[v as usize] * t as f64)
                / n as f64;
            vertices[12 + e * per_edge + (t - 1)] = p.normalize();
        }
    }
    // Face interiors.
    for (fi, f) in BASE_FACES.iter().enumerate() {
        let (a, b, c) = (
            corners[f[0] as usize],
            corners[f[1] as usize],
            corners[f[2] as usize],
        );
        let mut local = 0;
        for i in 1..n {
            for j in 1..(n - i) {
                let k = n - i - j;
                let p = (b * i as f64 + c * j as f64 + a * k as f64) / n as f64;
                vertices[12 + 30 * per_edge + fi * per_face + local] = p.normalize();
                local += 1;
            }
        }
        debug_assert_eq!(local, per_face);
    }

    // Global id of the barycentric point (a steps toward B, b steps toward C).
    let vertex_id = |f: &[u32; 3], a: usize, b: usize| -> u32 {
        let k = n - a - b;
        let corner_ab = |ga: u32, gb: u32, t: usize| -> u32 {
            let key = (ga.min(gb), ga.max(gb));
            let e = edge_ids[&key];
            let t = if ga < gb { t } else { n - t };
            (12 + e * per_edge + (t - 1)) as u32
        };
        if a == 0 && b == 0 {
            f[0]
        } else if a == n {
            f[1]
        } else if b == n {
            f[2]
        } else if b == 0 {
            corner_ab(f[0], f[1], a)
        } else if a == 0 {
            corner_ab(f[0], f[2], b)
        } else if k == 0 {
            corner_ab(f[1], f[2], b)
        } else {
            // interior: local index of (a, b) in the i=1.. / j=1.. loop above
            // with i = a, j = b; rows i = 1..a-1 contribute (n - i - 1) points.
            let fi = BASE_FACES.iter().position(|g| g == f).unwrap();
            let mut local = 0;
            for i in 1..a {
                local += n - i - 1;
            }
            local += b - 1;
            (12 + 30 * per_edge + fi * per_face + local) as u32
        }
    };

    let mut faces = Vec::with_capacity(20 * n * n);
    for f in &BASE_FACES {
        for a in 0..n {
            for b in 0..(n - a) {
                let p00 = vertex_id(f, a, b);
                let p10 = vertex_id(f, a + 1, b);
                let p01 = vertex_id(f, a, b + 1);
                faces.push([p00, p10, p01]);
                if a + b < n - 1 {
                    let p11 = vertex_id(f, a + 1, b + 1);
                    faces.push([p10, p11, p01]);
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20 * n * n);

    let params = vertices
        .iter()
        .map(SphericalCoordinate::from_unit_vector)
        .collect();
    Ok(SphereTessellation { subdivision: n as u32, vertices, params, faces })
}

/// Sample a coefficient set at every tessellation vertex.
pub fn coeffs_to_pdm(coeffs: &CoefficientSet, tess: &SphereTessellation) -> PdmSurface {
    let sampled = synthesize(coeffs, tess.params());
    PdmSurface { subdivision: tess.subdivision, landmarks: sampled.points }
}

/// Process-wide cache of tessellations; building one is deterministic, so
/// sharing is purely an allocation saving.
pub fn shared_tessellation(n: u32) -> Result<Arc<SphereTessellation>, PdmError> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<SphereTessellation>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(t) = guard.get(&n) {
        return Ok(Arc::clone(t));
    }
    let t = Arc::new(icosphere(n)?);
    guard.insert(n, Arc::clone(&t));
    Ok(t)
}

/// Process-wide cache of least-squares factorizations keyed by
/// (subdivision, degree). The SVD of the 4002 x 441 design matrix is by far
/// the most expensive step of fitting, and identical for every subject.
pub fn shared_basis_fit(n: u32, max_degree: u32) -> Result<Arc<BasisFit>, SpharmError> {
    type FitCache = Mutex<HashMap<(u32, u32), Arc<BasisFit>>>;
    static CACHE: OnceLock<FitCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let guard = cache.lock().unwrap();
        if let Some(f) = guard.get(&(n, max_degree)) {
            return Ok(Arc::clone(f));
        }
    }
    // built outside the lock: construction can take seconds at degree 20
    let tess = shared_tessellation(n).map_err(|_| SpharmError::DegreeTooLarge {
        degree: max_degree,
    })?;
    let fit = Arc::new(BasisFit::new(tess.params(), max_degree)?);
    let mut guard = cache.lock().unwrap();
    Ok(Arc::clone(guard.entry((n, max_degree)).or_insert(fit)))
}
