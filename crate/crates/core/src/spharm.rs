//! Real spherical-harmonic basis, surface synthesis, and least-squares
//! fitting of sampled surfaces to coefficient sets.
//!
//! The basis is real and orthonormal for the standard sphere measure
//! sin(θ) dθ dφ: the m = 0 functions are N(l,0) P_l(cos θ), the m > 0
//! functions √2 N(l,m) P_l^m(cos θ) cos(mφ), the m < 0 functions
//! √2 N(l,|m|) P_l^|m|(cos θ) sin(|m|φ), with N(l,m) the usual
//! √((2l+1)(l−m)!/(4π(l+m)!)) normalization. The associated Legendre
//! functions carry the Condon-Shortley phase. Indices are ordered
//! canonically: l ascending, m from −l to +l; this order is load-bearing
//! for feature indexing and must never change.

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

/// Hard cap on the expansion degree; conditioning of the 4002-vertex fit
/// degrades beyond this.
pub const MAX_SUPPORTED_DEGREE: u32 = 30;

#[derive(Debug, Error)]
pub enum SpharmError {
    #[error("colatitude must lie in [0, pi], longitude in [0, 2*pi); got theta={theta}, phi={phi}")]
    InvalidCoordinate { theta: f64, phi: f64 },
    #[error("basis order must satisfy |m| <= l; got l={l}, m={m}")]
    InvalidIndex { l: u32, m: i64 },
    #[error("associated Legendre argument must satisfy |x| <= 1; got {x}")]
    ArgumentOutOfRange { x: f64 },
    #[error("degree {degree} exceeds the supported maximum {MAX_SUPPORTED_DEGREE}")]
    DegreeTooLarge { degree: u32 },
    #[error("least-squares fit needs at least {needed} samples for degree {degree}, got {got}")]
    TooFewSamples { needed: usize, got: usize, degree: u32 },
    #[error(
        "basis matrix is rank deficient: smallest singular value {smallest:e} < 1e-10 x largest {largest:e}"
    )]
    RankDeficient { smallest: f64, largest: f64 },
    #[error("coefficient set has {got} entries, expected {expected} for degree {degree}")]
    WrongCoefficientCount { got: usize, expected: usize, degree: u32 },
}

/// A point on the unit sphere in colatitude/longitude form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoordinate {
    theta: f64,
    phi: f64,
}

impl SphericalCoordinate {
    pub fn new(theta: f64, phi: f64) -> Result<Self, SpharmError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta)
            || !(0.0..2.0 * std::f64::consts::PI).contains(&phi)
        {
            return Err(SpharmError::InvalidCoordinate { theta, phi });
        }
        Ok(Self { theta, phi })
    }

    /// Coordinates of a unit direction vector. The input is normalized
    /// defensively; longitude is folded into [0, 2π).
    pub fn from_unit_vector(v: &Vector3<f64>) -> Self {
        let n = v.norm();
        let theta = (v.z / n).clamp(-1.0, 1.0).acos();
        let mut phi = v.y.atan2(v.x);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        if phi >= 2.0 * std::f64::consts::PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The corresponding unit vector (x, y, z).
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        Vector3::new(st * cp, st * sp, ct)
    }
}

/// Degree/order pair identifying one basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex {
    l: u32,
    m: i32,
}

impl BasisIndex {
    pub fn new(l: u32, m: i32) -> Result<Self, SpharmError> {
        if m.unsigned_abs() > l {
            return Err(SpharmError::InvalidIndex { l, m: m as i64 });
        }
        Ok(Self { l, m })
    }

    pub fn degree(&self) -> u32 {
        self.l
    }

    pub fn order(&self) -> i32 {
        self.m
    }

    /// Position in the canonical order: l ascending, m from −l to +l.
    pub fn flat(&self) -> usize {
        (self.l as usize) * (self.l as usize) + (self.l as i64 + self.m as i64) as usize
    }

    /// Inverse of [`BasisIndex::flat`].
    pub fn from_flat(flat: usize) -> Self {
        let l = (flat as f64).sqrt() as usize;
        // guard against rounding at perfect squares
        let l = if (l + 1) * (l + 1) <= flat { l + 1 } else { l };
        let m = flat as i64 - (l * l) as i64 - l as i64;
        Self { l: l as u32, m: m as i32 }
    }
}

/// Number of basis functions up to and including `max_degree`.
pub fn basis_count(max_degree: u32) -> usize {
    let n = max_degree as usize + 1;
    n * n
}

/// Truncated expansion of one surface: a 3-vector coefficient per basis
/// index, stored densely in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    max_degree: u32,
    coeffs: Vec<Vector3<f64>>,
}

impl CoefficientSet {
    pub fn zeros(max_degree: u32) -> Self {
        Self { max_degree, coeffs: vec![Vector3::zeros(); basis_count(max_degree)] }
    }

    pub fn from_coeffs(max_degree: u32, coeffs: Vec<Vector3<f64>>) -> Result<Self, SpharmError> {
        let expected = basis_count(max_degree);
        if coeffs.len() != expected {
            return Err(SpharmError::WrongCoefficientCount {
                got: coeffs.len(),
                expected,
                degree: max_degree,
            });
        }
        Ok(Self { max_degree, coeffs })
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, index: BasisIndex) -> Vector3<f64> {
        self.coeffs[index.flat()]
    }

    pub fn set(&mut self, index: BasisIndex, value: Vector3<f64>) {
        self.coeffs[index.flat()] = value;
    }

    pub fn coeffs(&self) -> &[Vector3<f64>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisIndex, &Vector3<f64>)> {
        self.coeffs.iter().enumerate().map(|(i, c)| (BasisIndex::from_flat(i), c))
    }
}

/// Parameter locations paired with sampled surface points.
#[derive(Debug, Clone)]
pub struct SurfaceSampling {
    pub params: Vec<SphericalCoordinate>,
    pub points: Vec<Vector3<f64>>,
}

impl SurfaceSampling {
    pub fn new(params: Vec<SphericalCoordinate>, points: Vec<Vector3<f64>>) -> Self {
        assert_eq!(params.len(), points.len(), "params and points must pair up");
        assert!(!params.is_empty(), "sampling must be non-empty");
        Self { params, points }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Associated Legendre function P_l^m(x) with the Condon-Shortley phase,
/// by the standard stable recurrences: seed P_m^m, lift to P_{m+1}^m, then
/// recur upward in l.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> Result<f64, SpharmError> {
    if m > l {
        return Err(SpharmError::InvalidIndex { l, m: m as i64 });
    }
    if x.abs() > 1.0 {
        return Err(SpharmError::ArgumentOutOfRange { x });
    }
    Ok(assoc_legendre_unchecked(l, m, x))
}

fn assoc_legendre_unchecked(l: u32, m: u32, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^(m/2)
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    // P_{m+1}^m = x (2m+1) P_m^m
    let mut pm1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut plm = 0.0;
    for ll in (m + 2)..=l {
        let llf = ll as f64;
        let mf = m as f64;
        plm = ((2.0 * llf - 1.0) * x * pm1 - (llf + mf - 1.0) * pmm) / (llf - mf);
        pmm = pm1;
        pm1 = plm;
    }
    plm
}

/// Orthonormalization constant N(l,m) = sqrt((2l+1)(l-m)!/(4π(l+m)!)),
/// with the factorial ratio accumulated as a product for stability.
fn normalization(l: u32, m: u32) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2.0 * l as f64 + 1.0) * ratio / (4.0 * std::f64::consts::PI)).sqrt()
}

/// One real orthonormal spherical harmonic evaluated at a point.
pub fn real_sph_harm(index: BasisIndex, coord: SphericalCoordinate) -> f64 {
    let x = coord.theta.cos();
    let m_abs = index.m.unsigned_abs();
    let p = assoc_legendre_unchecked(index.l, m_abs, x);
    let n = normalization(index.l, m_abs);
    let sqrt2 = std::f64::consts::SQRT_2;
    match index.m.cmp(&0) {
        std::cmp::Ordering::Equal => n * p,
        std::cmp::Ordering::Greater => sqrt2 * n * p * (m_abs as f64 * coord.phi).cos(),
        std::cmp::Ordering::Less => sqrt2 * n * p * (m_abs as f64 * coord.phi).sin(),
    }
}

/// Evaluate all basis functions up to `max_degree` at one point, into `out`
/// (canonical order). Shares the Legendre recurrences across indices, so a
/// full row costs O(L^2) instead of O(L^3).
pub fn eval_basis_row(coord: SphericalCoordinate, max_degree: u32, out: &mut [f64]) {
    let count = basis_count(max_degree);
    assert_eq!(out.len(), count);
    let x = coord.theta.cos();
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let lmax = max_degree as usize;
    // p[tri(l) + m] = P_l^m(x), triangular storage
    let tri = |l: usize| l * (l + 1) / 2;
    let mut p = vec![0.0; tri(lmax + 1) + lmax + 1];
    p[0] = 1.0;
    // diagonal and first subdiagonal
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
        p[tri(m) + m] = pmm;
        if m < lmax {
            p[tri(m + 1) + m] = x * (2.0 * m as f64 + 1.0) * pmm;
        }
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            p[tri(l) + m] = ((2.0 * lf - 1.0) * x * p[tri(l - 1) + m]
                - (lf + mf - 1.0) * p[tri(l - 2) + m])
                / (lf - mf);
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=lmax {
        for m in -(l as i32)..=(l as i32) {
            let ma = m.unsigned_abs() as usize;
            let n = normalization(l as u32, ma as u32);
            let plm = p[tri(l) + ma];
            let j = l * l + (l as i32 + m) as usize;
            out[j] = match m.cmp(&0) {
                std::cmp::Ordering::Equal => n * plm,
                std::cmp::Ordering::Greater => {
                    sqrt2 * n * plm * (ma as f64 * coord.phi).cos()
                }
                std::cmp::Ordering::Less => sqrt2 * n * plm * (ma as f64 * coord.phi).sin(),
            };
        }
    }
}

/// Dense design matrix: row per parameter point, column per basis index in
/// canonical order.
pub fn basis_matrix(params: &[SphericalCoordinate], max_degree: u32) -> DMatrix<f64> {
    let cols = basis_count(max_degree);
    let mut mat = DMatrix::zeros(params.len(), cols);
    let mut row = vec![0.0; cols];
    for (i, &coord) in params.iter().enumerate() {
        eval_basis_row(coord, max_degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            mat[(i, j)] = *v;
        }
    }
    mat
}

/// Evaluate the truncated expansion at each parameter point.
pub fn synthesize(coeffs: &CoefficientSet, params: &[SphericalCoordinate]) -> SurfaceSampling {
    let count = coeffs.len();
    let mut row = vec![0.0; count];
    let points = params
        .iter()
        .map(|&coord| {
            eval_basis_row(coord, coeffs.max_degree(), &mut row);
            let mut p = Vector3::zeros();
            for (c, y) in coeffs.coeffs().iter().zip(row.iter()) {
                p += c * *y;
            }
            p
        })
        .collect();
    SurfaceSampling { params: params.to_vec(), points }
}

/// Reusable least-squares fitter for a fixed (params, degree) pair.
///
/// Holds the SVD of the design matrix so many point sets sampled on the same
/// tessellation can be fitted without refactorizing.
pub struct BasisFit {
    max_degree: u32,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BasisFit {
    pub fn new(params: &[SphericalCoordinate], max_degree: u32) -> Result<Self, SpharmError> {
        if max_degree > MAX_SUPPORTED_DEGREE {
            return Err(SpharmError::DegreeTooLarge { degree: max_degree });
        }
        let needed = basis_count(max_degree);
        if params.len() < needed {
            return Err(SpharmError::TooFewSamples {
                needed,
                got: params.len(),
                degree: max_degree,
            });
        }
        let design = basis_matrix(params, max_degree);
        let svd = design.svd(true, true);
        let largest = svd.singular_values.max();
        let smallest = svd.singular_values.min();
        if smallest < 1e-10 * largest {
            return Err(SpharmError::RankDeficient { smallest, largest });
        }
        Ok(Self { max_degree, svd })
    }

    /// Solve the three per-axis least-squares problems for one point set.
    pub fn solve(&self, points: &[Vector3<f64>]) -> CoefficientSet {
        let n = points.len();
        let mut rhs = DMatrix::zeros(n, 3);
        for (i, p) in points.iter().enumerate() {
            rhs[(i, 0)] = p.x;
            rhs[(i, 1)] = p.y;
            rhs[(i, 2)] = p.z;
        }
        let sol = self.svd.solve(&rhs, 0.0).expect("svd computed with u and v");
        let coeffs = (0..sol.nrows())
            .map(|j| Vector3::new(sol[(j, 0)], sol[(j, 1)], sol[(j, 2)]))
            .collect();
        CoefficientSet { max_degree: self.max_degree, coeffs }
    }
}

/// Least-squares fit of a sampled surface, truncated at `max_degree`.
pub fn fit(points: &SurfaceSampling, max_degree: u32) -> Result<CoefficientSet, SpharmError> {
    let fitter = BasisFit::new(&points.params, max_degree)?;
    Ok(fitter.solve(&points.points))
}
