//! Independent reference implementations used by the test suites.
//!
//! Everything in this crate deliberately avoids the code paths of the main
//! library: associated Legendre functions are evaluated from exact rational
//! polynomial coefficients, eigenvalues come from bisection on LDL^T inertia
//! counts, and the SVM dual is solved by exhaustive active-set enumeration.
//! These routines are slow and only suitable for small problem sizes.

use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

/// Exact associated Legendre function P_l^m(x) with the Condon-Shortley
/// phase, evaluated through rational arithmetic.
///
/// The Legendre polynomial is built from the closed form
/// P_l(x) = 2^-l sum_k C(l,k)^2 (x-1)^(l-k) (x+1)^k, differentiated m times
/// exactly, and evaluated at the exact rational image of `x`. The only
/// floating-point steps are the final conversion and, for odd m, one sqrt
/// and one multiply.
pub fn assoc_legendre_exact(l: u32, m: u32, x: f64) -> f64 {
    assert!(m <= l, "require m <= l");
    assert!(x.abs() <= 1.0, "require |x| <= 1");
    let coeffs = legendre_coefficients(l);
    let coeffs = differentiate(&coeffs, m);
    let xr = BigRational::from_float(x).expect("finite x");
    let poly = eval_poly(&coeffs, &xr);
    // (1 - x^2)^(m/2): the (m/2 floor) power stays rational; odd m leaves one
    // sqrt factor for floating point. The Condon-Shortley phase is (-1)^m.
    let s = BigRational::one() - &xr * &xr;
    let rational_part = rational_to_f64(&(poly * s.pow((m / 2) as i32)));
    if m % 2 == 1 {
        -rational_part * rational_to_f64(&s).max(0.0).sqrt()
    } else {
        rational_part
    }
}

/// Table of exact P_l^m polynomial parts up to a maximum degree, for test
/// loops that sweep every (l, m) pair: the rational coefficient work happens
/// once at construction instead of per evaluation.
pub struct ExactLegendreTable {
    l_max: u32,
    // derivatives[l][m] = d^m/dx^m P_l, ascending powers
    derivatives: Vec<Vec<Vec<BigRational>>>,
}

impl ExactLegendreTable {
    pub fn new(l_max: u32) -> Self {
        let derivatives = (0..=l_max)
            .map(|l| {
                let mut per_m = Vec::with_capacity(l as usize + 1);
                let mut current = legendre_coefficients(l);
                per_m.push(current.clone());
                for _ in 1..=l {
                    current = differentiate(&current, 1);
                    per_m.push(current.clone());
                }
                per_m
            })
            .collect();
        Self { l_max, derivatives }
    }

    /// P_l^m(x) with the Condon-Shortley phase; same contract as
    /// [`assoc_legendre_exact`].
    pub fn eval(&self, l: u32, m: u32, x: f64) -> f64 {
        assert!(l <= self.l_max && m <= l);
        assert!(x.abs() <= 1.0);
        let xr = BigRational::from_float(x).expect("finite x");
        let poly = eval_poly(&self.derivatives[l as usize][m as usize], &xr);
        let s = BigRational::one() - &xr * &xr;
        let rational_part = rational_to_f64(&(poly * s.pow((m / 2) as i32)));
        if m % 2 == 1 {
            -rational_part * rational_to_f64(&s).max(0.0).sqrt()
        } else {
            rational_part
        }
    }
}

/// Coefficients of P_l(x) in ascending powers of x, exact.
fn legendre_coefficients(l: u32) -> Vec<BigRational> {
    let n = l as usize;
    // (x-1)^(l-k) (x+1)^k expanded and summed with weights C(l,k)^2 / 2^l.
    let mut acc = vec![BigRational::zero(); n + 1];
    for k in 0..=n {
        let c = binomial(n, k);
        let w = BigRational::new(&c * &c, BigInt::one());
        let a = binomial_expansion(n - k, -1);
        let b = binomial_expansion(k, 1);
        // polynomial product a*b, degree n
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                acc[i + j] += &w * ai * bj;
            }
        }
    }
    let scale = BigRational::new(BigInt::one(), BigInt::from(2u64).pow(l));
    acc.into_iter().map(|c| c * &scale).collect()
}

/// Coefficients of (x + c)^n for c = ±1, ascending powers.
fn binomial_expansion(n: usize, c: i64) -> Vec<BigRational> {
    (0..=n)
        .map(|i| {
            let coef = binomial(n, i) * BigInt::from(c).pow((n - i) as u32);
            BigRational::new(coef, BigInt::one())
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k.min(n - k) {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

fn differentiate(coeffs: &[BigRational], times: u32) -> Vec<BigRational> {
    let mut c = coeffs.to_vec();
    for _ in 0..times {
        if c.len() <= 1 {
            return vec![BigRational::zero()];
        }
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, v)| v * BigRational::new(BigInt::from(i), BigInt::one()))
            .collect();
    }
    c
}

fn eval_poly(coeffs: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn rational_to_f64(r: &BigRational) -> f64 {
    // to_f64 on huge numerators can overflow; scale through strings is not
    // needed at the sizes used here (l <= 30).
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::MAX * r.numer().signum().to_f64().unwrap());
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_value_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_value_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature grid over the sphere that integrates band-limited products
/// exactly: Gauss-Legendre in cos(theta) crossed with a uniform phi grid.
/// Returns (theta, phi, weight) triples; weights sum to 4*pi.
pub fn sphere_quadrature(n_theta: usize, n_phi: usize) -> Vec<(f64, f64, f64)> {
    let (nodes, weights) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut grid = Vec::with_capacity(n_theta * n_phi);
    for (x, w) in nodes.iter().zip(weights.iter()) {
        let theta = x.clamp(-1.0, 1.0).acos();
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            grid.push((theta, phi, w * dphi));
        }
    }
    grid
}

/// Exhaustive solver for the SVM dual:
/// maximize sum(a) - 1/2 sum a_i a_j y_i y_j K_ij, s.t. y.a = 0, 0 <= a <= c.
///
/// Enumerates every partition of the variables into {lower, upper, free},
/// solves the equality-constrained KKT system on the free set, and keeps the
/// best feasible candidate. Exact up to linear-solve rounding. Exponential in
/// the number of samples; intended for k <= 10.
pub fn solve_dual_qp(gram: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let k = y.len();
    assert!(k <= 12, "brute-force QP is exponential; keep k small");
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_alpha = vec![0.0; k];
    let eps = 1e-9 * c.max(1.0);
    let mut assignment = vec![0u8; k]; // 0 = at 0, 1 = at C, 2 = free
    loop {
        if let Some(alpha) = solve_partition(gram, y, c, &assignment) {
            let feasible = alpha.iter().all(|&a| (-eps..=c + eps).contains(&a))
                && alpha.iter().zip(y).map(|(a, yy)| a * yy).sum::<f64>().abs() <= eps;
            if feasible {
                let obj = dual_objective(gram, y, &alpha);
                if obj > best_obj {
                    best_obj = obj;
                    best_alpha = alpha;
                }
            }
        }
        // next assignment in base 3
        let mut i = 0;
        loop {
            if i == k {
                return (best_alpha, best_obj);
            }
            assignment[i] += 1;
            if assignment[i] < 3 {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

fn solve_partition(gram: &[Vec<f64>], y: &[f64], c: f64, assignment: &[u8]) -> Option<Vec<f64>> {
    let k = y.len();
    let free: Vec<usize> = (0..k).filter(|&i| assignment[i] == 2).collect();
    let mut alpha = vec![0.0; k];
    for i in 0..k {
        if assignment[i] == 1 {
            alpha[i] = c;
        }
    }
    if free.is_empty() {
        return Some(alpha);
    }
    let nf = free.len();
    // KKT system: [Q_FF y_F; y_F^T 0] [a_F; nu] = [1 - Q_FB a_B; -y_B.a_B]
    let mut m = DMatrix::zeros(nf + 1, nf + 1);
    let mut rhs = DVector::zeros(nf + 1);
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            m[(r, s)] = y[i] * y[j] * gram[i][j];
        }
        m[(r, nf)] = y[i];
        m[(nf, r)] = y[i];
        let mut b = 1.0;
        for j in 0..k {
            if assignment[j] == 1 {
                b -= y[i] * y[j] * gram[i][j] * c;
            }
        }
        rhs[r] = b;
    }
    let mut bc = 0.0;
    for j in 0..k {
        if assignment[j] == 1 {
            bc -= y[j] * c;
        }
    }
    rhs[nf] = bc;
    let lu = m.full_piv_lu();
    let sol = lu.solve(&rhs)?;
    for (r, &i) in free.iter().enumerate() {
        alpha[i] = sol[r];
    }
    Some(alpha)
}

/// Dual objective in maximization form.
pub fn dual_objective(gram: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let k = y.len();
    let mut quad = 0.0;
    for i in 0..k {
        for j in 0..k {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Eigenvalues of a symmetric matrix by bisection on LDL^T inertia counts
/// (Sylvester's law: pivots of A - s*I negative <=> eigenvalues below s).
/// Returned in descending order.
pub fn symmetric_eigenvalues_bisect(a: &DMatrix<f64>, tol: f64) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - r);
        hi = hi.max(a[(i, i)] + r);
    }
    lo -= 1.0;
    hi += 1.0;
    let count_below = |s: f64| -> usize {
        // LDL^T with the shift; a tiny diagonal jitter keeps pivots nonzero.
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= s;
        }
        let mut neg = 0;
        let mut work = m;
        for p in 0..n {
            let d = work[(p, p)];
            let d = if d == 0.0 { 1e-300 } else { d };
            if d < 0.0 {
                neg += 1;
            }
            for i in (p + 1)..n {
                let f = work[(i, p)] / d;
                for j in p..n {
                    let v = work[(p, j)];
                    work[(i, j)] -= f * v;
                }
            }
        }
        neg
    };
    let mut eigs = Vec::with_capacity(n);
    for idx in 0..n {
        // idx-th smallest eigenvalue: smallest s with count_below(s) >= idx+1.
        let (mut a0, mut b0) = (lo, hi);
        while b0 - a0 > tol {
            let mid = 0.5 * (a0 + b0);
            if count_below(mid) > idx {
                b0 = mid;
            } else {
                a0 = mid;
            }
        }
        eigs.push(0.5 * (a0 + b0));
    }
    eigs.reverse();
    eigs
}

/// Hotelling T^2 via the explicit 3x3 cofactor inverse — no shared solver
/// code with the library implementation.
pub fn hotelling_t2_cofactor(group1: &[[f64; 3]], group2: &[[f64; 3]]) -> f64 {
    let (m1, s1) = mean_cov(group1);
    let (m2, s2) = mean_cov(group2);
    let k1 = group1.len() as f64;
    let k2 = group2.len() as f64;
    let mut pooled = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            pooled[i][j] = s1[i][j] / k1 + s2[i][j] / k2;
        }
    }
    let trace = pooled[0][0] + pooled[1][1] + pooled[2][2];
    let eps = 1e-9 * trace / 3.0;
    for (i, row) in pooled.iter_mut().enumerate() {
        row[i] += eps;
    }
    let inv = invert3(&pooled).expect("regularized matrix invertible");
    let d = [m1[0] - m2[0], m1[1] - m2[1], m1[2] - m2[2]];
    let mut t2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            t2 += d[i] * inv[i][j] * d[j];
        }
    }
    t2
}

fn mean_cov(g: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = g.len() as f64;
    let mut mean = [0.0; 3];
    for p in g {
        for i in 0..3 {
            mean[i] += p[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for p in g {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    (mean, cov)
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    Some(inv)
}

/// Plain two-sample Welch t statistic, computed directly from the samples.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
    let denom = (va / na + vb / nb).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (ma - mb) / denom
}
