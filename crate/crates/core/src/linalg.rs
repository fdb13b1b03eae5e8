//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest entry of `|M - M^H|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `M` by `(M + M^H) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Real part of `w^H M w`.
pub fn quad_form(w: &CVector, m: &CMatrix) -> f64 {
    (w.adjoint() * m * w)[(0, 0)].re
}

/// `w^H v`.
pub fn inner(w: &CVector, v: &CVector) -> Complex64 {
    w.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Hermitian and positive definite (Cholesky succeeds and the smallest eigenvalue is positive).
pub fn is_hermitian_pd(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() || hermitian_defect(m) > tol * (1.0 + max_abs(m)) {
        return false;
    }
    let h = symmetrize(m);
    h.clone().cholesky().is_some() && h.symmetric_eigenvalues().min() > 0.0
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral radius of a complex square matrix, via the eigenvalues of its real embedding.
pub fn spectral_radius(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            real[(i, j)] = z.re;
            real[(i + n, j + n)] = z.re;
            real[(i, j + n)] = -z.im;
            real[(i + n, j)] = z.im;
        }
    }
    real.complex_eigenvalues()
        .iter()
        .fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Smallest and largest eigenvalue of a Hermitian matrix (unchecked).
pub fn hermitian_extremes(m: &CMatrix) -> (f64, f64) {
    let ev = symmetrize(m).symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Lower Cholesky factor of a Hermitian PD matrix.
pub fn cholesky_lower(m: &CMatrix, what: &str) -> Result<CMatrix> {
    symmetrize(m)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Model(format!("{what} is not positive definite")))
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Standard circularly symmetric complex Gaussian sample, `E|z|^2 = 1`.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniformly distributed unit vector in `C^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| standard_complex_normal(rng));
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.unscale(nv);
        }
    }
}

/// Haar-distributed unitary matrix (QR of a complex Gaussian matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| standard_complex_normal(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            u[(i, j)] = q[(i, j)] * phase;
        }
    }
    u
}
