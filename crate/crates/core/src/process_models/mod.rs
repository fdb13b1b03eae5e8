//! Stationary fading processes.
//!
//! Gaussian processes are parameterized as `H_k = d + H~_k` with
//! `H~_k = sum_i A_i H~_{k-i} + U_k`, `U_k ~ CN(0, Q)` IID. Every second-order
//! quantity (stationary covariance, matrix autocovariances, spectral density)
//! is then available in closed form. Non-Gaussian processes are the same
//! recursion driven by scale-mixture innovations.
//!
//! Quadratic forms use `w = conj(x)` for a beam direction `x`, so that
//! `H^T x = w^H H` and `Var(H^T x) = w^H K w` with `K = E[H~ H~^H]`.

mod model_file;
mod sampler;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};

pub use model_file::{load_model_file, parse_model, ModelSpec};
pub use sampler::{
    empirical_autocovariances, FadingProcess, GeneralFadingProcess, MixtureInnovationProcess, PathSampler, SamplePath,
    ScaledSampler,
};

/// Number of lags carried by [`project`]; matches the largest Levinson order used downstream.
pub const DEFAULT_MAX_LAG: usize = 4096;

/// Tolerance on `||x|| = 1`.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Upper bound on the burn-in length of the samplers.
pub const MAX_BURN_IN: usize = 1_000_000;

/// Stationary circularly symmetric Gaussian vector process with mean `d`.
#[derive(Clone, Debug)]
pub struct GaussianVectorProcess {
    mean: CVector,
    ar: Vec<CMatrix>,
    innovation_covariance: CMatrix,
    innovation_factor: CMatrix,
    spectral_radius: f64,
    stationary_covariance: CMatrix,
}

impl GaussianVectorProcess {
    /// Validates shapes, positive definiteness of `Q` and stationarity of the AR recursion.
    pub fn new(mean: CVector, ar: Vec<CMatrix>, innovation_covariance: CMatrix) -> Result<Self> {
        let nt = mean.len();
        if nt == 0 {
            return Err(Error::Model("nt must be at least 1".into()));
        }
        if innovation_covariance.shape() != (nt, nt) {
            return Err(Error::Model(format!(
                "innovation covariance must be {nt}x{nt}, got {:?}",
                innovation_covariance.shape()
            )));
        }
        for (i, a) in ar.iter().enumerate() {
            if a.shape() != (nt, nt) {
                return Err(Error::Model(format!(
                    "AR coefficient {} must be {nt}x{nt}, got {:?}",
                    i + 1,
                    a.shape()
                )));
            }
        }
        if mean.iter().chain(innovation_covariance.iter()).chain(ar.iter().flatten())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Model("model parameters must be finite".into()));
        }
        if !linalg::is_hermitian_pd(&innovation_covariance, 1e-10) {
            return Err(Error::Model(
                "innovation covariance must be Hermitian positive definite".into(),
            ));
        }
        let innovation_covariance = linalg::symmetrize(&innovation_covariance);
        let innovation_factor = linalg::cholesky_lower(&innovation_covariance, "innovation covariance")?;
        let companion = companion_matrix(&ar, nt);
        let spectral_radius = linalg::spectral_radius(&companion);
        if spectral_radius >= 1.0 - 1e-12 {
            return Err(Error::Model(format!(
                "AR recursion is not stationary: companion spectral radius {spectral_radius}"
            )));
        }
        let stationary_covariance = solve_stationary(&companion, &innovation_covariance, nt)?;
        if !linalg::is_hermitian_pd(&stationary_covariance, 1e-9) {
            return Err(Error::Model("stationary covariance is not positive definite".into()));
        }
        Ok(Self {
            mean,
            ar,
            innovation_covariance,
            innovation_factor,
            spectral_radius,
            stationary_covariance,
        })
    }

    /// Memoryless process with covariance `K`.
    pub fn white(mean: CVector, covariance: CMatrix) -> Result<Self> {
        Self::new(mean, Vec::new(), covariance)
    }

    /// Spatially IID process whose components are independent copies of one
    /// scalar AR process with real coefficients `alphas` and unit variance.
    pub fn spatially_iid_unit(mean: CVector, alphas: &[f64]) -> Result<Self> {
        let nt = mean.len();
        let scalar = Self::new(
            CVector::from_element(1, ZERO),
            alphas.iter().map(|&a| CMatrix::from_element(1, 1, Complex64::new(a, 0.0))).collect(),
            CMatrix::from_element(1, 1, ONE),
        )?;
        let var = scalar.stationary_covariance[(0, 0)].re;
        let ar = alphas
            .iter()
            .map(|&a| CMatrix::identity(nt, nt).scale(a))
            .collect();
        Self::new(mean, ar, CMatrix::identity(nt, nt).unscale(var))
    }

    pub fn nt(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &CVector {
        &self.mean
    }

    pub fn ar_coefficients(&self) -> &[CMatrix] {
        &self.ar
    }

    pub fn innovation_covariance(&self) -> &CMatrix {
        &self.innovation_covariance
    }

    pub(crate) fn innovation_factor(&self) -> &CMatrix {
        &self.innovation_factor
    }

    /// AR memory depth `p`.
    pub fn order(&self) -> usize {
        self.ar.len()
    }

    /// Largest modulus of the companion-matrix eigenvalues.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// `K = Cov(H_k)`.
    pub fn stationary_covariance(&self) -> &CMatrix {
        &self.stationary_covariance
    }

    /// Matrix autocovariances `C(k) = E[H~_{t+k} H~_t^H]` for `k = 0..=max_lag`.
    pub fn autocovariances(&self, max_lag: usize) -> Vec<CMatrix> {
        let p = self.ar.len();
        let nt = self.nt();
        let mut c = Vec::with_capacity(max_lag + 1);
        c.push(self.stationary_covariance.clone());
        if p == 0 {
            c.extend((0..max_lag).map(|_| CMatrix::zeros(nt, nt)));
            return c;
        }
        // Yule-Walker: C(k) = sum_i A_i C(k - i), with C(-m) = C(m)^H.
        let full = self.companion_covariance();
        for k in 1..=max_lag {
            let next = if k < p {
                full.view((0, k * nt), (nt, nt)).into_owned()
            } else {
                let mut acc = CMatrix::zeros(nt, nt);
                for (i, a) in self.ar.iter().enumerate() {
                    let lag = k as isize - (i as isize + 1);
                    let ci = if lag >= 0 {
                        c[lag as usize].clone()
                    } else {
                        c[(-lag) as usize].adjoint()
                    };
                    acc += a * ci;
                }
                acc
            };
            c.push(next);
        }
        c
    }

    /// Covariance of the stacked state `(H~_t, ..., H~_{t-p+1})`.
    fn companion_covariance(&self) -> CMatrix {
        let companion = companion_matrix(&self.ar, self.nt());
        solve_stationary_full(&companion, &self.innovation_covariance, self.nt())
    }

    /// `S(lambda) = Psi Q Psi^H` with `Psi = (I - sum_i A_i e^{-i i lambda})^{-1}`.
    pub fn spectral_density_matrix(&self, lambda: f64) -> CMatrix {
        let nt = self.nt();
        if self.ar.is_empty() {
            return self.innovation_covariance.clone();
        }
        let mut a = CMatrix::identity(nt, nt);
        for (i, ai) in self.ar.iter().enumerate() {
            let z = Complex64::from_polar(1.0, -(i as f64 + 1.0) * lambda);
            a -= ai * z;
        }
        let psi = a.try_inverse().expect("stationary AR polynomial is invertible on the unit circle");
        &psi * &self.innovation_covariance * psi.adjoint()
    }

    /// Burn-in steps before the first emitted sample: `50 p / (1 - rho)`, capped.
    pub fn burn_in(&self) -> usize {
        let p = self.ar.len();
        if p == 0 {
            return 0;
        }
        let steps = 50.0 * p as f64 / (1.0 - self.spectral_radius);
        (steps.ceil() as usize).min(MAX_BURN_IN)
    }

    /// The process `U H` for a unitary `U` (mean `U d`, coefficients `U A U^H`, `Q -> U Q U^H`).
    pub fn rotated(&self, u: &CMatrix) -> Result<Self> {
        let ua = |m: &CMatrix| u * m * u.adjoint();
        Self::new(
            u * &self.mean,
            self.ar.iter().map(ua).collect(),
            ua(&self.innovation_covariance),
        )
    }

    /// The process `c H` for a real `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale must be positive, got {c}")));
        }
        Self::new(
            self.mean.scale(c),
            self.ar.clone(),
            self.innovation_covariance.scale(c * c),
        )
    }

    /// Same second-order structure with a different mean.
    pub fn with_mean(&self, mean: CVector) -> Result<Self> {
        if mean.len() != self.nt() {
            return Err(Error::Model("mean length must equal nt".into()));
        }
        let mut out = self.clone();
        out.mean = mean;
        Ok(out)
    }

    /// Largest deviation of `C(k)`, `k <= max_lag`, from a multiple of the identity,
    /// plus `||d||`. Zero exactly when the Gaussian process is isotropically distributed.
    pub fn isotropy_defect(&self, max_lag: usize) -> f64 {
        let nt = self.nt();
        let mut worst = linalg::norm(&self.mean);
        for c in self.autocovariances(max_lag) {
            let avg = c.trace() / nt as f64;
            let dev = &c - CMatrix::identity(nt, nt) * avg;
            worst = worst.max(linalg::max_abs(&dev));
        }
        worst
    }

    /// Whether `H~` has independent, identically distributed components
    /// (all second-order quantities are multiples of the identity).
    pub fn is_spatially_iid(&self) -> bool {
        let nt = self.nt();
        let scalar_multiple = |m: &CMatrix| {
            let avg = m.trace() / nt as f64;
            linalg::max_abs(&(m - CMatrix::identity(nt, nt) * avg)) <= 1e-12 * (1.0 + linalg::max_abs(m))
        };
        self.ar.iter().all(scalar_multiple) && scalar_multiple(&self.innovation_covariance)
    }
}

pub(crate) fn companion_matrix(ar: &[CMatrix], nt: usize) -> CMatrix {
    let p = ar.len();
    let mut f = CMatrix::zeros(nt * p, nt * p);
    for (i, a) in ar.iter().enumerate() {
        f.view_mut((0, i * nt), (nt, nt)).copy_from(a);
    }
    for i in 1..p {
        f.view_mut((i * nt, (i - 1) * nt), (nt, nt))
            .copy_from(&CMatrix::identity(nt, nt));
    }
    f
}

/// Solves `P = F P F^H + E_0 Q E_0^H` by the doubling iteration.
fn solve_stationary_full(companion: &CMatrix, q: &CMatrix, nt: usize) -> CMatrix {
    let n = companion.nrows();
    let mut p = CMatrix::zeros(n, n);
    p.view_mut((0, 0), (nt, nt)).copy_from(q);
    let mut a = companion.clone();
    for _ in 0..200 {
        let update = &a * &p * a.adjoint();
        p += &update;
        a = &a * &a;
        if linalg::max_abs(&a) < 1e-20 || linalg::max_abs(&update) <= 1e-17 * linalg::max_abs(&p) {
            break;
        }
    }
    linalg::symmetrize(&p)
}

fn solve_stationary(companion: &CMatrix, q: &CMatrix, nt: usize) -> Result<CMatrix> {
    if companion.nrows() == 0 {
        return Ok(q.clone());
    }
    let full = solve_stationary_full(companion, q, nt);
    if full.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Model("stationary covariance diverged".into()));
    }
    Ok(full.view((0, 0), (nt, nt)).into_owned())
}

/// `K = Cov(H_k)` of a Gaussian process.
pub fn stationary_covariance(process: &GaussianVectorProcess) -> CMatrix {
    process.stationary_covariance().clone()
}

/// Scalar spectral density on `[-pi, pi)`.
pub type SpectralDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The scalar process `G_l = H_l^T x` for a fixed unit direction `x`.
#[derive(Clone)]
pub struct ScalarProjection {
    pub direction: CVector,
    /// `d^T x`.
    pub mean: Complex64,
    /// `c(k) = w^H C(k) w`, `w = conj(x)`, for `k = 0..`.
    pub autocovariance: Vec<Complex64>,
    spectral_density: SpectralDensity,
}

impl fmt::Debug for ScalarProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarProjection")
            .field("direction", &self.direction)
            .field("mean", &self.mean)
            .field("lags", &self.autocovariance.len())
            .finish()
    }
}

impl ScalarProjection {
    pub fn variance(&self) -> f64 {
        self.autocovariance[0].re
    }

    pub fn spectral_density(&self, lambda: f64) -> f64 {
        (self.spectral_density)(lambda)
    }

    pub fn density(&self) -> SpectralDensity {
        Arc::clone(&self.spectral_density)
    }
}

/// Checks `||x|| = 1` and returns `w = conj(x)`.
pub fn hermitian_weight(direction: &CVector, nt: usize) -> Result<CVector> {
    if direction.len() != nt {
        return Err(Error::Precondition(format!(
            "direction has length {}, expected {nt}",
            direction.len()
        )));
    }
    let n = linalg::norm(direction);
    if (n - 1.0).abs() > UNIT_TOLERANCE * 10.0 {
        return Err(Error::Precondition(format!("direction must have unit norm, got {n}")));
    }
    Ok(direction.map(|z| z.conj()))
}

/// Projection with [`DEFAULT_MAX_LAG`] autocovariance lags.
pub fn project(process: &GaussianVectorProcess, direction: &CVector) -> Result<ScalarProjection> {
    project_with_lags(process, direction, DEFAULT_MAX_LAG)
}

pub fn project_with_lags(
    process: &GaussianVectorProcess,
    direction: &CVector,
    max_lag: usize,
) -> Result<ScalarProjection> {
    let w = hermitian_weight(direction, process.nt())?;
    let autocovariance = process
        .autocovariances(max_lag)
        .iter()
        .map(|c| (w.adjoint() * c * &w)[(0, 0)])
        .collect::<Vec<_>>();
    let mean = linalg::inner(&w, process.mean());
    let proc = process.clone();
    let wd = w.clone();
    let spectral_density: SpectralDensity =
        Arc::new(move |lambda| linalg::quad_form(&wd, &proc.spectral_density_matrix(lambda)));
    Ok(ScalarProjection {
        direction: direction.clone(),
        mean,
        autocovariance,
        spectral_density,
    })
}
