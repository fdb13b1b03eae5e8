//! Closed-form fading numbers for Gaussian fading and the report type shared by
//! every evaluator.
//!
//! With `K = Cov(H_k)`, `d = E[H_k]` and `Sigma` the one-step prediction error
//! covariance of the vector process:
//!
//! * memoryless Gaussian MISO: `chi = -1 + log d*^2 - Ei(-d*^2)`,
//!   with `d*^2 = max_x |d^T x|^2 / Var(H^T x) = d^H K^{-1} d`;
//! * spatially IID unit-variance components with scalar prediction error `eps^2`:
//!   the memoryless value plus `log(1/eps^2)`;
//! * general Gaussian upper bound: the memoryless value plus `log(||K|| / lambda_min(Sigma))`.

use std::collections::BTreeMap;
use std::fmt;

use crate::bounds::{self, BoundEvaluation, McConfig, OptimizerConfig, Past};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::prediction::{self, converged_block_sigma, converged_prediction_error};
use crate::process_models::{FadingProcess, GaussianVectorProcess, DEFAULT_MAX_LAG};
use crate::special_functions::log_minus_ei_neg;

/// Which formula or bound produced a [`FadingNumberReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FadingNumberKind {
    MemorylessGeneral,
    MemorylessGauss,
    GaussSpatialIid,
    GaussUpper,
    UpperBound,
    LowerBound,
    Isotropic,
}

impl FadingNumberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FadingNumberKind::MemorylessGeneral => "memoryless_general",
            FadingNumberKind::MemorylessGauss => "memoryless_gauss",
            FadingNumberKind::GaussSpatialIid => "gauss_spatial_iid",
            FadingNumberKind::GaussUpper => "gauss_upper",
            FadingNumberKind::UpperBound => "upper_bound",
            FadingNumberKind::LowerBound => "lower_bound",
            FadingNumberKind::Isotropic => "isotropic",
        }
    }
}

impl fmt::Display for FadingNumberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fading-number value in nats together with how it was obtained.
#[derive(Clone, Debug)]
pub struct FadingNumberReport {
    pub value: f64,
    pub kind: FadingNumberKind,
    pub direction: Option<CVector>,
    /// Named numeric diagnostics (`d_star`, `epsilon_sq`, `lambda_min_sigma`, `stderr`, ...).
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// The underlying bracket evaluation for bound-based kinds.
    pub evaluation: Option<BoundEvaluation>,
}

impl FadingNumberReport {
    pub fn new(kind: FadingNumberKind, value: f64) -> Self {
        Self {
            value,
            kind,
            direction: None,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
            evaluation: None,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    /// `false` when an optimizer ran out of budget.
    pub fn converged(&self) -> bool {
        self.diagnostic("optimizer_converged").is_none_or(|v| v != 0.0)
    }
}

fn check_pd(m: &CMatrix, what: &str) -> Result<()> {
    if !linalg::is_hermitian_pd(m, 1e-10) {
        return Err(Error::Domain(format!("{what} must be Hermitian positive definite")));
    }
    Ok(())
}

/// `(d*, x)`: the largest value of `|d^T x| / sqrt(Var(H^T x))` over unit `x`, and a maximizer.
///
/// Closed form `d*^2 = d^H K^{-1} d`, attained at `x = conj(w) / ||w||` with `w = K^{-1} d`.
/// For `d = 0` every direction attains `0`; the first standard basis vector is returned.
pub fn d_star(mean: &CVector, covariance: &CMatrix) -> Result<(f64, CVector)> {
    let nt = mean.len();
    if covariance.shape() != (nt, nt) || nt == 0 {
        return Err(Error::Domain("covariance must be nt x nt".into()));
    }
    check_pd(covariance, "covariance")?;
    let chol = linalg::symmetrize(covariance)
        .cholesky()
        .ok_or_else(|| Error::Domain("covariance is singular".into()))?;
    let w = chol.solve(mean);
    let value_sq = linalg::inner(mean, &w).re.max(0.0);
    let wn = linalg::norm(&w);
    if value_sq == 0.0 || wn == 0.0 {
        let mut e = CVector::from_element(nt, ZERO);
        e[0] = ONE;
        return Ok((0.0, e));
    }
    let direction = w.map(|z| z.conj()).unscale(wn);
    Ok((value_sq.sqrt(), direction))
}

/// `|d^T x| / sqrt(x^H-form variance)` for a unit direction `x`.
pub fn d_star_quotient(mean: &CVector, covariance: &CMatrix, direction: &CVector) -> Result<f64> {
    let w = crate::process_models::hermitian_weight(direction, mean.len())?;
    let var = linalg::quad_form(&w, covariance);
    if !(var > 0.0) {
        return Err(Error::Domain("projection variance must be positive".into()));
    }
    Ok(linalg::inner(&w, mean).norm() / var.sqrt())
}

/// `-1 + log d*^2 - Ei(-d*^2)`, continuous at `d* = 0` where it equals `-1 - gamma`.
pub fn chi_memoryless_gauss(d_star_value: f64) -> Result<f64> {
    if !d_star_value.is_finite() || d_star_value < 0.0 {
        return Err(Error::Domain(format!("d* must be finite and nonnegative, got {d_star_value}")));
    }
    Ok(-1.0 + log_minus_ei_neg(d_star_value * d_star_value)?)
}

/// Spatially IID components of unit variance with scalar prediction error `eps^2`:
/// `-1 + log ||d||^2 - Ei(-||d||^2) + log(1/eps^2)`.
///
/// `eps^2 > 1` is impossible for unit-variance components and is rejected.
pub fn chi_gauss_spatial_iid(mean: &CVector, epsilon_sq: f64) -> Result<f64> {
    if !epsilon_sq.is_finite() || epsilon_sq <= 0.0 {
        return Err(Error::Domain(format!("epsilon^2 must be positive, got {epsilon_sq}")));
    }
    if epsilon_sq > 1.0 + 1e-12 {
        return Err(Error::NotNormalized(format!(
            "epsilon^2 = {epsilon_sq} exceeds 1; normalize the components to unit variance"
        )));
    }
    if mean.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("mean must be finite".into()));
    }
    Ok(chi_memoryless_gauss(linalg::norm(mean))? - epsilon_sq.ln())
}

/// Gaussian upper bound `-1 + log d*^2 - Ei(-d*^2) + log(||K|| / lambda_min(Sigma))`.
pub fn chi_gauss_upper(mean: &CVector, covariance: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let (lambda_min, _) = prediction::eigen_extremes(sigma)?;
    if !(lambda_min > 0.0) {
        return Err(Error::Regularity(format!(
            "prediction error covariance is singular (lambda_min = {lambda_min:e})"
        )));
    }
    let (d, _) = d_star(mean, covariance)?;
    let (_, norm_k) = prediction::eigen_extremes(covariance)?;
    Ok(chi_memoryless_gauss(d)? + (norm_k / lambda_min).ln())
}

/// Memoryless Gaussian fading number of the marginal law of `H_k`.
pub fn memoryless_gauss_report(process: &GaussianVectorProcess) -> Result<FadingNumberReport> {
    let (d, direction) = d_star(process.mean(), process.stationary_covariance())?;
    let mut report = FadingNumberReport::new(FadingNumberKind::MemorylessGauss, chi_memoryless_gauss(d)?)
        .with("d_star", d);
    report.direction = Some(direction);
    Ok(report)
}

/// One-step prediction error covariance of the vector process given its infinite past.
pub fn prediction_error_covariance(
    process: &GaussianVectorProcess,
) -> Result<prediction::PredictionResult<CMatrix>> {
    let lags = process.autocovariances(DEFAULT_MAX_LAG);
    converged_block_sigma(&lags, process.order().max(1))
}

/// Gaussian upper bound for a process, with `Sigma` from the converged block recursion.
pub fn gauss_upper_report(process: &GaussianVectorProcess) -> Result<FadingNumberReport> {
    let k = process.stationary_covariance();
    let sigma = prediction_error_covariance(process)?;
    let value = chi_gauss_upper(process.mean(), k, &sigma.error_variance)?;
    let (d, direction) = d_star(process.mean(), k)?;
    let (lambda_min, _) = prediction::eigen_extremes(&sigma.error_variance)?;
    let (_, norm_k) = prediction::eigen_extremes(k)?;
    let mut report = FadingNumberReport::new(FadingNumberKind::GaussUpper, value)
        .with("d_star", d)
        .with("lambda_min_sigma", lambda_min)
        .with("norm_k", norm_k)
        .with("prediction_order", sigma.order_used as f64)
        .with("prediction_gap", sigma.convergence_gap);
    report.direction = Some(direction);
    Ok(report)
}

/// Closed form for a spatially IID process with unit-variance components.
///
/// Rejects processes whose components are correlated or not of unit variance.
pub fn spatial_iid_report(process: &GaussianVectorProcess) -> Result<FadingNumberReport> {
    if !process.is_spatially_iid() {
        return Err(Error::Precondition(
            "the closed form needs spatially IID components (AR and innovation matrices multiples of I)".into(),
        ));
    }
    let k = process.stationary_covariance();
    let variance = k[(0, 0)].re;
    if (variance - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(format!(
            "component variance is {variance}, expected 1; rescale the model"
        )));
    }
    let component: Vec<_> = process
        .autocovariances(DEFAULT_MAX_LAG)
        .iter()
        .map(|c| c[(0, 0)])
        .collect();
    let eps = converged_prediction_error(&component, process.order().max(1))?;
    let value = chi_gauss_spatial_iid(process.mean(), eps.error_variance)?;
    let norm_d = linalg::norm(process.mean());
    let mut report = FadingNumberReport::new(FadingNumberKind::GaussSpatialIid, value)
        .with("norm_d", norm_d)
        .with("epsilon_sq", eps.error_variance)
        .with("prediction_order", eps.order_used as f64)
        .with("prediction_gap", eps.convergence_gap);
    report.direction = Some(d_star(process.mean(), k)?.1);
    Ok(report)
}

/// Memoryless fading number `sup_x { log pi + E[log |H^T x|^2] - h(H^T x) }` of a general
/// law, by Monte Carlo with k-nearest-neighbour entropy estimates and sphere search.
pub fn chi_memoryless_general(
    process: &FadingProcess,
    mc: &McConfig,
    optimizer: &OptimizerConfig,
) -> Result<FadingNumberReport> {
    process.check_certificates()?;
    let mut report = bounds::lower_bound_monte_carlo(process, Past::Finite(0), mc, optimizer)?;
    report.kind = FadingNumberKind::MemorylessGeneral;
    if !report.converged() {
        return Err(Error::NonConvergence(format!(
            "sphere search exhausted its budget; best value so far {:.9}",
            report.value
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::EULER_GAMMA;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    #[test]
    fn d_star_identity_covariance() {
        let d = CVector::from_vec(vec![c(0.6), c(0.8)]);
        let (v, x) = d_star(&d, &diag(&[1.0, 1.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!((x[0] - c(0.6)).norm() < 1e-15 && (x[1] - c(0.8)).norm() < 1e-15);
    }

    #[test]
    fn d_star_diagonal_example() {
        let d = CVector::from_vec(vec![c(1.0), c(1.0)]);
        let k = diag(&[1.0, 4.0]);
        let (v, x) = d_star(&d, &k).unwrap();
        assert!((v - 1.25f64.sqrt()).abs() < 1e-12);
        assert!((d_star_quotient(&d, &k, &x).unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn d_star_phase_invariant_and_zero_mean() {
        let d = CVector::from_vec(vec![Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.5)]);
        let k = CMatrix::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.3, 0.4), Complex64::new(0.3, -0.4), c(1.0)]);
        let (a, _) = d_star(&d, &k).unwrap();
        let (b, _) = d_star(&d.map(|z| z * Complex64::from_polar(1.0, 1.1)), &k).unwrap();
        assert!((a - b).abs() < 1e-12);
        let (z, x) = d_star(&CVector::from_element(2, ZERO), &k).unwrap();
        assert_eq!(z, 0.0);
        assert!((linalg::norm(&x) - 1.0).abs() < 1e-15);
        assert!(d_star(&d, &diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn memoryless_examples() {
        assert!((chi_memoryless_gauss(1.0).unwrap() + 0.780_616_065_604_479_7).abs() < 1e-9);
        assert!((chi_memoryless_gauss(0.0).unwrap() + 1.0 + EULER_GAMMA).abs() < 1e-15);
        let big = 40.0f64;
        assert!((chi_memoryless_gauss(big).unwrap() - (-1.0 + (big * big).ln())).abs() < 1e-12);
        assert!(chi_memoryless_gauss(-1.0).is_err());
    }

    #[test]
    fn spatial_iid_memory_term() {
        let d = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let base = chi_gauss_spatial_iid(&d, 1.0).unwrap();
        assert_eq!(base, chi_memoryless_gauss(1.0).unwrap());
        let v = chi_gauss_spatial_iid(&d, 0.75).unwrap();
        assert!((v + 0.492_934_0).abs() < 1e-6);
        let half = chi_gauss_spatial_iid(&d, 0.375).unwrap();
        assert!((half - v - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(chi_gauss_spatial_iid(&d, 1.5), Err(Error::NotNormalized(_))));
        assert!(matches!(chi_gauss_spatial_iid(&d, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn upper_bound_examples() {
        let d = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let white = GaussianVectorProcess::spatially_iid_unit(d.clone(), &[]).unwrap();
        let r = gauss_upper_report(&white).unwrap();
        assert!((r.value - chi_memoryless_gauss(1.0).unwrap()).abs() < 1e-12);
        let ar = GaussianVectorProcess::spatially_iid_unit(d.clone(), &[0.5]).unwrap();
        let upper = gauss_upper_report(&ar).unwrap();
        let iid = spatial_iid_report(&ar).unwrap();
        assert!((upper.value - iid.value).abs() < 1e-9);
        assert!((iid.value + 0.492_934_0).abs() < 1e-6);
        assert!(matches!(
            chi_gauss_upper(&d, &diag(&[1.0, 1.0]), &diag(&[1.0, 0.0])),
            Err(Error::Regularity(_))
        ));
    }

    #[test]
    fn spatial_iid_report_rejects_unnormalized() {
        let d = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let p = GaussianVectorProcess::spatially_iid_unit(d, &[0.5]).unwrap().scaled(2.0).unwrap();
        assert!(matches!(spatial_iid_report(&p), Err(Error::NotNormalized(_))));
    }
}
