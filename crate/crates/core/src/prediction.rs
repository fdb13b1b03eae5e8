//! One-step linear prediction of stationary processes.
//!
//! * scalar error `eps^2` by complex Levinson-Durbin, with order doubling until
//!   the error stops moving, and independently by the Szego-Kolmogorov
//!   integral `exp(mean log S)`;
//! * matrix error covariance `Sigma` by the Whittle (multivariate Levinson) recursion;
//! * extreme eigenvalues of Hermitian matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Largest prediction order tried by the converging routines.
pub const MAX_ORDER: usize = 4096;
/// Convergence threshold on successive doubled-order errors, relative to the variance.
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Default number of uniform nodes for the Szego integral.
pub const DEFAULT_SZEGO_NODES: usize = 4096;
/// Smallest accepted number of Szego nodes.
pub const MIN_SZEGO_NODES: usize = 2048;

/// Prediction error of order `order_used`, and how much it moved at the last doubling.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult<T> {
    pub error_variance: T,
    pub order_used: usize,
    pub convergence_gap: f64,
}

/// `exp((1/2pi) int log S)` by the trapezoidal rule on a uniform periodic grid.
pub fn szego_prediction_error(density: impl Fn(f64) -> f64) -> Result<f64> {
    szego_prediction_error_with_nodes(density, DEFAULT_SZEGO_NODES)
}

pub fn szego_prediction_error_with_nodes(density: impl Fn(f64) -> f64, nodes: usize) -> Result<f64> {
    if nodes < MIN_SZEGO_NODES {
        return Err(Error::Domain(format!(
            "Szego quadrature needs at least {MIN_SZEGO_NODES} nodes, got {nodes}"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / nodes as f64;
    let mut sum = 0.0;
    for j in 0..nodes {
        let lambda = -std::f64::consts::PI + step * j as f64;
        let s = density(lambda);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Regularity(format!(
                "spectral density is {s} at lambda = {lambda}; the process is not regular"
            )));
        }
        sum += s.ln();
    }
    Ok((sum / nodes as f64).exp())
}

/// Levinson-Durbin forward prediction errors `eps_0^2 .. eps_p^2` for `c(0..=p)`.
///
/// `c(k) = E[G_{t+k} conj(G_t)]`; the Toeplitz matrix is Hermitian.
pub fn levinson_error_sequence(c: &[Complex64]) -> Result<Vec<f64>> {
    let mut errors = Vec::with_capacity(c.len());
    levinson_run(c, |_, e| {
        errors.push(e);
        true
    })?;
    Ok(errors)
}

/// Runs the recursion, calling `visit(order, error)` after each order; stops when it returns false.
fn levinson_run(c: &[Complex64], mut visit: impl FnMut(usize, f64) -> bool) -> Result<()> {
    let c0 = c.first().ok_or_else(|| Error::Domain("empty autocovariance".into()))?;
    if c0.re <= 0.0 || c0.im.abs() > 1e-10 * c0.re.abs().max(1.0) {
        return Err(Error::IllPosedCovariance(format!(
            "c(0) must be real and positive, got {c0}"
        )));
    }
    let mut err = c0.re;
    if !visit(0, err) {
        return Ok(());
    }
    let mut a: Vec<Complex64> = Vec::with_capacity(c.len());
    let mut prev: Vec<Complex64> = Vec::with_capacity(c.len());
    for m in 1..c.len() {
        let mut num = c[m];
        for j in 1..m {
            num -= a[j - 1] * c[m - j];
        }
        let k = num / err;
        let k_sq = k.norm_sqr();
        if k_sq >= 1.0 {
            return Err(Error::IllPosedCovariance(format!(
                "Toeplitz covariance is not positive definite at order {m} (|k| = {})",
                k_sq.sqrt()
            )));
        }
        prev.clear();
        prev.extend_from_slice(&a);
        for j in 1..m {
            a[j - 1] = prev[j - 1] - k * prev[m - j - 1].conj();
        }
        a.push(k);
        err *= 1.0 - k_sq;
        if !(err > 0.0) {
            return Err(Error::IllPosedCovariance(format!(
                "prediction error vanished at order {m}"
            )));
        }
        if !visit(m, err) {
            break;
        }
    }
    Ok(())
}

/// Order-`p` forward prediction error for `c(0..=p)`.
pub fn levinson_prediction_error(c: &[Complex64]) -> Result<PredictionResult<f64>> {
    let errors = levinson_error_sequence(c)?;
    let p = errors.len() - 1;
    let gap = if p == 0 { 0.0 } else { (errors[p - 1] - errors[p]).abs() };
    Ok(PredictionResult {
        error_variance: errors[p],
        order_used: p,
        convergence_gap: gap,
    })
}

/// Infinite-past prediction error approximated by doubling the order from
/// `min_order` until successive errors differ by less than [`CONVERGENCE_TOL`]
/// (relative to `c(0)`), or the available lags / [`MAX_ORDER`] run out.
pub fn converged_prediction_error(c: &[Complex64], min_order: usize) -> Result<PredictionResult<f64>> {
    let limit = (c.len().saturating_sub(1)).min(MAX_ORDER);
    let c0 = c.first().map(|z| z.re).unwrap_or(0.0);
    let mut checkpoint = min_order.max(1).min(limit.max(1));
    let mut previous_checkpoint: Option<usize> = None;
    let mut errors: Vec<f64> = Vec::new();
    let mut result = None;
    levinson_run(&c[..=limit], |m, e| {
        errors.push(e);
        if m == checkpoint || m == limit {
            let reference = errors[previous_checkpoint.unwrap_or(m / 2)];
            let gap = (reference - e).abs();
            if gap <= CONVERGENCE_TOL * c0 || m == limit {
                result = Some(PredictionResult {
                    error_variance: e,
                    order_used: m,
                    convergence_gap: gap,
                });
                return false;
            }
            previous_checkpoint = Some(m);
            checkpoint = (checkpoint * 2).min(limit);
        }
        true
    })?;
    Ok(result.unwrap_or(PredictionResult {
        error_variance: errors[errors.len() - 1],
        order_used: errors.len() - 1,
        convergence_gap: 0.0,
    }))
}

/// Order-`p` matrix prediction error covariance `Sigma_p` from `C(0..=p)`,
/// `C(k) = E[H_{t+k} H_t^H]`, by the Whittle recursion.
pub fn block_levinson_sigma(c: &[CMatrix]) -> Result<PredictionResult<CMatrix>> {
    let mut last = None;
    block_levinson_run(c, |m, v, gap| {
        last = Some(PredictionResult {
            error_variance: v.clone(),
            order_used: m,
            convergence_gap: gap,
        });
        true
    })?;
    last.ok_or_else(|| Error::Domain("empty matrix autocovariance".into()))
}

fn pd_inverse(m: &CMatrix, order: usize) -> Result<CMatrix> {
    let h = linalg::symmetrize(m);
    let chol = h.cholesky().ok_or_else(|| {
        Error::IllPosedCovariance(format!(
            "block Toeplitz covariance is not positive definite at order {order}"
        ))
    })?;
    Ok(chol.inverse())
}

fn block_levinson_run(
    c: &[CMatrix],
    mut visit: impl FnMut(usize, &CMatrix, f64) -> bool,
) -> Result<()> {
    let c0 = c.first().ok_or_else(|| Error::Domain("empty matrix autocovariance".into()))?;
    if linalg::hermitian_defect(c0) > 1e-10 * (1.0 + linalg::max_abs(c0)) {
        return Err(Error::IllPosedCovariance("C(0) is not Hermitian".into()));
    }
    let mut v = linalg::symmetrize(c0); // forward error covariance
    let mut u = v.clone(); // backward error covariance
    let _ = pd_inverse(&v, 0)?;
    if !visit(0, &v, 0.0) {
        return Ok(());
    }
    // forward: H_t ~ sum_j fwd[j-1] H_{t-j}; backward: H_{t-m} ~ sum_j bwd[j-1] H_{t-m+j}
    let mut fwd: Vec<CMatrix> = Vec::new();
    let mut bwd: Vec<CMatrix> = Vec::new();
    for m in 1..c.len() {
        let mut delta = c[m].clone();
        for j in 1..m {
            delta -= &fwd[j - 1] * &c[m - j];
        }
        let kf = &delta * pd_inverse(&u, m)?;
        let kb = delta.adjoint() * pd_inverse(&v, m)?;
        let mut new_fwd = Vec::with_capacity(m);
        let mut new_bwd = Vec::with_capacity(m);
        for j in 1..m {
            new_fwd.push(&fwd[j - 1] - &kf * &bwd[m - j - 1]);
            new_bwd.push(&bwd[j - 1] - &kb * &fwd[m - j - 1]);
        }
        new_fwd.push(kf.clone());
        new_bwd.push(kb.clone());
        fwd = new_fwd;
        bwd = new_bwd;
        let v_next = linalg::symmetrize(&(&v - &kf * delta.adjoint()));
        u = linalg::symmetrize(&(&u - &kb * &delta));
        let _ = pd_inverse(&v_next, m)?;
        let gap = linalg::max_abs(&(&v - &v_next));
        v = v_next;
        if !visit(m, &v, gap) {
            break;
        }
    }
    Ok(())
}

/// Infinite-past `Sigma` by order doubling from `min_order`, as in [`converged_prediction_error`].
pub fn converged_block_sigma(c: &[CMatrix], min_order: usize) -> Result<PredictionResult<CMatrix>> {
    let limit = (c.len().saturating_sub(1)).min(MAX_ORDER);
    let scale = linalg::max_abs(&c[0]);
    let mut checkpoint = min_order.max(1).min(limit.max(1));
    let mut previous_checkpoint: Option<usize> = None;
    let mut history: Vec<CMatrix> = Vec::new();
    let mut result = None;
    block_levinson_run(&c[..=limit], |m, v, _| {
        history.push(v.clone());
        if m == checkpoint || m == limit {
            let reference = &history[previous_checkpoint.unwrap_or(m / 2)];
            let gap = linalg::max_abs(&(reference - v));
            if gap <= CONVERGENCE_TOL * scale || m == limit {
                result = Some(PredictionResult {
                    error_variance: v.clone(),
                    order_used: m,
                    convergence_gap: gap,
                });
                return false;
            }
            previous_checkpoint = Some(m);
            checkpoint = (checkpoint * 2).min(limit);
        }
        true
    })?;
    Ok(result.unwrap_or_else(|| PredictionResult {
        error_variance: history.last().cloned().unwrap(),
        order_used: history.len() - 1,
        convergence_gap: 0.0,
    }))
}

/// `(lambda_min, lambda_max)` of a Hermitian matrix. For PSD input `lambda_max = ||M||`.
pub fn eigen_extremes(m: &CMatrix) -> Result<(f64, f64)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Precondition("eigen_extremes needs a nonempty square matrix".into()));
    }
    let defect = linalg::hermitian_defect(m);
    if defect > 1e-10 {
        return Err(Error::Precondition(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(linalg::hermitian_extremes(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CVector, ONE};
    use crate::process_models::{project_with_lags, GaussianVectorProcess};
    use crate::seeds::substream;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Direct solve of the normal equations: the order-p error is the Schur
    /// complement of the (p+1)x(p+1) Toeplitz matrix of (G_t, G_{t-1}, ..., G_{t-p}).
    fn schur_oracle(acf: &[Complex64]) -> f64 {
        let p = acf.len() - 1;
        let cov = |i: usize, j: usize| {
            // E[G_{t-i} conj(G_{t-j})] = c(j - i)
            if j >= i { acf[j - i] } else { acf[i - j].conj() }
        };
        if p == 0 {
            return acf[0].re;
        }
        let past = CMatrix::from_fn(p, p, |i, j| cov(i + 1, j + 1));
        let cross = CMatrix::from_fn(1, p, |_, j| cov(0, j + 1));
        let inv = past.try_inverse().unwrap();
        (acf[0] - (&cross * inv * cross.adjoint())[(0, 0)]).re
    }

    fn block_schur_oracle(cm: &[CMatrix]) -> CMatrix {
        let p = cm.len() - 1;
        let n = cm[0].nrows();
        let cov = |i: usize, j: usize| {
            if j >= i { cm[j - i].clone() } else { cm[i - j].adjoint() }
        };
        if p == 0 {
            return cm[0].clone();
        }
        let mut past = CMatrix::zeros(n * p, n * p);
        let mut cross = CMatrix::zeros(n, n * p);
        for i in 0..p {
            cross.view_mut((0, i * n), (n, n)).copy_from(&cov(0, i + 1));
            for j in 0..p {
                past.view_mut((i * n, j * n), (n, n)).copy_from(&cov(i + 1, j + 1));
            }
        }
        let inv = past.try_inverse().unwrap();
        &cm[0] - &cross * inv * cross.adjoint()
    }

    #[test]
    fn white_sequence_has_constant_error() {
        let acf = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        assert_eq!(levinson_error_sequence(&acf).unwrap(), vec![1.0; 4]);
        let r = levinson_prediction_error(&acf[..1]).unwrap();
        assert_eq!((r.error_variance, r.order_used), (1.0, 0));
    }

    #[test]
    fn ar1_error_is_one_minus_alpha_sq() {
        let acf: Vec<_> = (0..10).map(|k| c(0.5f64.powi(k))).collect();
        let seq = levinson_error_sequence(&acf).unwrap();
        assert_eq!(seq[0], 1.0);
        for e in &seq[1..] {
            assert!((e - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn levinson_matches_schur_complement_on_random_complex_arma() {
        let mut rng = substream(17, 0);
        for trial in 0..10 {
            let a = CMatrix::from_fn(2, 2, |_, _| linalg::standard_complex_normal(&mut rng) * 0.35);
            let p = match GaussianVectorProcess::new(CVector::zeros(2), vec![a], CMatrix::identity(2, 2)) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let x = linalg::random_unit_vector(2, &mut rng);
            let proj = project_with_lags(&p, &x, 12).unwrap();
            let seq = levinson_error_sequence(&proj.autocovariance).unwrap();
            for order in 0..=12 {
                let oracle = schur_oracle(&proj.autocovariance[..=order]);
                assert!((seq[order] - oracle).abs() < 1e-10 * oracle, "trial {trial} order {order}");
            }
            for w in seq.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }

    #[test]
    fn rejects_non_pd_toeplitz() {
        let acf = vec![c(1.0), c(1.0), c(1.0)];
        assert!(matches!(levinson_error_sequence(&acf), Err(Error::IllPosedCovariance(_))));
        let acf = vec![c(1.0), c(1.5)];
        assert!(matches!(levinson_error_sequence(&acf), Err(Error::IllPosedCovariance(_))));
        assert!(levinson_error_sequence(&[c(-1.0)]).is_err());
    }

    #[test]
    fn converged_error_respects_min_order() {
        // seasonal AR: G_t = 0.6 G_{t-4} + U_t; orders below 4 see a white process
        let p = GaussianVectorProcess::new(
            CVector::zeros(1),
            vec![CMatrix::zeros(1, 1), CMatrix::zeros(1, 1), CMatrix::zeros(1, 1), CMatrix::from_element(1, 1, c(0.6))],
            CMatrix::from_element(1, 1, ONE),
        )
        .unwrap();
        let proj = project_with_lags(&p, &CVector::from_element(1, ONE), 64).unwrap();
        let r = converged_prediction_error(&proj.autocovariance, 4).unwrap();
        assert!((r.error_variance - 1.0).abs() < 1e-12);
        assert!(r.order_used >= 4);
        let szego = szego_prediction_error(|l| proj.spectral_density(l)).unwrap();
        assert!((szego - 1.0).abs() < 1e-10);
    }

    #[test]
    fn szego_examples() {
        assert!((szego_prediction_error(|_| 2.5).unwrap() - 2.5).abs() < 1e-13);
        let alpha = 0.5;
        let s = |l: f64| 0.75 / (Complex64::new(1.0, 0.0) - Complex64::from_polar(alpha, -l)).norm_sqr();
        assert!((szego_prediction_error(s).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(szego_prediction_error(|l: f64| l.sin()), Err(Error::Regularity(_))));
        assert!(szego_prediction_error_with_nodes(|_| 1.0, 100).is_err());
    }

    #[test]
    fn block_levinson_matches_block_schur_complement() {
        let mut rng = substream(23, 0);
        let a1 = CMatrix::from_fn(2, 2, |_, _| linalg::standard_complex_normal(&mut rng) * 0.3);
        let a2 = CMatrix::from_fn(2, 2, |_, _| linalg::standard_complex_normal(&mut rng) * 0.2);
        let q = CMatrix::from_fn(2, 2, |_, _| linalg::standard_complex_normal(&mut rng));
        let q = &q * q.adjoint() + CMatrix::identity(2, 2).scale(0.5);
        let p = GaussianVectorProcess::new(CVector::zeros(2), vec![a1, a2], q.clone()).unwrap();
        let cm = p.autocovariances(5);
        for order in 0..=5 {
            let r = block_levinson_sigma(&cm[..=order]).unwrap();
            let oracle = block_schur_oracle(&cm[..=order]);
            assert!((&r.error_variance - &oracle).norm() < 1e-10, "order {order}");
        }
        // VAR(2): Sigma_p = Q for p >= 2
        let r = block_levinson_sigma(&cm[..=4]).unwrap();
        assert!((&r.error_variance - &q).norm() < 1e-10);
        let conv = converged_block_sigma(&p.autocovariances(64), p.order()).unwrap();
        assert!((&conv.error_variance - &q).norm() < 1e-10);
    }

    #[test]
    fn block_levinson_white_and_iid() {
        let k = CMatrix::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.3, 0.1), Complex64::new(0.3, -0.1), c(1.0)]);
        let p = GaussianVectorProcess::white(CVector::zeros(2), k.clone()).unwrap();
        let r = block_levinson_sigma(&p.autocovariances(3)).unwrap();
        assert!((&r.error_variance - &k).norm() < 1e-14);
        let iid = GaussianVectorProcess::spatially_iid_unit(CVector::zeros(3), &[0.5]).unwrap();
        let r = block_levinson_sigma(&iid.autocovariances(3)).unwrap();
        assert!((&r.error_variance - CMatrix::identity(3, 3).scale(0.75)).norm() < 1e-12);
    }

    #[test]
    fn block_levinson_nt1_agrees_with_scalar() {
        let p = GaussianVectorProcess::new(
            CVector::zeros(1),
            vec![CMatrix::from_element(1, 1, Complex64::new(0.4, 0.3)), CMatrix::from_element(1, 1, c(-0.2))],
            CMatrix::from_element(1, 1, ONE),
        )
        .unwrap();
        let cm = p.autocovariances(6);
        let scalar: Vec<_> = cm.iter().map(|m| m[(0, 0)]).collect();
        let s = levinson_prediction_error(&scalar).unwrap();
        let b = block_levinson_sigma(&cm).unwrap();
        assert!((s.error_variance - b.error_variance[(0, 0)].re).abs() < 1e-13);
    }

    #[test]
    fn block_levinson_psd_ordering() {
        let mut rng = substream(29, 0);
        let a = CMatrix::from_fn(3, 3, |_, _| linalg::standard_complex_normal(&mut rng) * 0.25);
        let p = GaussianVectorProcess::new(CVector::zeros(3), vec![a], CMatrix::identity(3, 3)).unwrap();
        let cm = p.autocovariances(6);
        let mut prev = cm[0].clone();
        for order in 1..=6 {
            let s = block_levinson_sigma(&cm[..=order]).unwrap().error_variance;
            let (lo, _) = linalg::hermitian_extremes(&(&prev - &s));
            assert!(lo > -1e-12);
            prev = s;
        }
    }

    #[test]
    fn eigen_extremes_examples() {
        assert_eq!(eigen_extremes(&CMatrix::identity(3, 3)).unwrap(), (1.0, 1.0));
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(4.0)]));
        assert_eq!(eigen_extremes(&d).unwrap(), (1.0, 4.0));
        let mut bad = CMatrix::identity(2, 2);
        bad[(0, 1)] = c(1.0);
        assert!(matches!(eigen_extremes(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn eigen_extremes_bracket_random_probes() {
        let mut rng = substream(31, 0);
        let g = CMatrix::from_fn(3, 3, |_, _| linalg::standard_complex_normal(&mut rng));
        let m = linalg::symmetrize(&(&g + g.adjoint()));
        let (lo, hi) = eigen_extremes(&m).unwrap();
        let mut probe_lo = f64::INFINITY;
        let mut probe_hi = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let w = linalg::random_unit_vector(3, &mut rng);
            let q = linalg::quad_form(&w, &m);
            probe_lo = probe_lo.min(q);
            probe_hi = probe_hi.max(q);
        }
        assert!(lo <= probe_lo + 1e-12 && probe_hi <= hi + 1e-12);
        assert!(probe_hi - probe_lo > 0.8 * (hi - lo));
    }
}
