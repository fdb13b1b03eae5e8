//! Analytic brackets for Gaussian processes.
//!
//! For `G_l = w_l^H H_l` jointly Gaussian, `h(G_0 | past) = log(pi e Var(G_0 | past))`
//! regardless of the mean, and `E[log |G_0|^2]` is the noncentral log-moment.
//! Every covariance needed is a quadratic form in the matrix autocovariances
//! `C(k) = E[H~_{t+k} H~_t^H]`, using `E[H~_{-a} H~_{-b}^H] = C(b - a)`.

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::sphere::{maximize_on_sphere, OptimizerConfig};
use super::Past;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::prediction::{
    converged_prediction_error, levinson_error_sequence, PredictionResult, CONVERGENCE_TOL, MAX_ORDER,
};
use crate::process_models::{hermitian_weight, GaussianVectorProcess, DEFAULT_MAX_LAG};
use crate::special_functions::noncentral_log_magnitude_sq_mean;

/// Lags projected before falling back to the full autocovariance sequence.
const INITIAL_LAGS: usize = 256;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// A Gaussian process with its matrix autocovariances precomputed.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    process: GaussianVectorProcess,
    lags: Vec<CMatrix>,
}

/// Value and ingredients of one analytic bracket evaluation.
#[derive(Clone, Debug)]
pub struct AnalyticBracket {
    pub value: f64,
    pub mean_log_magnitude_sq: f64,
    pub variance: f64,
    pub prediction: PredictionResult<f64>,
}

impl GaussianModel {
    pub fn new(process: &GaussianVectorProcess) -> Self {
        Self {
            process: process.clone(),
            lags: process.autocovariances(DEFAULT_MAX_LAG),
        }
    }

    pub fn process(&self) -> &GaussianVectorProcess {
        &self.process
    }

    pub fn nt(&self) -> usize {
        self.process.nt()
    }

    /// `C(k)` for any integer `k`.
    fn lag(&self, k: isize) -> CMatrix {
        if k >= 0 {
            self.lags[k as usize].clone()
        } else {
            self.lags[(-k) as usize].adjoint()
        }
    }

    fn projected(&self, w: &CVector, count: usize) -> Vec<Complex64> {
        self.lags[..count]
            .iter()
            .map(|c| (w.adjoint() * c * w)[(0, 0)])
            .collect()
    }

    /// Smallest order at which the infinite-past recursion may declare convergence.
    /// Projections of a vector AR(p) need not be scalar AR(p); `nt p` guards against
    /// false plateaus.
    fn min_order(&self) -> usize {
        (self.nt() * self.process.order()).max(1)
    }

    /// Scalar prediction error of `w^H H_0` from its own past of depth `past`.
    pub fn prediction_error(&self, w: &CVector, past: Past) -> Result<PredictionResult<f64>> {
        match past {
            Past::Finite(0) => Ok(PredictionResult {
                error_variance: linalg::quad_form(w, &self.lags[0]),
                order_used: 0,
                convergence_gap: 0.0,
            }),
            Past::Finite(kappa) => {
                if kappa > MAX_ORDER {
                    return Err(Error::Domain(format!("past depth {kappa} exceeds {MAX_ORDER}")));
                }
                let errors = levinson_error_sequence(&self.projected(w, kappa + 1))?;
                Ok(PredictionResult {
                    error_variance: errors[kappa],
                    order_used: kappa,
                    convergence_gap: (errors[kappa - 1] - errors[kappa]).abs(),
                })
            }
            Past::Infinite => {
                let c = self.projected(w, INITIAL_LAGS + 1);
                let r = converged_prediction_error(&c, self.min_order())?;
                if r.order_used < INITIAL_LAGS || r.convergence_gap <= CONVERGENCE_TOL * c[0].re {
                    return Ok(r);
                }
                converged_prediction_error(&self.projected(w, self.lags.len()), self.min_order())
            }
        }
    }

    /// `log pi + E[log |H_0^T x|^2] - h(H_0^T x | past)` for a constant direction `x`.
    pub fn bracket(&self, direction: &CVector, past: Past) -> Result<AnalyticBracket> {
        let w = hermitian_weight(direction, self.nt())?;
        let variance = linalg::quad_form(&w, &self.lags[0]);
        let mean_sq = linalg::inner(&w, self.process.mean()).norm_sqr();
        let mean_log = noncentral_log_magnitude_sq_mean(mean_sq, variance)?;
        let prediction = self.prediction_error(&w, past)?;
        let value = LN_PI + mean_log - (std::f64::consts::PI * std::f64::consts::E * prediction.error_variance).ln();
        Ok(AnalyticBracket {
            value,
            mean_log_magnitude_sq: mean_log,
            variance,
            prediction,
        })
    }

    /// `log(c(0) / eps^2)` along `x`: information the infinite scalar past carries about the present.
    pub fn memory_term(&self, direction: &CVector) -> Result<f64> {
        let w = hermitian_weight(direction, self.nt())?;
        let c0 = linalg::quad_form(&w, &self.lags[0]);
        let eps = self.prediction_error(&w, Past::Infinite)?;
        Ok((c0 / eps.error_variance).ln())
    }

    /// `M_ij = Cov(G_{-i}, G_{-j}) = w_i^H C(j - i) w_j` for weights `ws[l]` at lag `l`.
    fn sequence_covariance(&self, ws: &[CVector], lags: &[usize]) -> CMatrix {
        let n = lags.len();
        CMatrix::from_fn(n, n, |a, b| {
            let (i, j) = (lags[a], lags[b]);
            let c = self.lag(j as isize - i as isize);
            (ws[i].adjoint() * c * &ws[j])[(0, 0)]
        })
    }

    /// `Var(G_0 | G_{-1}, ..., G_{-kappa})` with per-lag directions; `ws[0]` is the present.
    pub fn sequence_conditional_variance(&self, ws: &[CVector]) -> Result<f64> {
        let all: Vec<usize> = (0..ws.len()).collect();
        let m = self.sequence_covariance(ws, &all);
        let v0 = m[(0, 0)].re;
        if ws.len() == 1 {
            return Ok(v0);
        }
        let n = ws.len() - 1;
        let past = m.view((1, 1), (n, n)).into_owned();
        let cross = m.view((1, 0), (n, 1)).into_owned();
        let chol = pd_cholesky(&past)?;
        let sol = chol.solve(&cross);
        Ok(v0 - (cross.adjoint() * sol)[(0, 0)].re)
    }

    /// Bracket for a direction sequence `xs[l]` at lag `l`.
    pub fn sequence_bracket(&self, xs: &[CVector]) -> Result<f64> {
        let ws = xs
            .iter()
            .map(|x| hermitian_weight(x, self.nt()))
            .collect::<Result<Vec<_>>>()?;
        let variance = linalg::quad_form(&ws[0], &self.lags[0]);
        let mean_sq = linalg::inner(&ws[0], self.process.mean()).norm_sqr();
        let cond = self.sequence_conditional_variance(&ws)?;
        Ok(LN_PI + noncentral_log_magnitude_sq_mean(mean_sq, variance)?
            - (std::f64::consts::PI * std::f64::consts::E * cond).ln())
    }

    /// Joint covariance of `(G_0, H~_{-l}, Y)` where `Y` are the past projections except lag `l`.
    /// Returns `(Cov(H~_{-l} | Y), Cov(H~_{-l}, G_0 | Y))`.
    fn lag_update_terms(&self, ws: &[CVector], l: usize) -> Result<(CMatrix, CVector)> {
        let nt = self.nt();
        let others: Vec<usize> = (1..ws.len()).filter(|&j| j != l).collect();
        let size = 1 + nt + others.len();
        let mut z = CMatrix::zeros(size, size);
        // G_0 block
        z[(0, 0)] = Complex64::new(linalg::quad_form(&ws[0], &self.lags[0]), 0.0);
        // H~_{-l} with G_0: E[H~_{-l} conj(G_0)] = C(-l) w_0
        let h_g0 = self.lag(-(l as isize)) * &ws[0];
        // H~_{-l} block
        z.view_mut((1, 1), (nt, nt)).copy_from(&self.lags[0]);
        for r in 0..nt {
            z[(1 + r, 0)] = h_g0[r];
            z[(0, 1 + r)] = h_g0[r].conj();
        }
        for (a, &j) in others.iter().enumerate() {
            let col = 1 + nt + a;
            // E[G_0 conj(G_{-j})] = w_0^H C(j) w_j
            let g0 = (ws[0].adjoint() * &self.lags[j] * &ws[j])[(0, 0)];
            z[(0, col)] = g0;
            z[(col, 0)] = g0.conj();
            // E[H~_{-l} conj(G_{-j})] = C(j - l) w_j
            let hv = self.lag(j as isize - l as isize) * &ws[j];
            for r in 0..nt {
                z[(1 + r, col)] = hv[r];
                z[(col, 1 + r)] = hv[r].conj();
            }
            for (b, &i) in others.iter().enumerate() {
                // E[G_{-j} conj(G_{-i})] = w_j^H C(i - j) w_i
                z[(col, 1 + nt + b)] = (ws[j].adjoint() * self.lag(i as isize - j as isize) * &ws[i])[(0, 0)];
            }
        }
        let head = z.view((0, 0), (1 + nt, 1 + nt)).into_owned();
        let cond = if others.is_empty() {
            head
        } else {
            let k = others.len();
            let yy = z.view((1 + nt, 1 + nt), (k, k)).into_owned();
            let zy = z.view((0, 1 + nt), (1 + nt, k)).into_owned();
            let chol = pd_cholesky(&yy)?;
            &head - &zy * chol.solve(&zy.adjoint())
        };
        let b = linalg::symmetrize(&cond.view((1, 1), (nt, nt)).into_owned());
        let a = cond.view((1, 0), (nt, 1)).into_owned();
        Ok((b, CVector::from_column_slice(a.as_slice())))
    }

    /// `Cov(H~_0 | G_{-1}, ..., G_{-kappa})`.
    fn present_conditional_covariance(&self, ws: &[CVector]) -> Result<CMatrix> {
        let nt = self.nt();
        if ws.len() == 1 {
            return Ok(self.lags[0].clone());
        }
        let past: Vec<usize> = (1..ws.len()).collect();
        let yy = self.sequence_covariance(ws, &past);
        // E[H~_0 conj(G_{-j})] = C(j) w_j
        let mut hy = CMatrix::zeros(nt, past.len());
        for (a, &j) in past.iter().enumerate() {
            hy.set_column(a, &(&self.lags[j] * &ws[j]));
        }
        let chol = pd_cholesky(&yy)?;
        Ok(linalg::symmetrize(&(&self.lags[0] - &hy * chol.solve(&hy.adjoint()))))
    }

    /// Coordinate ascent over per-lag directions, starting from `start` (length `kappa + 1`).
    ///
    /// Lags `l >= 1` have the exact update `w_l ~ B^{-1} a` (the conditional variance drop
    /// `|w^H a|^2 / w^H B w` is a generalized Rayleigh quotient); the present direction
    /// is re-optimized on the sphere with the past fixed.
    pub fn coordinate_ascent(&self, start: Vec<CVector>, config: &OptimizerConfig) -> Result<SequenceAscent> {
        let nt = self.nt();
        let mut xs = start;
        let mut ws = xs
            .iter()
            .map(|x| hermitian_weight(x, nt))
            .collect::<Result<Vec<_>>>()?;
        let mut value = self.sequence_bracket(&xs)?;
        let initial = value;
        let mut sweeps = 0;
        let mut last_gain = 0.0;
        let mut converged = false;
        while sweeps < config.max_sweeps {
            sweeps += 1;
            for l in 1..ws.len() {
                let (b, a) = self.lag_update_terms(&ws, l)?;
                if linalg::norm(&a) <= 1e-300 {
                    continue;
                }
                let Some(chol) = Cholesky::new(b) else { continue };
                let w = chol.solve(&a);
                let n = linalg::norm(&w);
                if n > 0.0 && n.is_finite() {
                    let candidate = w.unscale(n);
                    let old = std::mem::replace(&mut ws[l], candidate);
                    if self.sequence_conditional_variance(&ws)? > self.sequence_conditional_variance_with(&ws, l, &old)? {
                        ws[l] = old;
                    }
                }
            }
            let cond = self.present_conditional_covariance(&ws)?;
            let mean = self.process.mean().clone();
            let k = self.lags[0].clone();
            let objective = |x: &CVector| -> Result<f64> {
                let w = x.map(|z| z.conj());
                let var = linalg::quad_form(&w, &k);
                let ms = linalg::inner(&w, &mean).norm_sqr();
                Ok(LN_PI + noncentral_log_magnitude_sq_mean(ms, var)?
                    - (std::f64::consts::PI * std::f64::consts::E * linalg::quad_form(&w, &cond)).ln())
            };
            let current = ws[0].map(|z| z.conj());
            let best = maximize_on_sphere(nt, &objective, &[current.clone()], 1, config.fd_step, config)?;
            if best.value > objective(&current)? {
                ws[0] = best.direction.map(|z| z.conj());
            }
            xs = ws.iter().map(|w| w.map(|z| z.conj())).collect();
            let next = self.sequence_bracket(&xs)?;
            last_gain = next - value;
            value = next;
            if last_gain.abs() <= config.sweep_tol * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        }
        Ok(SequenceAscent {
            directions: xs,
            value,
            initial_value: initial,
            sweeps,
            last_gain,
            converged,
        })
    }

    fn sequence_conditional_variance_with(&self, ws: &[CVector], l: usize, w: &CVector) -> Result<f64> {
        let mut alt = ws.to_vec();
        alt[l] = w.clone();
        self.sequence_conditional_variance(&alt)
    }
}

/// Outcome of [`GaussianModel::coordinate_ascent`].
#[derive(Clone, Debug)]
pub struct SequenceAscent {
    /// `directions[l]` is the direction at lag `l` (`0` is the present).
    pub directions: Vec<CVector>,
    pub value: f64,
    pub initial_value: f64,
    pub sweeps: usize,
    pub last_gain: f64,
    pub converged: bool,
}

fn pd_cholesky(m: &CMatrix) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(linalg::symmetrize(m)).ok_or_else(|| {
        Error::Regularity("covariance of the projected past is singular; the process is not regular".into())
    })
}
