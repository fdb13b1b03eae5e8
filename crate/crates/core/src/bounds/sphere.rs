//! Maximization of phase-invariant objectives over the unit sphere of `C^nt`.
//!
//! A unit vector modulo its global phase is parameterized by `2 nt - 2` angles:
//! hyperspherical angles `theta_1..theta_{nt-1}` for the magnitudes (first
//! entry real) and phases `phi_2..phi_nt`. Local ascent is limited-memory BFGS
//! on central finite-difference gradients with Armijo backtracking.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{self, CVector};
use crate::seeds::{self, substream};

const MEMORY: usize = 6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Largest step in angle space taken by one line search.
const MAX_STEP: f64 = 1.0;

/// Budget and tolerances of the sphere search.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Starting points per search on analytic objectives (initial guesses count toward it).
    pub restarts: usize,
    /// Starting points per search on Monte Carlo objectives.
    pub mc_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Relative objective change below which an iteration counts as converged.
    pub value_tol: f64,
    /// Finite-difference step on analytic objectives.
    pub fd_step: f64,
    /// Finite-difference step on Monte Carlo objectives.
    pub mc_fd_step: f64,
    /// Iteration budget per start on Monte Carlo objectives.
    pub mc_max_iters: usize,
    /// Relative objective change treated as converged on Monte Carlo objectives.
    pub mc_value_tol: f64,
    /// Root seed for random starting points.
    pub seed: u64,
    /// Coordinate-ascent sweeps for per-time direction sequences.
    pub max_sweeps: usize,
    pub sweep_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            mc_restarts: 4,
            max_iters: 200,
            grad_tol: 1e-8,
            value_tol: 1e-14,
            fd_step: 1e-6,
            mc_fd_step: 1e-3,
            mc_max_iters: 50,
            mc_value_tol: 1e-4,
            seed: 0,
            max_sweeps: 100,
            sweep_tol: 1e-12,
        }
    }
}

/// Best point of a multi-start search.
#[derive(Clone, Debug)]
pub struct SphereOptimum {
    pub direction: CVector,
    pub value: f64,
    /// Every local run stopped on a tolerance rather than on `max_iters`.
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Index of the start that produced the optimum.
    pub start_index: usize,
}

/// Unit vector for the angle vector `(theta_1..theta_{nt-1}, phi_2..phi_nt)`.
pub fn angles_to_direction(params: &[f64], nt: usize) -> CVector {
    debug_assert_eq!(params.len(), 2 * nt - 2);
    let (theta, phi) = params.split_at(nt - 1);
    let mut x = CVector::zeros(nt);
    let mut tail = 1.0;
    for i in 0..nt {
        let magnitude = if i + 1 < nt { tail * theta[i].cos() } else { tail };
        if i + 1 < nt {
            tail *= theta[i].sin();
        }
        x[i] = if i == 0 {
            Complex64::new(magnitude, 0.0)
        } else {
            Complex64::from_polar(magnitude, phi[i - 1])
        };
    }
    x
}

/// Angles of a unit vector after removing its global phase.
pub fn direction_to_angles(x: &CVector) -> Vec<f64> {
    let nt = x.len();
    let x0 = x[0];
    let rot = if x0.norm() > 0.0 { x0.conj() / x0.norm() } else { Complex64::new(1.0, 0.0) };
    let y: Vec<Complex64> = x.iter().map(|z| z * rot).collect();
    let mut theta = Vec::with_capacity(nt - 1);
    for i in 0..nt - 1 {
        let rest: f64 = y[i + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        theta.push(rest.atan2(y[i].norm()));
    }
    let phi = y[1..].iter().map(|z| z.arg());
    theta.into_iter().chain(phi).collect()
}

struct LocalResult {
    params: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS minimization of `phi = -f` from `start`.
fn local_ascent<F>(f: &F, nt: usize, start: Vec<f64>, config: &OptimizerConfig, h: f64) -> Result<LocalResult>
where
    F: Fn(&CVector) -> Result<f64> + Sync,
{
    let n = start.len();
    let mut evaluations = 0usize;
    let mut phi = |p: &[f64]| -> Result<f64> {
        evaluations += 1;
        let v = f(&angles_to_direction(p, nt))?;
        Ok(if v.is_finite() { -v } else { f64::INFINITY })
    };
    let gradient = |p: &[f64], phi: &mut dyn FnMut(&[f64]) -> Result<f64>| -> Result<Vec<f64>> {
        let mut g = vec![0.0; n];
        let mut q = p.to_vec();
        for i in 0..n {
            q[i] = p[i] + h;
            let up = phi(&q)?;
            q[i] = p[i] - h;
            let down = phi(&q)?;
            q[i] = p[i];
            g[i] = (up - down) / (2.0 * h);
        }
        Ok(g)
    };

    let mut x = start;
    let mut fx = phi(&x)?;
    let mut g = gradient(&x, &mut phi)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if !fx.is_finite() {
            break;
        }
        if dot(&g, &g).sqrt() < config.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &q) / dot(y, s);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = dot(y, &q) / dot(y, s);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut p: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&p, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            p = g.iter().map(|v| -v).collect();
        }
        let pn = dot(&p, &p).sqrt();
        if pn > MAX_STEP {
            p.iter_mut().for_each(|v| *v *= MAX_STEP / pn);
        }
        let slope = dot(&p, &g);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            let ft = phi(&trial)?;
            if ft <= fx + ARMIJO * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if s_hist.is_empty() {
                // no descent along the finite-difference gradient: stationary at this resolution
                converged = true;
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let g_new = gradient(&x_new, &mut phi)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if decrease <= config.value_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    Ok(LocalResult {
        params: x,
        value: -fx,
        converged,
        iterations,
        evaluations,
    })
}

/// Multi-start maximization of a phase-invariant `f` over unit vectors of `C^nt`.
///
/// Starting points are the given `initial` guesses followed by uniformly random
/// directions, `restarts` in total. Local runs execute in parallel; the best
/// value wins, ties going to the earliest start.
pub fn maximize_on_sphere<F>(
    nt: usize,
    f: &F,
    initial: &[CVector],
    restarts: usize,
    fd_step: f64,
    config: &OptimizerConfig,
) -> Result<SphereOptimum>
where
    F: Fn(&CVector) -> Result<f64> + Sync,
{
    if nt == 1 {
        let x = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let value = f(&x)?;
        return Ok(SphereOptimum {
            direction: x,
            value,
            converged: true,
            iterations: 0,
            evaluations: 1,
            start_index: 0,
        });
    }
    let total = restarts.max(initial.len()).max(1);
    let mut rng = substream(seeds::child_seed(config.seed, nt as u64), seeds::stream::RESTARTS);
    let starts: Vec<Vec<f64>> = initial
        .iter()
        .cloned()
        .chain(std::iter::repeat_with(|| linalg::random_unit_vector(nt, &mut rng)))
        .take(total)
        .map(|x| direction_to_angles(&x))
        .collect();
    let runs: Vec<Result<LocalResult>> = starts
        .into_par_iter()
        .map(|s| local_ascent(f, nt, s, config, fd_step))
        .collect();
    let mut best: Option<(usize, LocalResult)> = None;
    let mut converged = true;
    let mut iterations = 0;
    let mut evaluations = 0;
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        converged &= run.converged;
        iterations += run.iterations;
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|(_, b)| run.value > b.value) {
            best = Some((i, run));
        }
    }
    let (start_index, best) = best.expect("at least one start");
    Ok(SphereOptimum {
        direction: angles_to_direction(&best.params, nt),
        value: best.value,
        converged,
        iterations,
        evaluations,
        start_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    #[test]
    fn angle_round_trip_removes_global_phase() {
        let mut rng = substream(3, 0);
        for nt in 2..5 {
            let x = linalg::random_unit_vector(nt, &mut rng);
            let y = angles_to_direction(&direction_to_angles(&x), nt);
            assert!((linalg::norm(&y) - 1.0).abs() < 1e-14);
            assert!((linalg::inner(&y, &x).norm() - 1.0).abs() < 1e-12);
            assert!(y[0].im.abs() < 1e-15 && y[0].re >= 0.0);
        }
    }

    #[test]
    fn finds_top_eigenvector_of_hermitian_form() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.3),
                Complex64::new(0.0, -0.2),
                Complex64::new(0.5, -0.3),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.1, 0.0),
                Complex64::new(0.0, 0.2),
                Complex64::new(0.1, 0.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let f = |x: &CVector| Ok(linalg::quad_form(x, &a));
        let best = maximize_on_sphere(3, &f, &[], 8, 1e-6, &OptimizerConfig::default()).unwrap();
        let (_, lmax) = linalg::hermitian_extremes(&a);
        assert!((best.value - lmax).abs() < 1e-10, "{} vs {lmax}", best.value);
        assert!(best.converged);
    }

    #[test]
    fn deterministic_and_first_found_on_ties() {
        let f = |_: &CVector| Ok(1.0);
        let a = maximize_on_sphere(2, &f, &[], 4, 1e-6, &OptimizerConfig::default()).unwrap();
        assert_eq!(a.start_index, 0);
        let g = |x: &CVector| Ok(x[0].norm_sqr() - 0.3 * x[1].norm_sqr());
        let b1 = maximize_on_sphere(2, &g, &[], 6, 1e-6, &OptimizerConfig::default()).unwrap();
        let b2 = maximize_on_sphere(2, &g, &[], 6, 1e-6, &OptimizerConfig::default()).unwrap();
        assert_eq!(b1.value.to_bits(), b2.value.to_bits());
        assert_eq!(b1.direction, b2.direction);
    }
}
