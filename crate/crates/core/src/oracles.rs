//! Independent reference computations used by the acceptance suite and tests.
//!
//! None of these share code paths with the evaluators they check.

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::fading_number::d_star_quotient;
use crate::linalg::{self, CMatrix, CVector};
use crate::process_models::GaussianVectorProcess;
use crate::seeds::{stream, substream};
use crate::special_functions::EULER_GAMMA;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let err = self.hi.mul_add(b, -p);
        Self::two_sum(p, err + self.lo * b)
    }

    fn div_f64(self, b: f64) -> Self {
        let q = self.hi / b;
        // remainder of self - q b, exact through fma
        let r = (-q).mul_add(b, self.hi) + self.lo;
        Self::two_sum(q, r / b)
    }
}

/// `Ei(-s) = gamma + ln s + sum_{n>=1} (-s)^n / (n n!)`, summed in double-double.
///
/// Valid for `0 < s <= 6`; beyond that `ln s` in double precision limits the
/// result as `Ei(-s)` becomes small.
pub fn ei_neg_series_oracle(s: f64) -> f64 {
    assert!(s > 0.0 && s <= 6.0, "oracle range is 0 < s <= 6");
    let mut term = DoubleDouble::new(1.0); // (-s)^n / n!
    let mut sum = DoubleDouble::new(0.0);
    for n in 1..=400 {
        term = term.mul_f64(-s).div_f64(n as f64);
        let contrib = term.div_f64(n as f64);
        sum = sum.add(contrib);
        if contrib.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
            break;
        }
    }
    let gamma = DoubleDouble {
        hi: EULER_GAMMA,
        lo: -4.942_915_152_430_645e-18,
    };
    sum.add(gamma).add(DoubleDouble::new(s.ln())).hi
}

/// Monte Carlo `(mean, stderr)` of `log |G|^2` with `G ~ CN(mu, variance)`, `|mu|^2 = mean_sq`.
pub fn log_magnitude_sq_monte_carlo(mean_sq: f64, variance: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = substream(seed, stream::SAMPLE_PATH);
    let mu = mean_sq.sqrt();
    let sd = variance.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let g = mu + sd * linalg::standard_complex_normal(&mut rng);
        let v = g.norm_sqr().ln();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Largest `d*`-quotient over `probes` random unit directions, and the best direction.
pub fn brute_force_d_star(mean: &CVector, covariance: &CMatrix, probes: usize, seed: u64) -> Result<(f64, CVector)> {
    let mut rng = substream(seed, stream::PROBE_DIRECTIONS);
    let mut best = (f64::NEG_INFINITY, CVector::zeros(mean.len()));
    for _ in 0..probes {
        let x = linalg::random_unit_vector(mean.len(), &mut rng);
        let q = d_star_quotient(mean, covariance, &x)?;
        if q > best.0 {
            best = (q, x);
        }
    }
    Ok(best)
}

fn random_complex_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| linalg::standard_complex_normal(rng))
}

/// Random Hermitian positive-definite matrix `B B^H / n + floor I`.
pub fn random_covariance<R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> CMatrix {
    let b = random_complex_matrix(n, rng);
    let mut k = (&b * b.adjoint()).unscale(n as f64);
    for i in 0..n {
        k[(i, i)] += Complex64::new(floor, 0.0);
    }
    linalg::symmetrize(&k)
}

/// Random complex vector with IID `CN(0, scale^2)` entries.
pub fn random_mean<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| scale * linalg::standard_complex_normal(rng))
}

/// Random stable VAR(1) Gaussian process with nonzero mean.
///
/// The AR matrix has Frobenius norm at most `max_gain < 1`, which bounds its
/// spectral norm and hence keeps the model stationary.
pub fn random_gaussian_model(nt: usize, max_gain: f64, seed: u64) -> Result<GaussianVectorProcess> {
    let mut rng = substream(seed, stream::RANDOM_MODELS);
    let mean = random_mean(nt, 1.0, &mut rng);
    let m = random_complex_matrix(nt, &mut rng);
    let gain = max_gain * (0.2 + 0.8 * rng.random::<f64>());
    let a = m.unscale(m.norm()).scale(gain);
    let q = random_covariance(nt, 0.3, &mut rng);
    GaussianVectorProcess::new(mean, vec![a], q)
}

/// Random spatially IID unit-variance AR(1) process with nonzero mean.
pub fn random_spatially_iid_model(nt: usize, seed: u64) -> Result<GaussianVectorProcess> {
    let mut rng = substream(seed, stream::RANDOM_MODELS);
    let mean = random_mean(nt, 1.0, &mut rng);
    let alpha = 0.9 * rng.random::<f64>();
    GaussianVectorProcess::spatially_iid_unit(mean, &[alpha])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::exp_integral_ei_neg;

    #[test]
    fn series_oracle_reference_values() {
        assert!((ei_neg_series_oracle(1.0) + 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((ei_neg_series_oracle(0.5) + 0.559_773_594_776_160_8).abs() < 1e-15);
        for s in [1e-6, 0.1, 3.0, 5.9, 6.0] {
            let (a, b) = (ei_neg_series_oracle(s), exp_integral_ei_neg(s).unwrap());
            assert!(((a - b) / b).abs() < 1e-11, "s = {s}: {a} vs {b}");
        }
    }

    #[test]
    fn random_models_are_stationary() {
        for seed in 0..10 {
            let p = random_gaussian_model(3, 0.6, seed).unwrap();
            assert!(p.spectral_radius() < 0.6);
        }
        let p = random_spatially_iid_model(2, 1).unwrap();
        assert!(p.is_spatially_iid());
    }
}
