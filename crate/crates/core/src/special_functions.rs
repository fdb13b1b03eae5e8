//! Exponential integral and the log-moment of noncentral complex Gaussian magnitudes.
//!
//! Every Gaussian fading-number closed form is built from
//! `log s - Ei(-s)`, which is `E[log |G|^2]` for `G ~ CN(mu, 1)` with `s = |mu|^2`.
//! The exponential integral is evaluated through `E1(s) = -Ei(-s)`: a power
//! series below [`SERIES_CROSSOVER`] and a Lentz continued fraction above it.

use crate::error::{Error, Result};

/// The Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument at which `E1` switches from the power series to the continued fraction.
pub const SERIES_CROSSOVER: f64 = 6.0;

/// Below this ratio `|mu|^2 / sigma^2` the log-moment uses its Taylor form directly.
pub const SMALL_ARGUMENT: f64 = 1e-8;

/// `sum_{n>=1} (-1)^{n+1} s^n / (n n!)`, so that `E1(s) = -gamma - ln s + tail`.
fn e1_series_tail(s: f64) -> f64 {
    let mut term = 1.0; // s^n / n!
    let mut sum = 0.0;
    let mut n = 1.0;
    loop {
        term *= s / n;
        let contrib = term / n;
        if (n as u32) % 2 == 1 {
            sum += contrib;
        } else {
            sum -= contrib;
        }
        if contrib <= sum.abs() * 1e-17 || n > 200.0 {
            break;
        }
        n += 1.0;
    }
    sum
}

/// Modified Lentz evaluation of `E1(s) e^{s}`; valid for `s > 1`.
fn e1_continued_fraction(s: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = s + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-s).exp()
}

fn e1_unchecked(s: f64) -> f64 {
    if s <= SERIES_CROSSOVER {
        -EULER_GAMMA - s.ln() + e1_series_tail(s)
    } else {
        e1_continued_fraction(s)
    }
}

/// `Ei(-s)` for `s > 0`. Strictly negative and increasing toward zero.
pub fn exp_integral_ei_neg(s: f64) -> Result<f64> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain(format!(
            "Ei(-s) requires a finite s > 0, got {s}"
        )));
    }
    Ok(-e1_unchecked(s))
}

/// `log s - Ei(-s)` for `s >= 0`, with the limit `-gamma` at `s = 0`.
///
/// This is `E[log |G|^2]` for `G ~ CN(mu, 1)` and `s = |mu|^2`.
pub fn log_minus_ei_neg(s: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Domain(format!(
            "log s - Ei(-s) requires a finite s >= 0, got {s}"
        )));
    }
    if s < SMALL_ARGUMENT {
        // -gamma + s - s^2/4 + O(s^3)
        return Ok(-EULER_GAMMA + s - 0.25 * s * s);
    }
    if s <= SERIES_CROSSOVER {
        // the logarithms cancel exactly in the series form
        return Ok(-EULER_GAMMA + e1_series_tail(s));
    }
    Ok(s.ln() + e1_continued_fraction(s))
}

/// `E[log |G|^2]` for `G` circularly symmetric Gaussian with `|E G|^2 = mean_sq`
/// and `Var G = variance`.
pub fn noncentral_log_magnitude_sq_mean(mean_sq: f64, variance: f64) -> Result<f64> {
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::Domain(format!(
            "variance must be finite and positive, got {variance}"
        )));
    }
    if !mean_sq.is_finite() || mean_sq < 0.0 {
        return Err(Error::Domain(format!(
            "mean_sq must be finite and nonnegative, got {mean_sq}"
        )));
    }
    Ok(variance.ln() + log_minus_ei_neg(mean_sq / variance)?)
}

/// Exponentially scaled modified Bessel function `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // asymptotic series; terms keep shrinking well past the truncation point for x > 30
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let m = (2 * k - 1) as f64;
            term *= m * m / (8.0 * k as f64 * x);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_arguments() {
        assert!(exp_integral_ei_neg(0.0).is_err());
        assert!(exp_integral_ei_neg(-1.0).is_err());
        assert!(exp_integral_ei_neg(f64::NAN).is_err());
        assert!(exp_integral_ei_neg(f64::INFINITY).is_err());
        assert!(noncentral_log_magnitude_sq_mean(1.0, 0.0).is_err());
        assert!(noncentral_log_magnitude_sq_mean(-1.0, 1.0).is_err());
    }

    #[test]
    fn branches_agree_at_crossover() {
        let s = SERIES_CROSSOVER;
        let series = -EULER_GAMMA - s.ln() + e1_series_tail(s);
        let cf = e1_continued_fraction(s);
        assert!(((series - cf) / cf).abs() < 1e-11, "{series} vs {cf}");
    }

    #[test]
    fn small_argument_expansion() {
        for &s in &[1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1] {
            let ei = exp_integral_ei_neg(s).unwrap();
            let approx = EULER_GAMMA + s.ln() - s;
            assert!((ei - approx).abs() <= s * s / 4.0, "s = {s}");
        }
    }

    #[test]
    fn strictly_negative_and_increasing() {
        let mut prev = f64::NEG_INFINITY;
        let mut s = 1e-8;
        while s < 700.0 {
            let v = exp_integral_ei_neg(s).unwrap();
            assert!(v < 0.0, "Ei(-{s}) = {v}");
            assert!(v > prev, "not increasing at {s}");
            prev = v;
            s *= 1.3;
        }
        assert!(exp_integral_ei_neg(700.0).unwrap().abs() < 1e-300);
    }

    #[test]
    fn log_moment_continuity_at_zero() {
        let v = noncentral_log_magnitude_sq_mean(1e-12, 1.0).unwrap();
        assert!((v + EULER_GAMMA).abs() < 1e-5);
        let v0 = noncentral_log_magnitude_sq_mean(0.0, 1.0).unwrap();
        assert_eq!(v0, -EULER_GAMMA);
        // both sides of the small-argument switch
        let below = log_minus_ei_neg(SMALL_ARGUMENT * 0.999).unwrap();
        let above = log_minus_ei_neg(SMALL_ARGUMENT * 1.001).unwrap();
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn log_moment_examples() {
        let v = noncentral_log_magnitude_sq_mean(1.0, 1.0).unwrap();
        assert!((v - 0.219_383_934_395_520_3).abs() < 1e-12);
        let v = noncentral_log_magnitude_sq_mean(0.0, 2.5).unwrap();
        assert!((v - (2.5f64.ln() - EULER_GAMMA)).abs() < 1e-15);
    }

    #[test]
    fn log_moment_scaling() {
        for &(m, v, c) in &[(0.3, 1.2, 2.0), (4.0, 0.5, 0.1), (30.0, 2.0, 7.0), (0.0, 1.0, 3.0)] {
            let base = noncentral_log_magnitude_sq_mean(m, v).unwrap();
            let scaled = noncentral_log_magnitude_sq_mean(c * c * m, c * c * v).unwrap();
            assert!((scaled - base - (c * c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn continued_fraction_branch_matches_asymptotics() {
        // E1(x) e^x ~ 1/x (1 - 1/x + 2/x^2 - 6/x^3 + 24/x^4)
        let x: f64 = 200.0;
        let asym = (1.0 - 1.0 / x + 2.0 / (x * x) - 6.0 / x.powi(3) + 24.0 / x.powi(4)) / x;
        let cf = e1_continued_fraction(x) * x.exp();
        assert!(((cf - asym) / asym).abs() < 1e-9);
    }

    #[test]
    fn scaled_i0_matches_between_branches() {
        let q = 0.25 * 900.0f64;
        // series evaluated past the switch as a reference
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / ((k * k) as f64);
            sum += term;
        }
        let series = sum * (-30.0f64).exp();
        let asym = bessel_i0_scaled(30.000_000_001);
        assert!(((series - asym) / series).abs() < 1e-9);
        assert_eq!(bessel_i0_scaled(0.0), 1.0);
        // I0(1) = 1.2660658777520084
        assert!((bessel_i0_scaled(1.0) * 1f64.exp() - 1.266_065_877_752_008_4).abs() < 1e-14);
    }
}
