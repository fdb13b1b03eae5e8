//! Monte Carlo brackets from sample paths.
//!
//! `h(G_0 | G_{-1..-kappa})` comes from the k-NN conditional estimator on the
//! delay embedding `[G_{-1}, ..., G_{-kappa}, G_0]`.

use num_complex::Complex64;

use super::knn::{block_stderr, knn_conditional_entropy, ComplexSamples};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::process_models::SamplePath;

/// Largest past depth accepted on the Monte Carlo path.
pub const MAX_MC_KAPPA: usize = 8;

const LN_PI: f64 = 1.144_729_885_849_400_2;

#[derive(Clone, Debug)]
pub struct McBracket {
    pub value: f64,
    pub stderr: f64,
    pub mean_log_magnitude_sq: f64,
    pub conditional_entropy: f64,
    pub samples: usize,
}

/// Rows `[g_{t-1}, ..., g_{t-depth}, g_t]` for `t = depth..`.
fn embed(g: &[Complex64], depth: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity((g.len() - depth) * (depth + 1));
    for t in depth..g.len() {
        for lag in 1..=depth {
            out.push(g[t - lag]);
        }
        out.push(g[t]);
    }
    out
}

fn point_estimate(g: &[Complex64], kappa: usize, k: usize) -> Result<(f64, f64, f64)> {
    let present = &g[kappa..];
    let mut sum = 0.0;
    for z in present {
        let v = z.norm_sqr();
        if !(v > 0.0) {
            return Err(Error::Estimation("projected sample is exactly zero".into()));
        }
        sum += v.ln();
    }
    let mean_log = sum / present.len() as f64;
    let cond = knn_conditional_entropy(&ComplexSamples::new(kappa + 1, embed(g, kappa))?, kappa, k)?;
    Ok((LN_PI + mean_log - cond, mean_log, cond))
}

/// Bracket along `direction` with past depth `kappa`; `blocks > 1` adds a block standard error.
pub fn bracket_from_path(
    path: &SamplePath,
    direction: &CVector,
    kappa: usize,
    k: usize,
    blocks: usize,
) -> Result<McBracket> {
    if kappa > MAX_MC_KAPPA {
        return Err(Error::Precondition(format!(
            "Monte Carlo brackets support past depth up to {MAX_MC_KAPPA}, got {kappa}"
        )));
    }
    let g = path.project(direction);
    if g.len() <= kappa {
        return Err(Error::Estimation("sample path shorter than the past depth".into()));
    }
    let (value, mean_log, cond) = point_estimate(&g, kappa, k)?;
    let mut stderr = 0.0;
    if blocks > 1 {
        let size = g.len() / blocks;
        let values = (0..blocks)
            .map(|b| point_estimate(&g[b * size..(b + 1) * size], kappa, k).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?;
        stderr = block_stderr(&values);
    }
    Ok(McBracket {
        value,
        stderr,
        mean_log_magnitude_sq: mean_log,
        conditional_entropy: cond,
        samples: g.len() - kappa,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::gaussian::GaussianModel;
    use crate::bounds::Past;
    use crate::linalg::ZERO;
    use crate::process_models::{GaussianVectorProcess, PathSampler};
    use crate::seeds::substream;
    use rand::Rng;

    #[test]
    fn embedding_layout() {
        let g: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let rows = embed(&g, 2);
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0..3], [g[1], g[0], g[2]]);
        assert_eq!(rows[6..9], [g[3], g[2], g[4]]);
    }

    #[test]
    fn agrees_with_analytic_on_ar1() {
        let mean = CVector::from_vec(vec![Complex64::new(0.8, 0.0), ZERO]);
        let p = GaussianVectorProcess::spatially_iid_unit(mean, &[0.6]).unwrap();
        let x = CVector::from_vec(vec![Complex64::new(1.0, 0.0), ZERO]);
        let path = p.sample_path(100_000, 21);
        let analytic = GaussianModel::new(&p).bracket(&x, Past::Finite(1)).unwrap().value;
        let mc = bracket_from_path(&path, &x, 1, 4, 10).unwrap();
        assert!((mc.value - analytic).abs() < 0.03, "{} vs {analytic}", mc.value);
        assert!(mc.stderr > 0.0 && mc.stderr < 0.03);
        assert!(bracket_from_path(&path, &x, MAX_MC_KAPPA + 1, 4, 1).is_err());
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = substream(2, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let c: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.2).collect();
        let crit = ks_critical(0.01, 2000, 2000);
        assert!(ks_statistic(&a, &b) < crit);
        assert!(ks_statistic(&a, &c) > crit);
        assert!((ks_statistic(&[0.0, 1.0], &[2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
