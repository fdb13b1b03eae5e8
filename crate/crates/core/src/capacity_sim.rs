//! High-SNR mutual information of the beam-formed scalar channel
//! `Y = G X + Z`, `G ~ CN(mu, v)`, `Z ~ CN(0, sigma^2)`, under the input with
//! uniform phase and `log |X|^2 ~ U[log log Es, log Es]`.
//!
//! `h(Y | X) = E[log(pi e (v |X|^2 + sigma^2))]` is a one-dimensional
//! Gauss-Legendre integral over `u = log |X|^2`. `Y` is circularly symmetric,
//! so with `V = log |Y|^2`, `h(Y) = log pi + h(V) + E[V]`; the density of `V` is
//! a `u`-mixture of closed-form Rician log-densities, integrated by the
//! trapezoidal rule on a uniform grid in `log |Y|`.
//!
//! Memory enters through the Gaussian memory term `log(c(0) / eps^2)` of the
//! projection, added to the memoryless mutual information.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{self, McConfig, OptimizerConfig, Past};
use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::process_models::{hermitian_weight, FadingProcess, GaussianVectorProcess};
use crate::seeds::{stream, substream};
use crate::special_functions::bessel_i0_scaled;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Gauss-Legendre nodes per panel of the input quadrature.
const PANEL: usize = 16;

/// Quadrature resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadConfig {
    /// Nodes over `u = log |X|^2` (rounded up to whole 16-node panels).
    pub input_nodes: usize,
    /// Trapezoidal nodes over `log |Y|`.
    pub radial_nodes: usize,
    /// Lower end of the `log |Y|` grid.
    pub lower_log_radius: f64,
    /// The grid ends at `log Es + upper_margin`.
    pub upper_margin: f64,
    /// Largest tolerated probability mass missing from the grid.
    pub mass_tolerance: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            input_nodes: 512,
            radial_nodes: 4096,
            lower_log_radius: -60.0,
            upper_margin: 20.0,
            mass_tolerance: 1e-10,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
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

/// Composite rule on `[a, b]` with `panels` Gauss-Legendre panels; weights sum to `b - a`.
fn composite_gauss_legendre(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(PANEL);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL);
    let mut weights = Vec::with_capacity(panels * PANEL);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// The achievability input law for peak power `es`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogUniformInput {
    pub es: f64,
    /// `log log es`.
    pub lower: f64,
    /// `log es`.
    pub upper: f64,
}

impl LogUniformInput {
    pub fn new(es: f64) -> Result<Self> {
        if !es.is_finite() || es <= std::f64::consts::E {
            return Err(Error::Domain(format!("peak power must exceed e, got {es}")));
        }
        Ok(Self {
            es,
            lower: es.ln().ln(),
            upper: es.ln(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let u = self.lower + (self.upper - self.lower) * rng.random::<f64>();
        let phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        Complex64::from_polar((0.5 * u).exp().min(self.es.sqrt()), phase)
    }

    /// `E[log |X|^2]`.
    pub fn mean_log_power(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// One input sample drawn from the seed's input stream.
pub fn achievability_input_sample(es: f64, seed: u64) -> Result<Complex64> {
    Ok(achievability_input_samples(es, 1, seed)?[0])
}

/// `n` IID input samples drawn from the seed's input stream.
pub fn achievability_input_samples(es: f64, n: usize, seed: u64) -> Result<Vec<Complex64>> {
    let law = LogUniformInput::new(es)?;
    let mut rng = substream(seed, stream::INPUT_SAMPLES);
    Ok((0..n).map(|_| law.sample(&mut rng)).collect())
}

/// Mutual information of the memoryless scalar channel and its ingredients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiEstimate {
    pub mi_nats: f64,
    /// `|I(n) - I(n / 2)|` between full and half quadrature resolution.
    pub stderr: f64,
    pub h_y: f64,
    pub h_y_given_x: f64,
    /// `|1 - integral of the output log-magnitude density|` on the grid.
    pub lost_mass: f64,
}

struct Resolution {
    panels: usize,
    radial: usize,
}

fn entropies(h_mean: Complex64, h_var: f64, law: &LogUniformInput, noise_var: f64, quad: &QuadConfig, res: Resolution) -> Result<(f64, f64, f64)> {
    let (us, ws) = composite_gauss_legendre(law.lower, law.upper, res.panels);
    let width = law.upper - law.lower;
    let probs: Vec<f64> = ws.iter().map(|w| w / width).collect();
    let h_cond: f64 = us
        .iter()
        .zip(&probs)
        .map(|(&u, &p)| p * (std::f64::consts::PI * std::f64::consts::E * (h_var * u.exp() + noise_var)).ln())
        .sum();

    // per input node: m = |mu| r, s^2 = v r^2 + sigma^2
    let mu = h_mean.norm();
    let params: Vec<(f64, f64, f64)> = us
        .iter()
        .zip(&probs)
        .map(|(&u, &p)| {
            let r = (0.5 * u).exp();
            (p, mu * r, h_var * r * r + noise_var)
        })
        .collect();

    // tau = log |Y|^2 = 2 log |Y|
    let lo = 2.0 * quad.lower_log_radius;
    let hi = 2.0 * (law.es.ln() + quad.upper_margin);
    let n = res.radial;
    let step = (hi - lo) / (n - 1) as f64;
    let density: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let tau = lo + step * i as f64;
            let rho = (0.5 * tau).exp();
            let e_tau = rho * rho;
            params
                .iter()
                .map(|&(p, m, s2)| {
                    let gauss = (-(rho - m) * (rho - m) / s2).exp();
                    let bessel = if m == 0.0 { 1.0 } else { bessel_i0_scaled(2.0 * rho * m / s2) };
                    p * e_tau / s2 * gauss * bessel
                })
                .sum::<f64>()
        })
        .collect();
    let mut mass = 0.0;
    let mut mean_v = 0.0;
    let mut h_v = 0.0;
    for (i, &f) in density.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * step } else { step };
        if f > 0.0 {
            let tau = lo + step * i as f64;
            mass += w * f;
            mean_v += w * f * tau;
            h_v -= w * f * f.ln();
        }
    }
    let h_y = LN_PI + h_v + mean_v;
    Ok((h_y, h_cond, (1.0 - mass).abs()))
}

/// `I(X; Y)` for the memoryless scalar channel with fading `CN(h_mean, h_var)`.
pub fn mi_memoryless_scalar_gauss(
    h_mean: Complex64,
    h_var: f64,
    es: f64,
    noise_var: f64,
    quad: &QuadConfig,
) -> Result<MiEstimate> {
    let law = LogUniformInput::new(es)?;
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
    }
    if !(h_var >= 0.0) || !h_var.is_finite() || !h_mean.norm().is_finite() {
        return Err(Error::Domain("fading mean and variance must be finite, variance nonnegative".into()));
    }
    let panels = quad.input_nodes.div_ceil(PANEL).max(2);
    let radial = quad.radial_nodes.max(64);
    let (h_y, h_cond, lost) = entropies(h_mean, h_var, &law, noise_var, quad, Resolution { panels, radial })?;
    if !(lost <= quad.mass_tolerance) {
        return Err(Error::NonConvergence(format!(
            "output density quadrature misses probability mass {lost:e} (tolerance {:e}) at Es = {es}",
            quad.mass_tolerance
        )));
    }
    let (h_y2, h_cond2, _) = entropies(
        h_mean,
        h_var,
        &law,
        noise_var,
        quad,
        Resolution { panels: panels / 2, radial: radial / 2 },
    )?;
    let mi = (h_y - h_cond).max(0.0);
    let mi_half = (h_y2 - h_cond2).max(0.0);
    Ok(MiEstimate {
        mi_nats: mi,
        stderr: (mi - mi_half).abs(),
        h_y,
        h_y_given_x: h_cond,
        lost_mass: lost,
    })
}

/// Monte Carlo estimate `(mean, stderr)` of `h(Y | X)` from `n` input samples.
pub fn conditional_entropy_monte_carlo(h_var: f64, es: f64, noise_var: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    let law = LogUniformInput::new(es)?;
    let mut rng = substream(seed, stream::CAPACITY_CHECK);
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let x = law.sample(&mut rng);
            (std::f64::consts::PI * std::f64::consts::E * (h_var * x.norm_sqr() + noise_var)).ln()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok((mean, (var / n as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationRow {
    pub snr_db: f64,
    pub es: f64,
    pub mi_nats: f64,
    pub mi_minus_loglog: f64,
    pub stderr: f64,
}

/// Per-SNR mutual information of the beam-forming input.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTable {
    pub rows: Vec<SimulationRow>,
    /// Lower bound on the fading number the trajectory is compared against.
    pub reference_chi: f64,
    pub input_kind: &'static str,
    pub memory_term: f64,
    pub direction: CVector,
    pub noise_var: f64,
}

pub const CSV_HEADER: &str = "snr_db,es,mi_nats,mi_minus_loglog,stderr";

/// `%.12g`-style formatting, independent of locale.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

impl SimulationTable {
    /// CSV with the fixed header and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fields = [r.snr_db, r.es, r.mi_nats, r.mi_minus_loglog, r.stderr].map(|v| format_sig(v, 12));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sweeps the SNR grid for the beam-formed Gaussian channel along `direction`.
///
/// Rows are independent and evaluated in parallel; the table order follows the grid.
pub fn capacity_sweep(
    process: &GaussianVectorProcess,
    direction: &CVector,
    snr_grid_db: &[f64],
    noise_var: f64,
    seed: u64,
    quad: &QuadConfig,
) -> Result<SimulationTable> {
    if snr_grid_db.is_empty() {
        return Err(Error::Config("the SNR grid is empty".into()));
    }
    if snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("the SNR grid must be strictly increasing".into()));
    }
    let w = hermitian_weight(direction, process.nt())?;
    let h_mean = linalg::inner(&w, process.mean());
    let h_var = linalg::quad_form(&w, process.stationary_covariance());
    let memory_term = bounds::memory_term_gauss(process, direction)?;
    let optimizer = OptimizerConfig {
        seed,
        ..OptimizerConfig::default()
    };
    let reference = bounds::lower_bound(
        &FadingProcess::Gaussian(process.clone()),
        Past::Infinite,
        &McConfig { seed, ..McConfig::default() },
        &optimizer,
    )?;
    let rows = snr_grid_db
        .par_iter()
        .map(|&snr_db| {
            let snr = 10f64.powf(snr_db / 10.0);
            let es = snr * noise_var;
            let mi = mi_memoryless_scalar_gauss(h_mean, h_var, es, noise_var, quad)?;
            let total = mi.mi_nats + memory_term;
            Ok(SimulationRow {
                snr_db,
                es,
                mi_nats: total,
                mi_minus_loglog: total - snr.ln().ln(),
                stderr: mi.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationTable {
        rows,
        reference_chi: reference.value,
        input_kind: "log_uniform_peak",
        memory_term,
        direction: direction.clone(),
        noise_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::EULER_GAMMA;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
        let (a, b) = composite_gauss_legendre(1.0, 4.0, 3);
        assert!((b.iter().sum::<f64>() - 3.0).abs() < 1e-14);
        assert!(a.iter().all(|&u| (1.0..=4.0).contains(&u)));
    }

    #[test]
    fn input_law_support_and_domain() {
        let es = std::f64::consts::E.powf(std::f64::consts::E);
        for x in achievability_input_samples(es, 10_000, 1).unwrap() {
            let p = x.norm_sqr();
            assert!(p >= std::f64::consts::E * (1.0 - 1e-12) && p <= es * (1.0 + 1e-12));
        }
        assert!(achievability_input_sample(2.0, 0).is_err());
        assert!(achievability_input_sample(std::f64::consts::E, 0).is_err());
    }

    #[test]
    fn awgn_mi_below_gaussian_capacity() {
        for es in [5.0, 20.0, 50.0] {
            let mi = mi_memoryless_scalar_gauss(Complex64::new(1.0, 0.0), 0.0, es, 1.0, &QuadConfig::default()).unwrap();
            assert!(mi.mi_nats <= (1.0 + es).ln(), "es = {es}: {}", mi.mi_nats);
            assert!(mi.mi_nats > 0.0);
        }
    }

    #[test]
    fn rayleigh_gap_stays_below_ceiling() {
        // noiseless oracle: h(u + log Exp(1)) - 1 - gamma - log log Es
        let oracle = |es: f64| -> f64 {
            let (a, b) = (es.ln().ln(), es.ln());
            let cdf = |w: f64| -(-w.exp()).exp_m1();
            let (lo, hi, n) = (a - 40.0, b + 5.0, 200_001);
            let step = (hi - lo) / (n - 1) as f64;
            let mut h = 0.0;
            for i in 0..n {
                let v = lo + step * i as f64;
                let f = (cdf(v - a) - cdf(v - b)) / (b - a);
                if f > 0.0 {
                    h -= step * f * f.ln();
                }
            }
            h - 1.0 - EULER_GAMMA - es.ln().ln()
        };
        for snr_db in [40.0, 60.0, 80.0, 100.0] {
            let es = 10f64.powf(snr_db / 10.0);
            let mi = mi_memoryless_scalar_gauss(Complex64::new(0.0, 0.0), 1.0, es, 1.0, &QuadConfig::default()).unwrap();
            let gap = mi.mi_nats - es.ln().ln();
            assert!(gap <= -1.0 - EULER_GAMMA + 0.1);
            assert!((gap - oracle(es)).abs() < 0.01, "{snr_db} dB: {gap} vs {}", oracle(es));
            assert!(mi.stderr < 1e-6, "{}", mi.stderr);
        }
    }

    #[test]
    fn conditional_entropy_matches_monte_carlo() {
        let es = 1e6;
        let mi = mi_memoryless_scalar_gauss(Complex64::new(0.3, 0.0), 0.8, es, 1.0, &QuadConfig::default()).unwrap();
        let (mean, se) = conditional_entropy_monte_carlo(0.8, es, 1.0, 100_000, 4).unwrap();
        assert!((mean - mi.h_y_given_x).abs() < 3.0 * se);
    }

    #[test]
    fn joint_fading_and_noise_scaling_invariance() {
        let q = QuadConfig::default();
        let a = mi_memoryless_scalar_gauss(Complex64::new(0.5, 0.2), 1.0, 1e4, 1.0, &q).unwrap();
        let b = mi_memoryless_scalar_gauss(Complex64::new(1.0, 0.4), 4.0, 1e4, 4.0, &q).unwrap();
        assert!((a.mi_nats - b.mi_nats).abs() < 1e-6, "{} vs {}", a.mi_nats, b.mi_nats);
    }

    #[test]
    fn large_noise_drives_mi_to_zero() {
        let q = QuadConfig::default();
        let mut prev = f64::INFINITY;
        for noise in [1.0, 1e2, 1e4] {
            let mi = mi_memoryless_scalar_gauss(Complex64::new(1.0, 0.0), 1.0, 100.0, noise, &q).unwrap();
            assert!(mi.mi_nats < prev);
            prev = mi.mi_nats;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn csv_formatting() {
        assert_eq!(format_sig(40.0, 12), "40");
        assert_eq!(format_sig(1e10, 12), "10000000000");
        assert_eq!(format_sig(1e12, 12), "1e+12");
        assert_eq!(format_sig(-1.577215664901532, 12), "-1.5772156649");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-07");
    }
}
