//! Upper and lower bound brackets on the fading number of a general regular fading law.
//!
//! For a unit beam direction `x` and past depth `kappa` the lower bracket is
//!
//! `log pi + E[log |H_0^T x|^2] - h(H_0^T x | H_{-1}^T x, ..., H_{-kappa}^T x)`,
//!
//! and its supremum over `x` lower-bounds the fading number. The upper bound
//! allows a different direction at every time instant. Isotropic laws make the
//! two coincide for any fixed direction.
//!
//! Gaussian processes are evaluated analytically; other laws by Monte Carlo
//! with k-nearest-neighbour entropy estimates.

pub mod gaussian;
pub mod knn;
pub mod monte_carlo;
pub mod sphere;

use std::fmt;

use crate::error::{Error, Result};
use crate::fading_number::{d_star, FadingNumberKind, FadingNumberReport};
use crate::linalg::{self, CMatrix, CVector};
use crate::process_models::{hermitian_weight, FadingProcess, GaussianVectorProcess, SamplePath};
use crate::seeds::{self, child_seed, stream, substream};

pub use gaussian::GaussianModel;
pub use knn::{knn_conditional_entropy, knn_differential_entropy, ComplexSamples, EntropyEstimate};
pub use monte_carlo::MAX_MC_KAPPA;
pub use sphere::{maximize_on_sphere, OptimizerConfig, SphereOptimum};

/// Directions probed by the isotropy check besides the reference direction.
pub const ISOTROPY_PROBES: usize = 5;

/// Family-wise level of the per-direction two-sample tests.
pub const ISOTROPY_LEVEL: f64 = 0.01;

/// How much of the past the conditional entropy conditions on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Past {
    /// The last `kappa` samples.
    Finite(usize),
    /// The infinite past, through a converged prediction recursion.
    Infinite,
}

impl fmt::Display for Past {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Past::Finite(k) => write!(f, "{k}"),
            Past::Infinite => f.write_str("infinite"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    GaussianAnalytic,
    MonteCarloKnn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::GaussianAnalytic => "gaussian_analytic",
            Method::MonteCarloKnn => "monte_carlo_knn",
        }
    }
}

/// Monte Carlo budget.
#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    /// Samples of the final evaluation path.
    pub samples: usize,
    /// Samples of the independent path used during direction search.
    pub search_samples: usize,
    /// Neighbour index of the entropy estimator.
    pub k: usize,
    /// Contiguous blocks behind standard errors.
    pub blocks: usize,
    pub seed: u64,
    /// Samples per direction in the isotropy test, after thinning.
    pub isotropy_samples: usize,
    pub isotropy_thin: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            search_samples: 20_000,
            k: 4,
            blocks: 10,
            seed: 0,
            isotropy_samples: 2000,
            isotropy_thin: 20,
        }
    }
}

/// One bracket evaluation.
#[derive(Clone, Debug)]
pub struct BoundEvaluation {
    pub bracket_value: f64,
    /// `direction_sequence[l]` is used at lag `l`; a single entry means a constant direction.
    pub direction_sequence: Vec<CVector>,
    /// Past depth actually used (the converged order for an infinite past).
    pub kappa: usize,
    pub past: Past,
    /// Zero exactly on the analytic path.
    pub stderr: f64,
    pub method: Method,
}

fn analytic_evaluation(model: &GaussianModel, direction: &CVector, past: Past) -> Result<(BoundEvaluation, gaussian::AnalyticBracket)> {
    let b = model.bracket(direction, past)?;
    Ok((
        BoundEvaluation {
            bracket_value: b.value,
            direction_sequence: vec![direction.clone()],
            kappa: b.prediction.order_used,
            past,
            stderr: 0.0,
            method: Method::GaussianAnalytic,
        },
        b,
    ))
}

fn finite_depth(past: Past) -> Result<usize> {
    match past {
        Past::Finite(k) if k <= MAX_MC_KAPPA => Ok(k),
        Past::Finite(k) => Err(Error::Precondition(format!(
            "Monte Carlo brackets support past depth up to {MAX_MC_KAPPA}, got {k}"
        ))),
        Past::Infinite => Err(Error::Precondition(
            "Monte Carlo brackets need a finite past depth".into(),
        )),
    }
}

fn final_path(process: &FadingProcess, kappa: usize, mc: &McConfig) -> SamplePath {
    process.sample_path(mc.samples + kappa, child_seed(mc.seed, stream::FINAL_PATH))
}

/// Lower bracket at a fixed direction: analytic for Gaussian processes, Monte Carlo otherwise.
pub fn lower_bracket(process: &FadingProcess, direction: &CVector, past: Past, mc: &McConfig) -> Result<BoundEvaluation> {
    process.check_certificates()?;
    match process {
        FadingProcess::Gaussian(g) => Ok(analytic_evaluation(&GaussianModel::new(g), direction, past)?.0),
        FadingProcess::General(_) => lower_bracket_monte_carlo(process, direction, finite_depth(past)?, mc),
    }
}

/// Monte Carlo lower bracket for any process (including Gaussian ones, for cross-validation).
pub fn lower_bracket_monte_carlo(
    process: &FadingProcess,
    direction: &CVector,
    kappa: usize,
    mc: &McConfig,
) -> Result<BoundEvaluation> {
    hermitian_weight(direction, process.nt())?;
    let path = final_path(process, kappa, mc);
    let r = monte_carlo::bracket_from_path(&path, direction, kappa, mc.k, mc.blocks)?;
    Ok(BoundEvaluation {
        bracket_value: r.value,
        direction_sequence: vec![direction.clone()],
        kappa,
        past: Past::Finite(kappa),
        stderr: r.stderr,
        method: Method::MonteCarloKnn,
    })
}

/// Supremum of the lower bracket over unit directions.
pub fn lower_bound(process: &FadingProcess, past: Past, mc: &McConfig, optimizer: &OptimizerConfig) -> Result<FadingNumberReport> {
    process.check_certificates()?;
    match process {
        FadingProcess::Gaussian(g) => lower_bound_gaussian(g, past, optimizer),
        FadingProcess::General(_) => lower_bound_monte_carlo(process, past, mc, optimizer),
    }
}

fn record_optimizer(report: &mut FadingNumberReport, opt: &SphereOptimum) {
    report.diagnostics.insert("optimizer_converged".into(), if opt.converged { 1.0 } else { 0.0 });
    report.diagnostics.insert("optimizer_iterations".into(), opt.iterations as f64);
    report.diagnostics.insert("optimizer_evaluations".into(), opt.evaluations as f64);
    report.diagnostics.insert("optimizer_best_start".into(), opt.start_index as f64);
    if !opt.converged {
        report
            .warnings
            .push("direction search exhausted its iteration budget; value is the best found".into());
    }
}

/// Analytic lower bound for a Gaussian process.
pub fn lower_bound_gaussian(process: &GaussianVectorProcess, past: Past, optimizer: &OptimizerConfig) -> Result<FadingNumberReport> {
    let model = GaussianModel::new(process);
    let objective = |x: &CVector| model.bracket(x, past).map(|b| b.value);
    let (_, guess) = d_star(process.mean(), process.stationary_covariance())?;
    let best = maximize_on_sphere(process.nt(), &objective, &[guess], optimizer.restarts, optimizer.fd_step, optimizer)?;
    let (evaluation, b) = analytic_evaluation(&model, &best.direction, past)?;
    let mut report = FadingNumberReport::new(FadingNumberKind::LowerBound, b.value)
        .with("kappa", b.prediction.order_used as f64)
        .with("prediction_gap", b.prediction.convergence_gap)
        .with("epsilon_sq", b.prediction.error_variance)
        .with("variance", b.variance)
        .with("mean_log_magnitude_sq", b.mean_log_magnitude_sq)
        .with("memory_term", (b.variance / b.prediction.error_variance).ln())
        .with("stderr", 0.0)
        .with("restarts", optimizer.restarts.max(1) as f64);
    record_optimizer(&mut report, &best);
    report.direction = Some(best.direction);
    report.evaluation = Some(evaluation);
    Ok(report)
}

/// Moment-based starting direction: `d*` of the sample mean and covariance.
fn moment_guess(path: &SamplePath) -> Option<CVector> {
    let nt = path.nt();
    let n = path.len() as f64;
    let mut mean = CVector::zeros(nt);
    for row in path.rows() {
        for (m, z) in mean.iter_mut().zip(row) {
            *m += z;
        }
    }
    mean.unscale_mut(n);
    let mut cov = CMatrix::zeros(nt, nt);
    for row in path.rows() {
        let v = CVector::from_iterator(nt, row.iter().zip(mean.iter()).map(|(z, m)| z - m));
        cov += &v * v.adjoint();
    }
    cov.unscale_mut(n - 1.0);
    d_star(&mean, &cov).ok().map(|(_, x)| x)
}

/// Monte Carlo lower bound: search on an independent pilot path, final value on a fresh path.
pub fn lower_bound_monte_carlo(
    process: &FadingProcess,
    past: Past,
    mc: &McConfig,
    optimizer: &OptimizerConfig,
) -> Result<FadingNumberReport> {
    process.check_certificates()?;
    let kappa = finite_depth(past)?;
    let nt = process.nt();
    let search = process.sample_path(mc.search_samples + kappa, child_seed(mc.seed, stream::SEARCH_PATH));
    let objective = |x: &CVector| monte_carlo::bracket_from_path(&search, x, kappa, mc.k, 1).map(|r| r.value);
    let local = OptimizerConfig {
        max_iters: optimizer.mc_max_iters,
        value_tol: optimizer.mc_value_tol,
        ..optimizer.clone()
    };
    let initial: Vec<CVector> = moment_guess(&search).into_iter().collect();
    let best = maximize_on_sphere(nt, &objective, &initial, optimizer.mc_restarts, optimizer.mc_fd_step, &local)?;
    let path = final_path(process, kappa, mc);
    let r = monte_carlo::bracket_from_path(&path, &best.direction, kappa, mc.k, mc.blocks)?;
    let mut report = FadingNumberReport::new(FadingNumberKind::LowerBound, r.value)
        .with("kappa", kappa as f64)
        .with("stderr", r.stderr)
        .with("samples", r.samples as f64)
        .with("knn_k", mc.k as f64)
        .with("mean_log_magnitude_sq", r.mean_log_magnitude_sq)
        .with("conditional_entropy", r.conditional_entropy)
        .with("search_value", best.value)
        .with("restarts", optimizer.mc_restarts.max(1) as f64);
    record_optimizer(&mut report, &best);
    report.evaluation = Some(BoundEvaluation {
        bracket_value: r.value,
        direction_sequence: vec![best.direction.clone()],
        kappa,
        past,
        stderr: r.stderr,
        method: Method::MonteCarloKnn,
    });
    report.direction = Some(best.direction);
    Ok(report)
}

/// Search strategy for the per-time directions of the upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpperMode {
    /// All directions equal; the objective is then the lower bracket.
    ConstantDirection,
    /// Cyclic optimization of every direction, started from the best constant direction.
    CoordinateAscent,
}

impl UpperMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UpperMode::ConstantDirection => "constant_direction",
            UpperMode::CoordinateAscent => "coordinate_ascent",
        }
    }
}

/// Finite-past estimate of the upper bound `sup over direction sequences` with past depth `kappa`.
///
/// `ConstantDirection` evaluates exactly the lower-bound search at depth `kappa`.
/// `CoordinateAscent` needs the analytic Gaussian path; it reports how much the
/// per-time freedom gained over the constant start (`ascent_gain`) and the change
/// against depth `kappa / 2` (`kappa_gap`).
pub fn upper_bound(
    process: &FadingProcess,
    kappa: usize,
    mode: UpperMode,
    mc: &McConfig,
    optimizer: &OptimizerConfig,
) -> Result<FadingNumberReport> {
    if kappa == 0 {
        return Err(Error::Precondition("the upper bound needs past depth kappa >= 1".into()));
    }
    let mut report = lower_bound(process, Past::Finite(kappa), mc, optimizer)?;
    report.kind = FadingNumberKind::UpperBound;
    let start = report.direction.clone().expect("lower bound reports a direction");
    if let Some(e) = report.evaluation.as_mut() {
        e.direction_sequence = vec![start.clone(); kappa + 1];
    }
    if mode == UpperMode::ConstantDirection {
        return Ok(report);
    }
    let FadingProcess::Gaussian(g) = process else {
        return Err(Error::Precondition(
            "coordinate ascent over per-time directions is only available for Gaussian processes".into(),
        ));
    };
    let model = GaussianModel::new(g);
    let ascent = model.coordinate_ascent(vec![start; kappa + 1], optimizer)?;
    let half = model.coordinate_ascent(vec![ascent.directions[0].clone(); kappa / 2 + 1], optimizer)?;
    let gain = ascent.value - ascent.initial_value;
    if gain > 1e-9 {
        log::warn!("per-time directions improve on the best constant direction by {gain:e} nats");
        report
            .warnings
            .push(format!("coordinate ascent left the constant-direction point (gain {gain:e})"));
    }
    if !ascent.converged {
        report.warnings.push("coordinate ascent exhausted its sweep budget".into());
    }
    report.value = ascent.value;
    report.diagnostics.insert("ascent_gain".into(), gain);
    report.diagnostics.insert("ascent_sweeps".into(), ascent.sweeps as f64);
    report.diagnostics.insert("sweep_gap".into(), ascent.last_gain.abs());
    report.diagnostics.insert("kappa_gap".into(), ascent.value - half.value);
    report.diagnostics.insert("ascent_converged".into(), if ascent.converged { 1.0 } else { 0.0 });
    report.direction = Some(ascent.directions[0].clone());
    report.evaluation = Some(BoundEvaluation {
        bracket_value: ascent.value,
        direction_sequence: ascent.directions,
        kappa,
        past: Past::Finite(kappa),
        stderr: 0.0,
        method: Method::GaussianAnalytic,
    });
    Ok(report)
}

/// `log(c(0) / eps^2)` of the projection along `direction`, with the infinite past.
pub fn memory_term_gauss(process: &GaussianVectorProcess, direction: &CVector) -> Result<f64> {
    GaussianModel::new(process).memory_term(direction)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Fading number of an isotropically distributed process: the lower bracket at any
/// fixed `reference` direction.
///
/// The isotropy assumption is checked: the bracket at [`ISOTROPY_PROBES`] random
/// directions must agree with the reference (sample spread below
/// `max(3 stderr, 1e-6)`). Gaussian processes must in addition have scalar
/// autocovariances and zero mean; other laws must pass two-sample
/// Kolmogorov-Smirnov tests on `log |H^T x|^2` at family-wise level [`ISOTROPY_LEVEL`].
pub fn isotropic_fading_number(
    process: &FadingProcess,
    reference: &CVector,
    past: Past,
    mc: &McConfig,
) -> Result<FadingNumberReport> {
    let nt = process.nt();
    let evaluation = lower_bracket(process, reference, past, mc)?;
    let mut rng = substream(child_seed(mc.seed, nt as u64), stream::PROBE_DIRECTIONS);
    let probes: Vec<CVector> = (0..ISOTROPY_PROBES).map(|_| linalg::random_unit_vector(nt, &mut rng)).collect();
    let mut report = FadingNumberReport::new(FadingNumberKind::Isotropic, evaluation.bracket_value);

    let mut values = vec![evaluation.bracket_value];
    match process {
        FadingProcess::Gaussian(g) => {
            let defect = g.isotropy_defect(64);
            report.diagnostics.insert("isotropy_defect".into(), defect);
            if defect > 1e-9 * (1.0 + linalg::max_abs(g.stationary_covariance())) {
                return Err(Error::IsotropyViolation(format!(
                    "Gaussian process is not isotropic (mean or autocovariance defect {defect:e})"
                )));
            }
            let model = GaussianModel::new(g);
            for x in &probes {
                values.push(model.bracket(x, past)?.value);
            }
        }
        FadingProcess::General(_) => {
            let kappa = finite_depth(past)?;
            let path = final_path(process, kappa, mc);
            for x in &probes {
                values.push(monte_carlo::bracket_from_path(&path, x, kappa, mc.k, 1)?.value);
            }
            let (stat, crit) = isotropy_ks(process, reference, &probes, mc);
            report.diagnostics.insert("ks_max_statistic".into(), stat);
            report.diagnostics.insert("ks_critical".into(), crit);
            if stat > crit {
                return Err(Error::IsotropyViolation(format!(
                    "projected laws differ across directions (KS statistic {stat:.4} > {crit:.4})"
                )));
            }
        }
    }
    let spread = sample_sd(&values);
    let tolerance = (3.0 * evaluation.stderr).max(1e-6);
    report.diagnostics.insert("direction_spread".into(), spread);
    report.diagnostics.insert("spread_tolerance".into(), tolerance);
    report.diagnostics.insert("stderr".into(), evaluation.stderr);
    report.diagnostics.insert("kappa".into(), evaluation.kappa as f64);
    if spread >= tolerance {
        return Err(Error::IsotropyViolation(format!(
            "bracket varies across directions (spread {spread:e} >= {tolerance:e})"
        )));
    }
    report.direction = Some(reference.clone());
    report.evaluation = Some(evaluation);
    Ok(report)
}

/// Largest KS statistic of `log |G|^2` between the reference and each probe direction,
/// and the Bonferroni-corrected critical value. Each direction uses its own path.
fn isotropy_ks(process: &FadingProcess, reference: &CVector, probes: &[CVector], mc: &McConfig) -> (f64, f64) {
    let root = child_seed(mc.seed, stream::ISOTROPY_PATH);
    let thin = mc.isotropy_thin.max(1);
    let sample = |x: &CVector, index: u64| -> Vec<f64> {
        let path = process.sample_path(mc.isotropy_samples * thin, seeds::child_seed(root, index));
        path.project(x).iter().step_by(thin).map(|g| g.norm_sqr().ln()).collect()
    };
    let base = sample(reference, 0);
    let stat = probes
        .iter()
        .enumerate()
        .map(|(i, x)| monte_carlo::ks_statistic(&base, &sample(x, i as u64 + 1)))
        .fold(0.0, f64::max);
    let crit = monte_carlo::ks_critical(ISOTROPY_LEVEL / probes.len() as f64, base.len(), base.len());
    (stat, crit)
}
