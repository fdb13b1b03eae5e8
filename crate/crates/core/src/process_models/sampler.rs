use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::GaussianVectorProcess;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::seeds::{self, substream};

/// `n` consecutive fading vectors, stored row-major (`n x nt`).
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    nt: usize,
    data: Vec<Complex64>,
}

impl SamplePath {
    pub fn new(nt: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len() % nt, 0);
        Self { nt, data }
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.nt..(t + 1) * self.nt]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.nt)
    }

    /// `G_t = H_t^T x` for every `t`.
    pub fn project(&self, direction: &CVector) -> Vec<Complex64> {
        self.rows()
            .map(|h| h.iter().zip(direction.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Seeded generator of stationary vector sample paths.
pub trait PathSampler: Send + Sync + fmt::Debug {
    fn nt(&self) -> usize;

    /// Deterministic in `seed`; the first emitted sample is already stationary.
    fn sample_path(&self, n: usize, seed: u64) -> SamplePath;
}

/// Runs `H~_k = sum_i A_i H~_{k-i} + s_k L z_k` and emits `d + H~_k` after burn-in.
fn simulate_var<R: Rng>(
    process: &GaussianVectorProcess,
    n: usize,
    rng: &mut R,
    mut innovation_scale: impl FnMut(&mut R) -> f64,
) -> SamplePath {
    let nt = process.nt();
    let p = process.order();
    let l = process.innovation_factor();
    let ar = process.ar_coefficients();
    let burn = process.burn_in();
    // history[j] holds H~_{k-1-j}
    let mut history = vec![Complex64::new(0.0, 0.0); p.max(1) * nt];
    let mut current = vec![Complex64::new(0.0, 0.0); nt];
    let mut z = vec![Complex64::new(0.0, 0.0); nt];
    let mut out = Vec::with_capacity(n * nt);
    for step in 0..burn + n {
        for zi in z.iter_mut() {
            *zi = linalg::standard_complex_normal(rng);
        }
        let s = innovation_scale(rng);
        for i in 0..nt {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            acc *= s;
            for (lag, a) in ar.iter().enumerate() {
                let past = &history[lag * nt..(lag + 1) * nt];
                for j in 0..nt {
                    acc += a[(i, j)] * past[j];
                }
            }
            current[i] = acc;
        }
        if p > 0 {
            history.copy_within(0..(p - 1) * nt, nt);
            history[..nt].copy_from_slice(&current);
        }
        if step >= burn {
            out.extend(current.iter().zip(process.mean().iter()).map(|(h, d)| h + d));
        }
    }
    SamplePath::new(nt, out)
}

impl PathSampler for GaussianVectorProcess {
    fn nt(&self) -> usize {
        self.mean().len()
    }

    fn sample_path(&self, n: usize, seed: u64) -> SamplePath {
        let mut rng = substream(seed, seeds::stream::SAMPLE_PATH);
        simulate_var(self, n, &mut rng, |_| 1.0)
    }
}

/// Vector AR recursion driven by Gaussian scale-mixture innovations
/// `U_k = s_k Q^{1/2} z_k`, with `s_k` drawn IID from a finite mixture normalized
/// to `E[s^2] = 1`. Second-order structure equals that of the Gaussian base.
#[derive(Clone, Debug)]
pub struct MixtureInnovationProcess {
    base: GaussianVectorProcess,
    cumulative_weights: Vec<f64>,
    scales: Vec<f64>,
}

impl MixtureInnovationProcess {
    pub fn new(base: GaussianVectorProcess, weights: &[f64], scales: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.len() != scales.len() {
            return Err(Error::Model(
                "mixture needs matching, nonempty weights and scales".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite())
            || scales.iter().any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(Error::Model("mixture weights and scales must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let second_moment: f64 = weights
            .iter()
            .zip(scales)
            .map(|(w, s)| w / total * s * s)
            .sum();
        let norm = second_moment.sqrt();
        let mut acc = 0.0;
        let cumulative_weights = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self {
            base,
            cumulative_weights,
            scales: scales.iter().map(|s| s / norm).collect(),
        })
    }

    pub fn base(&self) -> &GaussianVectorProcess {
        &self.base
    }
}

impl PathSampler for MixtureInnovationProcess {
    fn nt(&self) -> usize {
        self.base.nt()
    }

    fn sample_path(&self, n: usize, seed: u64) -> SamplePath {
        let mut rng = substream(seed, seeds::stream::SAMPLE_PATH);
        simulate_var(&self.base, n, &mut rng, |r| {
            let u: f64 = r.random();
            let idx = self
                .cumulative_weights
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.scales.len() - 1);
            self.scales[idx]
        })
    }
}

/// `c H_k` for an inner sampler.
#[derive(Clone, Debug)]
pub struct ScaledSampler {
    inner: Arc<dyn PathSampler>,
    scale: f64,
}

impl ScaledSampler {
    pub fn new(inner: Arc<dyn PathSampler>, scale: f64) -> Self {
        Self { inner, scale }
    }
}

impl PathSampler for ScaledSampler {
    fn nt(&self) -> usize {
        self.inner.nt()
    }

    fn sample_path(&self, n: usize, seed: u64) -> SamplePath {
        let path = self.inner.sample_path(n, seed);
        SamplePath::new(path.nt, path.data.iter().map(|z| z * self.scale).collect())
    }
}

/// A regular fading law known only through a sampler.
#[derive(Clone, Debug)]
pub struct GeneralFadingProcess {
    sampler: Arc<dyn PathSampler>,
    /// `E ||H_k||^2 < infinity`.
    pub finite_second_moment: bool,
    /// `h({H_k}) > -infinity`.
    pub finite_entropy_rate: bool,
}

impl GeneralFadingProcess {
    pub fn new(sampler: Arc<dyn PathSampler>, finite_second_moment: bool, finite_entropy_rate: bool) -> Self {
        Self {
            sampler,
            finite_second_moment,
            finite_entropy_rate,
        }
    }

    /// Certified regular law (both certificates set).
    pub fn regular(sampler: Arc<dyn PathSampler>) -> Self {
        Self::new(sampler, true, true)
    }

    pub fn sampler(&self) -> &dyn PathSampler {
        self.sampler.as_ref()
    }

    pub fn nt(&self) -> usize {
        self.sampler.nt()
    }

    pub fn check_certificates(&self) -> Result<()> {
        if !self.finite_second_moment {
            return Err(Error::Precondition("fading law lacks a finite second moment certificate".into()));
        }
        if !self.finite_entropy_rate {
            return Err(Error::Precondition("fading law lacks a finite entropy rate certificate".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            sampler: Arc::new(ScaledSampler::new(Arc::clone(&self.sampler), c)),
            ..self.clone()
        }
    }
}

/// Either a Gaussian process (analytic path available) or a general sampled law.
#[derive(Clone, Debug)]
pub enum FadingProcess {
    Gaussian(GaussianVectorProcess),
    General(GeneralFadingProcess),
}

impl FadingProcess {
    pub fn nt(&self) -> usize {
        match self {
            FadingProcess::Gaussian(g) => g.nt(),
            FadingProcess::General(g) => g.nt(),
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianVectorProcess> {
        match self {
            FadingProcess::Gaussian(g) => Some(g),
            FadingProcess::General(_) => None,
        }
    }

    pub fn sample_path(&self, n: usize, seed: u64) -> SamplePath {
        match self {
            FadingProcess::Gaussian(g) => g.sample_path(n, seed),
            FadingProcess::General(g) => g.sampler().sample_path(n, seed),
        }
    }

    pub fn check_certificates(&self) -> Result<()> {
        match self {
            FadingProcess::Gaussian(_) => Ok(()),
            FadingProcess::General(g) => g.check_certificates(),
        }
    }
}

impl From<GaussianVectorProcess> for FadingProcess {
    fn from(g: GaussianVectorProcess) -> Self {
        FadingProcess::Gaussian(g)
    }
}

impl From<GeneralFadingProcess> for FadingProcess {
    fn from(g: GeneralFadingProcess) -> Self {
        FadingProcess::General(g)
    }
}

/// Empirical `(1/n) sum_t X_{t+k} X_t^H` of a centered path, for `k = 0..=max_lag`.
pub fn empirical_autocovariances(path: &SamplePath, mean: &CVector, max_lag: usize) -> Vec<CMatrix> {
    let nt = path.nt();
    let n = path.len();
    let centered: Vec<CVector> = path
        .rows()
        .map(|r| CVector::from_iterator(nt, r.iter().zip(mean.iter()).map(|(a, b)| a - b)))
        .collect();
    (0..=max_lag)
        .map(|k| {
            let mut acc = CMatrix::zeros(nt, nt);
            for t in 0..n - k {
                acc += &centered[t + k] * centered[t].adjoint();
            }
            acc.unscale((n - k) as f64)
        })
        .collect()
}
