//! Kozachenko-Leonenko k-nearest-neighbour differential entropy.
//!
//! Complex samples of dimension `m` are treated as real points of dimension
//! `D = 2m`. The points are first whitened with the Cholesky factor `L` of
//! their sample covariance, so `h(x) = h(L^{-1} x) + log det L`; this makes the
//! estimate invariant under invertible linear maps. The estimator is
//!
//! `h = psi(N) - psi(k) + log V_D + (D / N) sum_i log eps_i`
//!
//! with `eps_i` the Euclidean distance to the `k`-th neighbour and `V_D` the unit-ball volume.
//!
//! Conditional entropies `h(X | Y)` use the Frenzel-Pompe estimator: with `eps_i`
//! the max-norm distance to the `k`-th neighbour in the joint space and `n_i` the
//! number of points strictly within `eps_i` in the `Y` space,
//!
//! `h(X | Y) = -psi(k) + mean psi(n_i + 1) + d_X mean log(2 eps_i)`.
//!
//! Sharing the neighbourhood scale between the joint and the marginal space
//! cancels most of the bias a difference of two separate estimates carries.

use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Smallest sample size accepted by the estimator.
pub const MIN_SAMPLES: usize = 1000;

/// Number of contiguous blocks behind the reported standard error.
pub const DEFAULT_BLOCKS: usize = 10;

const LEAF_SIZE: usize = 16;

/// `n` complex vectors of dimension `dim`, row-major.
#[derive(Clone, Debug)]
pub struct ComplexSamples {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexSamples {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Estimation("sample buffer does not match the dimension".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn scalars(data: Vec<Complex64>) -> Self {
        Self { dim: 1, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Entropy estimate with a standard error from [`DEFAULT_BLOCKS`] contiguous blocks.
pub fn knn_differential_entropy(samples: &ComplexSamples, k: usize) -> Result<EntropyEstimate> {
    let value = knn_entropy_value(samples, k)?;
    let n = samples.len();
    let blocks = DEFAULT_BLOCKS;
    let size = n / blocks;
    if size < k + 2 {
        return Ok(EntropyEstimate { value, stderr: f64::NAN });
    }
    let block_values = (0..blocks)
        .map(|b| estimate(&samples.slice(b * size, (b + 1) * size), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyEstimate {
        value,
        stderr: block_stderr(&block_values),
    })
}

/// Standard error of the mean of the full sample implied by block estimates.
pub(crate) fn block_stderr(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Point estimate without a standard error.
pub fn knn_entropy_value(samples: &ComplexSamples, k: usize) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Estimation(format!(
            "k-NN entropy needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    estimate(samples, k)
}

/// `h(X | Y)` for rows `[y, x]` whose first `conditioning_dim` complex entries are `y`.
pub fn knn_conditional_entropy(samples: &ComplexSamples, conditioning_dim: usize, k: usize) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Estimation(format!(
            "k-NN entropy needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if conditioning_dim == 0 {
        return estimate(samples, k);
    }
    if conditioning_dim >= samples.dim {
        return Err(Error::Estimation("the conditioned variable is empty".into()));
    }
    let n = samples.len();
    if k == 0 || n <= k {
        return Err(Error::Estimation(format!("need k >= 1 and more than k samples (k = {k}, n = {n})")));
    }
    let d = 2 * samples.dim;
    let dy = 2 * conditioning_dim;
    // lower-triangular whitening maps y to y' and x to x' - f(y'), so only the x block enters
    let (points, log_diag) = whiten_diagonal(samples)?;
    let log_det_x: f64 = log_diag[dy..].iter().sum();
    let y_points: Vec<f64> = points.chunks_exact(d).flat_map(|row| row[..dy].iter().copied()).collect();
    let joint = KdTree::build(&points, d, Metric::Chebyshev);
    let marginal = KdTree::build(&y_points, dy, Metric::Chebyshev);
    let terms: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eps = joint.kth_neighbour(i, k);
            let count = marginal.count_within(i, eps);
            ((2.0 * eps).ln(), digamma(count as f64 + 1.0))
        })
        .collect();
    let mut log_sum = 0.0;
    let mut psi_sum = 0.0;
    for &(l, p) in &terms {
        if !l.is_finite() {
            return Err(Error::Estimation(
                "duplicate samples: k-th neighbour distance is zero".into(),
            ));
        }
        log_sum += l;
        psi_sum += p;
    }
    let dx = (d - dy) as f64;
    Ok(-digamma(k as f64) + psi_sum / n as f64 + dx * log_sum / n as f64 + log_det_x)
}

fn estimate(samples: &ComplexSamples, k: usize) -> Result<f64> {
    let n = samples.len();
    if k == 0 || n <= k {
        return Err(Error::Estimation(format!("need k >= 1 and more than k samples (k = {k}, n = {n})")));
    }
    let d = 2 * samples.dim;
    let (points, log_diag) = whiten_diagonal(samples)?;
    let log_det: f64 = log_diag.iter().sum();
    let tree = KdTree::build(&points, d, Metric::Euclidean);
    let log_dist: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| tree.kth_neighbour(i, k).ln() * 0.5)
        .collect();
    let mut sum = 0.0;
    for &l in &log_dist {
        if !l.is_finite() {
            return Err(Error::Estimation(
                "duplicate samples: k-th neighbour distance is zero".into(),
            ));
        }
        sum += l;
    }
    let m = samples.dim as f64;
    let log_ball = m * std::f64::consts::PI.ln() - ln_gamma(m + 1.0);
    Ok(digamma(n as f64) - digamma(k as f64) + log_ball + d as f64 * sum / n as f64 + log_det)
}

/// Real coordinates `L^{-1}(x - mean)` and the logarithms of the diagonal of `L`.
fn whiten_diagonal(samples: &ComplexSamples) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = samples.len();
    let d = 2 * samples.dim;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (j, z) in samples.row(i).iter().enumerate() {
            mean[2 * j] += z.re;
            mean[2 * j + 1] += z.im;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut x = vec![0.0; d];
    for i in 0..n {
        for (j, z) in samples.row(i).iter().enumerate() {
            x[2 * j] = z.re - mean[2 * j];
            x[2 * j + 1] = z.im - mean[2 * j + 1];
        }
        for a in 0..d {
            for b in 0..=a {
                cov[(a, b)] += x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / (n as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Estimation("sample covariance is singular".into()))?;
    let l = chol.l();
    let log_diag: Vec<f64> = (0..d).map(|i| l[(i, i)].ln()).collect();
    let mut points = vec![0.0; n * d];
    for i in 0..n {
        for (j, z) in samples.row(i).iter().enumerate() {
            x[2 * j] = z.re - mean[2 * j];
            x[2 * j + 1] = z.im - mean[2 * j + 1];
        }
        // forward substitution L y = x
        let row = &mut points[i * d..(i + 1) * d];
        for a in 0..d {
            let mut acc = x[a];
            for b in 0..a {
                acc -= l[(a, b)] * row[b];
            }
            row[a] = acc / l[(a, a)];
        }
    }
    Ok((points, log_diag))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Metric {
    /// Distances are stored squared.
    Euclidean,
    /// Max-norm.
    Chebyshev,
}

/// Static kd-tree over points with a runtime dimension.
struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    metric: Metric,
    index: Vec<usize>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [f64], dim: usize, metric: Metric) -> Self {
        let n = points.len() / dim;
        let mut tree = Self {
            points,
            dim,
            metric,
            index: (0..n).collect(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 2),
        };
        tree.build_node(0, n);
        tree
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of largest spread at the median
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..self.dim {
            let (lo, hi) = self.index[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.coord(i, a);
                (lo.min(v), hi.max(v))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        let dim = self.dim;
        self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis].total_cmp(&points[b * dim + axis])
        });
        let value = self.coord(self.index[mid], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        let pa = &self.points[a * self.dim..(a + 1) * self.dim];
        let pb = &self.points[b * self.dim..(b + 1) * self.dim];
        match self.metric {
            Metric::Euclidean => pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Chebyshev => pa.iter().zip(pb).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs())),
        }
    }

    /// Lower bound on the distance to anything across a split at offset `diff`.
    fn axis_bound(&self, diff: f64) -> f64 {
        match self.metric {
            Metric::Euclidean => diff * diff,
            Metric::Chebyshev => diff.abs(),
        }
    }

    /// Distance (squared for Euclidean) from point `q` to its `k`-th nearest other point.
    fn kth_neighbour(&self, q: usize, k: usize) -> f64 {
        let mut heap: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, &mut heap);
        heap.peek().map_or(f64::INFINITY, |d| d.0)
    }

    fn search(&self, node: usize, q: usize, k: usize, heap: &mut BinaryHeap<OrdF64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start..end] {
                    if i == q {
                        continue;
                    }
                    let d = self.dist(q, i);
                    if heap.len() < k {
                        heap.push(OrdF64(d));
                    } else if d < heap.peek().unwrap().0 {
                        heap.pop();
                        heap.push(OrdF64(d));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = self.coord(q, axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                if heap.len() < k || self.axis_bound(diff) < heap.peek().unwrap().0 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }

    /// Number of other points at distance strictly below `r` from point `q`.
    fn count_within(&self, q: usize, r: f64) -> usize {
        let mut count = 0;
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    count += self.index[start..end].iter().filter(|&&i| i != q && self.dist(q, i) < r).count();
                }
                Node::Split { axis, value, left, right } => {
                    let diff = self.coord(q, axis) - value;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    stack.push(near);
                    if self.axis_bound(diff) < r {
                        stack.push(far);
                    }
                }
            }
        }
        count
    }
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
