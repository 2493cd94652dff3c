//! Synthetic objectives `f(x) = (1/n) Σᵢ E_{ξ∼Dᵢ} F(x; ξ)` with stochastic and
//! full gradients.
//!
//! Three families are provided: a diagonal quadratic with additive Gaussian
//! gradient noise, least-squares linear regression and ℓ₂-regularized logistic
//! regression. Data problems own a fixed dataset generated from the problem
//! seed; stochasticity comes from minibatches drawn with replacement from a
//! worker's shard, keyed by a [`SampleHandle`].

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{keyed_stream, Domain};
use crate::vector::{dot, DenseVector};

fn default_batch() -> usize {
    1
}

fn default_label_noise() -> f64 {
    0.1
}

fn default_condition() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// `f(x) = ½ Σ λⱼ xⱼ²`; stochastic gradients add `N(0, noise_std²/batch)` per coordinate.
    Quadratic {
        spectrum: Vec<f64>,
        #[serde(default)]
        noise_std: f64,
    },
    /// `f(x) = (1/2N) ‖Ax − y‖²` over a Gaussian design whose Hessian has the
    /// given condition number (column scales are geometric in `[κ^{-1/2}, 1]`).
    LinReg {
        d: usize,
        samples: usize,
        #[serde(default = "default_label_noise")]
        label_noise: f64,
        #[serde(default = "default_condition")]
        condition_number: f64,
    },
    /// `f(x) = (1/N) Σ log(1 + exp(−yᵢ aᵢᵀx)) + (λ/2)‖x‖²`, labels in `{−1, +1}`.
    LogReg { d: usize, samples: usize, lambda: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub kind: ProblemKind,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            batch_size: 1,
            seed: 0,
        }
    }

    /// The default linear-regression reproduction problem: d = 20, N = 512,
    /// Hessian condition number 10, label noise 0.1, batch 1.
    pub fn default_linreg() -> Self {
        Self::new(ProblemKind::LinReg {
            d: 20,
            samples: 512,
            label_noise: 0.1,
            condition_number: 10.0,
        })
    }

    pub fn with_batch(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Quadratic { spectrum, .. } => spectrum.len(),
            ProblemKind::LinReg { d, .. } | ProblemKind::LogReg { d, .. } => *d,
        }
    }
}

/// Pins the randomness `ξ` of one stochastic-gradient draw: the minibatch indices
/// and any additive noise. Re-evaluating at another point with the same handle
/// reuses the same `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SampleHandle {
    pub seed: u64,
    pub step: u64,
    pub worker: u64,
    pub draw: u32,
}

impl SampleHandle {
    pub fn new(seed: u64, step: u64, worker: u64, draw: u32) -> Self {
        Self {
            seed,
            step,
            worker,
            draw,
        }
    }
}

/// The slice of the data a worker samples from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shard {
    /// Noise-model problems have no finite dataset; every worker samples the
    /// same population.
    Population,
    Samples(Vec<usize>),
}

impl Shard {
    pub fn len(&self) -> Option<usize> {
        match self {
            Shard::Population => None,
            Shard::Samples(idx) => Some(idx.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Shard::Samples(idx) if idx.is_empty())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataLoss {
    Squared,
    Logistic,
}

/// A fixed design matrix (row-major) with targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    planted: Option<DenseVector>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || features.len() != dim * targets.len() {
            return Err(config_err(format!(
                "dataset shape mismatch: {} features for {} rows of dimension {dim}",
                features.len(),
                targets.len()
            )));
        }
        Ok(Self {
            dim,
            features,
            targets,
            planted: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The parameter vector the targets were generated from, if synthetic.
    pub fn planted(&self) -> Option<&DenseVector> {
        self.planted.as_ref()
    }

    /// CSV snapshot: header `y,x0,..,x{d-1}`, one row per sample, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("y");
        for j in 0..self.dim {
            header.push_str(&format!(",x{j}"));
        }
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            write!(out, "{:.16e}", self.targets[i])?;
            for v in self.row(i) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyInput("dataset csv has no header"))?
            .map_err(|e| config_err(e.to_string()))?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| config_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| config_err(format!("dataset line {}: too few fields", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| config_err(format!("dataset line {}: {e}", lineno + 2)))
            };
            targets.push(parse(fields.next())?);
            for _ in 0..dim {
                features.push(parse(fields.next())?);
            }
            if fields.next().is_some() {
                return Err(config_err(format!("dataset line {}: too many fields", lineno + 2)));
            }
        }
        Dataset::new(dim, features, targets)
    }
}

#[derive(Clone, Debug)]
enum Objective {
    Quadratic { spectrum: Vec<f64>, noise_std: f64 },
    Data { loss: DataLoss, data: Dataset, lambda: f64 },
}

/// A built problem instance, immutable after construction.
#[derive(Clone, Debug)]
pub struct Problem {
    objective: Objective,
    batch_size: usize,
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        if spec.batch_size == 0 {
            return Err(config_err("batch_size must be >= 1"));
        }
        let objective = match &spec.kind {
            ProblemKind::Quadratic {
                spectrum,
                noise_std,
            } => {
                if spectrum.is_empty() {
                    return Err(config_err("quadratic spectrum is empty"));
                }
                if spectrum.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                    return Err(config_err("quadratic eigenvalues must be finite and >= 0"));
                }
                if !(*noise_std >= 0.0) {
                    return Err(config_err("noise_std must be >= 0"));
                }
                Objective::Quadratic {
                    spectrum: spectrum.clone(),
                    noise_std: *noise_std,
                }
            }
            ProblemKind::LinReg {
                d,
                samples,
                label_noise,
                condition_number,
            } => {
                check_data_shape(*d, *samples)?;
                if !(*condition_number >= 1.0) {
                    return Err(config_err("condition_number must be >= 1"));
                }
                if !(*label_noise >= 0.0) {
                    return Err(config_err("label_noise must be >= 0"));
                }
                Objective::Data {
                    loss: DataLoss::Squared,
                    data: generate_linreg(*d, *samples, *label_noise, *condition_number, spec.seed),
                    lambda: 0.0,
                }
            }
            ProblemKind::LogReg { d, samples, lambda } => {
                check_data_shape(*d, *samples)?;
                if !(*lambda >= 0.0) {
                    return Err(config_err("lambda must be >= 0"));
                }
                Objective::Data {
                    loss: DataLoss::Logistic,
                    data: generate_logreg(*d, *samples, spec.seed),
                    lambda: *lambda,
                }
            }
        };
        Ok(Self {
            objective,
            batch_size: spec.batch_size,
        })
    }

    /// Wrap an existing dataset, e.g. one imported from a CSV snapshot.
    pub fn from_dataset(loss: DataLoss, data: Dataset, lambda: f64, batch_size: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(config_err("dataset has no samples"));
        }
        if batch_size == 0 {
            return Err(config_err("batch_size must be >= 1"));
        }
        Ok(Self {
            objective: Objective::Data { loss, data, lambda },
            batch_size,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.objective {
            Objective::Quadratic { spectrum, .. } => spectrum.len(),
            Objective::Data { data, .. } => data.dim(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.objective {
            Objective::Data { data, .. } => Some(data),
            Objective::Quadratic { .. } => None,
        }
    }

    pub fn num_samples(&self) -> Option<usize> {
        self.dataset().map(Dataset::len)
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Quadratic { spectrum, .. } => {
                0.5 * spectrum.iter().zip(x).map(|(l, v)| l * v * v).sum::<f64>()
            }
            Objective::Data { loss, data, lambda } => {
                let n = data.len() as f64;
                let total: f64 = (0..data.len())
                    .map(|i| sample_loss(*loss, data.row(i), data.target(i), x))
                    .sum();
                total / n + 0.5 * lambda * dot(x, x)
            }
        }
    }

    pub fn full_grad(&self, x: &[f64]) -> DenseVector {
        match &self.objective {
            Objective::Quadratic { spectrum, .. } => {
                spectrum.iter().zip(x).map(|(l, v)| l * v).collect()
            }
            Objective::Data { data, .. } => {
                let all: Vec<usize> = (0..data.len()).collect();
                self.mean_data_grad(&all, x)
            }
        }
    }

    /// Gradient of the local objective `fᵢ` over a worker's shard.
    pub fn shard_grad(&self, shard: &Shard, x: &[f64]) -> Result<DenseVector> {
        match (shard, &self.objective) {
            (_, Objective::Quadratic { .. }) => Ok(self.full_grad(x)),
            (Shard::Population, Objective::Data { .. }) => Ok(self.full_grad(x)),
            (Shard::Samples(idx), Objective::Data { .. }) => {
                if idx.is_empty() {
                    return Err(config_err("empty shard"));
                }
                Ok(self.mean_data_grad(idx, x))
            }
        }
    }

    /// The minibatch indices selected by `handle` from `shard`. Batches at least
    /// as large as the shard use the whole shard.
    pub fn minibatch(&self, shard: &Shard, handle: &SampleHandle) -> Result<Vec<usize>> {
        let pool: Vec<usize> = match (shard, self.dataset()) {
            (_, None) => return Ok(Vec::new()),
            (Shard::Population, Some(data)) => (0..data.len()).collect(),
            (Shard::Samples(idx), Some(_)) => idx.clone(),
        };
        if pool.is_empty() {
            return Err(config_err("empty shard"));
        }
        if self.batch_size >= pool.len() {
            return Ok(pool);
        }
        let mut rng = keyed_stream(
            handle.seed,
            Domain::Sampling,
            handle.draw,
            handle.step,
            handle.worker,
        );
        Ok((0..self.batch_size)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect())
    }

    /// `∇F(x; ξ)` for the sample pinned by `handle`.
    pub fn stoch_grad(&self, shard: &Shard, x: &[f64], handle: &SampleHandle) -> Result<DenseVector> {
        match &self.objective {
            Objective::Quadratic {
                spectrum,
                noise_std,
            } => {
                let mut g: DenseVector = spectrum.iter().zip(x).map(|(l, v)| l * v).collect();
                if *noise_std > 0.0 {
                    let scale = noise_std / (self.batch_size as f64).sqrt();
                    let mut rng = keyed_stream(
                        handle.seed,
                        Domain::Sampling,
                        handle.draw,
                        handle.step,
                        handle.worker,
                    );
                    for gi in g.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *gi += scale * z;
                    }
                }
                Ok(g)
            }
            Objective::Data { .. } => {
                let batch = self.minibatch(shard, handle)?;
                Ok(self.mean_data_grad(&batch, x))
            }
        }
    }

    fn mean_data_grad(&self, idx: &[usize], x: &[f64]) -> DenseVector {
        let Objective::Data { loss, data, lambda } = &self.objective else {
            unreachable!("data gradient on a noise-model problem");
        };
        let mut g = DenseVector::zeros(data.dim());
        for &i in idx {
            let row = data.row(i);
            let w = sample_grad_weight(*loss, row, data.target(i), x);
            g.axpy(w, row);
        }
        g.scale(1.0 / idx.len() as f64);
        if *lambda != 0.0 {
            g.axpy(*lambda, x);
        }
        g
    }

    /// Smoothness constant `L` of the mean objective.
    pub fn smoothness_l(&self) -> f64 {
        match &self.objective {
            Objective::Quadratic { spectrum, .. } => spectrum.iter().fold(0.0, |m, &l| m.max(l)),
            Objective::Data { loss, data, lambda } => {
                let top = gram_top_eigenvalue(data);
                match loss {
                    DataLoss::Squared => top,
                    DataLoss::Logistic => top / 4.0 + lambda,
                }
            }
        }
    }

    /// Per-sample smoothness constant `L_F`.
    pub fn smoothness_lf(&self) -> f64 {
        match &self.objective {
            Objective::Quadratic { .. } => self.smoothness_l(),
            Objective::Data { loss, data, lambda } => {
                let top = (0..data.len())
                    .map(|i| dot(data.row(i), data.row(i)))
                    .fold(0.0, f64::max);
                match loss {
                    DataLoss::Squared => top,
                    DataLoss::Logistic => top / 4.0 + lambda,
                }
            }
        }
    }

    /// `(x*, f*)` when available in closed form: the origin for quadratics and
    /// the normal-equation solution for linear regression.
    pub fn minimizer(&self) -> Option<(DenseVector, f64)> {
        match &self.objective {
            Objective::Quadratic { spectrum, .. } => Some((DenseVector::zeros(spectrum.len()), 0.0)),
            Objective::Data {
                loss: DataLoss::Squared,
                data,
                ..
            } => {
                let d = data.dim();
                let n = data.len();
                let a = DMatrix::from_row_slice(n, d, &data.features);
                let y = DVector::from_column_slice(&data.targets);
                let gram = a.transpose() * &a;
                let rhs = a.transpose() * y;
                let sol = gram.cholesky()?.solve(&rhs);
                let x: DenseVector = sol.iter().copied().collect();
                let f = self.loss(&x);
                Some((x, f))
            }
            Objective::Data { .. } => None,
        }
    }

    /// Empirical `E‖∇F(x; ξ) − ∇fᵢ(x)‖²` over `trials` draws.
    pub fn variance_sigma2(&self, shard: &Shard, x: &[f64], trials: usize, seed: u64) -> Result<f64> {
        if trials < 2 {
            return Err(config_err("variance estimate needs at least 2 trials"));
        }
        let mean = self.shard_grad(shard, x)?;
        let mut acc = 0.0;
        for trial in 0..trials {
            let handle = SampleHandle::new(seed, trial as u64, u64::MAX, 0);
            let g = self.stoch_grad(shard, x, &handle)?;
            acc += g.sub(&mean).norm_sq();
        }
        Ok(acc / trials as f64)
    }
}

fn check_data_shape(d: usize, samples: usize) -> Result<()> {
    if d == 0 {
        return Err(config_err("dimension must be >= 1"));
    }
    if samples == 0 {
        return Err(config_err("sample count must be >= 1"));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sample_loss(loss: DataLoss, row: &[f64], y: f64, x: &[f64]) -> f64 {
    let z = dot(row, x);
    match loss {
        DataLoss::Squared => 0.5 * (z - y) * (z - y),
        DataLoss::Logistic => {
            // log(1 + exp(-m)) computed stably
            let m = y * z;
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        }
    }
}

/// Scalar `w` with `∇ℓ(aᵀx; y) = w·a`.
fn sample_grad_weight(loss: DataLoss, row: &[f64], y: f64, x: &[f64]) -> f64 {
    let z = dot(row, x);
    match loss {
        DataLoss::Squared => z - y,
        DataLoss::Logistic => -y * sigmoid(-y * z),
    }
}

/// Largest eigenvalue of `AᵀA/N` by power iteration.
fn gram_top_eigenvalue(data: &Dataset) -> f64 {
    let d = data.dim();
    let n = data.len() as f64;
    let apply = |v: &[f64]| -> DenseVector {
        let mut out = DenseVector::zeros(d);
        for i in 0..data.len() {
            let row = data.row(i);
            out.axpy(dot(row, v), row);
        }
        out.scale(1.0 / n);
        out
    };
    let mut v = DenseVector::filled(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.dot(&v);
        v = w;
        v.scale(1.0 / norm);
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Rayleigh quotient at the converged vector
    apply(&v).dot(&v).max(lambda)
}

fn generate_linreg(d: usize, n: usize, noise: f64, kappa: f64, seed: u64) -> Dataset {
    let mut rng = keyed_stream(seed, Domain::Dataset, 0, 0, 0);
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            let frac = if d > 1 { j as f64 / (d - 1) as f64 } else { 0.0 };
            kappa.powf(-0.5 * frac)
        })
        .collect();
    let planted: DenseVector = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        for s in &scales {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(s * z);
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        targets.push(dot(&features[start..], &planted) + noise * eps);
    }
    Dataset {
        dim: d,
        features,
        targets,
        planted: Some(planted),
    }
}

fn generate_logreg(d: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = keyed_stream(seed, Domain::Dataset, 1, 0, 0);
    let planted: DenseVector = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let row_scale = 1.0 / (d as f64).sqrt();
    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(row_scale * z);
        }
        let p = sigmoid(dot(&features[start..], &planted));
        let u: f64 = rng.random();
        targets.push(if u < p { 1.0 } else { -1.0 });
    }
    Dataset {
        dim: d,
        features,
        targets,
        planted: Some(planted),
    }
}

/// Split the dataset across `n` workers.
///
/// `heterogeneity = 0` gives an iid random split, `1` a contiguous split of the
/// samples sorted by target; values in between blend a random key with the
/// target rank. Shard sizes differ by at most one.
pub fn partition_data(problem: &Problem, n: usize, seed: u64, heterogeneity: f64) -> Result<Vec<Shard>> {
    if n == 0 {
        return Err(config_err("need at least one worker"));
    }
    if !(0.0..=1.0).contains(&heterogeneity) {
        return Err(config_err("heterogeneity must lie in [0, 1]"));
    }
    let Some(data) = problem.dataset() else {
        return Ok(vec![Shard::Population; n]);
    };
    let total = data.len();
    if n > total {
        return Err(config_err(format!(
            "{n} workers but only {total} samples"
        )));
    }
    let mut rng = keyed_stream(seed, Domain::Partition, 0, 0, 0);
    let noise: Vec<f64> = (0..total).map(|_| rng.random()).collect();
    // rank by target, ties broken by the random key
    let mut by_target: Vec<usize> = (0..total).collect();
    by_target.sort_by(|&a, &b| {
        data.target(a)
            .total_cmp(&data.target(b))
            .then(noise[a].total_cmp(&noise[b]))
    });
    let mut rank = vec![0.0; total];
    for (r, &i) in by_target.iter().enumerate() {
        rank[i] = r as f64 / total as f64;
    }
    let mut order: Vec<usize> = (0..total).collect();
    if heterogeneity == 0.0 {
        order.shuffle(&mut rng);
    } else {
        let key: Vec<f64> = (0..total)
            .map(|i| heterogeneity * rank[i] + (1.0 - heterogeneity) * noise[i])
            .collect();
        order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    }
    let base = total / n;
    let extra = total % n;
    let mut shards = Vec::with_capacity(n);
    let mut start = 0;
    for w in 0..n {
        let len = base + usize::from(w < extra);
        shards.push(Shard::Samples(order[start..start + len].to_vec()));
        start += len;
    }
    Ok(shards)
}
