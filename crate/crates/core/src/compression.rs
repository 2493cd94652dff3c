//! Compression operators `C[x]` and their exact residuals `δ = x − C[x]`.
//!
//! All stochastic operators draw from a keyed stream indexed by
//! `(seed, step, node)`, so a call is a pure function of its arguments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{keyed_stream, Domain};
use crate::vector::DenseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompressorKind {
    /// Scaled sign: `(‖x‖₁/d)·sign(x)` with `sign(0) = +1`.
    OneBit,
    /// Keep the `k` largest magnitudes (ties go to the lower index).
    TopK { k: usize },
    /// Keep `k` uniformly chosen coordinates, optionally rescaled by `d/k`.
    RandK { k: usize, rescale: bool },
    /// Unbiased stochastic rounding onto `levels` uniform levels of `[0, ‖x‖∞]`.
    StochQuant { levels: u32 },
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressorSpec {
    #[serde(flatten)]
    pub kind: CompressorKind,
    #[serde(default)]
    pub seed: u64,
}

impl CompressorSpec {
    pub fn new(kind: CompressorKind) -> Self {
        Self { kind, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn identity() -> Self {
        Self::new(CompressorKind::Identity)
    }

    pub fn one_bit() -> Self {
        Self::new(CompressorKind::OneBit)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.kind {
            CompressorKind::TopK { k } | CompressorKind::RandK { k, .. } => {
                if k == 0 || k > dim {
                    return Err(config_err(format!(
                        "compressor k = {k} must satisfy 1 <= k <= d = {dim}"
                    )));
                }
            }
            CompressorKind::StochQuant { levels: 0 } => {
                return Err(config_err("stochastic quantizer needs levels >= 1"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.kind == CompressorKind::Identity
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self.kind,
            CompressorKind::RandK { .. } | CompressorKind::StochQuant { .. }
        )
    }

    /// Bits needed to transmit one compressed `dim`-vector.
    pub fn bits(&self, dim: usize) -> u64 {
        let d = dim as u64;
        match self.kind {
            CompressorKind::OneBit => d + 64,
            CompressorKind::TopK { k } | CompressorKind::RandK { k, .. } => {
                k as u64 * (64 + ceil_log2(d))
            }
            CompressorKind::StochQuant { levels } => d * ceil_log2(2 * levels as u64 + 1) + 64,
            CompressorKind::Identity => 64 * d,
        }
    }
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        (64 - (x - 1).leading_zeros()) as u64
    }
}

/// The pair `(C[x], x − C[x])`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionResult {
    pub compressed: DenseVector,
    pub residual: DenseVector,
}

impl CompressionResult {
    fn from_compressed(x: &[f64], compressed: DenseVector) -> Self {
        let residual = x.iter().zip(compressed.iter()).map(|(a, c)| a - c).collect();
        Self {
            compressed,
            residual,
        }
    }
}

/// A compressor bound to a fixed run dimension.
#[derive(Clone, Copy, Debug)]
pub struct Compressor {
    spec: CompressorSpec,
    dim: usize,
}

impl Compressor {
    pub fn new(spec: CompressorSpec, dim: usize) -> Result<Self> {
        spec.validate(dim)?;
        Ok(Self { spec, dim })
    }

    pub fn spec(&self) -> &CompressorSpec {
        &self.spec
    }

    pub fn bits(&self) -> u64 {
        self.spec.bits(self.dim)
    }

    pub fn compress(&self, x: &[f64], step: u64, node: u64) -> Result<CompressionResult> {
        if x.len() != self.dim {
            return Err(config_err(format!(
                "dimension mismatch: compressor built for d = {}, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(apply(x, &self.spec, step, node))
    }
}

/// Compress `x` with `spec`. Randomized kinds are keyed by `(spec.seed, step, node)`.
pub fn compress(x: &[f64], spec: &CompressorSpec, step: u64, node: u64) -> Result<CompressionResult> {
    Compressor::new(*spec, x.len())?.compress(x, step, node)
}

fn apply(x: &[f64], spec: &CompressorSpec, step: u64, node: u64) -> CompressionResult {
    let d = x.len();
    match spec.kind {
        CompressorKind::Identity => CompressionResult {
            compressed: DenseVector::from(x),
            residual: DenseVector::zeros(d),
        },
        CompressorKind::OneBit => {
            let scale = x.iter().map(|v| v.abs()).sum::<f64>() / d as f64;
            let compressed = x
                .iter()
                .map(|&v| if v >= 0.0 { scale } else { -scale })
                .collect();
            CompressionResult::from_compressed(x, compressed)
        }
        CompressorKind::TopK { k } => {
            let mut order: Vec<usize> = (0..d).collect();
            // stable sort keeps the lower index first among equal magnitudes
            order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
            sparse_result(x, &order[..k], 1.0)
        }
        CompressorKind::RandK { k, rescale } => {
            let mut rng = keyed_stream(spec.seed, Domain::Compression, 0, step, node);
            let mut idx: Vec<usize> = (0..d).collect();
            for i in 0..k {
                let j = rng.random_range(i..d);
                idx.swap(i, j);
            }
            let scale = if rescale { d as f64 / k as f64 } else { 1.0 };
            sparse_result(x, &idx[..k], scale)
        }
        CompressorKind::StochQuant { levels } => {
            let top = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if top == 0.0 || !top.is_finite() {
                let compressed = if top == 0.0 {
                    DenseVector::zeros(d)
                } else {
                    x.iter().map(|_| f64::NAN).collect()
                };
                return CompressionResult::from_compressed(x, compressed);
            }
            let s = levels as f64;
            let mut rng = keyed_stream(spec.seed, Domain::Compression, 0, step, node);
            let compressed = x
                .iter()
                .map(|&v| {
                    let r = v.abs() / top * s;
                    let lower = r.floor();
                    let u: f64 = rng.random();
                    let level = if u < r - lower { lower + 1.0 } else { lower };
                    let mag = top * level / s;
                    if v < 0.0 {
                        -mag
                    } else {
                        mag
                    }
                })
                .collect();
            CompressionResult::from_compressed(x, compressed)
        }
    }
}

fn sparse_result(x: &[f64], keep: &[usize], scale: f64) -> CompressionResult {
    let mut compressed = DenseVector::zeros(x.len());
    let mut residual = DenseVector::from(x);
    for &i in keep {
        if scale == 1.0 {
            compressed[i] = x[i];
            residual[i] = 0.0;
        } else {
            compressed[i] = x[i] * scale;
            residual[i] = x[i] - compressed[i];
        }
    }
    CompressionResult {
        compressed,
        residual,
    }
}

/// Empirical residual bound `ε̂ = √2 · sup ‖δ‖`, so every recorded `‖δ‖² ≤ ε̂²/2`.
pub fn measured_epsilon<I: IntoIterator<Item = f64>>(residual_norms: I) -> Result<f64> {
    let mut sup: Option<f64> = None;
    for n in residual_norms {
        sup = Some(sup.map_or(n, |s: f64| s.max(n)));
    }
    sup.map(|s| s * std::f64::consts::SQRT_2)
        .ok_or(Error::EmptyInput("no residual norms recorded"))
}
