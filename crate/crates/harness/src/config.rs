//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "linreg-onebit"
//!
//! [base]
//! steps = 10000
//! gamma = 0.01
//! workers = 8
//! estimator = "storm"
//! schedule = { kind = "inverse_t" }
//! worker_compressor = { kind = "one_bit" }
//! server_compressor = { kind = "one_bit" }
//! scheme = { kind = "error_compensated_x", beta = 0.3 }
//! problem = { kind = "lin_reg", d = 20, samples = 512 }
//!
//! [[variants]]
//! label = "uncompressed"
//! uncompressed = true
//! ```

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context};
use ecx_core::{
    AlphaSchedule, CompressorSpec, EstimatorKind, Formulation, RunConfig, SchemeKind, SchemeSpec,
};
use serde::{Deserialize, Serialize};

/// Learning-rate grid searched before a comparison.
pub const GAMMA_GRID: [f64; 3] = [0.5, 0.1, 0.001];
/// `c₀` grid for `αₜ = 1/(1 + c₀t)`.
pub const C0_GRID: [f64; 3] = [0.1, 0.05, 0.001];
pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_C0: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub base: RunConfig,
    #[serde(default = "standard_variants")]
    pub variants: Vec<Variant>,
    /// Grid-search `γ` on the first uncompressed variant and reuse it for all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<Tuning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// Overrides applied to the shared base run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    /// Drop both compressors.
    #[serde(default)]
    pub uncompressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulation: Option<Formulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AlphaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compressor: Option<CompressorSpec>,
}

impl Variant {
    pub fn scheme(label: &str, scheme: SchemeKind) -> Self {
        Self {
            label: label.into(),
            scheme: Some(scheme),
            ..Self::default()
        }
    }

    pub fn uncompressed(label: &str) -> Self {
        Self {
            label: label.into(),
            uncompressed: true,
            ..Self::default()
        }
    }

    /// The base run with this variant's overrides applied.
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        if self.uncompressed {
            cfg.worker_compressor = None;
            cfg.server_compressor = None;
        }
        if let Some(c) = self.compressor {
            cfg.worker_compressor = Some(c);
            cfg.server_compressor = Some(c);
        }
        if let Some(kind) = self.scheme {
            cfg.scheme = SchemeSpec::new(kind, cfg.scheme.beta);
        }
        if let Some(beta) = self.beta {
            cfg.scheme.beta = beta;
        }
        if let Some(f) = self.formulation {
            cfg.formulation = f;
        }
        if let Some(e) = self.estimator {
            cfg.estimator = e;
        }
        if let Some(s) = self.schedule {
            cfg.schedule = s;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        cfg
    }
}

/// Uncompressed, no compensation, single compensation, ErrorCompensatedX.
pub fn standard_variants() -> Vec<Variant> {
    vec![
        Variant::uncompressed("uncompressed"),
        Variant::scheme("no_compensation", SchemeKind::NoCompensation),
        Variant::scheme("single", SchemeKind::SingleCompensation),
        Variant::scheme("ecx", SchemeKind::ErrorCompensatedX),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    #[serde(default = "default_gamma_grid")]
    pub gammas: Vec<f64>,
}

fn default_gamma_grid() -> Vec<f64> {
    GAMMA_GRID.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default = "default_gamma_grid")]
    pub gammas: Vec<f64>,
    /// Constant `α` values; mutually exclusive with `c0s`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c0s: Vec<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.variants.is_empty() {
            bail!("at least one variant is required");
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.label.as_str()) {
                bail!("duplicate variant label {:?}", v.label);
            }
            if v.label.is_empty() || v.label.contains(['/', '\\']) {
                bail!("variant label {:?} is not a valid file stem", v.label);
            }
            v.apply(&self.base)
                .validate()
                .with_context(|| format!("variant {:?}", v.label))?;
        }
        if let Some(t) = &self.tuning {
            if t.gammas.is_empty() || t.gammas.iter().any(|g| !(*g > 0.0)) {
                bail!("tuning.gammas must be a non-empty list of positive values");
            }
        }
        if let Some(s) = &self.sweep {
            if !s.alphas.is_empty() && !s.c0s.is_empty() {
                bail!("sweep: give either alphas or c0s, not both");
            }
            if s.gammas.is_empty() {
                bail!("sweep.gammas must not be empty");
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base.seed = seed;
        self
    }

    /// Default linear-regression comparison: STORM, `αₜ = 1/t`, OneBit, batch 1, eight workers.
    pub fn default_linreg() -> Self {
        let mut base = RunConfig::new(
            ecx_core::ProblemSpec::default_linreg(),
            EstimatorKind::Storm,
            AlphaSchedule::InverseT,
            DEFAULT_GAMMA,
            10_000,
        )
        .with_compressor(CompressorSpec::one_bit())
        .with_scheme(SchemeKind::ErrorCompensatedX, DEFAULT_BETA)
        .with_workers(8)
        .with_seed(1);
        base.formulation = Formulation::Unified;
        Self {
            name: "linreg".into(),
            base,
            variants: standard_variants(),
            tuning: None,
            sweep: None,
        }
    }
}
