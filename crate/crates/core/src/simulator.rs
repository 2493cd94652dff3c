//! In-process parameter server running the double-compression loop.
//!
//! Step `t ≥ 1`, for every worker `i`:
//!
//! ```text
//! eₜ⁽ⁱ⁾ ← low-pass filter of δₜ₋₁⁽ⁱ⁾, δₜ₋₂⁽ⁱ⁾
//! Δₜ⁽ⁱ⁾ = 𝒜(xₜ; ξₜ⁽ⁱ⁾) + eₜ⁽ⁱ⁾,  δₜ⁽ⁱ⁾ = Δₜ⁽ⁱ⁾ − C[Δₜ⁽ⁱ⁾]
//! ```
//!
//! then on the server `Δₜ = (1/n)Σ C[Δₜ⁽ⁱ⁾] + eₜ`, `δₜ = Δₜ − C[Δₜ]`, and every
//! replica applies `vₜ = (1 − αₜ)vₜ₋₁ + αₜC[Δₜ]`, `xₜ₊₁ = xₜ − γvₜ`.
//!
//! Before the loop `v₀` is the uncompressed mean of `B₀` gradients at `x₀` and
//! `x₁ = x₀ − γv₀`; the run output is `x_T`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compensation::{
    compensate, payload_weights, scheme_coefficients, Coefficients, CompensationState, SchemeKind,
    SchemeSpec,
};
use crate::compression::{Compressor, CompressorSpec};
use crate::error::{config_err, Error, Result};
use crate::estimators::{effective_alpha, eval_a, init_v0, moving_average, AlphaSchedule, EstimatorKind, GradientOracle};
use crate::oracle::GhostTracker;
use crate::problems::{partition_data, Problem, ProblemSpec, SampleHandle, Shard};
use crate::rng::{keyed_stream, Domain};
use crate::vector::DenseVector;

/// Iterates beyond this norm are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Workers and server both compress.
    #[default]
    DoubleCompression,
    /// Only the worker→server messages are compressed.
    SingleRound,
    /// `n = 1`, one compression per step.
    SingleWorker,
}

/// How the compensation enters the estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formulation {
    /// Filtered error added to `𝒜` before compression.
    #[default]
    Folded,
    /// Reference `(η₁, η₂, c₁, c₂)` of the scheme, applied at the `v` level.
    Unified,
    /// Fixed user-supplied coefficients at the `v` level.
    Explicit { coefficients: Coefficients },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPoint {
    Zeros,
    #[default]
    Gaussian,
    Fixed {
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFlags {
    /// Track the ghost sequence online and report `‖xₜ − x̂ₜ‖`.
    pub ghost: bool,
    /// Keep every `xₜ`, `vₜ`, `b̄ₜ`, `δ̄ₜ`, `ēₜ`.
    pub full: bool,
    /// Re-evaluate `𝒜` at the ghost iterates (doubles gradient work).
    pub u_hat: bool,
}

fn default_workers() -> usize {
    1
}
fn default_b0() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub steps: u64,
    pub gamma: f64,
    #[serde(default = "default_b0")]
    pub b0: usize,
    pub estimator: EstimatorKind,
    pub schedule: AlphaSchedule,
    /// `None` runs uncompressed.
    #[serde(default)]
    pub worker_compressor: Option<CompressorSpec>,
    #[serde(default)]
    pub server_compressor: Option<CompressorSpec>,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub init: InitPoint,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record: RecordFlags,
    #[serde(default)]
    pub parallel: bool,
}

impl RunConfig {
    /// Uncompressed baseline on `problem`; compressors and scheme are set separately.
    pub fn new(problem: ProblemSpec, estimator: EstimatorKind, schedule: AlphaSchedule, gamma: f64, steps: u64) -> Self {
        Self {
            problem,
            workers: 1,
            steps,
            gamma,
            b0: 1,
            estimator,
            schedule,
            worker_compressor: None,
            server_compressor: None,
            scheme: SchemeSpec::new(SchemeKind::NoCompensation, 1.0),
            topology: Topology::DoubleCompression,
            formulation: Formulation::Folded,
            heterogeneity: 0.0,
            init: InitPoint::Gaussian,
            seed: 0,
            record: RecordFlags::default(),
            parallel: false,
        }
    }

    /// Same compressor on workers and server.
    pub fn with_compressor(mut self, spec: CompressorSpec) -> Self {
        self.worker_compressor = Some(spec);
        self.server_compressor = Some(spec);
        self
    }

    pub fn with_scheme(mut self, kind: SchemeKind, beta: f64) -> Self {
        self.scheme = SchemeSpec::new(kind, beta);
        self
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_compressed(&self) -> bool {
        self.worker_compressor.is_some()
    }

    fn server_compresses(&self) -> bool {
        self.topology == Topology::DoubleCompression && self.server_compressor.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(config_err("workers must be >= 1"));
        }
        if self.steps == 0 {
            return Err(config_err("steps must be >= 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(config_err(format!("gamma = {} must be finite and >= 0", self.gamma)));
        }
        if self.b0 == 0 {
            return Err(config_err("b0 must be >= 1"));
        }
        if self.topology == Topology::SingleWorker && self.workers != 1 {
            return Err(config_err("single_worker topology requires workers = 1"));
        }
        self.schedule.validate()?;
        self.scheme.validate()?;
        let d = self.problem.dim();
        for spec in [&self.worker_compressor, &self.server_compressor].into_iter().flatten() {
            spec.validate(d)?;
        }
        if let Formulation::Explicit { coefficients } = self.formulation {
            if !(coefficients.eta1 > 0.0) {
                return Err(config_err("explicit eta1 must be positive"));
            }
        }
        if let InitPoint::Fixed { values } = &self.init {
            if values.len() != d {
                return Err(config_err(format!("init point has {} entries, expected {d}", values.len())));
            }
        }
        Ok(())
    }

    /// Coefficients used at step `t` by the v-level formulations.
    pub fn unified_coefficients(&self, alpha_t: f64) -> Option<Coefficients> {
        match self.formulation {
            Formulation::Folded => None,
            Formulation::Unified => Some(scheme_coefficients(self.scheme.kind, alpha_t)),
            Formulation::Explicit { coefficients } => Some(coefficients),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState {
    pub id: usize,
    pub comp: CompensationState,
    pub shard: Shard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    pub comp: CompensationState,
}

/// Metrics for iterate `xₜ` and the estimator `vₜ` built from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub alpha: f64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub v_norm: f64,
    /// Largest worker residual norm at this step.
    pub worker_delta_norm: f64,
    pub server_delta_norm: f64,
    pub ghost_residual_norm: Option<f64>,
    pub cum_bits: u64,
}

/// Full per-step history, indexed by `t`. Entry 0 of `b_bar`, `delta_bar`,
/// `e_bar` is zero (no compressed step has run yet).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Recording {
    pub x: Vec<DenseVector>,
    pub v: Vec<DenseVector>,
    pub alpha: Vec<f64>,
    pub b_bar: Vec<DenseVector>,
    pub delta_bar: Vec<DenseVector>,
    pub e_bar: Vec<DenseVector>,
    /// Ghost iterates `x̂ₜ` (only with ghost recording).
    pub x_hat: Vec<DenseVector>,
    /// `ûₜ` (only with û recording).
    pub u_hat: Vec<DenseVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub config: RunConfig,
    pub records: Vec<StepRecord>,
    pub final_x: DenseVector,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub final_ghost_residual_norm: Option<f64>,
    /// Number of model updates actually applied.
    pub t_effective: u64,
    pub recording: Option<Recording>,
}

impl RunTrace {
    /// `ε̂` over every worker and server residual of the run.
    pub fn epsilon_hat(&self) -> Result<f64> {
        crate::compression::measured_epsilon(
            self.records
                .iter()
                .flat_map(|r| [r.worker_delta_norm, r.server_delta_norm]),
        )
    }

    /// `‖xₜ − x̂ₜ‖` for `t = 0..=T` when ghost tracking was on.
    pub fn ghost_residual_norms(&self) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.ghost_residual_norm)
            .collect::<Option<_>>()?;
        out.push(self.final_ghost_residual_norm?);
        Some(out)
    }
}

struct WorkerOutput {
    a: DenseVector,
    a_hat: Option<DenseVector>,
    message: DenseVector,
    delta_norm: f64,
}

/// Mean in worker-index order; a single message is passed through untouched.
pub fn average(messages: &[&[f64]]) -> DenseVector {
    let mut acc = DenseVector::from(messages[0]);
    for m in &messages[1..] {
        acc.axpy(1.0, m);
    }
    if messages.len() > 1 {
        acc.scale(1.0 / messages.len() as f64);
    }
    acc
}

/// `w_a·a + w_v·v + w_e·e`, skipping zero weights and zero error entries.
fn payload(a: &[f64], v: &[f64], e: &[f64], w_a: f64, w_v: f64, w_e: f64) -> DenseVector {
    let mut p = DenseVector::from(a);
    p.scale(w_a);
    p.axpy(w_v, v);
    if w_e == 1.0 {
        compensate(&p, e)
    } else {
        p.axpy(w_e, e);
        p
    }
}

fn check_finite(x: &[f64], v: &[f64]) -> Option<String> {
    if x.iter().chain(v).any(|c| !c.is_finite()) {
        return Some("non-finite iterate".into());
    }
    let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > DIVERGENCE_NORM {
        return Some(format!("iterate norm {norm:e} exceeds {DIVERGENCE_NORM:e}"));
    }
    None
}

/// One simulated run: the model replica, estimator and per-node buffers.
pub struct Simulator<'p> {
    config: RunConfig,
    problem: &'p Problem,
    workers: Vec<WorkerState>,
    server: ServerState,
    worker_comp: Option<Compressor>,
    server_comp: Option<Compressor>,
    x: DenseVector,
    x_prev: DenseVector,
    v: DenseVector,
    t: u64,
    cum_bits: u64,
    ghost: Option<GhostTracker>,
    records: Vec<StepRecord>,
    recording: Option<Recording>,
}

impl<'p> Simulator<'p> {
    /// Initialize state: shards, `x₀`, `v₀`, zero buffers, record for `t = 0`.
    pub fn new(config: &RunConfig, problem: &'p Problem) -> Result<Self> {
        config.validate()?;
        if problem.dim() != config.problem.dim() {
            return Err(config_err("problem dimension does not match the config"));
        }
        let d = problem.dim();
        let n = config.workers;
        let shards = partition_data(problem, n, config.seed, config.heterogeneity)?;
        let workers: Vec<WorkerState> = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| WorkerState {
                id,
                comp: CompensationState::zeros(d),
                shard,
            })
            .collect();
        let keyed = |spec: &CompressorSpec| Compressor::new(spec.with_seed(spec.seed ^ config.seed), d);
        let worker_comp = config.worker_compressor.as_ref().map(keyed).transpose()?;
        let server_comp = if config.server_compresses() {
            config.server_compressor.as_ref().map(keyed).transpose()?
        } else {
            None
        };

        let x0 = initial_point(config, d);
        let v0 = {
            let oracles: Vec<_> = workers
                .iter()
                .map(|w| move |x: &[f64], h: &SampleHandle| problem.stoch_grad(&w.shard, x, h))
                .collect();
            let refs: Vec<&dyn GradientOracle> = oracles.iter().map(|o| o as &dyn GradientOracle).collect();
            init_v0(&x0, config.b0, &refs, config.seed)?
        };
        let alpha0 = effective_alpha(config.estimator, &config.schedule, 0);
        let ghost = (config.record.ghost || config.record.u_hat)
            .then(|| GhostTracker::new(&x0, &v0, config.record.u_hat));
        let recording = config.record.full.then(|| Recording {
            x: vec![x0.clone()],
            v: vec![v0.clone()],
            alpha: vec![alpha0],
            b_bar: vec![DenseVector::zeros(d)],
            delta_bar: vec![DenseVector::zeros(d)],
            e_bar: vec![DenseVector::zeros(d)],
            x_hat: Vec::new(),
            u_hat: Vec::new(),
        });

        let mut sim = Self {
            config: config.clone(),
            problem,
            workers,
            server: ServerState {
                comp: CompensationState::zeros(d),
            },
            worker_comp,
            server_comp,
            x_prev: x0.clone(),
            x: x0,
            v: v0,
            t: 0,
            cum_bits: 0,
            ghost,
            records: Vec::new(),
            recording,
        };
        sim.push_record(alpha0, 0.0, 0.0);
        if let (Some(rec), Some(g)) = (sim.recording.as_mut(), &sim.ghost) {
            rec.x_hat.push(g.x_hat.clone());
            if let Some(u) = &g.u_hat {
                rec.u_hat.push(u.clone());
            }
        }
        sim.advance_model()?;
        sim.record_iterate();
        Ok(sim)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn v(&self) -> &DenseVector {
        &self.v
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    /// `xₜ₊₁ = xₜ − γvₜ` (and the ghost counterpart), then divergence check.
    fn advance_model(&mut self) -> Result<()> {
        self.x_prev = self.x.clone();
        self.x.axpy(-self.config.gamma, &self.v);
        if let Some(g) = self.ghost.as_mut() {
            g.advance(self.config.gamma);
        }
        let step = self.t;
        self.t += 1;
        if let Some(reason) = check_finite(&self.x, &self.v) {
            return Err(Error::Divergence {
                step,
                reason,
                trace: Box::new(self.snapshot()),
            });
        }
        Ok(())
    }

    /// Append `xₜ` (and `x̂ₜ`) to the full recording after a model update.
    fn record_iterate(&mut self) {
        if let Some(rec) = self.recording.as_mut() {
            rec.x.push(self.x.clone());
            if let Some(g) = &self.ghost {
                rec.x_hat.push(g.x_hat.clone());
            }
        }
    }

    fn push_record(&mut self, alpha: f64, worker_delta_norm: f64, server_delta_norm: f64) {
        let ghost_residual_norm = self.ghost.as_ref().map(|g| self.x.sub(&g.x_hat).norm());
        self.records.push(StepRecord {
            t: self.t,
            alpha,
            loss: self.problem.loss(&self.x),
            grad_norm_sq: self.problem.full_grad(&self.x).norm_sq(),
            v_norm: self.v.norm(),
            worker_delta_norm,
            server_delta_norm,
            ghost_residual_norm,
            cum_bits: self.cum_bits,
        });
    }

    /// Execute step `t = self.t()`: computes `vₜ` from `xₜ` and moves to `xₜ₊₁`.
    pub fn run_step(&mut self) -> Result<()> {
        let t = self.t;
        let cfg = &self.config;
        let kind = cfg.estimator;
        let ti = t as i64;
        let alpha_t = effective_alpha(kind, &cfg.schedule, ti);
        let alpha_1 = effective_alpha(kind, &cfg.schedule, ti - 1);
        let alpha_2 = effective_alpha(kind, &cfg.schedule, ti - 2);
        let coeffs = cfg.unified_coefficients(alpha_t);
        let weights = coeffs.map(|c| payload_weights(&c, alpha_t)).transpose()?;
        let scheme = cfg.scheme;
        let problem = self.problem;
        let (x, x_prev, v) = (&self.x, &self.x_prev, &self.v);
        let ghost_points = self
            .ghost
            .as_ref()
            .filter(|g| g.u_hat.is_some())
            .map(|g| (g.x_hat.clone(), g.x_hat_prev.clone()));
        let worker_comp = self.worker_comp;
        let seed = cfg.seed;

        let work = |w: &mut WorkerState| -> Result<WorkerOutput> {
            let handle = SampleHandle::new(seed, t, w.id as u64, 0);
            let shard = &w.shard;
            let oracle = |p: &[f64], h: &SampleHandle| problem.stoch_grad(shard, p, h);
            let a = eval_a(kind, x, x_prev, &handle, alpha_t, &oracle)?;
            let a_hat = match &ghost_points {
                Some((xh, xh_prev)) => Some(eval_a(kind, xh, xh_prev, &handle, alpha_t, &oracle)?),
                None => None,
            };
            let Some(comp) = worker_comp else {
                return Ok(WorkerOutput {
                    message: a.clone(),
                    a,
                    a_hat,
                    delta_norm: 0.0,
                });
            };
            let delta = match weights {
                None => {
                    if scheme.kind == SchemeKind::NoCompensation {
                        a.clone()
                    } else {
                        w.comp
                            .filter_update(scheme.beta, alpha_t, alpha_1, alpha_2, scheme.kind)?;
                        compensate(&a, &w.comp.e)
                    }
                }
                Some(pw) => {
                    w.comp.unified_filter_update(scheme.beta, coeffs.as_ref().unwrap());
                    payload(&a, v, &w.comp.e, pw.w_a, pw.w_v, pw.w_e)
                }
            };
            let r = comp.compress(&delta, t, w.id as u64)?;
            let delta_norm = r.residual.norm();
            w.comp.shift_deltas(r.residual);
            Ok(WorkerOutput {
                a,
                a_hat,
                message: r.compressed,
                delta_norm,
            })
        };
        let outputs: Vec<WorkerOutput> = if cfg.parallel {
            self.workers.par_iter_mut().map(work).collect::<Result<_>>()?
        } else {
            self.workers.iter_mut().map(work).collect::<Result<_>>()?
        };

        let n = outputs.len();
        let msgs: Vec<&[f64]> = outputs.iter().map(|o| o.message.as_slice()).collect();
        let aggregate = average(&msgs);
        let d = aggregate.dim();
        let mut server_delta_norm = 0.0;
        let broadcast = match self.server_comp {
            None => aggregate,
            Some(comp) => {
                let server = &mut self.server.comp;
                let delta = match (weights, coeffs) {
                    (Some(pw), Some(c)) => {
                        server.unified_filter_update(scheme.beta, &c);
                        payload(&aggregate, &aggregate, &server.e, 1.0, 0.0, pw.w_e)
                    }
                    _ if scheme.kind == SchemeKind::NoCompensation => aggregate,
                    _ => {
                        server.filter_update(scheme.beta, alpha_t, alpha_1, alpha_2, scheme.kind)?;
                        compensate(&aggregate, &server.e)
                    }
                };
                let r = comp.compress(&delta, t, n as u64)?;
                server_delta_norm = r.residual.norm();
                server.shift_deltas(r.residual);
                r.compressed
            }
        };

        let mix = match coeffs {
            Some(c) if worker_comp.is_some() => c.eta1,
            _ => alpha_t,
        };
        self.v = moving_average(&self.v, &broadcast, mix);

        let per_message = |c: &Option<Compressor>| c.map_or(64 * d as u64, |c| c.bits());
        self.cum_bits += n as u64 * per_message(&self.worker_comp);
        if self.config.topology != Topology::SingleWorker {
            self.cum_bits += n as u64 * per_message(&self.server_comp);
        }

        let needs_b_bar = self.ghost.is_some() || self.recording.is_some();
        let b_bar = needs_b_bar.then(|| {
            let a: Vec<&[f64]> = outputs.iter().map(|o| o.a.as_slice()).collect();
            average(&a)
        });
        if let Some(g) = self.ghost.as_mut() {
            let a_hat = g.u_hat.is_some().then(|| {
                let a: Vec<&[f64]> = outputs.iter().map(|o| o.a_hat.as_ref().unwrap().as_slice()).collect();
                average(&a)
            });
            g.update(b_bar.as_ref().unwrap(), a_hat.as_ref(), alpha_t);
            if let (Some(rec), Some(u)) = (self.recording.as_mut(), &g.u_hat) {
                rec.u_hat.push(u.clone());
            }
        }
        if let Some(rec) = self.recording.as_mut() {
            let worker_deltas: Vec<&[f64]> = self.workers.iter().map(|w| w.comp.delta_1.as_slice()).collect();
            let worker_e: Vec<&[f64]> = self.workers.iter().map(|w| w.comp.e.as_slice()).collect();
            let mut delta_bar = average(&worker_deltas);
            let mut e_bar = average(&worker_e);
            if self.server_comp.is_some() {
                delta_bar.axpy(1.0, &self.server.comp.delta_1);
                e_bar.axpy(1.0, &self.server.comp.e);
            }
            rec.alpha.push(alpha_t);
            rec.v.push(self.v.clone());
            rec.b_bar.push(b_bar.unwrap());
            rec.delta_bar.push(delta_bar);
            rec.e_bar.push(e_bar);
        }

        let worker_delta_norm = outputs.iter().fold(0.0f64, |m, o| m.max(o.delta_norm));
        self.push_record(alpha_t, worker_delta_norm, server_delta_norm);
        self.advance_model()?;
        self.record_iterate();
        Ok(())
    }

    fn snapshot(&self) -> RunTrace {
        let mut recording = self.recording.clone();
        if let Some(rec) = recording.as_mut() {
            if rec.x.len() < rec.v.len() + 1 {
                rec.x.push(self.x.clone());
            }
        }
        RunTrace {
            config: self.config.clone(),
            records: self.records.clone(),
            final_loss: self.problem.loss(&self.x),
            final_grad_norm_sq: self.problem.full_grad(&self.x).norm_sq(),
            final_ghost_residual_norm: self.ghost.as_ref().map(|g| self.x.sub(&g.x_hat).norm()),
            final_x: self.x.clone(),
            t_effective: self.t,
            recording,
        }
    }

    /// Run the remaining steps up to `T` and return the trace.
    pub fn finish(mut self) -> Result<RunTrace> {
        while self.t < self.config.steps {
            self.run_step()?;
        }
        Ok(self.snapshot())
    }
}

fn initial_point(config: &RunConfig, d: usize) -> DenseVector {
    use rand_distr::{Distribution, StandardNormal};
    match &config.init {
        InitPoint::Zeros => DenseVector::zeros(d),
        InitPoint::Fixed { values } => DenseVector::from(values.as_slice()),
        InitPoint::Gaussian => {
            let mut rng = keyed_stream(config.seed, Domain::InitPoint, 0, 0, 0);
            (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    }
}

/// Build the problem and run the whole configuration.
pub fn run(config: &RunConfig) -> Result<RunTrace> {
    let problem = Problem::build(&config.problem)?;
    run_on(config, &problem)
}

/// Run on an already built problem (lets several variants share one dataset).
pub fn run_on(config: &RunConfig, problem: &Problem) -> Result<RunTrace> {
    Simulator::new(config, problem)?.finish()
}
