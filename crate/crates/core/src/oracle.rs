//! Ghost sequence and closed-form residual checks.
//!
//! The ghost run replays the compressed run's `𝒜` values without compression:
//!
//! ```text
//! u₀ = v₀,  uₜ = (1 − αₜ)uₜ₋₁ + αₜ·b̄ₜ,   b̄ₜ = (1/n)Σᵢ 𝒜(xₜ; ξₜ⁽ⁱ⁾)
//! x̂₀ = x₀,  x̂ₜ₊₁ = x̂ₜ − γuₜ
//! ```
//!
//! With constant `α`, `β = 1` and `q = 1 − α`, the gap to the compressed run is
//! `xₜ − x̂ₜ = −γ·Θ(t − 1)` where
//!
//! ```text
//! Θ(τ) = −(η₁/α) Σ_{s≤τ}   (1 − q^{τ−s+1}) δ̄ₛ
//!        +(η₂c₁/α) Σ_{s≤τ−1} (1 − q^{τ−s})   δ̄ₛ
//!        ∓(η₂c₂/α) Σ_{s≤τ−2} (1 − q^{τ−s−1}) δ̄ₛ
//! ```
//!
//! and `δ̄ₛ` is the server residual plus the mean worker residual at step `s`.
//! The sign of the last term is resolved against the simulation.

use serde::{Deserialize, Serialize};

use crate::compensation::{folded_coefficients, scheme_coefficients, Coefficients, SchemeKind};
use crate::error::{Error, Result};
use crate::estimators::moving_average;
use crate::problems::Problem;
use crate::simulator::{Formulation, Recording, RunTrace};
use crate::vector::DenseVector;

/// Online ghost state, advanced in lockstep with the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct GhostTracker {
    pub u: DenseVector,
    pub x_hat: DenseVector,
    pub x_hat_prev: DenseVector,
    /// `ûₜ`, driven by `𝒜` re-evaluated at the ghost iterates.
    pub u_hat: Option<DenseVector>,
}

impl GhostTracker {
    pub fn new(x0: &DenseVector, v0: &DenseVector, track_u_hat: bool) -> Self {
        Self {
            u: v0.clone(),
            x_hat: x0.clone(),
            x_hat_prev: x0.clone(),
            u_hat: track_u_hat.then(|| v0.clone()),
        }
    }

    /// `uₜ` (and `ûₜ`) from this step's averaged `𝒜` values.
    pub fn update(&mut self, b_bar: &[f64], a_hat: Option<&DenseVector>, alpha_t: f64) {
        self.u = moving_average(&self.u, b_bar, alpha_t);
        if let (Some(u_hat), Some(a)) = (self.u_hat.as_mut(), a_hat) {
            *u_hat = moving_average(u_hat, a, alpha_t);
        }
    }

    /// `x̂ₜ₊₁ = x̂ₜ − γuₜ`.
    pub fn advance(&mut self, gamma: f64) {
        self.x_hat_prev = self.x_hat.clone();
        self.x_hat.axpy(-gamma, &self.u);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GhostTrace {
    /// `u₀ … u_{T−1}`.
    pub u: Vec<DenseVector>,
    /// `x̂₀ … x̂_T`.
    pub x_hat: Vec<DenseVector>,
    /// The recorded `b̄ₜ` that drove the ghost.
    pub b_bar: Vec<DenseVector>,
    pub delta_bar: Vec<DenseVector>,
}

impl GhostTrace {
    /// `xₜ − x̂ₜ` for every recorded `t`.
    pub fn residuals(&self, recording: &Recording) -> Vec<DenseVector> {
        recording
            .x
            .iter()
            .zip(&self.x_hat)
            .map(|(x, xh)| x.sub(xh))
            .collect()
    }
}

fn recording_of(trace: &RunTrace) -> Result<&Recording> {
    trace
        .recording
        .as_ref()
        .ok_or(Error::MissingRecording("run was not recorded (enable record.full)"))
}

/// Replay the ghost sequence from a fully recorded run.
pub fn ghost_run(trace: &RunTrace) -> Result<GhostTrace> {
    let rec = recording_of(trace)?;
    let gamma = trace.config.gamma;
    let mut g = GhostTracker::new(&rec.x[0], &rec.v[0], false);
    let mut u = vec![g.u.clone()];
    let mut x_hat = vec![g.x_hat.clone()];
    g.advance(gamma);
    x_hat.push(g.x_hat.clone());
    for t in 1..rec.v.len() {
        g.update(&rec.b_bar[t], None, rec.alpha[t]);
        u.push(g.u.clone());
        g.advance(gamma);
        x_hat.push(g.x_hat.clone());
    }
    x_hat.truncate(rec.x.len());
    Ok(GhostTrace {
        u,
        x_hat,
        b_bar: rec.b_bar.clone(),
        delta_bar: rec.delta_bar.clone(),
    })
}

/// Sign applied to the `c₂` term of the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C2Sign {
    Minus,
    Plus,
}

impl C2Sign {
    fn factor(self) -> f64 {
        match self {
            C2Sign::Minus => -1.0,
            C2Sign::Plus => 1.0,
        }
    }
}

/// Which sign(s) reproduced the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignResolution {
    Minus,
    Plus,
    /// `c₂ = 0`, or every residual vanished: the sign is not identifiable.
    Either,
}

/// Closed-form `xₜ − x̂ₜ` for constant `α`, `β = 1`.
pub fn residual_closed_form(
    delta_bar: &[DenseVector],
    coeffs: &Coefficients,
    alpha: f64,
    gamma: f64,
    t: usize,
    sign: C2Sign,
) -> Result<DenseVector> {
    if !(alpha > 0.0) {
        return Err(Error::Division("alpha must be positive"));
    }
    let d = delta_bar.first().map_or(0, |v| v.dim());
    let mut out = DenseVector::zeros(d);
    if t == 0 {
        return Ok(out);
    }
    let tau = t as i64 - 1;
    let q = 1.0 - alpha;
    let k1 = -coeffs.eta1 / alpha;
    let k2 = coeffs.eta2 * coeffs.c1 / alpha;
    let k3 = sign.factor() * coeffs.eta2 * coeffs.c2 / alpha;
    for (s, delta) in delta_bar.iter().enumerate().take(t) {
        let s = s as i64;
        let mut w = 0.0;
        if s <= tau {
            w += k1 * (1.0 - q.powi((tau - s + 1) as i32));
        }
        if s < tau && k2 != 0.0 {
            w += k2 * (1.0 - q.powi((tau - s) as i32));
        }
        if s + 1 < tau && k3 != 0.0 {
            w += k3 * (1.0 - q.powi((tau - s - 1) as i32));
        }
        out.axpy(-gamma * w, delta);
    }
    Ok(out)
}

/// Coefficients the run actually realized at constant `α`.
pub fn realized_coefficients(trace: &RunTrace, alpha: f64) -> Coefficients {
    let kind = if trace.config.is_compressed() {
        trace.config.scheme.kind
    } else {
        SchemeKind::NoCompensation
    };
    match trace.config.formulation {
        Formulation::Folded => folded_coefficients(kind, alpha),
        Formulation::Unified => scheme_coefficients(kind, alpha),
        Formulation::Explicit { coefficients } => coefficients,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub coefficients: Coefficients,
    pub alpha: f64,
    pub max_rel_err_minus: f64,
    pub max_rel_err_plus: f64,
    pub resolved: SignResolution,
    /// Least-squares `κ` in `xₜ − x̂ₜ ≈ κ·γ·δ̄ₜ₋₁`.
    pub kappa: f64,
    /// Worst deviation of that fit relative to the largest residual.
    pub kappa_fit_error: f64,
    pub max_residual_norm: f64,
}

fn rel_err(sim: &DenseVector, cf: &DenseVector) -> f64 {
    let scale = sim.norm().max(cf.norm());
    if scale == 0.0 {
        0.0
    } else {
        sim.sub(cf).norm() / scale
    }
}

/// Compare the simulated `xₜ − x̂ₜ` against the closed form under both signs.
pub fn verify_residual_identity(trace: &RunTrace, tolerance: f64) -> Result<IdentityReport> {
    let cfg = &trace.config;
    if !cfg.schedule.is_constant() {
        return Err(Error::Unsupported("the closed form needs a constant alpha".into()));
    }
    if cfg.is_compressed() && cfg.scheme.kind != SchemeKind::NoCompensation && cfg.scheme.beta != 1.0 {
        return Err(Error::Unsupported("the closed form needs beta = 1".into()));
    }
    let rec = recording_of(trace)?;
    let ghost = ghost_run(trace)?;
    let residuals = ghost.residuals(rec);
    let alpha = rec.alpha[rec.alpha.len() - 1];
    let coeffs = realized_coefficients(trace, alpha);

    let (mut err_minus, mut err_plus) = (0.0f64, 0.0f64);
    let (mut num, mut den, mut max_norm) = (0.0, 0.0, 0.0f64);
    for (t, sim) in residuals.iter().enumerate() {
        let minus = residual_closed_form(&rec.delta_bar, &coeffs, alpha, cfg.gamma, t, C2Sign::Minus)?;
        let plus = residual_closed_form(&rec.delta_bar, &coeffs, alpha, cfg.gamma, t, C2Sign::Plus)?;
        err_minus = err_minus.max(rel_err(sim, &minus));
        err_plus = err_plus.max(rel_err(sim, &plus));
        max_norm = max_norm.max(sim.norm());
        if t >= 1 {
            let basis: Vec<f64> = rec.delta_bar[t - 1].iter().map(|d| cfg.gamma * d).collect();
            num += sim.dot(&basis);
            den += crate::vector::dot(&basis, &basis);
        }
    }
    let kappa = if den > 0.0 { num / den } else { 0.0 };
    let mut fit = 0.0f64;
    if max_norm > 0.0 {
        for (t, sim) in residuals.iter().enumerate().skip(1) {
            let mut r = sim.clone();
            r.axpy(-kappa * cfg.gamma, &rec.delta_bar[t - 1]);
            fit = fit.max(r.norm() / max_norm);
        }
    }

    let resolved = match (err_minus < tolerance, err_plus < tolerance) {
        (true, true) => SignResolution::Either,
        (true, false) => SignResolution::Minus,
        (false, true) => SignResolution::Plus,
        (false, false) => {
            return Err(Error::IdentityFailure {
                err_minus,
                err_plus,
                tolerance,
            })
        }
    };
    Ok(IdentityReport {
        coefficients: coeffs,
        alpha,
        max_rel_err_minus: err_minus,
        max_rel_err_plus: err_plus,
        resolved,
        kappa,
        kappa_fit_error: fit,
        max_residual_norm: max_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSums {
    pub no_compensation: f64,
    pub single: f64,
    pub ecx: f64,
    /// `ε̂` over all three runs.
    pub epsilon_hat: f64,
    pub ordering_holds: bool,
    pub ecx_max_norm: f64,
    /// `max ‖xₜ − x̂ₜ‖ ≤ 2γε̂` for the ErrorCompensatedX run.
    pub ecx_non_accumulating: bool,
    /// ECX sum divided by `γ²α²ε̂²` (main-text scale) and by `γ²ε̂²`.
    pub ecx_over_main_scale: f64,
    pub ecx_over_supp_scale: f64,
}

/// `Σₜ ‖xₜ − x̂ₜ‖²` per scheme for runs that differ only in the scheme.
pub fn residual_sum_comparison(none: &RunTrace, single: &RunTrace, ecx: &RunTrace) -> Result<ResidualSums> {
    let sum_of = |tr: &RunTrace| -> Result<(f64, f64)> {
        let norms = tr
            .ghost_residual_norms()
            .ok_or(Error::MissingRecording("ghost tracking was off"))?;
        let sum = norms.iter().map(|n| n * n).sum();
        let max = norms.iter().fold(0.0f64, |m, &n| m.max(n));
        Ok((sum, max))
    };
    let (s_none, _) = sum_of(none)?;
    let (s_single, _) = sum_of(single)?;
    let (s_ecx, ecx_max) = sum_of(ecx)?;
    let eps = [none, single, ecx]
        .iter()
        .map(|t| t.epsilon_hat())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let gamma = ecx.config.gamma;
    let alpha = ecx.records.last().map_or(1.0, |r| r.alpha);
    let main = (gamma * alpha * eps).powi(2);
    let supp = (gamma * eps).powi(2);
    let ratio = |s: f64, scale: f64| if scale > 0.0 { s / scale } else { 0.0 };
    Ok(ResidualSums {
        no_compensation: s_none,
        single: s_single,
        ecx: s_ecx,
        epsilon_hat: eps,
        ordering_holds: s_ecx < s_single && s_single < s_none,
        ecx_max_norm: ecx_max,
        ecx_non_accumulating: ecx_max <= 2.0 * gamma * eps,
        ecx_over_main_scale: ratio(s_ecx, main),
        ecx_over_supp_scale: ratio(s_ecx, supp),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtDiagnostic {
    pub values: Vec<f64>,
    /// `γ > 1/L`: outside the regime the per-step bound assumes.
    pub step_too_large: bool,
}

/// Empirical `Aₜ = ‖∇f(x̂ₜ) − ûₜ‖² − (1 − 2Lγ)‖ûₜ‖² − ‖∇f(x̂ₜ)‖²/4` along the ghost run.
pub fn diagnostic_at(trace: &RunTrace, problem: &Problem, l: f64, gamma: f64) -> Result<AtDiagnostic> {
    let rec = recording_of(trace)?;
    if rec.u_hat.is_empty() {
        return Err(Error::MissingRecording("u-hat sequence was not recorded"));
    }
    let values = rec
        .u_hat
        .iter()
        .zip(&rec.x_hat)
        .map(|(u, xh)| {
            let g = problem.full_grad(xh);
            g.sub(u).norm_sq() - (1.0 - 2.0 * l * gamma) * u.norm_sq() - g.norm_sq() / 4.0
        })
        .collect();
    Ok(AtDiagnostic {
        values,
        step_too_large: gamma * l > 1.0,
    })
}

/// Largest per-step relative gap between the simulated `vₜ` and
/// `(1 − αₜ)vₜ₋₁ + αₜb̄ₜ + η₂ēₜ − η₁δ̄ₜ`.
pub fn aggregated_update_error(trace: &RunTrace) -> Result<f64> {
    let rec = recording_of(trace)?;
    let cfg = &trace.config;
    let mut worst = 0.0f64;
    for t in 1..rec.v.len() {
        let a = rec.alpha[t];
        let (eta1, eta2) = match cfg.unified_coefficients(a) {
            Some(c) if cfg.is_compressed() => (c.eta1, c.eta2),
            _ => (a, a),
        };
        let mut pred = moving_average(&rec.v[t - 1], &rec.b_bar[t], a);
        pred.axpy(eta2, &rec.e_bar[t]);
        pred.axpy(-eta1, &rec.delta_bar[t]);
        worst = worst.max(rel_err(&rec.v[t], &pred));
    }
    Ok(worst)
}
