//! Error-compensation schemes.
//!
//! Every scheme fits the unified recursion
//!
//! ```text
//! eₜ = (1 − β)eₜ₋₁ + β(c₁,ₜ δₜ₋₁ − c₂,ₜ δₜ₋₂)
//! vₜ = (1 − αₜ)vₜ₋₁ + αₜ𝒜(xₜ; ξₜ) − η₁,ₜ δₜ + η₂,ₜ eₜ
//! ```
//!
//! Two ways of realizing it are supported:
//!
//! * **folded**: the filtered error is added to `𝒜` before compression
//!   (`Δₜ = 𝒜 + eₜ`), with the ErrorCompensatedX filter weights
//!   `(αₜ₋₁/αₜ)(2 − αₜ)` and `(αₜ₋₂/αₜ)(1 − αₜ)`;
//! * **unified**: the coefficients `(η₁, η₂, c₁, c₂)` are applied directly, which
//!   for `η₁ = 1` means compressing the whole estimator.
//!
//! With constant `α` the two coincide for ErrorCompensatedX.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::vector::DenseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    NoCompensation,
    SingleCompensation,
    ErrorCompensatedX,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::NoCompensation,
        SchemeKind::SingleCompensation,
        SchemeKind::ErrorCompensatedX,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::NoCompensation => "no_compensation",
            SchemeKind::SingleCompensation => "single",
            SchemeKind::ErrorCompensatedX => "ecx",
        }
    }
}

fn default_beta() -> f64 {
    0.3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    /// Low-pass parameter; `β = 1` keeps no filter memory.
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, beta: f64) -> Self {
        Self { kind, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(config_err(format!("beta = {} must lie in (0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// `(η₁, η₂, c₁, c₂)` of the unified recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub eta1: f64,
    pub eta2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Coefficients {
    pub const fn new(eta1: f64, eta2: f64, c1: f64, c2: f64) -> Self {
        Self { eta1, eta2, c1, c2 }
    }
}

/// Reference coefficients of each scheme:
/// no compensation `(1, 0, 0, 0)`, single `(1, 1, 1, 0)`,
/// ErrorCompensatedX `(αₜ, αₜ, 2 − αₜ, 1 − αₜ)`.
pub fn scheme_coefficients(kind: SchemeKind, alpha_t: f64) -> Coefficients {
    match kind {
        SchemeKind::NoCompensation => Coefficients::new(1.0, 0.0, 0.0, 0.0),
        SchemeKind::SingleCompensation => Coefficients::new(1.0, 1.0, 1.0, 0.0),
        SchemeKind::ErrorCompensatedX => {
            Coefficients::new(alpha_t, alpha_t, 2.0 - alpha_t, 1.0 - alpha_t)
        }
    }
}

/// Coefficients realized by the folded (compensate-then-compress) update at
/// constant `α`: the residual and the filtered error both enter `vₜ` scaled by `α`.
pub fn folded_coefficients(kind: SchemeKind, alpha: f64) -> Coefficients {
    let (c1, c2) = folded_filter_weights(kind, alpha, alpha, alpha);
    let eta2 = if kind == SchemeKind::NoCompensation { 0.0 } else { alpha };
    Coefficients::new(alpha, eta2, c1, c2)
}

/// Weights `(a, b)` in `eₜ = (1 − β)eₜ₋₁ + β(a·δₜ₋₁ − b·δₜ₋₂)` for the folded update.
pub fn folded_filter_weights(kind: SchemeKind, alpha_t: f64, alpha_prev: f64, alpha_prev2: f64) -> (f64, f64) {
    match kind {
        SchemeKind::NoCompensation => (0.0, 0.0),
        SchemeKind::SingleCompensation => (1.0, 0.0),
        SchemeKind::ErrorCompensatedX => (
            alpha_prev / alpha_t * (2.0 - alpha_t),
            alpha_prev2 / alpha_t * (1.0 - alpha_t),
        ),
    }
}

/// Per-node compensation buffers: `eₜ`, `δₜ₋₁`, `δₜ₋₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensationState {
    pub e: DenseVector,
    pub delta_1: DenseVector,
    pub delta_2: DenseVector,
}

impl CompensationState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            e: DenseVector::zeros(dim),
            delta_1: DenseVector::zeros(dim),
            delta_2: DenseVector::zeros(dim),
        }
    }

    /// Folded low-pass update for `kind`; returns the new `eₜ`. The δ buffers
    /// are left alone until [`shift_deltas`](Self::shift_deltas).
    pub fn filter_update(
        &mut self,
        beta: f64,
        alpha_t: f64,
        alpha_prev: f64,
        alpha_prev2: f64,
        kind: SchemeKind,
    ) -> Result<&DenseVector> {
        if !(alpha_t > 0.0) {
            return Err(Error::Division("alpha_t must be positive"));
        }
        if kind == SchemeKind::NoCompensation {
            self.e = DenseVector::zeros(self.e.dim());
            return Ok(&self.e);
        }
        let (a, b) = folded_filter_weights(kind, alpha_t, alpha_prev, alpha_prev2);
        self.apply_filter(beta, a, b);
        Ok(&self.e)
    }

    /// Unified low-pass update `eₜ = (1 − β)eₜ₋₁ + β(c₁δₜ₋₁ − c₂δₜ₋₂)`.
    pub fn unified_filter_update(&mut self, beta: f64, coeffs: &Coefficients) -> &DenseVector {
        self.apply_filter(beta, coeffs.c1, coeffs.c2);
        &self.e
    }

    fn apply_filter(&mut self, beta: f64, a: f64, b: f64) {
        for i in 0..self.e.dim() {
            let mut drive = 0.0;
            if a != 0.0 {
                drive = a * self.delta_1[i];
            }
            if b != 0.0 {
                drive -= b * self.delta_2[i];
            }
            let mut next = if beta == 1.0 { drive } else { beta * drive };
            if beta != 1.0 {
                next += (1.0 - beta) * self.e[i];
            }
            self.e[i] = next;
        }
    }

    /// `δₜ₋₂ ← δₜ₋₁`, `δₜ₋₁ ← new_delta`.
    pub fn shift_deltas(&mut self, new_delta: DenseVector) {
        self.delta_2 = std::mem::replace(&mut self.delta_1, new_delta);
    }
}

/// `Δₜ = input + eₜ`.
pub fn compensate(input: &[f64], e_t: &[f64]) -> DenseVector {
    debug_assert_eq!(input.len(), e_t.len());
    input.iter().zip(e_t).map(|(a, e)| a + e).collect()
}

/// Payload weights for the unified update. A node compresses
/// `p = w_v·vₜ₋₁ + w_a·𝒜 + w_e·eₜ` and every replica sets
/// `vₜ = (1 − η₁)vₜ₋₁ + η₁·C[p]`, which expands to the unified recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayloadWeights {
    pub w_v: f64,
    pub w_a: f64,
    pub w_e: f64,
    pub keep_v: f64,
    pub eta1: f64,
}

pub fn payload_weights(coeffs: &Coefficients, alpha_t: f64) -> Result<PayloadWeights> {
    if !(coeffs.eta1 > 0.0) {
        return Err(config_err("eta1 must be positive"));
    }
    Ok(PayloadWeights {
        w_v: (coeffs.eta1 - alpha_t) / coeffs.eta1,
        w_a: alpha_t / coeffs.eta1,
        w_e: coeffs.eta2 / coeffs.eta1,
        keep_v: 1.0 - coeffs.eta1,
        eta1: coeffs.eta1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::from(x)
    }

    fn state(e: &[f64], d1: &[f64], d2: &[f64]) -> CompensationState {
        CompensationState {
            e: v(e),
            delta_1: v(d1),
            delta_2: v(d2),
        }
    }

    #[test]
    fn coefficient_table() {
        assert_eq!(
            scheme_coefficients(SchemeKind::ErrorCompensatedX, 0.25),
            Coefficients::new(0.25, 0.25, 1.75, 0.75)
        );
        assert_eq!(
            scheme_coefficients(SchemeKind::ErrorCompensatedX, 1.0),
            scheme_coefficients(SchemeKind::SingleCompensation, 1.0)
        );
        for a in [0.1, 0.7, 1.0] {
            assert_eq!(
                scheme_coefficients(SchemeKind::NoCompensation, a),
                Coefficients::new(1.0, 0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn ecx_filter_example() {
        let mut s = state(&[0.0], &[2.0], &[4.0]);
        let e = s
            .filter_update(1.0, 0.5, 0.5, 0.5, SchemeKind::ErrorCompensatedX)
            .unwrap();
        assert_eq!(e, &v(&[1.0]));
        assert_eq!(s.delta_1, v(&[2.0]));
        assert_eq!(s.delta_2, v(&[4.0]));
    }

    #[test]
    fn single_filter_example() {
        let mut s = state(&[5.0], &[2.0], &[4.0]);
        assert_eq!(
            s.filter_update(1.0, 0.3, 0.3, 0.3, SchemeKind::SingleCompensation)
                .unwrap(),
            &v(&[2.0])
        );
        let mut s = state(&[1.0], &[2.0], &[0.0]);
        let e = s
            .filter_update(0.25, 1.0, 1.0, 1.0, SchemeKind::SingleCompensation)
            .unwrap();
        assert_eq!(e, &v(&[0.75 * 1.0 + 0.25 * 2.0]));
    }

    #[test]
    fn no_compensation_filter_is_zero() {
        let mut s = state(&[3.0, 1.0], &[2.0, 2.0], &[4.0, 4.0]);
        let e = s
            .filter_update(0.3, 0.5, 0.5, 0.5, SchemeKind::NoCompensation)
            .unwrap();
        assert_eq!(e, &v(&[0.0, 0.0]));
    }

    #[test]
    fn variable_alpha_weights() {
        let (a, b) = folded_filter_weights(SchemeKind::ErrorCompensatedX, 0.25, 0.5, 1.0);
        assert_eq!(a, 2.0 * 1.75);
        assert_eq!(b, 4.0 * 0.75);
    }

    #[test]
    fn zero_alpha_is_rejected() {
        let mut s = CompensationState::zeros(2);
        assert!(matches!(
            s.filter_update(1.0, 0.0, 1.0, 1.0, SchemeKind::ErrorCompensatedX),
            Err(Error::Division(_))
        ));
    }

    #[test]
    fn compensate_examples() {
        assert_eq!(compensate(&[1.0, 1.0], &[0.0, 0.0]), v(&[1.0, 1.0]));
        assert_eq!(compensate(&[1.0, -1.0], &[0.5, 0.5]), v(&[1.5, -0.5]));
        assert_eq!(compensate(&[2.0, -3.0], &[-2.0, 3.0]), v(&[0.0, 0.0]));
    }

    #[test]
    fn shift_examples() {
        let mut s = state(&[0.0], &[1.0], &[2.0]);
        s.shift_deltas(v(&[3.0]));
        assert_eq!((s.delta_1.clone(), s.delta_2.clone()), (v(&[3.0]), v(&[1.0])));

        let mut s = CompensationState::zeros(1);
        s.shift_deltas(v(&[7.0]));
        assert_eq!((s.delta_1.clone(), s.delta_2.clone()), (v(&[7.0]), v(&[0.0])));

        let mut s = CompensationState::zeros(2);
        s.shift_deltas(v(&[0.0, 0.0]));
        s.shift_deltas(v(&[0.0, 0.0]));
        assert_eq!(s, CompensationState::zeros(2));
    }

    #[test]
    fn folded_coefficients_match_reference_for_ecx() {
        for a in [0.1, 0.5, 1.0] {
            assert_eq!(
                folded_coefficients(SchemeKind::ErrorCompensatedX, a),
                scheme_coefficients(SchemeKind::ErrorCompensatedX, a)
            );
        }
        assert_eq!(
            folded_coefficients(SchemeKind::SingleCompensation, 0.5),
            Coefficients::new(0.5, 0.5, 1.0, 0.0)
        );
    }

    #[test]
    fn payload_weights_for_ecx_are_unit() {
        let c = scheme_coefficients(SchemeKind::ErrorCompensatedX, 0.3);
        let w = payload_weights(&c, 0.3).unwrap();
        assert_eq!((w.w_v, w.w_a, w.w_e, w.keep_v), (0.0, 1.0, 1.0, 0.7));
        let c = scheme_coefficients(SchemeKind::SingleCompensation, 0.3);
        let w = payload_weights(&c, 0.3).unwrap();
        assert_eq!((w.w_a, w.w_e, w.keep_v), (0.3, 1.0, 0.0));
        assert!((w.w_v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_keep_error_at_zero() {
        for kind in SchemeKind::ALL {
            let mut s = CompensationState::zeros(3);
            for t in 1..50 {
                let a = 1.0 / t as f64;
                s.filter_update(0.3, a, a, a, kind).unwrap();
                s.shift_deltas(DenseVector::zeros(3));
                assert!(s.e.iter().all(|&x| x == 0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn ecx_collapses_to_single_at_alpha_one(
            e in prop::collection::vec(-5f64..5.0, 3),
            d1 in prop::collection::vec(-5f64..5.0, 3),
            d2 in prop::collection::vec(-5f64..5.0, 3),
            beta in 0.01f64..=1.0,
        ) {
            let mut a = state(&e, &d1, &d2);
            let mut b = a.clone();
            a.filter_update(beta, 1.0, 1.0, 1.0, SchemeKind::ErrorCompensatedX).unwrap();
            b.filter_update(beta, 1.0, 1.0, 1.0, SchemeKind::SingleCompensation).unwrap();
            prop_assert!(a.e.bitwise_eq(&b.e));
        }

        #[test]
        fn filter_is_linear(
            e1 in prop::collection::vec(-5f64..5.0, 4),
            e2 in prop::collection::vec(-5f64..5.0, 4),
            p1 in prop::collection::vec(-5f64..5.0, 4),
            p2 in prop::collection::vec(-5f64..5.0, 4),
            q1 in prop::collection::vec(-5f64..5.0, 4),
            q2 in prop::collection::vec(-5f64..5.0, 4),
            beta in 0.01f64..=1.0,
            alphas in (0.01f64..=1.0, 0.01f64..=1.0, 0.01f64..=1.0),
            lambda in -3f64..3.0,
        ) {
            let (at, a1, a2) = alphas;
            let run = |e: &[f64], d1: &[f64], d2: &[f64]| {
                let mut s = state(e, d1, d2);
                s.filter_update(beta, at, a1, a2, SchemeKind::ErrorCompensatedX).unwrap().clone()
            };
            let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter().zip(y).map(|(a, b)| a + lambda * b).collect()
            };
            let lhs = run(&mix(&e1, &e2), &mix(&p1, &p2), &mix(&q1, &q2));
            let r1 = run(&e1, &p1, &q1);
            let r2 = run(&e2, &p2, &q2);
            for i in 0..4 {
                let rhs = r1[i] + lambda * r2[i];
                let scale = r1[i].abs() + (lambda * r2[i]).abs() + lhs[i].abs();
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
