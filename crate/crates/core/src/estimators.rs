//! Moving-average gradient estimators `vₜ = (1 − αₜ)vₜ₋₁ + αₜ·𝒜(xₜ; ξₜ)`.
//!
//! | kind      | αₜ         | 𝒜(xₜ; ξₜ)                                              |
//! |-----------|------------|--------------------------------------------------------|
//! | SGD       | 1          | ∇F(xₜ; ξₜ)                                             |
//! | Momentum  | α          | ∇F(xₜ; ξₜ)                                             |
//! | STORM     | α          | (∇F(xₜ; ξₜ) − (1 − αₜ)∇F(xₜ₋₁; ξₜ)) / αₜ               |
//! | ROOT-SGD  | 1/t        | same as STORM                                          |
//! | IGT       | α          | ∇F(xₜ + ((1 − αₜ)/αₜ)(xₜ − xₜ₋₁); ξₜ)                   |

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::problems::SampleHandle;
use crate::vector::{combine, DenseVector};

/// Step-size schedule `αₜ` for the moving average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    Constant { alpha: f64 },
    /// `αₜ = 1/t`.
    InverseT,
    /// `αₜ = 1/(1 + c₀·t)`.
    InverseLinear { c0: f64 },
    /// `αₜ = T^{-2/3}` for a fixed horizon `T`.
    PowerTwoThirds { horizon: u64 },
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        Self::Constant { alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::Constant { alpha } if !(alpha > 0.0 && alpha <= 1.0) => Err(
                config_err(format!("constant alpha {alpha} must lie in (0, 1]")),
            ),
            AlphaSchedule::InverseLinear { c0 } if !(c0 > 0.0 && c0.is_finite()) => {
                Err(config_err(format!("c0 = {c0} must be positive")))
            }
            AlphaSchedule::PowerTwoThirds { horizon: 0 } => {
                Err(config_err("horizon must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// `αₜ` for `t ≥ −1`. Indices `t ≤ 0` take the value at `t = 1`, which makes
    /// the start-up ratios `αₜ₋₁/αₜ` equal to one.
    pub fn alpha(&self, t: i64) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::InverseT => 1.0 / t,
            AlphaSchedule::InverseLinear { c0 } => 1.0 / (1.0 + c0 * t),
            AlphaSchedule::PowerTwoThirds { horizon } => 1.0 / (horizon as f64).cbrt().powi(2),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self,
            AlphaSchedule::Constant { .. } | AlphaSchedule::PowerTwoThirds { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sgd,
    Momentum,
    Storm,
    RootSgd,
    Igt,
}

/// Source of stochastic gradients `∇F(x; ξ)` for one worker.
pub trait GradientOracle {
    fn grad(&self, x: &[f64], handle: &SampleHandle) -> Result<DenseVector>;
}

impl<F> GradientOracle for F
where
    F: Fn(&[f64], &SampleHandle) -> Result<DenseVector>,
{
    fn grad(&self, x: &[f64], handle: &SampleHandle) -> Result<DenseVector> {
        self(x, handle)
    }
}

/// Estimator `vₜ` together with the previous iterate it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub kind: EstimatorKind,
    pub schedule: AlphaSchedule,
    pub v: DenseVector,
    pub x_prev: DenseVector,
}

impl EstimatorState {
    /// Fresh state with `v = v₀` and `x₋₁ = x₀`.
    pub fn new(kind: EstimatorKind, schedule: AlphaSchedule, x0: &DenseVector, v0: DenseVector) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            kind,
            schedule,
            v: v0,
            x_prev: x0.clone(),
        })
    }

    /// `αₜ` as used by this estimator (SGD is pinned to one).
    pub fn alpha(&self, t: i64) -> f64 {
        effective_alpha(self.kind, &self.schedule, t)
    }

    pub fn eval_a(
        &self,
        x_t: &[f64],
        handle: &SampleHandle,
        alpha_t: f64,
        oracle: &dyn GradientOracle,
    ) -> Result<DenseVector> {
        eval_a(self.kind, x_t, &self.x_prev, handle, alpha_t, oracle)
    }

    /// Store and return `(1 − αₜ)vₜ₋₁ + αₜ·aₜ`.
    pub fn update_v(&mut self, a_t: &[f64], alpha_t: f64) -> &DenseVector {
        self.v = moving_average(&self.v, a_t, alpha_t);
        &self.v
    }
}

pub fn effective_alpha(kind: EstimatorKind, schedule: &AlphaSchedule, t: i64) -> f64 {
    match kind {
        EstimatorKind::Sgd => 1.0,
        _ => schedule.alpha(t),
    }
}

/// `(1 − α)·v + α·a`; at `α = 1` this is exactly `a`.
pub fn moving_average(v: &[f64], a: &[f64], alpha: f64) -> DenseVector {
    if alpha == 1.0 {
        return DenseVector::from(a);
    }
    combine(v.len(), &[(1.0 - alpha, v), (alpha, a)])
}

/// Evaluate `𝒜(xₜ; ξₜ)`; STORM-type kinds evaluate both gradients with the same handle.
pub fn eval_a(
    kind: EstimatorKind,
    x_t: &[f64],
    x_prev: &[f64],
    handle: &SampleHandle,
    alpha_t: f64,
    oracle: &dyn GradientOracle,
) -> Result<DenseVector> {
    if !(alpha_t > 0.0) {
        return Err(Error::Division("alpha_t must be positive"));
    }
    match kind {
        EstimatorKind::Sgd | EstimatorKind::Momentum => oracle.grad(x_t, handle),
        EstimatorKind::Storm | EstimatorKind::RootSgd => {
            let g_now = oracle.grad(x_t, handle)?;
            if alpha_t == 1.0 {
                return Ok(g_now);
            }
            let g_prev = oracle.grad(x_prev, handle)?;
            let mut a = combine(x_t.len(), &[(1.0, &g_now), (-(1.0 - alpha_t), &g_prev)]);
            a.scale(1.0 / alpha_t);
            Ok(a)
        }
        EstimatorKind::Igt => {
            let shift = (1.0 - alpha_t) / alpha_t;
            if shift == 0.0 {
                return oracle.grad(x_t, handle);
            }
            let mut point = DenseVector::from(x_t);
            for ((p, &now), &prev) in point.iter_mut().zip(x_t).zip(x_prev) {
                *p += shift * (now - prev);
            }
            oracle.grad(&point, handle)
        }
    }
}

/// `v₀`: the mean of `b0` stochastic gradients at `x₀`, split evenly over the
/// `oracles` (one per worker), summed in worker then draw order.
pub fn init_v0(x0: &[f64], b0: usize, oracles: &[&dyn GradientOracle], seed: u64) -> Result<DenseVector> {
    if b0 == 0 {
        return Err(config_err("initial batch B0 must be >= 1"));
    }
    if oracles.is_empty() {
        return Err(config_err("need at least one worker"));
    }
    let n = oracles.len();
    let mut acc = DenseVector::zeros(x0.len());
    for (w, oracle) in oracles.iter().enumerate() {
        let draws = b0 / n + usize::from(w < b0 % n);
        for j in 0..draws {
            let handle = SampleHandle::new(seed, 0, w as u64, j as u32);
            let g = oracle.grad(x0, &handle)?;
            acc.axpy(1.0, &g);
        }
    }
    for c in acc.iter_mut() {
        *c /= b0 as f64;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::from(x)
    }

    /// Oracle returning a fixed gradient per evaluation point.
    fn table(points: Vec<(Vec<f64>, Vec<f64>)>) -> impl Fn(&[f64], &SampleHandle) -> Result<DenseVector> {
        move |x: &[f64], _h: &SampleHandle| {
            points
                .iter()
                .find(|(p, _)| p.as_slice() == x)
                .map(|(_, g)| DenseVector::from(g.as_slice()))
                .ok_or(Error::Config(format!("no gradient at {x:?}")))
        }
    }

    fn identity_grad(x: &[f64], _h: &SampleHandle) -> Result<DenseVector> {
        Ok(DenseVector::from(x))
    }

    const H: SampleHandle = SampleHandle {
        seed: 0,
        step: 1,
        worker: 0,
        draw: 0,
    };

    #[test]
    fn schedule_examples() {
        assert_eq!(AlphaSchedule::InverseT.alpha(4), 0.25);
        assert_eq!(AlphaSchedule::InverseLinear { c0: 0.05 }.alpha(20), 0.5);
        for t in [-1, 0, 1, 7, 1000] {
            assert_eq!(AlphaSchedule::constant(1.0).alpha(t), 1.0);
        }
    }

    #[test]
    fn schedule_start_up_indices_copy_first_step() {
        for s in [
            AlphaSchedule::InverseT,
            AlphaSchedule::InverseLinear { c0: 0.3 },
            AlphaSchedule::PowerTwoThirds { horizon: 64 },
        ] {
            assert_eq!(s.alpha(-1), s.alpha(1));
            assert_eq!(s.alpha(0), s.alpha(1));
        }
        assert_eq!(AlphaSchedule::InverseT.alpha(0), 1.0);
        assert_eq!(AlphaSchedule::PowerTwoThirds { horizon: 8 }.alpha(3), 0.25);
    }

    #[test]
    fn schedule_validation() {
        assert!(AlphaSchedule::constant(0.0).validate().is_err());
        assert!(AlphaSchedule::constant(1.5).validate().is_err());
        assert!(AlphaSchedule::InverseLinear { c0: 0.0 }.validate().is_err());
        assert!(AlphaSchedule::PowerTwoThirds { horizon: 0 }.validate().is_err());
        assert!(AlphaSchedule::constant(1.0).validate().is_ok());
    }

    #[test]
    fn sgd_pins_alpha_to_one() {
        assert_eq!(effective_alpha(EstimatorKind::Sgd, &AlphaSchedule::constant(0.1), 5), 1.0);
        assert_eq!(effective_alpha(EstimatorKind::Momentum, &AlphaSchedule::constant(0.1), 5), 0.1);
    }

    #[test]
    fn storm_example() {
        let oracle = table(vec![(vec![1.0], vec![4.0]), (vec![0.0], vec![2.0])]);
        let a = eval_a(EstimatorKind::Storm, &[1.0], &[0.0], &H, 0.5, &oracle).unwrap();
        assert_eq!(a, v(&[6.0]));
        let b = eval_a(EstimatorKind::RootSgd, &[1.0], &[0.0], &H, 0.5, &oracle).unwrap();
        assert!(a.bitwise_eq(&b));
    }

    #[test]
    fn igt_evaluates_at_extrapolated_point() {
        let a = eval_a(EstimatorKind::Igt, &[1.0], &[0.0], &H, 0.5, &identity_grad).unwrap();
        assert_eq!(a, v(&[2.0]));
    }

    #[test]
    fn igt_at_alpha_one_matches_momentum() {
        let x = [0.3, -0.0, 2.0];
        let prev = [1.0, 1.0, 1.0];
        let igt = eval_a(EstimatorKind::Igt, &x, &prev, &H, 1.0, &identity_grad).unwrap();
        let mom = eval_a(EstimatorKind::Momentum, &x, &prev, &H, 1.0, &identity_grad).unwrap();
        assert!(igt.bitwise_eq(&mom));
    }

    #[test]
    fn momentum_is_plain_gradient() {
        for alpha in [0.1, 0.5, 1.0] {
            let a = eval_a(EstimatorKind::Momentum, &[2.0, 3.0], &[0.0, 0.0], &H, alpha, &identity_grad)
                .unwrap();
            assert_eq!(a, v(&[2.0, 3.0]));
        }
    }

    #[test]
    fn zero_alpha_is_a_division_error() {
        let r = eval_a(EstimatorKind::Storm, &[1.0], &[0.0], &H, 0.0, &identity_grad);
        assert!(matches!(r, Err(Error::Division(_))));
    }

    #[test]
    fn update_v_examples() {
        assert_eq!(moving_average(&[2.0], &[4.0], 0.5), v(&[3.0]));
        assert_eq!(moving_average(&[9.0, -1.0], &[4.0, 5.0], 1.0), v(&[4.0, 5.0]));
        assert_eq!(moving_average(&[0.0, 8.0], &[4.0, 0.0], 0.25), v(&[1.0, 6.0]));
        let mut st = EstimatorState::new(
            EstimatorKind::Momentum,
            AlphaSchedule::constant(0.5),
            &v(&[0.0]),
            v(&[2.0]),
        )
        .unwrap();
        assert_eq!(st.update_v(&[4.0], 0.5), &v(&[3.0]));
        assert_eq!(st.v, v(&[3.0]));
    }

    #[test]
    fn init_v0_examples() {
        let g = |x: &[f64], h: &SampleHandle| -> Result<DenseVector> {
            Ok(x.iter().map(|xi| xi + h.draw as f64 + 10.0 * h.worker as f64).collect())
        };
        // one draw: the sample's gradient
        assert_eq!(init_v0(&[1.0], 1, &[&g], 0).unwrap(), v(&[1.0]));
        // three draws over two workers: worker 0 draws 0,1 and worker 1 draws 0
        let v0 = init_v0(&[1.0], 3, &[&g, &g], 0).unwrap();
        assert_eq!(v0, v(&[(1.0 + 2.0 + 11.0) / 3.0]));
        assert!(matches!(init_v0(&[1.0], 0, &[&g], 0), Err(Error::Config(_))));
    }
}
