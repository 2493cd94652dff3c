//! Error-compensated communication compression for moving-average stochastic
//! optimizers.
//!
//! * [`compression`]: compressors `C[x]` and their residuals `δ = x − C[x]`.
//! * [`estimators`]: SGD, Momentum, STORM, ROOT-SGD and IGT as moving averages.
//! * [`compensation`]: no compensation, single compensation and ErrorCompensatedX.
//! * [`problems`]: synthetic quadratic, linear and logistic regression objectives.
//! * [`simulator`]: deterministic parameter-server loop with double compression.
//! * [`oracle`]: ghost sequence and closed-form residual checks.

pub mod compensation;
pub mod compression;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod simulator;
pub mod vector;

pub use compensation::{Coefficients, CompensationState, SchemeKind, SchemeSpec};
pub use compression::{compress, CompressionResult, Compressor, CompressorKind, CompressorSpec};
pub use error::{Error, Result};
pub use estimators::{AlphaSchedule, EstimatorKind, EstimatorState, GradientOracle};
pub use problems::{partition_data, Problem, ProblemKind, ProblemSpec, SampleHandle, Shard};
pub use simulator::{run, run_on, Formulation, InitPoint, RecordFlags, RunConfig, RunTrace, StepRecord, Topology};
pub use vector::DenseVector;
