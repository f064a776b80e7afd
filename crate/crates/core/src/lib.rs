//! Confidence intervals and one-sided tests for the k-fold cross-validation
//! test error, together with the naive baselines they are compared against,
//! algorithmic-stability estimators and a Monte Carlo harness.
//!
//! Indices are 0-based throughout. A negative difference `loss(A) - loss(B)`
//! favours the first algorithm.

pub mod baselines;
pub mod cv;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod learners;
pub mod rng;
pub mod sim;
pub mod stability;
pub mod summation;
pub mod tasks;

pub use baselines::{run_baseline, BaselineKind, BaselineSpec, ProcedureRun};
pub use cv::{cross_validate, run_comparison, run_cv, true_risk_oracle, CvFit, CvRun, RiskEstimate, WeightedFit};
pub use data::{make_partition, DataPoint, Dataset, FoldPair, FoldPartition, LossKind, LossMatrix};
pub use error::{Error, Result};
pub use estimators::{estimate, sigma_in, sigma_out, EstimatorKind, VarianceEstimate, VarianceKind};
pub use inference::{
    clt_confidence_interval, clt_improvement_test, Decision, InferenceResult, Pivot, ProcedureId, Reference,
};
pub use learners::{ridge_loocv_fit, ridge_loocv_losses, AlgorithmSpec, FittedSubject, LossFunction, PredictionRule, Subject};
pub use rng::SeedStream;
pub use sim::{run_experiment, wilson_interval, ExperimentPlan, ExperimentResult, Mode, Procedure, ProcedureSpec};
pub use stability::{estimate_stabilities, variance_ratio_diagnostic, StabilityConfig, StabilityReport};
pub use tasks::TaskSpec;
