//! Confidence intervals and one-sided improvement tests.
//!
//! Every procedure, the CLT one and the baselines alike, reduces to a
//! [`Pivot`]: a point estimate, a standard error and a reference
//! distribution. Intervals are `r_hat ± q_{1-α/2} se` and the test of
//! `H0: R >= 0` against `H1: R < 0` rejects when `r_hat < q_α se`.

use serde::{Deserialize, Serialize};

use crate::data::{LossKind, LossMatrix};
use crate::dist::{normal_cdf, normal_quantile, t_cdf, t_quantile};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind, VarianceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Reference {
    Normal,
    StudentT { df: u64 },
}

impl Reference {
    pub fn quantile(&self, p: f64) -> Result<f64> {
        match *self {
            Reference::Normal => normal_quantile(p),
            Reference::StudentT { df } => t_quantile(p, df),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Reference::Normal => normal_cdf(x),
            Reference::StudentT { df } => t_cdf(x, df as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureId {
    Clt,
    Holdout,
    CvTtest,
    RepeatedTv,
    CorrectedRepeatedTv,
    FiveByTwo,
    /// Supplied by a caller-defined procedure (e.g. a test double).
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
}

/// Point estimate, spread and scaling of one procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub r_hat: f64,
    pub sigma_hat: f64,
    /// Standard error of `r_hat`: `sigma_hat` times the procedure's scale factor.
    pub se: f64,
    pub reference: Reference,
}

impl Pivot {
    pub fn new(r_hat: f64, sigma_hat: f64, scale: f64, reference: Reference) -> Self {
        Self {
            r_hat,
            sigma_hat,
            se: sigma_hat * scale,
            reference,
        }
    }

    /// The pivot for the reverse comparison (loss of rule 2 minus rule 1).
    pub fn negated(&self) -> Self {
        Self {
            r_hat: -self.r_hat,
            ..*self
        }
    }

    /// Two-sided `(1 - alpha)` interval.
    pub fn interval(&self, alpha: f64) -> Result<(f64, f64)> {
        check_alpha(alpha)?;
        let half = self.reference.quantile(1.0 - alpha / 2.0)? * self.se;
        Ok((self.r_hat - half, self.r_hat + half))
    }

    /// One-sided level-`alpha` test of `R >= 0` against `R < 0`.
    pub fn test(&self, alpha: f64) -> Result<TestOutcome> {
        check_alpha(alpha)?;
        let q = self.reference.quantile(alpha)?;
        let upper = self.r_hat - q * self.se;
        if self.se == 0.0 {
            return if self.r_hat == 0.0 {
                Err(Error::InconclusiveDegenerate)
            } else if self.r_hat < 0.0 {
                Ok(TestOutcome {
                    decision: Decision::Reject,
                    p_value: 0.0,
                    one_sided_upper: upper,
                })
            } else {
                Ok(TestOutcome {
                    decision: Decision::FailToReject,
                    p_value: 1.0,
                    one_sided_upper: upper,
                })
            };
        }
        let decision = if self.r_hat < q * self.se {
            Decision::Reject
        } else {
            Decision::FailToReject
        };
        Ok(TestOutcome {
            decision,
            p_value: self.reference.cdf(self.r_hat / self.se),
            one_sided_upper: upper,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    /// Smallest level at which the test rejects.
    pub p_value: f64,
    /// Upper end of the one-sided interval `(-inf, upper]`; rejecting is
    /// equivalent to `upper < 0`.
    pub one_sided_upper: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(format!("alpha {alpha} is outside (0, 1)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub procedure: ProcedureId,
    pub r_hat: f64,
    pub sigma_hat: f64,
    pub se: f64,
    pub n: usize,
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub decision: Option<Decision>,
    pub p_value: Option<f64>,
    pub one_sided_upper: Option<f64>,
    pub reference: Reference,
    /// Zero standard error: the interval collapses to `[r_hat, r_hat]`.
    pub degenerate: bool,
    pub variance_kind: Option<VarianceKind>,
    pub uneven_folds: bool,
    /// Which test error the interval targets.
    pub target: String,
}

impl InferenceResult {
    /// Interval-only result.
    pub fn interval(procedure: ProcedureId, pivot: &Pivot, n: usize, alpha: f64, target: &str) -> Result<Self> {
        let (ci_low, ci_high) = pivot.interval(alpha)?;
        Ok(Self {
            procedure,
            r_hat: pivot.r_hat,
            sigma_hat: pivot.sigma_hat,
            se: pivot.se,
            n,
            alpha,
            ci_low,
            ci_high,
            decision: None,
            p_value: None,
            one_sided_upper: None,
            reference: pivot.reference,
            degenerate: pivot.se == 0.0,
            variance_kind: None,
            uneven_folds: false,
            target: target.to_string(),
        })
    }

    /// Interval plus the one-sided test.
    pub fn test(procedure: ProcedureId, pivot: &Pivot, n: usize, alpha: f64, target: &str) -> Result<Self> {
        let outcome = pivot.test(alpha)?;
        let mut r = Self::interval(procedure, pivot, n, alpha, target)?;
        r.decision = Some(outcome.decision);
        r.p_value = Some(outcome.p_value);
        r.one_sided_upper = Some(outcome.one_sided_upper);
        Ok(r)
    }
}

pub const CV_TARGET: &str = "k-fold test error: fold-size weighted mean of the k fitted rules' conditional risks";

/// The CLT pivot `(R̂, σ̂, σ̂/√n)` for a loss matrix.
pub fn clt_pivot(m: &LossMatrix, estimator: EstimatorKind) -> Result<(Pivot, VarianceKind, bool)> {
    let v = estimate(m, estimator)?;
    let sigma = v.value.sqrt();
    let pivot = Pivot::new(m.mean(), sigma, 1.0 / (m.n() as f64).sqrt(), Reference::Normal);
    Ok((pivot, v.kind, v.uneven_folds))
}

/// `R̂ ± q_{1-α/2} σ̂/√n`.
pub fn clt_confidence_interval(m: &LossMatrix, estimator: EstimatorKind, alpha: f64) -> Result<InferenceResult> {
    let (pivot, kind, uneven) = clt_pivot(m, estimator)?;
    let mut r = InferenceResult::interval(ProcedureId::Clt, &pivot, m.n(), alpha, CV_TARGET)?;
    r.variance_kind = Some(kind);
    r.uneven_folds = uneven;
    Ok(r)
}

/// Reject `H0: R >= 0` (rule 1 no better than rule 2) when `R̂ < q_α σ̂/√n`.
pub fn clt_improvement_test(m: &LossMatrix, estimator: EstimatorKind, alpha: f64) -> Result<InferenceResult> {
    if m.kind() != LossKind::Difference {
        return Err(Error::InvalidInput(
            "the improvement test needs a difference loss matrix".into(),
        ));
    }
    let (pivot, kind, uneven) = clt_pivot(m, estimator)?;
    let mut r = InferenceResult::test(ProcedureId::Clt, &pivot, m.n(), alpha, CV_TARGET)?;
    r.variance_kind = Some(kind);
    r.uneven_folds = uneven;
    Ok(r)
}
