//! k-fold cross-validation runs and the conditional-risk target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPartition, LossKind, LossMatrix};
use crate::error::{Error, Result};
use crate::learners::{AlgorithmSpec, FittedSubject, LossFunction, Subject};
use crate::rng::SeedStream;
use crate::summation::{mean_and_se, pairwise_sum};
use crate::tasks::{EvalPool, TaskSpec};

/// Pool sizes below this make the Monte Carlo target noticeably noisy.
pub const MIN_ORACLE_POOL: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub partition: FoldPartition,
    pub losses: LossMatrix,
    pub fold_means: Vec<f64>,
    /// Mean of all held-out losses.
    pub r_hat: f64,
}

/// A CV run together with the rule fitted on each training set.
#[derive(Debug, Clone)]
pub struct CvFit {
    pub run: CvRun,
    pub fits: Vec<FittedSubject>,
}

impl CvFit {
    /// Fitted rules weighted `n_j / n`, the target of the CV error.
    pub fn target(&self) -> Vec<WeightedFit> {
        let n = self.run.partition.n() as f64;
        self.fits
            .iter()
            .zip(self.run.partition.fold_sizes())
            .map(|(fit, size)| WeightedFit {
                weight: size as f64 / n,
                fit: fit.clone(),
            })
            .collect()
    }
}

/// One term `weight * E[h(Z, train) | train]` of a procedure's target.
#[derive(Debug, Clone)]
pub struct WeightedFit {
    pub weight: f64,
    pub fit: FittedSubject,
}

/// Fit `subject` on every training set of `partition` and collect the
/// held-out losses. Standardization, when requested, is learned inside each
/// fold. Folds are fitted in parallel; the output does not depend on
/// scheduling.
pub fn cross_validate(
    data: &Dataset,
    partition: &FoldPartition,
    subject: &Subject,
    loss: &LossFunction,
) -> Result<CvFit> {
    if partition.n() != data.len() {
        return Err(Error::InconsistentInputs(format!(
            "partition covers {} points but the dataset has {}",
            partition.n(),
            data.len()
        )));
    }
    let per_fold: Vec<(FittedSubject, Vec<f64>)> = partition
        .pairs()
        .par_iter()
        .enumerate()
        .map(|(j, pair)| {
            let fit = subject.fit(&data.view(&pair.train)).map_err(|e| e.in_fold(j))?;
            let losses = pair
                .validation
                .iter()
                .map(|&i| fit.loss(loss, data.features(i), data.target(i)))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.in_fold(j))?;
            Ok((fit, losses))
        })
        .collect::<Result<_>>()?;

    let n = data.len();
    let k = partition.k();
    let mut losses = vec![0.0; n];
    let mut folds = vec![0; n];
    let mut fits = Vec::with_capacity(k);
    for (j, ((fit, fold_losses), pair)) in per_fold.into_iter().zip(partition.pairs()).enumerate() {
        for (&i, l) in pair.validation.iter().zip(fold_losses) {
            losses[i] = l;
            folds[i] = j;
        }
        fits.push(fit);
    }
    let kind = if subject.is_pair() {
        LossKind::Difference
    } else {
        LossKind::Plain
    };
    let matrix = LossMatrix::new(losses, folds, k, kind)?;
    let fold_means = matrix.fold_means();
    let r_hat = matrix.mean();
    Ok(CvFit {
        run: CvRun {
            partition: partition.clone(),
            losses: matrix,
            fold_means,
            r_hat,
        },
        fits,
    })
}

/// k-fold CV of one algorithm.
pub fn run_cv(data: &Dataset, partition: &FoldPartition, algo: &AlgorithmSpec, loss: &LossFunction) -> Result<CvRun> {
    cross_validate(data, partition, &Subject::Single(algo.clone()), loss).map(|f| f.run)
}

/// k-fold CV of `loss(algo1) - loss(algo2)` on identical folds.
/// A negative `r_hat` favours `algo1`.
pub fn run_comparison(
    data: &Dataset,
    partition: &FoldPartition,
    algo1: &AlgorithmSpec,
    algo2: &AlgorithmSpec,
    loss: &LossFunction,
) -> Result<CvRun> {
    let subject = Subject::Pair(algo1.clone(), algo2.clone());
    cross_validate(data, partition, &subject, loss).map(|f| f.run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero when exact.
    pub se: f64,
    pub exact: bool,
    pub warnings: Vec<String>,
}

/// `sum_j w_j E[h(Z, train_j) | train_j]`.
///
/// Uses the task's closed form when every rule has one; otherwise a single
/// pool of `n_mc` fresh points drawn from `rng` is shared by all rules, so
/// differences between rules carry little Monte Carlo noise.
pub fn true_risk_oracle(
    fits: &[WeightedFit],
    task: &TaskSpec,
    loss: &LossFunction,
    n_mc: usize,
    rng: &mut SeedStream,
) -> Result<RiskEstimate> {
    let exact: Option<Result<Vec<f64>>> = fits
        .iter()
        .map(|w| task.exact_risk(&w.fit, loss).map(|r| r.map(|v| w.weight * v)))
        .collect();
    if let Some(terms) = exact {
        return Ok(RiskEstimate {
            value: pairwise_sum(&terms?),
            se: 0.0,
            exact: true,
            warnings: Vec::new(),
        });
    }
    let pool = task.eval_pool(n_mc, rng);
    risk_on_pool(fits, &pool, loss)
}

/// Monte Carlo risk of the weighted rules on an existing pool.
pub fn risk_on_pool(fits: &[WeightedFit], pool: &EvalPool, loss: &LossFunction) -> Result<RiskEstimate> {
    let losses = fits
        .iter()
        .map(|w| pool_losses(&w.fit, pool, loss))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<(f64, &[f64])> = fits.iter().zip(&losses).map(|(w, l)| (w.weight, l.as_slice())).collect();
    combine_pool_losses(&terms)
}

/// Loss of `fit` at every pool point.
pub fn pool_losses(fit: &FittedSubject, pool: &EvalPool, loss: &LossFunction) -> Result<Vec<f64>> {
    (0..pool.len()).map(|i| pool.loss(i, fit, loss)).collect()
}

/// Weighted risk from per-point pool losses `(weight, losses)`; every slice
/// must come from the same pool.
pub fn combine_pool_losses(terms: &[(f64, &[f64])]) -> Result<RiskEstimate> {
    let len = terms.first().map_or(0, |t| t.1.len());
    if len < 2 {
        return Err(Error::InvalidConfiguration("Monte Carlo pool needs at least 2 points".into()));
    }
    if terms.iter().any(|t| t.1.len() != len) {
        return Err(Error::InconsistentInputs("pool losses of different lengths".into()));
    }
    let values: Vec<f64> = (0..len)
        .map(|i| terms.iter().fold(0.0, |acc, (w, l)| acc + w * l[i]))
        .collect();
    let (value, se) = mean_and_se(&values);
    let mut warnings = Vec::new();
    if len < MIN_ORACLE_POOL {
        warnings.push(format!(
            "Monte Carlo pool of {len} points is below {MIN_ORACLE_POOL}; the target is noisy"
        ));
    }
    Ok(RiskEstimate {
        value,
        se,
        exact: false,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_partition;
    use crate::learners::ridge_loocv_losses;

    #[test]
    fn constant_zero_learner() {
        let d = Dataset::new(1, vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 4]).unwrap();
        let p = make_partition(4, 2, 1, true).unwrap();
        let run = run_cv(&d, &p, &AlgorithmSpec::Constant { value: 0.0 }, &LossFunction::ZeroOne).unwrap();
        assert_eq!(run.r_hat, 0.0);
        assert!(run.losses.is_binary());
    }

    #[test]
    fn comparison_is_entrywise_difference() {
        let task = TaskSpec::LinearGaussian {
            beta: vec![1.0, 2.0],
            noise_sd: 1.0,
        };
        let d = task.sample(40, &mut SeedStream::new(2)).unwrap();
        let p = make_partition(40, 5, 3, true).unwrap();
        let (a, b) = (AlgorithmSpec::ridge(0.5), AlgorithmSpec::knn(3));
        let l = LossFunction::SquaredError;
        let diff = run_comparison(&d, &p, &a, &b, &l).unwrap();
        let ra = run_cv(&d, &p, &a, &l).unwrap();
        let rb = run_cv(&d, &p, &b, &l).unwrap();
        for i in 0..40 {
            assert_eq!(diff.losses.losses()[i], ra.losses.losses()[i] - rb.losses.losses()[i]);
        }
        assert_eq!(diff.losses.kind(), LossKind::Difference);
        let same = run_comparison(&d, &p, &a, &a, &l).unwrap();
        assert!(same.losses.losses().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn loocv_matches_fast_path() {
        let task = TaskSpec::LinearGaussian {
            beta: vec![1.0, -1.0, 0.5],
            noise_sd: 0.5,
        };
        let d = task.sample(30, &mut SeedStream::new(8)).unwrap();
        let p = make_partition(30, 30, 0, false).unwrap();
        let run = run_cv(&d, &p, &AlgorithmSpec::ridge(1.0), &LossFunction::SquaredError).unwrap();
        let fast = ridge_loocv_losses(&d, 1.0).unwrap();
        for (a, b) in run.losses.losses().iter().zip(fast.losses()) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn uneven_folds_weighted_mean() {
        let d = Dataset::from_targets((0..7).map(|i| i as f64).collect()).unwrap();
        let p = make_partition(7, 3, 4, true).unwrap();
        let run = run_cv(&d, &p, &AlgorithmSpec::SampleMean, &LossFunction::SquaredError).unwrap();
        let sizes = p.fold_sizes();
        let weighted: f64 = run.fold_means.iter().zip(&sizes).map(|(m, &s)| m * s as f64).sum::<f64>() / 7.0;
        assert!((weighted - run.r_hat).abs() < 1e-12);
    }

    #[test]
    fn oracle_constant_rule_pool() {
        let task = TaskSpec::LogisticLabels { p: 2, scale: 1.0 };
        let d = task.sample(20, &mut SeedStream::new(1)).unwrap();
        let idx: Vec<usize> = (0..20).collect();
        let fit = Subject::Single(AlgorithmSpec::Constant { value: 1.0 }).fit(&d.view(&idx)).unwrap();
        let w = [WeightedFit { weight: 1.0, fit }];
        let r = true_risk_oracle(&w, &task, &LossFunction::ZeroOne, 500, &mut SeedStream::new(5)).unwrap();
        assert!(!r.exact);
        assert_eq!(r.warnings.len(), 1);
        // symmetric task: P(Y = 0) = 1/2
        assert!((r.value - 0.5).abs() < 4.0 * r.se.max(0.01));
    }
}
