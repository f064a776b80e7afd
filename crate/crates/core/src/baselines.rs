//! Alternative interval and test procedures: hold-out, the cross-validated
//! t-test, repeated train-validation (with and without the Nadeau–Bengio
//! correction) and the 5×2-fold CV test.
//!
//! Each returns a [`ProcedureRun`] holding its pivot, an interval-only
//! [`InferenceResult`], and the weighted fitted rules that define its own
//! target test error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{CvFit, WeightedFit};
use crate::data::{Dataset, FoldPair, LossMatrix};
use crate::error::{Error, Result};
use crate::inference::{InferenceResult, Pivot, ProcedureId, Reference};
use crate::learners::{FittedSubject, LossFunction, Subject};
use crate::rng::SeedStream;
use crate::summation::{mean, pairwise_sum_by};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Holdout,
    CvTtest,
    RepeatedTv,
    CorrectedRepeatedTv,
    FiveByTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Splits for repeated train-validation, replicates for 5×2, folds for
    /// the CV t-test.
    pub repetitions: usize,
    /// Validation share of each hold-out split.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, seed: u64) -> Self {
        Self {
            kind,
            repetitions: if kind == BaselineKind::FiveByTwo { 5 } else { 10 },
            holdout_fraction: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(Error::InsufficientRepetitions(format!(
                "{} repetitions; at least 2 are needed",
                self.repetitions
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "holdout_fraction {} is outside (0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProcedureRun {
    pub pivot: Pivot,
    pub result: InferenceResult,
    /// The procedure's own target: `sum w_j E[h(Z, train_j) | train_j]`.
    pub target: Vec<WeightedFit>,
}

pub const HOLDOUT_TARGET: &str = "conditional risk of the rule fitted on the hold-out training set";
pub const CV_TTEST_TARGET: &str = "unweighted mean of the k fold rules' conditional risks";
pub const REPEATED_TV_TARGET: &str = "mean conditional risk of the rules fitted on the r independent training splits";
pub const FIVE_BY_TWO_TARGET: &str =
    "mean conditional risk of all ten half-sample rules (the point estimate uses only the first)";

fn fit_and_score(
    data: &Dataset,
    train: &[usize],
    validation: &[usize],
    subject: &Subject,
    loss: &LossFunction,
) -> Result<(FittedSubject, Vec<f64>)> {
    let fit = subject.fit(&data.view(train))?;
    let losses = validation
        .iter()
        .map(|&i| fit.loss(loss, data.features(i), data.target(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, losses))
}

/// Hold-out split number `stream` under `seed`: the first
/// `n - floor(n (1 - fraction))` indices of a seeded shuffle validate, the
/// rest train. Both sides are returned in ascending order.
pub fn holdout_split(n: usize, fraction: f64, seed: u64, stream: u64) -> Result<FoldPair> {
    let train_size = (n as f64 * (1.0 - fraction)).floor() as usize;
    let val_size = n - train_size;
    if val_size < 2 {
        return Err(Error::InsufficientData(format!(
            "hold-out validation set of {val_size} point(s); need at least 2"
        )));
    }
    if train_size == 0 {
        return Err(Error::InsufficientData("hold-out training set is empty".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeedStream::substream(seed, stream).shuffle(&mut order);
    let mut validation = order[..val_size].to_vec();
    let mut train = order[val_size..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(FoldPair { train, validation })
}

/// `R̂` = mean validation loss, `σ̂² = (1/|S^c|) sum (h_i - R̂)^2`,
/// standard error `σ̂ sqrt(1/fraction) / sqrt(n)`.
pub fn holdout_pivot(validation_losses: &[f64], n: usize, fraction: f64) -> Result<Pivot> {
    if validation_losses.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "hold-out validation set of {} point(s); need at least 2",
            validation_losses.len()
        )));
    }
    let r_hat = mean(validation_losses);
    let var = pairwise_sum_by(validation_losses, &|h| (h - r_hat) * (h - r_hat)) / validation_losses.len() as f64;
    Ok(Pivot::new(
        r_hat,
        var.sqrt(),
        (1.0 / fraction).sqrt() / (n as f64).sqrt(),
        Reference::Normal,
    ))
}

fn finish(procedure: ProcedureId, pivot: Pivot, n: usize, alpha: f64, target: Vec<WeightedFit>, desc: &str) -> Result<ProcedureRun> {
    Ok(ProcedureRun {
        result: InferenceResult::interval(procedure, &pivot, n, alpha, desc)?,
        pivot,
        target,
    })
}

/// Hold-out procedure on its own seeded split.
pub fn holdout_procedure(
    data: &Dataset,
    subject: &Subject,
    loss: &LossFunction,
    spec: &BaselineSpec,
    alpha: f64,
) -> Result<ProcedureRun> {
    spec.validate()?;
    let split = holdout_split(data.len(), spec.holdout_fraction, spec.seed, 0)?;
    let (fit, losses) = fit_and_score(data, &split.train, &split.validation, subject, loss)?;
    let pivot = holdout_pivot(&losses, data.len(), spec.holdout_fraction)?;
    finish(
        ProcedureId::Holdout,
        pivot,
        data.len(),
        alpha,
        vec![WeightedFit { weight: 1.0, fit }],
        HOLDOUT_TARGET,
    )
}

/// Hold-out procedure reusing the first fold of a CV run: its training set
/// plays `S` and its validation fold `S^c`.
pub fn holdout_from_cv(cv: &CvFit, fraction: f64, alpha: f64) -> Result<ProcedureRun> {
    let m = &cv.run.losses;
    let losses: Vec<f64> = m.losses().iter().zip(m.folds()).filter(|(_, &f)| f == 0).map(|(&l, _)| l).collect();
    let pivot = holdout_pivot(&losses, m.n(), fraction)?;
    finish(
        ProcedureId::Holdout,
        pivot,
        m.n(),
        alpha,
        vec![WeightedFit {
            weight: 1.0,
            fit: cv.fits[0].clone(),
        }],
        HOLDOUT_TARGET,
    )
}

/// `σ̂² = sum_j (p_j - R̂)^2 / (k - 1)` over fold means `p_j`, standard error
/// `σ̂/√k`, `t_{k-1}` reference.
pub fn cv_ttest_pivot(r_hat: f64, fold_means: &[f64]) -> Result<Pivot> {
    let k = fold_means.len();
    if k < 2 {
        return Err(Error::InsufficientFolds(format!("{k} fold mean(s); need at least 2")));
    }
    let var = pairwise_sum_by(fold_means, &|p| (p - r_hat) * (p - r_hat)) / (k - 1) as f64;
    Ok(Pivot::new(
        r_hat,
        var.sqrt(),
        1.0 / (k as f64).sqrt(),
        Reference::StudentT { df: k as u64 - 1 },
    ))
}

/// Cross-validated t-test from a loss matrix (`R̂` is the overall mean loss).
pub fn cv_ttest_procedure(m: &LossMatrix, alpha: f64) -> Result<ProcedureRun> {
    let pivot = cv_ttest_pivot(m.mean(), &m.fold_means())?;
    finish(ProcedureId::CvTtest, pivot, m.n(), alpha, Vec::new(), CV_TTEST_TARGET)
}

/// Cross-validated t-test with its target (equal weights `1/k`).
pub fn cv_ttest_from_cv(cv: &CvFit, alpha: f64) -> Result<ProcedureRun> {
    let mut run = cv_ttest_procedure(&cv.run.losses, alpha)?;
    let k = cv.fits.len() as f64;
    run.target = cv
        .fits
        .iter()
        .map(|fit| WeightedFit {
            weight: 1.0 / k,
            fit: fit.clone(),
        })
        .collect();
    Ok(run)
}

/// Validation means and fitted rules of `r` independent hold-out splits.
#[derive(Debug, Clone)]
pub struct RepeatedSplits {
    pub split_means: Vec<f64>,
    pub fits: Vec<FittedSubject>,
    pub fraction: f64,
}

pub fn repeated_splits(data: &Dataset, subject: &Subject, loss: &LossFunction, spec: &BaselineSpec) -> Result<RepeatedSplits> {
    spec.validate()?;
    let n = data.len();
    let per_split: Vec<(FittedSubject, f64)> = (0..spec.repetitions)
        .into_par_iter()
        .map(|j| {
            let split = holdout_split(n, spec.holdout_fraction, spec.seed, j as u64)?;
            let (fit, losses) = fit_and_score(data, &split.train, &split.validation, subject, loss)
                .map_err(|e| e.in_fold(j))?;
            Ok((fit, mean(&losses)))
        })
        .collect::<Result<_>>()?;
    let (fits, split_means) = per_split.into_iter().unzip();
    Ok(RepeatedSplits {
        split_means,
        fits,
        fraction: spec.holdout_fraction,
    })
}

/// Uncorrected: `σ̂² = sum (p_j - R̂)^2 / (r - 1)`. Corrected: that times
/// `r (1/r + f/(1-f))`. Standard error `σ̂/√r`, `t_{r-1}` reference.
pub fn repeated_tv_pivot(split_means: &[f64], fraction: f64, corrected: bool) -> Result<Pivot> {
    let r = split_means.len();
    if r < 2 {
        return Err(Error::InsufficientRepetitions(format!("{r} split(s); need at least 2")));
    }
    let r_hat = mean(split_means);
    let mut var = pairwise_sum_by(split_means, &|p| (p - r_hat) * (p - r_hat)) / (r - 1) as f64;
    if corrected {
        var *= r as f64 * (1.0 / r as f64 + fraction / (1.0 - fraction));
    }
    Ok(Pivot::new(
        r_hat,
        var.sqrt(),
        1.0 / (r as f64).sqrt(),
        Reference::StudentT { df: r as u64 - 1 },
    ))
}

pub fn repeated_tv_from_splits(splits: &RepeatedSplits, n: usize, corrected: bool, alpha: f64) -> Result<ProcedureRun> {
    let pivot = repeated_tv_pivot(&splits.split_means, splits.fraction, corrected)?;
    let r = splits.fits.len() as f64;
    let target = splits
        .fits
        .iter()
        .map(|fit| WeightedFit {
            weight: 1.0 / r,
            fit: fit.clone(),
        })
        .collect();
    let id = if corrected {
        ProcedureId::CorrectedRepeatedTv
    } else {
        ProcedureId::RepeatedTv
    };
    finish(id, pivot, n, alpha, target, REPEATED_TV_TARGET)
}

pub fn repeated_tv_procedure(
    data: &Dataset,
    subject: &Subject,
    loss: &LossFunction,
    spec: &BaselineSpec,
    corrected: bool,
    alpha: f64,
) -> Result<ProcedureRun> {
    let splits = repeated_splits(data, subject, loss, spec)?;
    repeated_tv_from_splits(&splits, data.len(), corrected, alpha)
}

/// Half-sample error rates `(p_{1,j}, p_{2,j})` of one 2-fold replicate.
/// `p_{1,j}` evaluates the first half with the rule fitted on the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPair {
    pub p1: f64,
    pub p2: f64,
}

impl HalfPair {
    /// `s_j^2 = (p1 - p̄)^2 + (p2 - p̄)^2`.
    pub fn s2(&self) -> f64 {
        let bar = 0.5 * (self.p1 + self.p2);
        (self.p1 - bar) * (self.p1 - bar) + (self.p2 - bar) * (self.p2 - bar)
    }
}

/// `R̂ = p_{1,1}`, `σ̂² = (1/r) sum s_j^2`, standard error `σ̂` (no `1/√n`),
/// `t_r` reference.
pub fn five_by_two_pivot(pairs: &[HalfPair]) -> Result<Pivot> {
    let r = pairs.len();
    if r < 2 {
        return Err(Error::InsufficientRepetitions(format!("{r} replicate(s); need at least 2")));
    }
    let s2: Vec<f64> = pairs.iter().map(HalfPair::s2).collect();
    let var = mean(&s2);
    Ok(Pivot::new(pairs[0].p1, var.sqrt(), 1.0, Reference::StudentT { df: r as u64 }))
}

pub fn five_by_two_procedure(
    data: &Dataset,
    subject: &Subject,
    loss: &LossFunction,
    spec: &BaselineSpec,
    alpha: f64,
) -> Result<ProcedureRun> {
    spec.validate()?;
    let n = data.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("5x2 CV needs n >= 4, got {n}")));
    }
    let first = n.div_ceil(2);
    let per_rep: Vec<(HalfPair, FittedSubject, FittedSubject)> = (0..spec.repetitions)
        .into_par_iter()
        .map(|j| {
            let mut order: Vec<usize> = (0..n).collect();
            SeedStream::substream(spec.seed, j as u64).shuffle(&mut order);
            let mut a = order[..first].to_vec();
            let mut b = order[first..].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            let (fit1, l1) = fit_and_score(data, &b, &a, subject, loss).map_err(|e| e.in_fold(2 * j))?;
            let (fit2, l2) = fit_and_score(data, &a, &b, subject, loss).map_err(|e| e.in_fold(2 * j + 1))?;
            Ok((
                HalfPair {
                    p1: mean(&l1),
                    p2: mean(&l2),
                },
                fit1,
                fit2,
            ))
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<HalfPair> = per_rep.iter().map(|(p, _, _)| *p).collect();
    let pivot = five_by_two_pivot(&pairs)?;
    let w = 1.0 / (2 * spec.repetitions) as f64;
    let target = per_rep
        .into_iter()
        .flat_map(|(_, f1, f2)| [f1, f2])
        .map(|fit| WeightedFit { weight: w, fit })
        .collect();
    finish(ProcedureId::FiveByTwo, pivot, n, alpha, target, FIVE_BY_TWO_TARGET)
}

/// Run any baseline from scratch. `CvTtest` builds a seeded `repetitions`-fold
/// partition.
pub fn run_baseline(
    data: &Dataset,
    subject: &Subject,
    loss: &LossFunction,
    spec: &BaselineSpec,
    alpha: f64,
) -> Result<ProcedureRun> {
    spec.validate()?;
    match spec.kind {
        BaselineKind::Holdout => holdout_procedure(data, subject, loss, spec, alpha),
        BaselineKind::CvTtest => {
            let partition = crate::data::make_partition(data.len(), spec.repetitions, spec.seed, true)?;
            let cv = crate::cv::cross_validate(data, &partition, subject, loss)?;
            cv_ttest_from_cv(&cv, alpha)
        }
        BaselineKind::RepeatedTv => repeated_tv_procedure(data, subject, loss, spec, false, alpha),
        BaselineKind::CorrectedRepeatedTv => repeated_tv_procedure(data, subject, loss, spec, true, alpha),
        BaselineKind::FiveByTwo => five_by_two_procedure(data, subject, loss, spec, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::t_quantile;
    use crate::learners::AlgorithmSpec;

    #[test]
    fn holdout_population_variance() {
        let p = holdout_pivot(&[0.0, 1.0], 20, 0.1).unwrap();
        assert_eq!(p.sigma_hat * p.sigma_hat, 0.25);
        assert!((p.se - 0.5 * 10f64.sqrt() / 20f64.sqrt()).abs() < 1e-15);
        assert!(holdout_pivot(&[1.0], 20, 0.1).is_err());
    }

    #[test]
    fn cv_ttest_hand_example() {
        let means: Vec<f64> = (1..=10).map(f64::from).collect();
        let p = cv_ttest_pivot(5.5, &means).unwrap();
        assert!((p.sigma_hat * p.sigma_hat - 55.0 / 6.0).abs() < 1e-12);
        assert_eq!(p.reference, Reference::StudentT { df: 9 });
        let (lo, hi) = p.interval(0.05).unwrap();
        let half = t_quantile(0.975, 9).unwrap() * p.sigma_hat / 10f64.sqrt();
        assert!((hi - lo - 2.0 * half).abs() < 1e-12);
        assert!(cv_ttest_pivot(1.0, &[1.0]).is_err());
    }

    #[test]
    fn corrected_width_ratio() {
        let means = [0.1, 0.3, 0.2, 0.25, 0.15, 0.22, 0.18, 0.35, 0.05, 0.2];
        let u = repeated_tv_pivot(&means, 0.1, false).unwrap();
        let c = repeated_tv_pivot(&means, 0.1, true).unwrap();
        let ratio = c.se / u.se;
        assert!((ratio - (10.0f64 * (0.1 + 0.1 / 0.9)).sqrt()).abs() < 1e-12);
        assert!((ratio - 1.4530).abs() < 1e-4);
    }

    #[test]
    fn five_by_two_identity_and_scale() {
        let pairs = [
            HalfPair { p1: 0.3, p2: 0.1 },
            HalfPair { p1: 0.2, p2: 0.25 },
            HalfPair { p1: 0.4, p2: 0.3 },
            HalfPair { p1: 0.1, p2: 0.15 },
            HalfPair { p1: 0.2, p2: 0.2 },
        ];
        for p in &pairs {
            assert!((p.s2() - (p.p1 - p.p2).powi(2) / 2.0).abs() < 1e-15);
        }
        let pv = five_by_two_pivot(&pairs).unwrap();
        assert_eq!(pv.r_hat, 0.3);
        assert_eq!(pv.se, pv.sigma_hat);
        assert_eq!(pv.reference, Reference::StudentT { df: 5 });
    }

    #[test]
    fn splits_differ_across_repetitions() {
        let a = holdout_split(40, 0.1, 7, 0).unwrap();
        let b = holdout_split(40, 0.1, 7, 1).unwrap();
        assert_ne!(a.validation, b.validation);
        assert_eq!(a.validation.len(), 4);
        assert_eq!(a.train.len(), 36);
        assert!(holdout_split(10, 0.1, 7, 0).is_err());
    }

    #[test]
    fn constant_losses_degenerate() {
        let d = Dataset::from_targets(vec![1.0; 40]).unwrap();
        let s = Subject::Single(AlgorithmSpec::SampleMean);
        for kind in [
            BaselineKind::Holdout,
            BaselineKind::CvTtest,
            BaselineKind::RepeatedTv,
            BaselineKind::CorrectedRepeatedTv,
            BaselineKind::FiveByTwo,
        ] {
            let r = run_baseline(&d, &s, &LossFunction::SquaredError, &BaselineSpec::new(kind, 3), 0.05).unwrap();
            assert!(r.result.degenerate, "{kind:?}");
            assert_eq!(r.result.ci_low, r.result.ci_high);
        }
    }

    #[test]
    fn five_by_two_odd_n_and_targets() {
        let d = Dataset::from_targets((0..9).map(f64::from).collect()).unwrap();
        let s = Subject::Single(AlgorithmSpec::SampleMean);
        let r = five_by_two_procedure(&d, &s, &LossFunction::SquaredError, &BaselineSpec::new(BaselineKind::FiveByTwo, 1), 0.05)
            .unwrap();
        assert_eq!(r.target.len(), 10);
        assert!(r.target.iter().all(|w| w.weight == 0.1));
        let train_sizes: Vec<usize> = r.target.iter().map(|w| w.fit.rules()[0].train_size()).collect();
        assert_eq!(&train_sizes[..2], &[4, 5]);
    }
}
