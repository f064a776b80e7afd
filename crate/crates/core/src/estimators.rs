//! Within-fold and all-pairs variance estimators for the CV error.

use serde::{Deserialize, Serialize};

use crate::data::LossMatrix;
use crate::error::{Error, Result};
use crate::summation::{pairwise_sum, pairwise_sum_by, sample_variance, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    WithinFold,
    AllPairs,
    WithinFoldBinary,
    AllPairsBinary,
    BruteForceWithin,
    BruteForceAllPairs,
}

/// Which estimator to use when building an interval or test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Within-fold; needs every fold to hold at least two points.
    In,
    /// All-pairs; defined for any `k`, including leave-one-out.
    Out,
}

/// Which literal formula [`brute_force_reference`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Within,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub kind: VarianceKind,
    pub k: usize,
    pub n: usize,
    /// Set when fold sizes differ. The within-fold estimator then averages
    /// per-fold sample variances with weight `1/k`.
    pub uneven_folds: bool,
}

impl VarianceEstimate {
    fn new(value: f64, kind: VarianceKind, m: &LossMatrix) -> Self {
        let sizes = m.fold_sizes();
        Self {
            value: value.max(0.0),
            kind,
            k: m.k(),
            n: m.n(),
            uneven_folds: sizes.iter().any(|&s| s != sizes[0]),
        }
    }
}

fn check_within(m: &LossMatrix) -> Result<()> {
    for (fold, size) in m.fold_sizes().into_iter().enumerate() {
        if size < 2 {
            return Err(Error::WithinFoldUndefined { fold, size });
        }
    }
    Ok(())
}

/// Within-fold estimator: `(1/k) sum_j s_j^2` with `s_j^2` the sample
/// variance (denominator `n_j - 1`) of fold `j`'s losses.
pub fn sigma_in(m: &LossMatrix) -> Result<VarianceEstimate> {
    if m.is_binary() {
        sigma_in_binary(m)
    } else {
        sigma_in_general(m)
    }
}

pub fn sigma_in_general(m: &LossMatrix) -> Result<VarianceEstimate> {
    check_within(m)?;
    let per_fold: Vec<f64> = m.by_fold().iter().map(|g| sample_variance(g)).collect();
    let value = pairwise_sum(&per_fold) / m.k() as f64;
    Ok(VarianceEstimate::new(value, VarianceKind::WithinFold, m))
}

/// `(1/k) sum_j n_j/(n_j-1) p_j (1 - p_j)` for 0/1 losses.
pub fn sigma_in_binary(m: &LossMatrix) -> Result<VarianceEstimate> {
    if !m.is_binary() {
        return Err(Error::InvalidInput("binary fast path on non-binary losses".into()));
    }
    check_within(m)?;
    let sizes = m.fold_sizes();
    let terms: Vec<f64> = m
        .fold_means()
        .iter()
        .zip(&sizes)
        .map(|(&p, &nj)| nj as f64 / (nj - 1) as f64 * p * (1.0 - p))
        .collect();
    let value = pairwise_sum(&terms) / m.k() as f64;
    Ok(VarianceEstimate::new(value, VarianceKind::WithinFoldBinary, m))
}

fn check_r_hat(m: &LossMatrix, r_hat: f64) -> Result<()> {
    let mean = m.mean();
    if !((r_hat - mean).abs() <= 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::InconsistentInputs(format!(
            "r_hat {r_hat} differs from the mean loss {mean}"
        )));
    }
    Ok(())
}

/// All-pairs estimator: `(1/n) sum_i (h_i - r_hat)^2`.
pub fn sigma_out(m: &LossMatrix, r_hat: f64) -> Result<VarianceEstimate> {
    if m.is_binary() {
        sigma_out_binary(m, r_hat)
    } else {
        sigma_out_general(m, r_hat)
    }
}

pub fn sigma_out_general(m: &LossMatrix, r_hat: f64) -> Result<VarianceEstimate> {
    check_r_hat(m, r_hat)?;
    let h = m.losses();
    // Constant losses give exactly zero, so the degenerate branch is reachable.
    if h.iter().all(|&x| x == h[0]) {
        return Ok(VarianceEstimate::new(0.0, VarianceKind::AllPairs, m));
    }
    let n = m.n() as f64;
    let value = pairwise_sum_by(h, &|x| (x - r_hat) * (x - r_hat)) / n;
    Ok(VarianceEstimate::new(value, VarianceKind::AllPairs, m))
}

/// `r_hat (1 - r_hat)` for 0/1 losses.
pub fn sigma_out_binary(m: &LossMatrix, r_hat: f64) -> Result<VarianceEstimate> {
    if !m.is_binary() {
        return Err(Error::InvalidInput("binary fast path on non-binary losses".into()));
    }
    check_r_hat(m, r_hat)?;
    Ok(VarianceEstimate::new(r_hat * (1.0 - r_hat), VarianceKind::AllPairsBinary, m))
}

/// Dispatch on `kind`, using the matrix mean as `r_hat`.
pub fn estimate(m: &LossMatrix, kind: EstimatorKind) -> Result<VarianceEstimate> {
    match kind {
        EstimatorKind::In => sigma_in(m),
        EstimatorKind::Out => sigma_out(m, m.mean()),
    }
}

/// Literal evaluation of the displayed estimator formulas with compensated
/// summation and no algebraic shortcuts; an independent check on the fast
/// routes.
///
/// `Within`: `(1/k) sum_j [1/(n_j - 1)] sum_{i in fold j} (h_i - mean_j)^2`.
/// `AllPairs`: `(1/k) sum_j (k/n) sum_{i in fold j} (h_i - r_hat)^2`.
pub fn brute_force_reference(m: &LossMatrix, kind: ReferenceKind) -> Result<VarianceEstimate> {
    let k = m.k();
    let n = m.n();
    let groups = m.by_fold();
    match kind {
        ReferenceKind::Within => {
            check_within(m)?;
            let mut outer = CompensatedSum::default();
            for g in &groups {
                let mean = g.iter().copied().collect::<CompensatedSum>().value() / g.len() as f64;
                let ss = g.iter().map(|h| (h - mean) * (h - mean)).collect::<CompensatedSum>();
                outer.add(ss.value() / (g.len() - 1) as f64);
            }
            Ok(VarianceEstimate::new(outer.value() / k as f64, VarianceKind::BruteForceWithin, m))
        }
        ReferenceKind::AllPairs => {
            let r_hat = m.losses().iter().copied().collect::<CompensatedSum>().value() / n as f64;
            let mut outer = CompensatedSum::default();
            for g in &groups {
                let ss = g.iter().map(|h| (h - r_hat) * (h - r_hat)).collect::<CompensatedSum>();
                outer.add(k as f64 / n as f64 * ss.value());
            }
            Ok(VarianceEstimate::new(outer.value() / k as f64, VarianceKind::BruteForceAllPairs, m))
        }
    }
}

/// The pairwise form `(1/n^2) sum_{i, i'} (h_i - h_i')^2 / 2`, which equals
/// the all-pairs estimator exactly. O(n^2).
pub fn all_pairs_u_form(m: &LossMatrix) -> f64 {
    let h = m.losses();
    let n = h.len() as f64;
    let mut acc = CompensatedSum::default();
    for &a in h {
        for &b in h {
            acc.add(0.5 * (a - b) * (a - b));
        }
    }
    acc.value() / (n * n)
}
