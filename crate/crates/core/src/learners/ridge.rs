use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Model, PredictionRule, RuleKind, Scaler};
use crate::data::{Dataset, DatasetView, LossKind, LossMatrix};
use crate::error::{Error, Result};

/// Gap below which `1 - h_i` is treated as zero.
const LEVERAGE_TOLERANCE: f64 = 1e-12;

fn gram(train: &DatasetView<'_>, lambda: f64, scaler: Option<&Scaler>) -> (DMatrix<f64>, DVector<f64>) {
    let p = train.dim();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut scaled;
    for (x, y) in train.rows() {
        let x = match scaler {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        for a in 0..p {
            xty[a] += x[a] * y;
            for b in 0..=a {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
        xtx[(a, a)] += lambda;
    }
    (xtx, xty)
}

fn factor(a: DMatrix<f64>, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfiguration(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::SingularSystem(format!("X'X + {lambda} I is not positive definite")))?;
    // Cholesky::new accepts numerically singular matrices with tiny pivots.
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > max * 1e-10)) {
        return Err(Error::SingularSystem(format!(
            "X'X + {lambda} I is numerically singular"
        )));
    }
    Ok(chol)
}

pub(super) fn fit_weights(train: &DatasetView<'_>, lambda: f64, scaler: Option<&Scaler>) -> Result<Vec<f64>> {
    let (xtx, xty) = gram(train, lambda, scaler);
    let chol = factor(xtx, lambda)?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

/// Exact leave-one-out losses for (unstandardized, intercept-free) ridge
/// regression together with the n leave-one-out rules.
///
/// With `M = (X'X + lambda I)^-1` and `w = M X'y`, removing point i gives
/// `w_i = w + M x_i (<w, x_i> - y_i) / (1 - h_i)` where `h_i = x_i' M x_i`.
/// One p x p factorization plus O(n p^2) work in total.
pub fn ridge_loocv_fit(data: &Dataset, lambda: f64) -> Result<(LossMatrix, Vec<PredictionRule>)> {
    let n = data.len();
    let p = data.dim();
    if p == 0 {
        return Err(Error::InvalidConfiguration("ridge needs at least one feature".into()));
    }
    if p > super::MAX_LINEAR_FEATURES {
        return Err(Error::InvalidConfiguration(format!(
            "{p} features exceeds the linear-learner limit"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let (xtx, xty) = gram(&data.view(&all), lambda, None);
    let chol = factor(xtx, lambda)?;
    let m = chol.inverse();
    let w = &m * &xty;

    let mut losses = Vec::with_capacity(n);
    let mut rules = Vec::with_capacity(n);
    for i in 0..n {
        let x = DVector::from_column_slice(data.features(i));
        let y = data.target(i);
        let mx = &m * &x;
        let h = x.dot(&mx);
        let gap = 1.0 - h;
        if gap.abs() < LEVERAGE_TOLERANCE {
            return Err(Error::LeverageSingularity { index: i, gap });
        }
        let wi = &w + mx * ((w.dot(&x) - y) / gap);
        let r = y - wi.dot(&x);
        losses.push(r * r);
        rules.push(PredictionRule::new(
            RuleKind::Ridge,
            Model::Linear {
                weights: wi.iter().copied().collect(),
                bias: 0.0,
            },
            None,
            n - 1,
        ));
    }
    let matrix = LossMatrix::new(losses, (0..n).collect(), n, LossKind::Plain)?;
    Ok((matrix, rules))
}

/// Leave-one-out ridge losses as a loss matrix with `k = n`.
pub fn ridge_loocv_losses(data: &Dataset, lambda: f64) -> Result<LossMatrix> {
    ridge_loocv_fit(data, lambda).map(|(m, _)| m)
}
