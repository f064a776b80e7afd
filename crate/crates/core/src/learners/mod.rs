//! Built-in learning algorithms and loss functions.
//!
//! Algorithms are described by [`AlgorithmSpec`], which deserializes from a
//! small JSON object such as `{"algo": "ridge", "lambda": 1.0, "standardize": true}`.
//! Fitting produces an immutable [`PredictionRule`].

mod knn;
mod logistic;
mod ridge;

use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, DatasetView};
use crate::error::{Error, Result};
use crate::summation::pairwise_sum;

pub use logistic::{logistic_gradient, logistic_objective};
pub use ridge::{ridge_loocv_fit, ridge_loocv_losses};

/// Largest feature dimension accepted by the linear learners.
pub const MAX_LINEAR_FEATURES: usize = 64;

fn default_k_neighbors() -> usize {
    5
}
fn default_l2() -> f64 {
    0.01
}
fn default_iterations() -> usize {
    500
}
fn default_step() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    /// Always predicts `value`, ignoring the training data.
    Constant { value: f64 },
    /// Predicts the mean training target.
    SampleMean,
    /// Predicts the mean of the first training feature.
    SurrogateMean,
    /// `argmin ||y - Xw||^2 + lambda ||w||^2`, no intercept.
    Ridge {
        lambda: f64,
        #[serde(default)]
        standardize: bool,
    },
    /// Mean target of the `k_neighbors` nearest training points (Euclidean);
    /// distance ties go to the smaller training index.
    Knn {
        #[serde(default = "default_k_neighbors")]
        k_neighbors: usize,
        #[serde(default)]
        standardize: bool,
    },
    /// l2-penalized logistic regression by full-batch gradient descent on the
    /// summed log-loss, with step `step / n` for `iterations` rounds.
    Logistic {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "default_true")]
        intercept: bool,
        #[serde(default)]
        standardize: bool,
    },
}

impl AlgorithmSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn ridge(lambda: f64) -> Self {
        AlgorithmSpec::Ridge {
            lambda,
            standardize: false,
        }
    }

    pub fn knn(k_neighbors: usize) -> Self {
        AlgorithmSpec::Knn {
            k_neighbors,
            standardize: false,
        }
    }

    pub fn logistic(l2: f64) -> Self {
        AlgorithmSpec::Logistic {
            l2,
            iterations: default_iterations(),
            step: default_step(),
            intercept: true,
            standardize: false,
        }
    }

    fn standardize(&self) -> bool {
        match self {
            AlgorithmSpec::Ridge { standardize, .. }
            | AlgorithmSpec::Knn { standardize, .. }
            | AlgorithmSpec::Logistic { standardize, .. } => *standardize,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LossFunction {
    SquaredError,
    /// Misclassification with the prediction thresholded at 0.5.
    ZeroOne,
    /// `(y - prediction)^2 - (y - a)^2`: excess over the constant rule `a`.
    ExcessSquared { a: f64 },
}

impl LossFunction {
    /// Loss of `prediction` against `target`.
    pub fn eval(&self, prediction: f64, target: f64) -> f64 {
        match *self {
            LossFunction::SquaredError => (target - prediction) * (target - prediction),
            LossFunction::ZeroOne => {
                let label = if prediction > 0.5 { 1.0 } else { 0.0 };
                if label == target {
                    0.0
                } else {
                    1.0
                }
            }
            LossFunction::ExcessSquared { a } => {
                (target - prediction) * (target - prediction) - (target - a) * (target - a)
            }
        }
    }
}

/// Per-feature affine standardization learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaler {
    /// Mean and population standard deviation of each training feature;
    /// constant features keep scale 1.
    pub fn fit(train: &DatasetView<'_>) -> Self {
        let p = train.dim();
        let n = train.len() as f64;
        let mut mean = vec![0.0; p];
        let mut scale = vec![0.0; p];
        let mut column = vec![0.0; train.len()];
        for j in 0..p {
            for (r, (x, _)) in train.rows().enumerate() {
                column[r] = x[j];
            }
            let m = pairwise_sum(&column) / n;
            let var = column.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Model {
    Constant(f64),
    Linear { weights: Vec<f64>, bias: f64 },
    Logistic { weights: Vec<f64>, bias: f64 },
    Knn(knn::KnnModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Constant,
    SampleMean,
    SurrogateMean,
    Ridge,
    Knn,
    Logistic,
}

/// A fitted prediction rule. Prediction is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRule {
    kind: RuleKind,
    model: Model,
    scaler: Option<Scaler>,
    train_size: usize,
}

impl PredictionRule {
    pub(crate) fn new(kind: RuleKind, model: Model, scaler: Option<Scaler>, train_size: usize) -> Self {
        Self {
            kind,
            model,
            scaler,
            train_size,
        }
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// Real-valued prediction (a probability for logistic rules).
    pub fn predict(&self, features: &[f64]) -> f64 {
        match &self.scaler {
            Some(s) => self.predict_scaled(&s.apply(features)),
            None => self.predict_scaled(features),
        }
    }

    fn predict_scaled(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Constant(c) => *c,
            Model::Linear { weights, bias } => dot(weights, x) + bias,
            Model::Logistic { weights, bias } => sigmoid(dot(weights, x) + bias),
            Model::Knn(m) => m.predict(x),
        }
    }

    /// The prediction if it does not depend on the features.
    pub fn constant_prediction(&self) -> Option<f64> {
        match self.model {
            Model::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// `(w, b)` with prediction `<w, x> + b` in raw feature units, for linear rules.
    pub fn affine(&self) -> Option<(Vec<f64>, f64)> {
        let Model::Linear { weights, bias } = &self.model else {
            return None;
        };
        match &self.scaler {
            None => Some((weights.clone(), *bias)),
            Some(s) => {
                let w: Vec<f64> = weights.iter().zip(&s.scale).map(|(w, sc)| w / sc).collect();
                let b = bias - w.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
                Some((w, b))
            }
        }
    }

    fn check_loss(&self, loss: &LossFunction, target: f64) -> Result<()> {
        if matches!(loss, LossFunction::ZeroOne) {
            if self.kind == RuleKind::SurrogateMean {
                return Err(Error::InvalidConfiguration(
                    "zero_one loss needs a classifying rule; surrogate_mean predicts a feature mean".into(),
                ));
            }
            if target != 0.0 && target != 1.0 {
                return Err(Error::InvalidConfiguration(format!(
                    "zero_one loss needs 0/1 targets, got {target}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Fit `spec` on the training rows in `train`.
pub fn fit(spec: &AlgorithmSpec, train: &DatasetView<'_>) -> Result<PredictionRule> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let m = train.len();
    let needs_features = matches!(
        spec,
        AlgorithmSpec::SurrogateMean | AlgorithmSpec::Ridge { .. } | AlgorithmSpec::Logistic { .. }
    );
    if needs_features && train.dim() == 0 {
        return Err(Error::InvalidConfiguration(format!("{spec:?} needs at least one feature")));
    }
    if matches!(spec, AlgorithmSpec::Ridge { .. } | AlgorithmSpec::Logistic { .. })
        && train.dim() > MAX_LINEAR_FEATURES
    {
        return Err(Error::InvalidConfiguration(format!(
            "{} features exceeds the linear-learner limit of {MAX_LINEAR_FEATURES}",
            train.dim()
        )));
    }
    let scaler = spec.standardize().then(|| Scaler::fit(train));
    let (kind, model) = match spec {
        AlgorithmSpec::Constant { value } => (RuleKind::Constant, Model::Constant(*value)),
        AlgorithmSpec::SampleMean => {
            let ys: Vec<f64> = train.rows().map(|(_, y)| y).collect();
            (RuleKind::SampleMean, Model::Constant(pairwise_sum(&ys) / m as f64))
        }
        AlgorithmSpec::SurrogateMean => {
            let xs: Vec<f64> = train.rows().map(|(x, _)| x[0]).collect();
            (RuleKind::SurrogateMean, Model::Constant(pairwise_sum(&xs) / m as f64))
        }
        AlgorithmSpec::Ridge { lambda, .. } => {
            let weights = ridge::fit_weights(train, *lambda, scaler.as_ref())?;
            (RuleKind::Ridge, Model::Linear { weights, bias: 0.0 })
        }
        AlgorithmSpec::Knn { k_neighbors, .. } => {
            if *k_neighbors == 0 {
                return Err(Error::InvalidConfiguration("k_neighbors must be positive".into()));
            }
            (
                RuleKind::Knn,
                Model::Knn(knn::KnnModel::new(train, *k_neighbors, scaler.as_ref())),
            )
        }
        AlgorithmSpec::Logistic {
            l2,
            iterations,
            step,
            intercept,
            ..
        } => {
            if !train.rows().all(|(_, y)| y == 0.0 || y == 1.0) {
                return Err(Error::InvalidInput("logistic regression needs 0/1 targets".into()));
            }
            let (weights, bias) =
                logistic::fit(train, *l2, *iterations, *step, *intercept, scaler.as_ref());
            (RuleKind::Logistic, Model::Logistic { weights, bias })
        }
    };
    Ok(PredictionRule::new(kind, model, scaler, m))
}

/// Loss of `rule` on one point.
pub fn point_loss(rule: &PredictionRule, loss: &LossFunction, point: &DataPoint) -> Result<f64> {
    loss_at(rule, loss, &point.features, point.target)
}

pub(crate) fn loss_at(rule: &PredictionRule, loss: &LossFunction, x: &[f64], y: f64) -> Result<f64> {
    rule.check_loss(loss, y)?;
    let l = loss.eval(rule.predict(x), y);
    if !l.is_finite() {
        return Err(Error::InvalidInput("non-finite loss".into()));
    }
    Ok(l)
}

/// Loss averaged over a `Bernoulli(p)` label, predicting once.
fn bernoulli_loss_at(rule: &PredictionRule, loss: &LossFunction, x: &[f64], p: f64) -> Result<f64> {
    rule.check_loss(loss, 1.0)?;
    let prediction = rule.predict(x);
    let l = p * loss.eval(prediction, 1.0) + (1.0 - p) * loss.eval(prediction, 0.0);
    if !l.is_finite() {
        return Err(Error::InvalidInput("non-finite loss".into()));
    }
    Ok(l)
}

/// What is being evaluated: one algorithm, or the loss difference of two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Single(AlgorithmSpec),
    /// Loss of the first minus loss of the second; negative favours the first.
    Pair(AlgorithmSpec, AlgorithmSpec),
}

impl Subject {
    pub fn fit(&self, train: &DatasetView<'_>) -> Result<FittedSubject> {
        Ok(match self {
            Subject::Single(a) => FittedSubject::Single(fit(a, train)?),
            Subject::Pair(a, b) => FittedSubject::Pair(fit(a, train)?, fit(b, train)?),
        })
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, Subject::Pair(..))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedSubject {
    Single(PredictionRule),
    Pair(PredictionRule, PredictionRule),
}

impl FittedSubject {
    pub fn loss(&self, loss: &LossFunction, x: &[f64], y: f64) -> Result<f64> {
        match self {
            FittedSubject::Single(r) => loss_at(r, loss, x, y),
            FittedSubject::Pair(a, b) => Ok(loss_at(a, loss, x, y)? - loss_at(b, loss, x, y)?),
        }
    }

    /// Expected loss when the label at `x` is `Bernoulli(p)`.
    pub fn bernoulli_loss(&self, loss: &LossFunction, x: &[f64], p: f64) -> Result<f64> {
        match self {
            FittedSubject::Single(r) => bernoulli_loss_at(r, loss, x, p),
            FittedSubject::Pair(a, b) => Ok(bernoulli_loss_at(a, loss, x, p)? - bernoulli_loss_at(b, loss, x, p)?),
        }
    }

    pub fn rules(&self) -> Vec<&PredictionRule> {
        match self {
            FittedSubject::Single(r) => vec![r],
            FittedSubject::Pair(a, b) => vec![a, b],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn sample_mean_of_targets() {
        let d = Dataset::from_targets(vec![1.0, 2.0, 3.0]).unwrap();
        let idx = all(3);
        let r = fit(&AlgorithmSpec::SampleMean, &d.view(&idx)).unwrap();
        assert_eq!(r.constant_prediction(), Some(2.0));
    }

    #[test]
    fn surrogate_mean_uses_first_feature() {
        let d = Dataset::new(2, vec![1.0, 9.0, 3.0, 9.0], vec![100.0, 100.0]).unwrap();
        let idx = all(2);
        let r = fit(&AlgorithmSpec::SurrogateMean, &d.view(&idx)).unwrap();
        assert_eq!(r.predict(&[0.0, 0.0]), 2.0);
        let scalar = Dataset::from_targets(vec![1.0, 2.0]).unwrap();
        assert!(fit(&AlgorithmSpec::SurrogateMean, &scalar.view(&idx)).is_err());
    }

    #[test]
    fn loss_values() {
        assert_eq!(LossFunction::SquaredError.eval(1.5, 1.0), 0.25);
        assert_eq!(LossFunction::ZeroOne.eval(0.9, 1.0), 0.0);
        assert_eq!(LossFunction::ZeroOne.eval(0.2, 1.0), 1.0);
        let (z, m, a) = (0.7, -0.3, 1.0);
        assert_eq!(
            LossFunction::ExcessSquared { a }.eval(m, z),
            (z - m) * (z - m) - (z - a) * (z - a)
        );
    }

    #[test]
    fn zero_one_rejects_non_binary_targets_and_surrogate() {
        let d = Dataset::new(1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let idx = all(2);
        let r = fit(&AlgorithmSpec::Constant { value: 1.0 }, &d.view(&idx)).unwrap();
        let bad = DataPoint::new(vec![0.0], 2.0);
        assert!(matches!(
            point_loss(&r, &LossFunction::ZeroOne, &bad),
            Err(Error::InvalidConfiguration(_))
        ));
        let s = fit(&AlgorithmSpec::SurrogateMean, &d.view(&idx)).unwrap();
        let ok = DataPoint::new(vec![0.0], 1.0);
        assert!(point_loss(&s, &LossFunction::ZeroOne, &ok).is_err());
        assert_eq!(point_loss(&r, &LossFunction::ZeroOne, &ok).unwrap(), 0.0);
    }

    #[test]
    fn json_spec_parsing() {
        let s = AlgorithmSpec::from_json(r#"{"algo": "ridge", "lambda": 1.0, "standardize": true}"#).unwrap();
        assert_eq!(
            s,
            AlgorithmSpec::Ridge {
                lambda: 1.0,
                standardize: true
            }
        );
        let k = AlgorithmSpec::from_json(r#"{"algo": "knn"}"#).unwrap();
        assert_eq!(k, AlgorithmSpec::knn(5));
        assert!(AlgorithmSpec::from_json(r#"{"algo": "forest"}"#).is_err());
    }

    #[test]
    fn standardized_ridge_affine_matches_predict() {
        let d = Dataset::new(
            2,
            vec![1.0, 10.0, 2.0, 30.0, 4.0, 20.0, 3.0, 50.0],
            vec![1.0, 2.0, 2.5, 4.0],
        )
        .unwrap();
        let idx = all(4);
        let r = fit(
            &AlgorithmSpec::Ridge {
                lambda: 0.5,
                standardize: true,
            },
            &d.view(&idx),
        )
        .unwrap();
        let (w, b) = r.affine().unwrap();
        let x = [2.5, 17.0];
        assert!((r.predict(&x) - (dot(&w, &x) + b)).abs() < 1e-12);
    }
}
