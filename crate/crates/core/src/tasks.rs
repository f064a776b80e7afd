//! Synthetic data generators with known (or cheaply approximated) risks.

use rand_distr::StudentT;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{sigmoid, FittedSubject, LossFunction, PredictionRule};
use crate::rng::SeedStream;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    /// No features; targets `Z ~ N(mean, variance)`.
    GaussianLocation {
        #[serde(default)]
        mean: f64,
        variance: f64,
    },
    /// One feature `X = mean + x_scale * T` with `T ~ t(x_df)`, independent
    /// target `Y ~ N(mean, y_sd^2)`. Small `x_df` removes moments of `X`.
    SurrogateMean {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        x_scale: f64,
        x_df: f64,
        #[serde(default = "one")]
        y_sd: f64,
    },
    /// `X ~ N(0, I_p)`, `Y = <beta, X> + noise_sd * N(0, 1)`.
    LinearGaussian { beta: Vec<f64>, noise_sd: f64 },
    /// `X ~ N(0, I_p)`, `Y ~ Bernoulli(sigmoid(<beta, X>))` where `beta` has
    /// entries `+scale` at odd positions and `-scale` at even positions
    /// (counting from 1).
    LogisticLabels {
        p: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// One feature uniform on `{0, .., levels-1}` and
    /// `Y ~ Bernoulli(1/2 + delta (-1)^x)`. Duplicated feature values make
    /// nearest-neighbour rules memorize label noise.
    DiscreteLabels { levels: usize, delta: f64 },
}

/// Label of a pool point: an observed value, or the success probability of
/// a Bernoulli label (its expected loss is then computed exactly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Value(f64),
    Bernoulli(f64),
}

/// Fresh points used to approximate conditional risks.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPool {
    dim: usize,
    features: Vec<f64>,
    outcomes: Vec<Outcome>,
}

impl EvalPool {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Expected loss of `fit` at pool point `i`, averaging over a Bernoulli label.
    pub fn loss(&self, i: usize, fit: &FittedSubject, loss: &LossFunction) -> Result<f64> {
        let x = &self.features[i * self.dim..(i + 1) * self.dim];
        match self.outcomes[i] {
            Outcome::Value(y) => fit.loss(loss, x, y),
            Outcome::Bernoulli(p) => fit.bernoulli_loss(loss, x, p),
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        match self {
            TaskSpec::GaussianLocation { mean, variance } => {
                if !(mean.is_finite() && *variance >= 0.0 && variance.is_finite()) {
                    return bad(format!("gaussian_location needs finite mean and variance >= 0, got {mean}, {variance}"));
                }
            }
            TaskSpec::SurrogateMean { mean, x_scale, x_df, y_sd } => {
                if !(mean.is_finite() && *x_scale >= 0.0 && *x_df > 0.0 && *y_sd >= 0.0) {
                    return bad("surrogate_mean needs x_scale >= 0, x_df > 0, y_sd >= 0".into());
                }
            }
            TaskSpec::LinearGaussian { beta, noise_sd } => {
                if beta.is_empty() || !beta.iter().all(|b| b.is_finite()) || !(*noise_sd >= 0.0) {
                    return bad("linear_gaussian needs a nonempty finite beta and noise_sd >= 0".into());
                }
            }
            TaskSpec::LogisticLabels { p, scale } => {
                if *p == 0 || !scale.is_finite() {
                    return bad("logistic_labels needs p >= 1 and a finite scale".into());
                }
            }
            TaskSpec::DiscreteLabels { levels, delta } => {
                if *levels == 0 || !(delta.abs() <= 0.5) {
                    return bad("discrete_labels needs levels >= 1 and |delta| <= 0.5".into());
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            TaskSpec::GaussianLocation { .. } => 0,
            TaskSpec::SurrogateMean { .. } | TaskSpec::DiscreteLabels { .. } => 1,
            TaskSpec::LinearGaussian { beta, .. } => beta.len(),
            TaskSpec::LogisticLabels { p, .. } => *p,
        }
    }

    fn logistic_beta(p: usize, scale: f64) -> impl Iterator<Item = f64> {
        (0..p).map(move |j| if j % 2 == 0 { scale } else { -scale })
    }

    fn discrete_probability(x: usize, delta: f64) -> f64 {
        if x % 2 == 0 {
            0.5 + delta
        } else {
            0.5 - delta
        }
    }

    /// Draw features into `x` and return the label (or its probability).
    fn draw(&self, x: &mut Vec<f64>, rng: &mut SeedStream) -> Outcome {
        match self {
            TaskSpec::GaussianLocation { mean, variance } => {
                Outcome::Value(mean + variance.sqrt() * rng.standard_normal())
            }
            TaskSpec::SurrogateMean { mean, x_scale, x_df, y_sd } => {
                let t: f64 = rng.sample(&StudentT::new(*x_df).expect("validated df"));
                x.push(mean + x_scale * t);
                Outcome::Value(mean + y_sd * rng.standard_normal())
            }
            TaskSpec::LinearGaussian { beta, noise_sd } => {
                let mut s = 0.0;
                for b in beta {
                    let v = rng.standard_normal();
                    s += b * v;
                    x.push(v);
                }
                Outcome::Value(s + noise_sd * rng.standard_normal())
            }
            TaskSpec::LogisticLabels { p, scale } => {
                let mut s = 0.0;
                for b in Self::logistic_beta(*p, *scale) {
                    let v = rng.standard_normal();
                    s += b * v;
                    x.push(v);
                }
                Outcome::Bernoulli(sigmoid(s))
            }
            TaskSpec::DiscreteLabels { levels, delta } => {
                let level = rng.index_below(*levels);
                x.push(level as f64);
                Outcome::Bernoulli(Self::discrete_probability(level, *delta))
            }
        }
    }

    /// One point `(features, target)`.
    pub fn sample_point(&self, rng: &mut SeedStream) -> (Vec<f64>, f64) {
        let mut x = Vec::with_capacity(self.dim());
        let y = match self.draw(&mut x, rng) {
            Outcome::Value(y) => y,
            Outcome::Bernoulli(p) => rng.bernoulli(p),
        };
        (x, y)
    }

    /// `n` i.i.d. points.
    pub fn sample(&self, n: usize, rng: &mut SeedStream) -> Result<Dataset> {
        let dim = self.dim();
        let mut features = Vec::with_capacity(n * dim);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let y = match self.draw(&mut features, rng) {
                Outcome::Value(y) => y,
                Outcome::Bernoulli(p) => rng.bernoulli(p),
            };
            targets.push(y);
        }
        Dataset::new(dim, features, targets)
    }

    /// `n_mc` fresh points for Monte Carlo risk evaluation. Binary-label
    /// tasks keep the label probability instead of a draw.
    pub fn eval_pool(&self, n_mc: usize, rng: &mut SeedStream) -> EvalPool {
        let dim = self.dim();
        let mut features = Vec::with_capacity(n_mc * dim);
        let outcomes = (0..n_mc).map(|_| self.draw(&mut features, rng)).collect();
        EvalPool {
            dim,
            features,
            outcomes,
        }
    }

    /// Exact conditional risk `E[loss(Z) | fit]`, when available in closed form.
    pub fn exact_risk(&self, fit: &FittedSubject, loss: &LossFunction) -> Option<Result<f64>> {
        if let TaskSpec::DiscreteLabels { levels, delta } = self {
            return Some(Self::enumerate(*levels, *delta, fit, loss));
        }
        match fit {
            FittedSubject::Single(r) => self.rule_risk(r, loss),
            FittedSubject::Pair(a, b) => {
                let ra = self.rule_risk(a, loss)?;
                let rb = self.rule_risk(b, loss)?;
                Some(ra.and_then(|ra| rb.map(|rb| ra - rb)))
            }
        }
    }

    fn enumerate(levels: usize, delta: f64, fit: &FittedSubject, loss: &LossFunction) -> Result<f64> {
        let mut total = 0.0;
        for level in 0..levels {
            let x = [level as f64];
            let p = Self::discrete_probability(level, delta);
            total += fit.bernoulli_loss(loss, &x, p)?;
        }
        Ok(total / levels as f64)
    }

    /// Closed forms for a single rule: the second moment of the residual,
    /// then the loss-specific adjustment.
    fn rule_risk(&self, rule: &PredictionRule, loss: &LossFunction) -> Option<Result<f64>> {
        // (E[(Y - f(X))^2], E[Y], Var(Y)) for the rule f
        let (mse, mean_y, var_y) = match self {
            TaskSpec::GaussianLocation { mean, variance } => {
                let c = rule.predict(&[]);
                (variance + (mean - c) * (mean - c), *mean, *variance)
            }
            TaskSpec::SurrogateMean { mean, y_sd, .. } => {
                let c = rule.constant_prediction()?;
                (y_sd * y_sd + (mean - c) * (mean - c), *mean, y_sd * y_sd)
            }
            TaskSpec::LinearGaussian { beta, noise_sd } => {
                let (w, b) = match rule.constant_prediction() {
                    Some(c) => (vec![0.0; beta.len()], c),
                    None => rule.affine()?,
                };
                let dist: f64 = beta.iter().zip(&w).map(|(bj, wj)| (bj - wj) * (bj - wj)).sum();
                let var_y = noise_sd * noise_sd + beta.iter().map(|b| b * b).sum::<f64>();
                (noise_sd * noise_sd + dist + b * b, 0.0, var_y)
            }
            _ => return None,
        };
        match *loss {
            LossFunction::SquaredError => Some(Ok(mse)),
            LossFunction::ExcessSquared { a } => Some(Ok(mse - var_y - (mean_y - a) * (mean_y - a))),
            LossFunction::ZeroOne => None,
        }
    }
}
