//! Monte Carlo estimates of stability functionals and variance parameters.
//!
//! For training size `m` and i.i.d. `Z0, Z0', Z_1..Z_m`:
//!
//! * mean-square stability `γ_ms = E[(h(Z0, Z) - h(Z0, Z^i))^2]`, where `Z^i`
//!   replaces `Z_i` by `Z0'` (one uniformly drawn `i` per replicate, or all
//!   `i` in exhaustive mode);
//! * loss stability `γ_loss`, the same with `h' = h - E[h | train]`;
//! * fourth-moment loss stability `γ_4`, with fourth powers;
//! * `σ² = Var(E[h | Z0])`, `σ̃² = E[Var(h | train)]` and the conditional
//!   variance `E[Var_{Z0}(h - h̄)]`, from a crossed design of test points and
//!   training sets.
//!
//! Conditional risks come from the task's closed form when one exists and
//! otherwise from an inner pool of fresh points shared by both rules.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{cross_validate, true_risk_oracle};
use crate::data::{make_partition, DataPoint};
use crate::error::{Error, Result};
use crate::learners::{FittedSubject, LossFunction, Subject};
use crate::rng::SeedStream;
use crate::summation::{mean, mean_and_se, sample_variance};
use crate::tasks::TaskSpec;

/// Largest training size for which exhaustive swap averaging is allowed.
pub const EXHAUSTIVE_LIMIT: usize = 50;

fn default_inner() -> usize {
    200
}
fn default_blocks() -> usize {
    20
}
fn default_block_test_points() -> usize {
    100
}
fn default_block_train_sets() -> usize {
    10
}
fn default_n_mc() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub n: usize,
    pub k: usize,
    /// Swap replicates for the stability functionals.
    pub reps: usize,
    /// Inner pool size for `E[h | train]` when no closed form exists.
    #[serde(default = "default_inner")]
    pub inner: usize,
    #[serde(default)]
    pub exhaustive: bool,
    /// Independent blocks of the crossed design; standard errors come from
    /// the spread across blocks.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_block_test_points")]
    pub block_test_points: usize,
    #[serde(default = "default_block_train_sets")]
    pub block_train_sets: usize,
    /// Pool size for the conditional-risk target in the variance-ratio diagnostic.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    pub seed: u64,
}

impl StabilityConfig {
    pub fn new(n: usize, k: usize, reps: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            reps,
            inner: default_inner(),
            exhaustive: false,
            blocks: default_blocks(),
            block_test_points: default_block_test_points(),
            block_train_sets: default_block_train_sets(),
            n_mc: default_n_mc(),
            seed,
        }
    }

    /// Training size `n - ceil(n/k)`.
    pub fn train_size(&self) -> usize {
        self.n - self.n.div_ceil(self.k)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > self.n {
            return Err(Error::InvalidFoldCount { n: self.n, k: self.k });
        }
        if self.train_size() < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "training size {} is too small",
                self.train_size()
            )));
        }
        if self.reps < 2 || self.inner < 2 {
            return Err(Error::InvalidConfiguration("reps and inner must be at least 2".into()));
        }
        if self.exhaustive && self.train_size() > EXHAUSTIVE_LIMIT {
            return Err(Error::InvalidConfiguration(format!(
                "exhaustive swap averaging needs m <= {EXHAUSTIVE_LIMIT}, got {}",
                self.train_size()
            )));
        }
        if self.blocks < 2 || self.block_test_points < 2 || self.block_train_sets < 2 {
            return Err(Error::InvalidConfiguration(
                "blocks, block_test_points and block_train_sets must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Independent master seeds for the three experiments.
    fn seeds(&self) -> [u64; 3] {
        let mut s = SeedStream::new(self.seed);
        [s.next_seed(), s.next_seed(), s.next_seed()]
    }
}

/// A Monte Carlo estimate. `value` is clamped at zero for quantities that
/// cannot be negative; `raw` keeps the unclamped number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub raw: f64,
    pub se: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64], clamp: bool) -> Self {
        let (raw, se) = mean_and_se(xs);
        Self {
            value: if clamp { raw.max(0.0) } else { raw },
            raw,
            se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceParams {
    /// `Var(E[h | Z0])`.
    pub sigma2: Estimate,
    /// `E[Var(h | train)]`.
    pub sigma2_tilde: Estimate,
    /// `E[Var_{Z0}(h - h̄(Z0))]`, estimated by the interaction mean square.
    pub cond_var_mean: Estimate,
    /// `σ̃² - σ²`, with its standard error taken blockwise.
    pub gap: Estimate,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub m: usize,
    pub gamma_ms: Estimate,
    pub gamma_loss: Estimate,
    pub gamma_4: Estimate,
    pub sigma2: Estimate,
    pub sigma2_tilde: Estimate,
    pub cond_var_mean: Estimate,
    pub variance_gap: Estimate,
    pub variance_ratio: Option<Estimate>,
    pub mc_replicates: usize,
    /// Conditional risks were exact rather than pooled.
    pub exact_conditional: bool,
    pub warnings: Vec<String>,
}

fn replicate_warnings(cfg: &StabilityConfig, exact: bool) -> Vec<String> {
    let mut w = Vec::new();
    if cfg.reps < 100 {
        w.push(format!("{} replicates is below 100; estimates are noisy", cfg.reps));
    }
    if !exact && cfg.inner < 50 {
        w.push(format!("inner pool of {} is below 50; centering is noisy", cfg.inner));
    }
    w
}

struct SwapSample {
    ms: f64,
    loss: f64,
    fourth: f64,
    exact: bool,
}

/// `E[h | train]` for both rules: exact, or pooled with the variance of the
/// pooled difference (which biases the squared centred difference upward
/// by exactly that amount).
fn centring(
    task: &TaskSpec,
    loss: &LossFunction,
    a: &FittedSubject,
    b: &FittedSubject,
    inner: usize,
    rng: &mut SeedStream,
) -> Result<(f64, f64, bool)> {
    if let (Some(ra), Some(rb)) = (task.exact_risk(a, loss), task.exact_risk(b, loss)) {
        return Ok((ra? - rb?, 0.0, true));
    }
    let pool = task.eval_pool(inner, rng);
    let mut diffs = Vec::with_capacity(pool.len());
    for i in 0..pool.len() {
        diffs.push(pool.loss(i, a, loss)? - pool.loss(i, b, loss)?);
    }
    Ok((mean(&diffs), sample_variance(&diffs) / diffs.len() as f64, false))
}

fn swap_replicate(
    task: &TaskSpec,
    subject: &Subject,
    loss: &LossFunction,
    cfg: &StabilityConfig,
    rng: &mut SeedStream,
) -> Result<SwapSample> {
    let m = cfg.train_size();
    let train = task.sample(m, rng)?;
    let (x0, y0) = task.sample_point(rng);
    let (x1, y1) = task.sample_point(rng);
    let replacement = DataPoint::new(x1, y1);
    let all: Vec<usize> = (0..m).collect();
    let fit = subject.fit(&train.view(&all))?;
    let h = fit.loss(loss, &x0, y0)?;

    let swaps: Vec<usize> = if cfg.exhaustive {
        all.clone()
    } else {
        vec![rng.index_below(m)]
    };
    let mut acc = SwapSample {
        ms: 0.0,
        loss: 0.0,
        fourth: 0.0,
        exact: true,
    };
    for &i in &swaps {
        let mut swapped = train.clone();
        swapped.set_point(i, &replacement);
        let fit_i = subject.fit(&swapped.view(&all))?;
        let d = h - fit_i.loss(loss, &x0, y0)?;
        let (dc, bias, exact) = centring(task, loss, &fit, &fit_i, cfg.inner, rng)?;
        let dp = d - dc;
        acc.ms += d * d;
        acc.loss += dp * dp - bias;
        acc.fourth += dp.powi(4);
        acc.exact &= exact;
    }
    let s = swaps.len() as f64;
    acc.ms /= s;
    acc.loss /= s;
    acc.fourth /= s;
    Ok(acc)
}

/// Stability functionals plus variance parameters for `subject` on `task`.
/// Replicates run in parallel on per-replicate streams, so the report does
/// not depend on the number of worker threads.
pub fn estimate_stabilities(
    task: &TaskSpec,
    subject: &Subject,
    loss: &LossFunction,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    task.validate()?;
    cfg.validate()?;
    let [swap_seed, ..] = cfg.seeds();
    let samples: Vec<SwapSample> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeedStream::substream(swap_seed, r as u64);
            swap_replicate(task, subject, loss, cfg, &mut rng).map_err(|e| e.in_replication(r))
        })
        .collect::<Result<_>>()?;
    let exact = samples.iter().all(|s| s.exact);
    let ms: Vec<f64> = samples.iter().map(|s| s.ms).collect();
    let ls: Vec<f64> = samples.iter().map(|s| s.loss).collect();
    let fs: Vec<f64> = samples.iter().map(|s| s.fourth).collect();
    let params = estimate_variance_params(task, subject, loss, cfg)?;
    Ok(StabilityReport {
        m: cfg.train_size(),
        gamma_ms: Estimate::from_samples(&ms, true),
        gamma_loss: Estimate::from_samples(&ls, true),
        gamma_4: Estimate::from_samples(&fs, true),
        sigma2: params.sigma2,
        sigma2_tilde: params.sigma2_tilde,
        cond_var_mean: params.cond_var_mean,
        variance_gap: params.gap,
        variance_ratio: None,
        mc_replicates: cfg.reps,
        exact_conditional: exact,
        warnings: replicate_warnings(cfg, exact),
    })
}

struct BlockStats {
    sigma2: f64,
    sigma2_tilde: f64,
    cond: f64,
}

/// One crossed block: `N` test points against `L` training sets.
fn variance_block(
    task: &TaskSpec,
    subject: &Subject,
    loss: &LossFunction,
    cfg: &StabilityConfig,
    rng: &mut SeedStream,
) -> Result<BlockStats> {
    let m = cfg.train_size();
    let (nz, nl) = (cfg.block_test_points, cfg.block_train_sets);
    let tests = task.sample(nz, rng)?;
    let all: Vec<usize> = (0..m).collect();
    // h[z * nl + l]
    let mut h = vec![0.0; nz * nl];
    for l in 0..nl {
        let train = task.sample(m, rng)?;
        let fit = subject.fit(&train.view(&all))?;
        for z in 0..nz {
            h[z * nl + l] = fit.loss(loss, tests.features(z), tests.target(z))?;
        }
    }
    let rows: Vec<f64> = (0..nz).map(|z| mean(&h[z * nl..(z + 1) * nl])).collect();
    let cols: Vec<f64> = (0..nl).map(|l| (0..nz).map(|z| h[z * nl + l]).sum::<f64>() / nz as f64).collect();
    let grand = mean(&rows);
    let mut resid = 0.0;
    for z in 0..nz {
        for l in 0..nl {
            let e = h[z * nl + l] - rows[z] - cols[l] + grand;
            resid += e * e;
        }
    }
    let ms_resid = resid / ((nz - 1) * (nl - 1)) as f64;
    let col_vars: Vec<f64> = (0..nl)
        .map(|l| sample_variance(&(0..nz).map(|z| h[z * nl + l]).collect::<Vec<_>>()))
        .collect();
    Ok(BlockStats {
        sigma2: sample_variance(&rows) - ms_resid / nl as f64,
        sigma2_tilde: mean(&col_vars),
        cond: ms_resid,
    })
}

/// `σ²`, `σ̃²` and the conditional variance from `blocks` independent
/// crossed designs.
///
/// Within a block, the sample variance of the row means over test points
/// overstates `σ²` by `E[u²]/L` where `u` is the interaction term; the
/// interaction mean square estimates `E[u²]` without bias and is subtracted.
/// `σ̃²` is the mean over training sets of the sample variance over test
/// points.
pub fn estimate_variance_params(
    task: &TaskSpec,
    subject: &Subject,
    loss: &LossFunction,
    cfg: &StabilityConfig,
) -> Result<VarianceParams> {
    task.validate()?;
    cfg.validate()?;
    let [_, block_seed, _] = cfg.seeds();
    let blocks: Vec<BlockStats> = (0..cfg.blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeedStream::substream(block_seed, b as u64);
            variance_block(task, subject, loss, cfg, &mut rng).map_err(|e| e.in_replication(b))
        })
        .collect::<Result<_>>()?;
    let s: Vec<f64> = blocks.iter().map(|b| b.sigma2).collect();
    let t: Vec<f64> = blocks.iter().map(|b| b.sigma2_tilde).collect();
    let c: Vec<f64> = blocks.iter().map(|b| b.cond).collect();
    let g: Vec<f64> = blocks.iter().map(|b| b.sigma2_tilde - b.sigma2).collect();
    Ok(VarianceParams {
        sigma2: Estimate::from_samples(&s, true),
        sigma2_tilde: Estimate::from_samples(&t, true),
        cond_var_mean: Estimate::from_samples(&c, true),
        gap: Estimate::from_samples(&g, false),
        blocks: cfg.blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostic {
    /// Empirical variance of `√n (R̂ - R) / σ`.
    pub ratio: Estimate,
    pub sigma2: Estimate,
    pub outer_reps: usize,
    pub warnings: Vec<String>,
}

/// Simulate `outer_reps` CV runs of size `cfg.n` with `cfg.k` folds and
/// return the variance of `√n (R̂ - R) / σ`, where `R` is each run's
/// conditional target and `σ²` comes from [`estimate_variance_params`].
/// Values far above 1 indicate that the stability conditions fail.
pub fn variance_ratio_diagnostic(
    task: &TaskSpec,
    subject: &Subject,
    loss: &LossFunction,
    cfg: &StabilityConfig,
    outer_reps: usize,
) -> Result<RatioDiagnostic> {
    task.validate()?;
    cfg.validate()?;
    if outer_reps < 2 {
        return Err(Error::InvalidConfiguration("outer_reps must be at least 2".into()));
    }
    let params = estimate_variance_params(task, subject, loss, cfg)?;
    let sigma2 = params.sigma2;
    if !(sigma2.raw > 0.0) {
        return Err(Error::DegenerateDiagnostic(format!(
            "estimated sigma^2 = {} leaves the ratio undefined",
            sigma2.raw
        )));
    }
    let sigma = sigma2.raw.sqrt();
    let [_, _, outer_seed] = cfg.seeds();
    let root_n = (cfg.n as f64).sqrt();
    let stats: Vec<f64> = (0..outer_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeedStream::substream(outer_seed, r as u64);
            let mut run = || -> Result<f64> {
                let data = task.sample(cfg.n, &mut rng)?;
                let partition = make_partition(cfg.n, cfg.k, rng.next_seed(), true)?;
                let cv = cross_validate(&data, &partition, subject, loss)?;
                let target = true_risk_oracle(&cv.target(), task, loss, cfg.n_mc, &mut rng)?;
                Ok(root_n * (cv.run.r_hat - target.value) / sigma)
            };
            run().map_err(|e| e.in_replication(r))
        })
        .collect::<Result<_>>()?;
    let var = sample_variance(&stats);
    let centre = mean(&stats);
    let m4 = stats.iter().map(|t| (t - centre).powi(4)).sum::<f64>() / stats.len() as f64;
    let se = ((m4 - var * var).max(0.0) / stats.len() as f64).sqrt();
    let mut warnings = Vec::new();
    if outer_reps < 100 {
        warnings.push(format!("{outer_reps} outer replicates is below 100; the ratio is noisy"));
    }
    Ok(RatioDiagnostic {
        ratio: Estimate {
            value: var,
            raw: var,
            se,
        },
        sigma2,
        outer_reps,
        warnings,
    })
}

/// Closed-form values for a task/learner pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticOracle {
    pub gamma_loss: f64,
    pub sigma2: f64,
    pub sigma2_tilde: f64,
}

/// Excess squared loss `(z - f)^2 - (z - a)^2` of the sample mean `f` of `m`
/// points with `E[Z] = 0`, `Var(Z) = v`:
/// `γ_loss = 8v²/m²`, `σ² = 4a²v`, `σ̃² = σ² + 4v²/m`.
pub fn excess_sample_mean_oracle(v: f64, a: f64, m: usize) -> AnalyticOracle {
    let m = m as f64;
    AnalyticOracle {
        gamma_loss: 8.0 * v * v / (m * m),
        sigma2: 4.0 * a * a * v,
        sigma2_tilde: 4.0 * a * a * v + 4.0 * v * v / m,
    }
}

/// Squared loss `(y - x̄)^2` of the surrogate mean `x̄` of `m` features with
/// `E[X] = E[Y]`: `γ_loss = 8 Var(X) Var(Y)/m²`, `σ² = Var((Y - EY)²)`,
/// `σ̃² = σ² + 4 Var(X) Var(Y)/m` when `E[(Y - EY)^3] = 0`.
pub fn surrogate_mean_oracle(var_x: f64, var_y: f64, var_y_sq: f64, m: usize) -> AnalyticOracle {
    let m = m as f64;
    AnalyticOracle {
        gamma_loss: 8.0 * var_x * var_y / (m * m),
        sigma2: var_y_sq,
        sigma2_tilde: var_y_sq + 4.0 * var_x * var_y / m,
    }
}

/// The Gaussian-location generator used by the excess-loss oracle.
pub fn excess_task(v: f64) -> (TaskSpec, Subject, LossFunction) {
    (
        TaskSpec::GaussianLocation { mean: 0.0, variance: v },
        Subject::Single(crate::learners::AlgorithmSpec::SampleMean),
        LossFunction::ExcessSquared { a: 1.0 },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::AlgorithmSpec;

    #[test]
    fn constant_loss_has_zero_stability() {
        let task = TaskSpec::GaussianLocation { mean: 0.0, variance: 1.0 };
        let subject = Subject::Single(AlgorithmSpec::Constant { value: 0.3 });
        let mut cfg = StabilityConfig::new(40, 5, 50, 1);
        cfg.blocks = 4;
        let r = estimate_stabilities(&task, &subject, &LossFunction::ExcessSquared { a: 0.3 }, &cfg).unwrap();
        assert_eq!(r.gamma_ms.raw, 0.0);
        assert_eq!(r.gamma_loss.raw, 0.0);
        assert_eq!(r.gamma_4.raw, 0.0);
        assert!(r.exact_conditional);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn data_ignoring_rule_has_no_gap() {
        // h' does not depend on the training set, so σ̃² = σ²
        let task = TaskSpec::GaussianLocation { mean: 0.0, variance: 2.0 };
        let subject = Subject::Single(AlgorithmSpec::Constant { value: 1.0 });
        let mut cfg = StabilityConfig::new(30, 3, 10, 2);
        cfg.block_test_points = 200;
        let p = estimate_variance_params(&task, &subject, &LossFunction::SquaredError, &cfg).unwrap();
        assert!(p.gap.raw.abs() < 1e-9, "{:?}", p.gap);
        assert!(p.cond_var_mean.raw.abs() < 1e-9);
    }

    #[test]
    fn exhaustive_limit() {
        let (task, subject, loss) = excess_task(1.0);
        let mut cfg = StabilityConfig::new(120, 2, 10, 0);
        cfg.exhaustive = true;
        assert!(estimate_stabilities(&task, &subject, &loss, &cfg).is_err());
        cfg.n = 40;
        cfg.reps = 20;
        cfg.blocks = 3;
        let r = estimate_stabilities(&task, &subject, &loss, &cfg).unwrap();
        assert!(r.gamma_ms.value > 0.0);
    }

    #[test]
    fn zero_loss_ratio_is_degenerate() {
        let task = TaskSpec::GaussianLocation { mean: 0.0, variance: 1.0 };
        let subject = Subject::Pair(AlgorithmSpec::SampleMean, AlgorithmSpec::SampleMean);
        let mut cfg = StabilityConfig::new(20, 2, 10, 0);
        cfg.blocks = 3;
        assert!(matches!(
            variance_ratio_diagnostic(&task, &subject, &LossFunction::SquaredError, &cfg, 10),
            Err(Error::DegenerateDiagnostic(_))
        ));
    }

    #[test]
    fn oracle_gap_matches_prop3_bound() {
        let o = excess_sample_mean_oracle(1.7, 1.0, 90);
        assert!((o.sigma2_tilde - o.sigma2 - 45.0 * o.gamma_loss).abs() < 1e-12);
        let s = surrogate_mean_oracle(2.0, 3.0, 18.0, 90);
        assert!((s.sigma2_tilde - s.sigma2 - 45.0 * s.gamma_loss).abs() < 1e-12);
    }
}
