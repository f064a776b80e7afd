//! Replication loops for coverage, width, size and power.
//!
//! Replication `r` at sample-size index `i` draws everything from
//! `SeedStream::substream(seed, (i << 32) | r)`, so results are identical for
//! any number of worker threads.

use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    cv_ttest_from_cv, holdout_from_cv, repeated_splits, repeated_tv_from_splits, five_by_two_procedure,
    BaselineKind, BaselineSpec, ProcedureRun, RepeatedSplits,
};
use crate::cv::{combine_pool_losses, cross_validate, pool_losses, CvFit, CvRun, RiskEstimate, WeightedFit};
use crate::data::{make_partition, Dataset, FoldPartition};
use crate::dist::normal_quantile;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::inference::{clt_pivot, Decision, InferenceResult, ProcedureId, CV_TARGET};
use crate::learners::{ridge_loocv_fit, AlgorithmSpec, FittedSubject, LossFunction, Subject};
use crate::rng::SeedStream;
use crate::summation::mean_and_se;
use crate::tasks::{EvalPool, TaskSpec};

/// Size and power points need at least this many replications in their class.
pub const MIN_CLASS_REPLICATIONS: usize = 25;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, conf: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidInput("Wilson interval needs at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::InvalidInput(format!("{successes} successes out of {trials} trials")));
    }
    let z = normal_quantile((1.0 + conf) / 2.0)?;
    let t = trials as f64;
    let p = successes as f64 / t;
    let z2 = z * z;
    let denom = 1.0 + z2 / t;
    let centre = (p + z2 / (2.0 * t)) / denom;
    let half = z * (p * (1.0 - p) / t + z2 / (4.0 * t * t)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let high = if successes == trials { 1.0 } else { (centre + half).clamp(p, 1.0) };
    Ok((low, high))
}

fn default_alpha() -> f64 {
    0.05
}
fn default_folds() -> usize {
    10
}
fn default_n_mc() -> usize {
    2000
}
fn default_conf() -> f64 {
    0.95
}
fn default_fraction() -> f64 {
    0.1
}
fn default_repetitions() -> usize {
    10
}
fn default_five() -> usize {
    5
}
fn default_out() -> EstimatorKind {
    EstimatorKind::Out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CiCoverage,
    TestSizePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcedureSpec {
    /// CLT interval/test on the plan's k-fold partition (or leave-one-out).
    Clt {
        #[serde(default = "default_out")]
        estimator: EstimatorKind,
        #[serde(default)]
        loocv: bool,
    },
    /// Hold-out on the first fold of the plan's partition, scaled by `√k`.
    Holdout,
    CvTtest,
    RepeatedTv {
        #[serde(default)]
        corrected: bool,
        #[serde(default = "default_repetitions")]
        repetitions: usize,
        #[serde(default = "default_fraction")]
        holdout_fraction: f64,
    },
    FiveByTwo {
        #[serde(default = "default_five")]
        repetitions: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub task: TaskSpec,
    pub subject: Subject,
    pub loss: LossFunction,
    pub procedures: Vec<ProcedureSpec>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Pool size for Monte Carlo targets when the task has no closed form.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_conf")]
    pub wilson_conf: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfiguration(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be positive");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sample_sizes must be nonempty and strictly ascending");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.wilson_conf > 0.0 && self.wilson_conf < 1.0) {
            return bad("alpha and wilson_conf must lie in (0, 1)");
        }
        if self.mode == Mode::TestSizePower && !self.subject.is_pair() {
            return bad("size/power experiments compare two algorithms");
        }
        if self.n_mc < 2 {
            return bad("n_mc must be at least 2");
        }
        Ok(())
    }
}

/// Everything a procedure may use within one replication. The CV fit, the
/// repeated splits and the Monte Carlo pool are computed once and shared.
pub struct ReplicationContext<'a> {
    pub data: &'a Dataset,
    pub partition: &'a FoldPartition,
    pub plan: &'a ExperimentPlan,
    /// Seed handed to baseline splits.
    pub baseline_seed: u64,
    /// Seed reserved for caller-defined procedures.
    pub custom_seed: u64,
    pool_seed: u64,
    cv: OnceLock<CvFit>,
    splits: Mutex<Vec<((usize, u64), RepeatedSplits)>>,
    pool: OnceLock<EvalPool>,
    /// Pool losses of every rule evaluated so far; procedures often share rules.
    pool_losses: Mutex<Vec<(FittedSubject, Arc<Vec<f64>>)>>,
}

impl<'a> ReplicationContext<'a> {
    pub fn cv(&self) -> Result<&CvFit> {
        if let Some(cv) = self.cv.get() {
            return Ok(cv);
        }
        let fit = cross_validate(self.data, self.partition, &self.plan.subject, &self.plan.loss)?;
        Ok(self.cv.get_or_init(|| fit))
    }

    fn splits(&self, repetitions: usize, fraction: f64) -> Result<RepeatedSplits> {
        let key = (repetitions, fraction.to_bits());
        let mut cache = self.splits.lock().expect("split cache poisoned");
        if let Some((_, s)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(s.clone());
        }
        let spec = BaselineSpec {
            kind: BaselineKind::RepeatedTv,
            repetitions,
            holdout_fraction: fraction,
            seed: self.baseline_seed,
        };
        let s = repeated_splits(self.data, &self.plan.subject, &self.plan.loss, &spec)?;
        cache.push((key, s.clone()));
        Ok(s)
    }

    /// A procedure's target: exact when the task allows, otherwise on the
    /// replication's shared pool.
    pub fn risk(&self, target: &[WeightedFit]) -> Result<RiskEstimate> {
        let exact: Option<Result<Vec<f64>>> = target
            .iter()
            .map(|w| self.plan.task.exact_risk(&w.fit, &self.plan.loss).map(|r| r.map(|v| v * w.weight)))
            .collect();
        if let Some(terms) = exact {
            return Ok(RiskEstimate {
                value: crate::summation::pairwise_sum(&terms?),
                se: 0.0,
                exact: true,
                warnings: Vec::new(),
            });
        }
        let pool = self
            .pool
            .get_or_init(|| self.plan.task.eval_pool(self.plan.n_mc, &mut SeedStream::new(self.pool_seed)));
        let losses = target
            .iter()
            .map(|w| self.cached_pool_losses(&w.fit, pool))
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<(f64, &[f64])> = target.iter().zip(&losses).map(|(w, l)| (w.weight, l.as_slice())).collect();
        combine_pool_losses(&terms)
    }

    fn cached_pool_losses(&self, fit: &FittedSubject, pool: &EvalPool) -> Result<Arc<Vec<f64>>> {
        if let Some((_, l)) = self.pool_losses.lock().expect("pool cache poisoned").iter().find(|(f, _)| f == fit) {
            return Ok(l.clone());
        }
        let l = Arc::new(pool_losses(fit, pool, &self.plan.loss)?);
        self.pool_losses.lock().expect("pool cache poisoned").push((fit.clone(), l.clone()));
        Ok(l)
    }
}

/// An interval/test procedure the harness can score.
pub trait Procedure: Sync {
    fn label(&self) -> String;
    fn run(&self, ctx: &ReplicationContext<'_>) -> Result<ProcedureRun>;
}

fn clt_run(cv: &CvRun, fits: &[FittedSubject], estimator: EstimatorKind, alpha: f64) -> Result<ProcedureRun> {
    let (pivot, kind, uneven) = clt_pivot(&cv.losses, estimator)?;
    let mut result = InferenceResult::interval(ProcedureId::Clt, &pivot, cv.losses.n(), alpha, CV_TARGET)?;
    result.variance_kind = Some(kind);
    result.uneven_folds = uneven;
    let n = cv.partition.n() as f64;
    let target = fits
        .iter()
        .zip(cv.partition.fold_sizes())
        .map(|(fit, size)| WeightedFit {
            weight: size as f64 / n,
            fit: fit.clone(),
        })
        .collect();
    Ok(ProcedureRun { pivot, result, target })
}

fn loocv_run(ctx: &ReplicationContext<'_>, estimator: EstimatorKind) -> Result<ProcedureRun> {
    let plan = ctx.plan;
    let n = ctx.data.len();
    if let (Subject::Single(AlgorithmSpec::Ridge { lambda, standardize: false }), LossFunction::SquaredError) =
        (&plan.subject, &plan.loss)
    {
        let (losses, rules) = ridge_loocv_fit(ctx.data, *lambda)?;
        let partition = FoldPartition::from_validation_folds(n, (0..n).map(|i| vec![i]).collect())?;
        let fold_means = losses.fold_means();
        let r_hat = losses.mean();
        let run = CvRun {
            partition,
            losses,
            fold_means,
            r_hat,
        };
        let fits: Vec<FittedSubject> = rules.into_iter().map(FittedSubject::Single).collect();
        return clt_run(&run, &fits, estimator, plan.alpha);
    }
    let partition = make_partition(n, n, 0, false)?;
    let cv = cross_validate(ctx.data, &partition, &plan.subject, &plan.loss)?;
    clt_run(&cv.run, &cv.fits, estimator, plan.alpha)
}

impl Procedure for ProcedureSpec {
    fn label(&self) -> String {
        match self {
            ProcedureSpec::Clt { estimator, loocv } => {
                let e = match estimator {
                    EstimatorKind::In => "in",
                    EstimatorKind::Out => "out",
                };
                if *loocv {
                    format!("clt_{e}_loocv")
                } else {
                    format!("clt_{e}")
                }
            }
            ProcedureSpec::Holdout => "holdout".into(),
            ProcedureSpec::CvTtest => "cv_ttest".into(),
            ProcedureSpec::RepeatedTv { corrected: false, .. } => "repeated_tv".into(),
            ProcedureSpec::RepeatedTv { corrected: true, .. } => "corrected_repeated_tv".into(),
            ProcedureSpec::FiveByTwo { .. } => "five_by_two".into(),
        }
    }

    fn run(&self, ctx: &ReplicationContext<'_>) -> Result<ProcedureRun> {
        let alpha = ctx.plan.alpha;
        match *self {
            ProcedureSpec::Clt { estimator, loocv: false } => {
                let cv = ctx.cv()?;
                clt_run(&cv.run, &cv.fits, estimator, alpha)
            }
            ProcedureSpec::Clt { estimator, loocv: true } => loocv_run(ctx, estimator),
            ProcedureSpec::Holdout => holdout_from_cv(ctx.cv()?, 1.0 / ctx.partition.k() as f64, alpha),
            ProcedureSpec::CvTtest => cv_ttest_from_cv(ctx.cv()?, alpha),
            ProcedureSpec::RepeatedTv {
                corrected,
                repetitions,
                holdout_fraction,
            } => {
                let splits = ctx.splits(repetitions, holdout_fraction)?;
                repeated_tv_from_splits(&splits, ctx.data.len(), corrected, alpha)
            }
            ProcedureSpec::FiveByTwo { repetitions } => {
                let spec = BaselineSpec {
                    kind: BaselineKind::FiveByTwo,
                    repetitions,
                    holdout_fraction: 0.5,
                    seed: ctx.baseline_seed,
                };
                five_by_two_procedure(ctx.data, &ctx.plan.subject, &ctx.plan.loss, &spec, alpha)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Coverage,
    Size,
    Power,
}

/// `Forward` tests whether the first algorithm improves on the second;
/// `Reverse` the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPoint {
    pub procedure: String,
    pub n: usize,
    pub metric: Metric,
    pub direction: Option<Direction>,
    pub value: f64,
    pub successes: usize,
    pub trials: usize,
    pub low: f64,
    pub high: f64,
    /// Mean interval width with a ±2 standard error band (coverage only).
    pub mean_width: Option<f64>,
    pub width_low: Option<f64>,
    pub width_high: Option<f64>,
    /// Replications whose target satisfies `H0` / `H1` for this direction
    /// (test mode only).
    pub h0_count: usize,
    pub h1_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub points: Vec<ResultPoint>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    covered: bool,
    width: f64,
    target: f64,
    forward_reject: bool,
    reverse_reject: bool,
}

fn rejects(pivot: &crate::inference::Pivot, alpha: f64) -> Result<bool> {
    match pivot.test(alpha) {
        Ok(t) => Ok(t.decision == Decision::Reject),
        Err(Error::InconclusiveDegenerate) => Ok(false),
        Err(e) => Err(e),
    }
}

fn run_replication(
    plan: &ExperimentPlan,
    procedures: &[&dyn Procedure],
    n_index: usize,
    rep: usize,
) -> Result<(Vec<Scored>, Vec<String>)> {
    let n = plan.sample_sizes[n_index];
    let mut rng = SeedStream::substream(plan.seed, ((n_index as u64) << 32) | rep as u64);
    let data = plan.task.sample(n, &mut rng)?;
    let partition = make_partition(n, plan.folds, rng.next_seed(), true)?;
    let ctx = ReplicationContext {
        data: &data,
        partition: &partition,
        plan,
        baseline_seed: rng.next_seed(),
        custom_seed: rng.next_seed(),
        pool_seed: rng.next_seed(),
        cv: OnceLock::new(),
        splits: Mutex::new(Vec::new()),
        pool: OnceLock::new(),
        pool_losses: Mutex::new(Vec::new()),
    };
    let mut scored = Vec::with_capacity(procedures.len());
    let mut warnings = Vec::new();
    for p in procedures {
        let run = p.run(&ctx)?;
        let risk = ctx.risk(&run.target)?;
        warnings.extend(risk.warnings);
        let (lo, hi) = run.pivot.interval(plan.alpha)?;
        let forward_reject = plan.mode == Mode::TestSizePower && rejects(&run.pivot, plan.alpha)?;
        let reverse_reject = plan.mode == Mode::TestSizePower && rejects(&run.pivot.negated(), plan.alpha)?;
        scored.push(Scored {
            covered: lo <= risk.value && risk.value <= hi,
            width: hi - lo,
            target: risk.value,
            forward_reject,
            reverse_reject,
        });
    }
    Ok((scored, warnings))
}

/// Run `plan` with its built-in procedures.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let procs: Vec<&dyn Procedure> = plan.procedures.iter().map(|p| p as &dyn Procedure).collect();
    run_with_procedures(plan, &procs)
}

/// Coverage and width of each procedure's interval against its own target.
pub fn run_coverage_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let mut plan = plan.clone();
    plan.mode = Mode::CiCoverage;
    run_experiment(&plan)
}

/// Size and power of each one-sided test, in both directions.
pub fn run_test_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let mut plan = plan.clone();
    plan.mode = Mode::TestSizePower;
    run_experiment(&plan)
}

/// Run `plan` with arbitrary procedures (e.g. test doubles).
pub fn run_with_procedures(plan: &ExperimentPlan, procedures: &[&dyn Procedure]) -> Result<ExperimentResult> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.sample_sizes.len())
        .flat_map(|i| (0..plan.replications).map(move |r| (i, r)))
        .collect();
    let outcomes: Vec<(Vec<Scored>, Vec<String>)> = jobs
        .par_iter()
        .map(|&(i, r)| run_replication(plan, procedures, i, r).map_err(|e| e.in_replication(r)))
        .collect::<Result<_>>()?;

    let mut warnings: Vec<String> = Vec::new();
    for (_, w) in &outcomes {
        for msg in w {
            if !warnings.contains(msg) {
                warnings.push(msg.clone());
            }
        }
    }
    let mut points = Vec::new();
    for (i, &n) in plan.sample_sizes.iter().enumerate() {
        let block = &outcomes[i * plan.replications..(i + 1) * plan.replications];
        for (j, p) in procedures.iter().enumerate() {
            let label = p.label();
            let rows: Vec<Scored> = block.iter().map(|(s, _)| s[j]).collect();
            match plan.mode {
                Mode::CiCoverage => points.push(coverage_point(plan, &label, n, &rows)?),
                Mode::TestSizePower => {
                    for direction in [Direction::Forward, Direction::Reverse] {
                        points.extend(test_points(plan, &label, n, &rows, direction)?);
                    }
                }
            }
        }
    }
    Ok(ExperimentResult {
        plan: plan.clone(),
        points,
        warnings,
    })
}

fn coverage_point(plan: &ExperimentPlan, label: &str, n: usize, rows: &[Scored]) -> Result<ResultPoint> {
    let hits = rows.iter().filter(|s| s.covered).count();
    let (low, high) = wilson_interval(hits, rows.len(), plan.wilson_conf)?;
    let widths: Vec<f64> = rows.iter().map(|s| s.width).collect();
    let (w, se) = if widths.len() > 1 {
        mean_and_se(&widths)
    } else {
        (widths[0], 0.0)
    };
    Ok(ResultPoint {
        procedure: label.to_string(),
        n,
        metric: Metric::Coverage,
        direction: None,
        value: hits as f64 / rows.len() as f64,
        successes: hits,
        trials: rows.len(),
        low,
        high,
        mean_width: Some(w),
        width_low: Some(w - 2.0 * se),
        width_high: Some(w + 2.0 * se),
        h0_count: 0,
        h1_count: 0,
    })
}

fn test_points(plan: &ExperimentPlan, label: &str, n: usize, rows: &[Scored], direction: Direction) -> Result<Vec<ResultPoint>> {
    // H0 for the forward test: R >= 0; for the reverse test: R <= 0.
    let (h0, h1): (Vec<&Scored>, Vec<&Scored>) = rows.iter().partition(|s| match direction {
        Direction::Forward => s.target >= 0.0,
        Direction::Reverse => s.target <= 0.0,
    });
    let rejected = |s: &&&Scored| match direction {
        Direction::Forward => s.forward_reject,
        Direction::Reverse => s.reverse_reject,
    };
    let mut out = Vec::new();
    for (metric, class) in [(Metric::Size, &h0), (Metric::Power, &h1)] {
        if class.len() < MIN_CLASS_REPLICATIONS {
            continue;
        }
        let successes = class.iter().filter(rejected).count();
        let (low, high) = wilson_interval(successes, class.len(), plan.wilson_conf)?;
        out.push(ResultPoint {
            procedure: label.to_string(),
            n,
            metric,
            direction: Some(direction),
            value: successes as f64 / class.len() as f64,
            successes,
            trials: class.len(),
            low,
            high,
            mean_width: None,
            width_low: None,
            width_high: None,
            h0_count: h0.len(),
            h1_count: h1.len(),
        });
    }
    Ok(out)
}

/// Long-format CSV: `procedure,n,metric,value,low,high`. Reverse-direction
/// metrics carry a `_reverse` suffix; widths appear as `mean_width` rows
/// with their ±2 SE band.
pub fn write_long_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["procedure", "n", "metric", "value", "low", "high"])?;
    let fmt = |x: f64| format!("{x}");
    for p in &result.points {
        let base = match p.metric {
            Metric::Coverage => "coverage",
            Metric::Size => "size",
            Metric::Power => "power",
        };
        let metric = match p.direction {
            Some(Direction::Reverse) => format!("{base}_reverse"),
            _ => base.to_string(),
        };
        w.write_record([p.procedure.clone(), p.n.to_string(), metric, fmt(p.value), fmt(p.low), fmt(p.high)])?;
        if let (Some(m), Some(lo), Some(hi)) = (p.mean_width, p.width_low, p.width_high) {
            w.write_record([p.procedure.clone(), p.n.to_string(), "mean_width".into(), fmt(m), fmt(lo), fmt(hi)])?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{Pivot, Reference};

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-4);
        let (lo, hi) = wilson_interval(5, 10, 0.95).unwrap();
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
        assert!((lo + hi - 1.0).abs() < 1e-15);
        assert_eq!(wilson_interval(10, 10, 0.95).unwrap().1, 1.0);
        assert!(wilson_interval(0, 0, 0.95).is_err());
    }

    fn plan(mode: Mode, reps: usize) -> ExperimentPlan {
        ExperimentPlan {
            task: TaskSpec::GaussianLocation { mean: 0.0, variance: 1.0 },
            subject: Subject::Single(AlgorithmSpec::SampleMean),
            loss: LossFunction::ExcessSquared { a: 1.0 },
            procedures: vec![ProcedureSpec::Clt {
                estimator: EstimatorKind::Out,
                loocv: false,
            }],
            sample_sizes: vec![100],
            replications: reps,
            alpha: 0.05,
            seed: 11,
            mode,
            folds: 10,
            n_mc: 2000,
            wilson_conf: 0.95,
        }
    }

    /// Interval `[R + 1, R + 2]`: never covers.
    struct AlwaysMiss;
    impl Procedure for AlwaysMiss {
        fn label(&self) -> String {
            "miss".into()
        }
        fn run(&self, ctx: &ReplicationContext<'_>) -> Result<ProcedureRun> {
            let cv = ctx.cv()?;
            let target = cv.target();
            let r = ctx.risk(&target)?.value;
            let pivot = Pivot::new(r + 1.5, 0.5, 1.0 / 1.959963984540054, Reference::Normal);
            Ok(ProcedureRun {
                result: InferenceResult::interval(ProcedureId::Custom, &pivot, ctx.data.len(), 0.05, "double")?,
                pivot,
                target,
            })
        }
    }

    #[test]
    fn always_miss_double_has_zero_coverage() {
        let p = plan(Mode::CiCoverage, 30);
        let r = run_with_procedures(&p, &[&AlwaysMiss]).unwrap();
        assert_eq!(r.points[0].successes, 0);
        assert_eq!(r.points[0].low, 0.0);
    }

    #[test]
    fn size_points_suppressed_below_threshold() {
        let mut p = plan(Mode::TestSizePower, 20);
        p.subject = Subject::Pair(AlgorithmSpec::SampleMean, AlgorithmSpec::Constant { value: 0.0 });
        let r = run_experiment(&p).unwrap();
        assert!(r.points.is_empty());
    }

    #[test]
    fn test_mode_needs_pair() {
        assert!(run_experiment(&plan(Mode::TestSizePower, 30)).is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let p = plan(Mode::CiCoverage, 5);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentPlan>(&text).unwrap(), p);
    }
}
