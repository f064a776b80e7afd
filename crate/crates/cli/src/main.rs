//! `cvclt` command-line interface.
//!
//! Every command writes one JSON document `{"meta": {...}, "result": ...}` to
//! `--out` or stdout. Exit codes: 0 success, 1 computation error, 2 usage
//! error or unreadable input. `infer test` exits 0 on fail-to-reject, 1 on
//! reject and 3 on error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cvclt::baselines::{run_baseline, BaselineKind, BaselineSpec};
use cvclt::data::{make_partition, LossKind, LossMatrix};
use cvclt::estimators::{estimate, EstimatorKind};
use cvclt::inference::{clt_confidence_interval, clt_improvement_test, Decision};
use cvclt::io::{create, read_dataset_file, read_loss_matrix_file, write_dataset, write_loss_matrix};
use cvclt::learners::{ridge_loocv_losses, AlgorithmSpec, LossFunction, Subject};
use cvclt::sim::{run_experiment, write_long_csv, ExperimentPlan};
use cvclt::stability::{estimate_stabilities, variance_ratio_diagnostic, StabilityConfig};
use cvclt::{cross_validate, Error, SeedStream, TaskSpec};

const TOOL: &str = "cvclt";

#[derive(Parser, Debug)]
#[command(name = "cvclt", version, about = "Inference for the k-fold cross-validation test error")]
struct Cli {
    /// Write the JSON document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// k-fold cross-validation of one algorithm or a pair.
    #[command(subcommand)]
    Cv(CvCommand),
    /// Variance estimate from a loss-matrix CSV.
    Estimate(EstimateArgs),
    /// CLT interval or one-sided improvement test from a loss-matrix CSV.
    #[command(subcommand)]
    Infer(InferCommand),
    /// One of the comparison procedures (hold-out, CV t-test, repeated
    /// train-validation, corrected repeated train-validation, 5x2 CV).
    Baseline(BaselineArgs),
    /// Monte Carlo stability diagnostics on a synthetic task.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Run a coverage or size/power experiment from a JSON plan.
    Simulate(SimulateArgs),
    /// Exact leave-one-out losses for ridge regression.
    LoocvRidge(LoocvArgs),
    /// Sample a dataset CSV from a synthetic task.
    Generate(GenerateArgs),
}

#[derive(Subcommand, Debug)]
enum CvCommand {
    Run(CvRunArgs),
    Compare(CvCompareArgs),
}

#[derive(Args, Debug)]
struct CvShared {
    /// Dataset CSV with columns x1..xp,y.
    #[arg(long)]
    data: PathBuf,
    /// Loss: squared_error, zero_one, excess_squared:<a>, or a JSON object.
    #[arg(long, default_value = "squared_error")]
    loss: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Partition seed; generated and recorded when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Contiguous folds instead of a seeded shuffle.
    #[arg(long)]
    no_shuffle: bool,
    /// Write the per-point losses here (index,fold,loss).
    #[arg(long)]
    losses_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvRunArgs {
    #[command(flatten)]
    shared: CvShared,
    /// Algorithm JSON, e.g. '{"algo":"ridge","lambda":1.0}'.
    #[arg(long)]
    algo: String,
}

#[derive(Args, Debug)]
struct CvCompareArgs {
    #[command(flatten)]
    shared: CvShared,
    #[arg(long)]
    algo1: String,
    #[arg(long)]
    algo2: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    In,
    Out,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::In => EstimatorKind::In,
            EstimatorArg::Out => EstimatorKind::Out,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    loss_matrix: PathBuf,
    #[arg(long, value_enum, default_value = "out")]
    estimator: EstimatorArg,
}

#[derive(Subcommand, Debug)]
enum InferCommand {
    /// Two-sided confidence interval for the CV test error.
    Ci(InferArgs),
    /// Test H0: R >= 0 against H1: R < 0 on a difference loss matrix.
    Test(InferArgs),
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    loss_matrix: PathBuf,
    #[arg(long, value_enum, default_value = "out")]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    Holdout,
    CvTtest,
    RepeatedTv,
    CorrectedRepeatedTv,
    FiveByTwo,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    kind: BaselineArg,
    #[arg(long)]
    data: PathBuf,
    /// Single algorithm (interval) ...
    #[arg(long, conflicts_with_all = ["algo1", "algo2"])]
    algo: Option<String>,
    /// ... or a pair (difference losses, algo1 minus algo2).
    #[arg(long, requires = "algo2")]
    algo1: Option<String>,
    #[arg(long, requires = "algo1")]
    algo2: Option<String>,
    #[arg(long, default_value = "squared_error")]
    loss: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    holdout_fraction: f64,
}

#[derive(Subcommand, Debug)]
enum DiagnoseCommand {
    /// Loss and mean-square stability plus variance parameters.
    Stability(DiagnoseArgs),
    /// Variance of sqrt(n)(R_hat - R)/sigma over repeated CV runs.
    VarianceRatio(VarianceRatioArgs),
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Task JSON, e.g. '{"task":"gaussian_location","variance":1.0}'.
    #[arg(long)]
    task: String,
    #[arg(long)]
    algo: String,
    #[arg(long, default_value = "squared_error")]
    loss: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 20)]
    blocks: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VarianceRatioArgs {
    #[command(flatten)]
    diag: DiagnoseArgs,
    #[arg(long, default_value_t = 500)]
    outer_reps: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Overrides the plan's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write long-format CSV (procedure,n,metric,value,low,high).
    #[arg(long)]
    emit_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LoocvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    losses_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset CSV destination.
    #[arg(long)]
    data_out: PathBuf,
}

/// A failed command: exit code plus structured payload.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            Error::Json(_) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<(Value, u8), Failure>;

fn verbose() -> bool {
    matches!(std::env::var("CVCLT_LOG").as_deref(), Ok("debug") | Ok("info"))
}

fn log(msg: &str) {
    if verbose() {
        eprintln!("[cvclt] {msg}");
    }
}

fn fresh_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    SeedStream::new(nanos ^ u64::from(std::process::id())).next_seed()
}

fn parse_loss(text: &str) -> Result<LossFunction, Error> {
    let t = text.trim();
    if t.starts_with('{') {
        return Ok(serde_json::from_str(t)?);
    }
    match t.split_once(':') {
        None if t == "squared_error" => Ok(LossFunction::SquaredError),
        None if t == "zero_one" => Ok(LossFunction::ZeroOne),
        Some(("excess_squared", a)) => a
            .parse()
            .map(|a| LossFunction::ExcessSquared { a })
            .map_err(|_| Error::InvalidConfiguration(format!("bad excess_squared parameter {a:?}"))),
        _ => Err(Error::InvalidConfiguration(format!("unknown loss {t:?}"))),
    }
}

fn parse_algo(text: &str) -> Result<AlgorithmSpec, Error> {
    AlgorithmSpec::from_json(text)
}

fn doc<T: Serialize>(seed: Option<u64>, config: Value, result: &T) -> Result<Value, Error> {
    Ok(json!({
        "meta": {
            "tool": TOOL,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
        },
        "result": serde_json::to_value(result)?,
    }))
}

fn write_losses(path: &Option<PathBuf>, m: &LossMatrix) -> Result<(), Error> {
    if let Some(p) = path {
        write_loss_matrix(m, create(p)?)?;
    }
    Ok(())
}

fn cv_command(cmd: &CvCommand) -> CmdResult {
    let (shared, subject, algos) = match cmd {
        CvCommand::Run(a) => {
            let algo = parse_algo(&a.algo)?;
            (&a.shared, Subject::Single(algo.clone()), json!([algo]))
        }
        CvCommand::Compare(a) => {
            let (a1, a2) = (parse_algo(&a.algo1)?, parse_algo(&a.algo2)?);
            (&a.shared, Subject::Pair(a1.clone(), a2.clone()), json!([a1, a2]))
        }
    };
    let loss = parse_loss(&shared.loss)?;
    let data = read_dataset_file(&shared.data)?;
    let seed = shared.seed.unwrap_or_else(fresh_seed);
    let partition = make_partition(data.len(), shared.k, seed, !shared.no_shuffle)?;
    let fit = cross_validate(&data, &partition, &subject, &loss)?;
    write_losses(&shared.losses_out, &fit.run.losses)?;
    let summary = json!({
        "r_hat": fit.run.r_hat,
        "fold_means": fit.run.fold_means,
        "k": partition.k(),
        "n": partition.n(),
        "kind": fit.run.losses.kind(),
    });
    let config = json!({
        "data": shared.data, "algorithms": algos, "loss": loss, "k": shared.k,
        "shuffle": !shared.no_shuffle, "losses_out": shared.losses_out,
    });
    Ok((doc(Some(seed), config, &summary)?, 0))
}

fn estimate_command(a: &EstimateArgs) -> CmdResult {
    let m = read_loss_matrix_file(&a.loss_matrix, LossKind::Plain)?;
    let e = estimate(&m, a.estimator.into())?;
    let config = json!({"loss_matrix": a.loss_matrix, "estimator": EstimatorKind::from(a.estimator)});
    Ok((doc(None, config, &e)?, 0))
}

fn infer_command(cmd: &InferCommand) -> CmdResult {
    match cmd {
        InferCommand::Ci(a) => {
            let m = read_loss_matrix_file(&a.loss_matrix, LossKind::Plain)?;
            let r = clt_confidence_interval(&m, a.estimator.into(), a.alpha)?;
            Ok((doc(None, infer_config(a), &r)?, 0))
        }
        InferCommand::Test(a) => {
            let m = read_loss_matrix_file(&a.loss_matrix, LossKind::Difference)?;
            let r = clt_improvement_test(&m, a.estimator.into(), a.alpha).map_err(|e| Failure { code: 3, error: e })?;
            let code = if r.decision == Some(Decision::Reject) { 1 } else { 0 };
            Ok((doc(None, infer_config(a), &r)?, code))
        }
    }
}

fn infer_config(a: &InferArgs) -> Value {
    json!({"loss_matrix": a.loss_matrix, "estimator": EstimatorKind::from(a.estimator), "alpha": a.alpha})
}

fn baseline_command(a: &BaselineArgs) -> CmdResult {
    let subject = match (&a.algo, &a.algo1, &a.algo2) {
        (Some(x), None, None) => Subject::Single(parse_algo(x)?),
        (None, Some(x), Some(y)) => Subject::Pair(parse_algo(x)?, parse_algo(y)?),
        _ => {
            return Err(Failure {
                code: 2,
                error: Error::InvalidConfiguration("give --algo, or both --algo1 and --algo2".into()),
            })
        }
    };
    let kind = match a.kind {
        BaselineArg::Holdout => BaselineKind::Holdout,
        BaselineArg::CvTtest => BaselineKind::CvTtest,
        BaselineArg::RepeatedTv => BaselineKind::RepeatedTv,
        BaselineArg::CorrectedRepeatedTv => BaselineKind::CorrectedRepeatedTv,
        BaselineArg::FiveByTwo => BaselineKind::FiveByTwo,
    };
    let loss = parse_loss(&a.loss)?;
    let data = read_dataset_file(&a.data)?;
    let seed = a.seed.unwrap_or_else(fresh_seed);
    let mut spec = BaselineSpec::new(kind, seed);
    if let Some(r) = a.repetitions {
        spec.repetitions = r;
    }
    spec.holdout_fraction = a.holdout_fraction;
    let run = run_baseline(&data, &subject, &loss, &spec, a.alpha)?;
    let config = json!({
        "data": a.data, "subject": subject, "loss": loss, "alpha": a.alpha, "baseline": spec,
    });
    Ok((doc(Some(seed), config, &run.result)?, 0))
}

fn diagnose_setup(a: &DiagnoseArgs) -> Result<(TaskSpec, Subject, LossFunction, StabilityConfig), Error> {
    let task: TaskSpec = serde_json::from_str(&a.task)?;
    let subject = Subject::Single(parse_algo(&a.algo)?);
    let loss = parse_loss(&a.loss)?;
    let mut cfg = StabilityConfig::new(a.n, a.k, a.reps, a.seed.unwrap_or_else(fresh_seed));
    cfg.blocks = a.blocks;
    Ok((task, subject, loss, cfg))
}

fn diagnose_command(cmd: &DiagnoseCommand) -> CmdResult {
    match cmd {
        DiagnoseCommand::Stability(a) => {
            let (task, subject, loss, cfg) = diagnose_setup(a)?;
            let r = estimate_stabilities(&task, &subject, &loss, &cfg)?;
            let config = json!({"task": task, "subject": subject, "loss": loss, "stability": cfg});
            Ok((doc(Some(cfg.seed), config, &r)?, 0))
        }
        DiagnoseCommand::VarianceRatio(a) => {
            let (task, subject, loss, cfg) = diagnose_setup(&a.diag)?;
            let r = variance_ratio_diagnostic(&task, &subject, &loss, &cfg, a.outer_reps)?;
            let config = json!({
                "task": task, "subject": subject, "loss": loss, "stability": cfg, "outer_reps": a.outer_reps,
            });
            Ok((doc(Some(cfg.seed), config, &r)?, 0))
        }
    }
}

fn simulate_command(a: &SimulateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.plan).map_err(|source| Error::Io {
        path: a.plan.clone(),
        source,
    })?;
    let mut plan: ExperimentPlan = serde_json::from_str(&text)?;
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    log(&format!(
        "simulating {} replications at {} sample sizes",
        plan.replications,
        plan.sample_sizes.len()
    ));
    let result = run_experiment(&plan)?;
    if let Some(p) = &a.emit_csv {
        write_long_csv(&result, create(p)?)?;
    }
    let config = json!({"plan": a.plan, "emit_csv": a.emit_csv});
    Ok((doc(Some(plan.seed), config, &result)?, 0))
}

fn loocv_command(a: &LoocvArgs) -> CmdResult {
    let data = read_dataset_file(&a.data)?;
    let m = ridge_loocv_losses(&data, a.lambda)?;
    write_losses(&a.losses_out, &m)?;
    let summary = json!({"r_hat": m.mean(), "n": m.n(), "k": m.k()});
    let config = json!({"data": a.data, "lambda": a.lambda, "losses_out": a.losses_out});
    Ok((doc(None, config, &summary)?, 0))
}

fn generate_command(a: &GenerateArgs) -> CmdResult {
    let task: TaskSpec = serde_json::from_str(&a.task)?;
    let seed = a.seed.unwrap_or_else(fresh_seed);
    let data = task.sample(a.n, &mut SeedStream::new(seed))?;
    write_dataset(&data, create(&a.data_out)?)?;
    let config = json!({"task": task, "n": a.n, "data_out": a.data_out});
    Ok((doc(Some(seed), config, &json!({"n": data.len(), "dim": data.dim()}))?, 0))
}

fn emit(out: &Option<PathBuf>, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn error_doc(e: &Error) -> Value {
    let path = match e {
        Error::Io { path, .. } => Some(path.as_path()),
        _ => None::<&Path>,
    };
    json!({"error": {"code": e.code(), "message": e.to_string(), "path": path}})
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Cv(c) => cv_command(c),
        Command::Estimate(a) => estimate_command(a),
        Command::Infer(c) => infer_command(c),
        Command::Baseline(a) => baseline_command(a),
        Command::Diagnose(c) => diagnose_command(c),
        Command::Simulate(a) => simulate_command(a),
        Command::LoocvRidge(a) => loocv_command(a),
        Command::Generate(a) => generate_command(a),
    };
    match outcome {
        Ok((value, code)) => {
            if let Err(e) = emit(&cli.out, &value) {
                eprintln!("cvclt: cannot write output: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("cvclt: {}", f.error);
            let _ = emit(&None, &error_doc(&f.error));
            ExitCode::from(f.code)
        }
    }
}
