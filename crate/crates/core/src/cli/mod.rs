//! Command-line interface.
//!
//! Exit codes: 0 on success (and for `detect`, no shift), 2 when `detect`
//! flags a shift, 1 on any error including bad flags.

mod bench;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{
    load_vectors, BaselineConfig, BaselineDetector, BaselineMethod, Reference, VectorKind,
    DEFAULT_MMD_CAP,
};
use crate::detector::{self, write_atomic, DEFAULT_COVERAGE_COUNT, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::eval::trials::{scores_of, DEFAULT_ALPHA, DEFAULT_TRIALS, DEFAULT_WINDOW_SIZES};
use crate::eval::{
    gen_scores, gen_vectors, metrics_csv, run_trials, split_pool, DistSpec, EvalMethod, MethodName,
    TrialPlan,
};
use crate::scores::{load_scores, ConfidenceFunction, LoadOptions, ScoreFormat};
use crate::stats::{Rng, DEFAULT_PERMUTATIONS};

pub use bench::{run_bench, BenchConfig, BenchMethod, BenchRow, BENCH_CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SHIFT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "covshift",
    version,
    about = "Coverage-based distribution shift detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a detector on a detection-training sample and save the model.
    Fit(FitArgs),
    /// Test one window against a saved model.
    Detect(DetectArgs),
    /// Run repeated-window trials and write a metrics table.
    Eval(EvalArgs),
    /// Draw synthetic scores or vectors.
    Simulate(SimulateArgs),
    /// Time fitting and detection across training-set sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One score per line.
    Raw,
    /// Comma-separated softmax rows.
    Softmax,
}

impl From<InputFormat> for ScoreFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Raw => ScoreFormat::RawScores,
            InputFormat::Softmax => ScoreFormat::SoftmaxCsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kappa {
    /// Maximum softmax probability.
    Sr,
    /// One minus the entropy of the softmax.
    Entropy,
}

impl From<Kappa> for ConfidenceFunction {
    fn from(k: Kappa) -> Self {
        match k {
            Kappa::Sr => ConfidenceFunction::SoftmaxResponse,
            Kappa::Entropy => ConfidenceFunction::OneMinusEntropy,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Detection-training scores.
    #[arg(long)]
    pub scores: PathBuf,
    /// Layout of the scores file.
    #[arg(long, value_enum, default_value = "raw")]
    pub format: InputFormat,
    /// Confidence function (applied to softmax rows, or naming raw scores).
    #[arg(long, value_enum, default_value = "entropy")]
    pub kappa: Kappa,
    /// Confidence parameter of every bound.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Number of target coverages.
    #[arg(long, default_value_t = DEFAULT_COVERAGE_COUNT)]
    pub coverages: usize,
    /// Skip the first line of a softmax CSV.
    #[arg(long)]
    pub header: bool,
    /// Where to write the model.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Model written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Window scores.
    #[arg(long)]
    pub window: PathBuf,
    /// Layout of the window file.
    #[arg(long, value_enum, default_value = "raw")]
    pub format: InputFormat,
    /// Confidence function of the window; must match the model's if given.
    #[arg(long, value_enum)]
    pub kappa: Option<Kappa>,
    /// Significance level; a shift is reported when p < alpha.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Skip the first line of a softmax CSV.
    #[arg(long)]
    pub header: bool,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMethodArg {
    Ours,
    Ks,
    Mmd,
    SingleSr,
    SingleEnt,
}

impl From<EvalMethodArg> for MethodName {
    fn from(m: EvalMethodArg) -> Self {
        match m {
            EvalMethodArg::Ours => MethodName::Ours,
            EvalMethodArg::Ks => MethodName::Ks,
            EvalMethodArg::Mmd => MethodName::Mmd,
            EvalMethodArg::SingleSr => MethodName::SingleSr,
            EvalMethodArg::SingleEnt => MethodName::SingleEnt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolFormat {
    /// One score per line.
    Raw,
    /// Comma-separated softmax rows.
    Softmax,
    /// Comma-separated embedding rows.
    Embedding,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detector to evaluate.
    #[arg(long, value_enum)]
    pub method: EvalMethodArg,
    /// In-distribution pool.
    #[arg(long)]
    pub id: PathBuf,
    /// Shifted pool.
    #[arg(long)]
    pub shifted: PathBuf,
    /// Detection-training sample; without it the in-distribution pool is
    /// split in half (seeded) into training and evaluation parts.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Layout of all pool files.
    #[arg(long, value_enum, default_value = "raw")]
    pub format: PoolFormat,
    /// Confidence function for softmax pools (or naming raw scores).
    #[arg(long, value_enum, default_value = "entropy")]
    pub kappa: Kappa,
    /// Skip the first line of CSV pools.
    #[arg(long)]
    pub header: bool,
    /// Window sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_WINDOW_SIZES.to_vec())]
    pub window_sizes: Vec<usize>,
    /// Trials per window size.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    /// Significance level passed to each detector.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Seed for window sampling, pool splitting and permutations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence parameter when fitting `ours`.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Target coverages when fitting `ours`.
    #[arg(long, default_value_t = DEFAULT_COVERAGE_COUNT)]
    pub coverages: usize,
    /// MMD permutations.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    /// MMD reference-size cap.
    #[arg(long, default_value_t = DEFAULT_MMD_CAP)]
    pub mmd_cap: usize,
    /// Metrics CSV destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `beta(a,b)`, `uniform`, `mixture(w:SPEC,...)`, `dirichlet(a1,...)`
    /// or `gaussian(mu,sigma,d)`.
    #[arg(long)]
    pub dist: String,
    /// Number of draws.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scores are written one per line, vectors as CSV rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Training-set sizes, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10_000usize, 100_000, 1_000_000])]
    pub sizes: Vec<usize>,
    /// Window size k.
    #[arg(long, default_value_t = 10)]
    pub window_size: usize,
    /// Methods to time: ours, ks, mmd, single-sr, single-ent.
    #[arg(long, value_delimiter = ',', default_values_t = vec![BenchMethod::Ours, BenchMethod::Ks])]
    pub methods: Vec<BenchMethod>,
    /// Softmax dimensionality of the synthetic data.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Timed repetitions per cell (the median is reported).
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timings CSV destination.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Run one subcommand, writing human-readable output to `out`.
pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Detect(a) => cmd_detect(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "--delta must lie in (0,1), got {delta}"
        )))
    }
}

fn check_coverages(count: usize) -> Result<()> {
    if count >= 1 {
        Ok(())
    } else {
        Err(Error::invalid("--coverages must be >= 1"))
    }
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<i32> {
    check_delta(a.delta)?;
    check_coverages(a.coverages)?;
    let opts = LoadOptions {
        format: a.format.into(),
        kappa: a.kappa.into(),
        header: a.header,
    };
    let sample = load_scores(&a.scores, &opts)?;
    let model = detector::fit(&sample, a.delta, a.coverages)?;
    detector::save_model(&model, &a.out)?;
    (|| {
        writeln!(
            out,
            "m = {}, delta = {}, kappa = {}",
            model.m, model.delta, model.kappa_name
        )?;
        writeln!(out, "{:>8}  {:>12}  {:>14}", "c_target", "b_star", "theta")?;
        for p in &model.pairs {
            writeln!(
                out,
                "{:>8.4}  {:>12.8}  {:>14.8}",
                p.c_target, p.b_star, p.theta
            )?;
        }
        writeln!(out, "model written to {}", a.out.display())
    })()
    .map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_detect(a: &DetectArgs, out: &mut dyn Write) -> Result<i32> {
    if !(0.0..1.0).contains(&a.alpha) {
        return Err(Error::invalid(format!(
            "--alpha must lie in [0,1), got {}",
            a.alpha
        )));
    }
    let model = detector::load_model(&a.model)?;
    let model_kappa: ConfidenceFunction = model.kappa_name.parse()?;
    if let Some(k) = a.kappa {
        let k: ConfidenceFunction = k.into();
        if k != model_kappa {
            return Err(Error::KappaMismatch {
                model: model.kappa_name.clone(),
                window: k.name().to_string(),
            });
        }
    }
    let opts = LoadOptions {
        format: a.format.into(),
        kappa: model_kappa,
        header: a.header,
    };
    let window = load_scores(&a.window, &opts)?;
    let report = detector::detect(&model, &window, a.alpha)?;
    if let Some(path) = &a.report {
        write_atomic(path, detector::to_json_sig17(&report)?.as_bytes())?;
    }
    (|| {
        writeln!(
            out,
            "{:>8}  {:>12}  {:>14}  {:>10}  violated",
            "c_target", "b_star", "theta", "coverage"
        )?;
        for c in &report.per_coverage {
            writeln!(
                out,
                "{:>8.4}  {:>12.8}  {:>14.8}  {:>10.6}  {}",
                c.c_target,
                c.b_star,
                c.theta,
                c.empirical_coverage,
                if c.violated { "yes" } else { "no" }
            )?;
        }
        writeln!(out, "k = {}", report.window_size)?;
        writeln!(out, "V = {:.6e}", report.v_statistic)?;
        writeln!(out, "t = {:.6}", report.t_statistic)?;
        writeln!(out, "p-value = {:.6e}", report.p_value)?;
        writeln!(
            out,
            "{}",
            if report.shift_detected {
                format!("shift detected (p < {})", a.alpha)
            } else {
                "no shift detected".to_string()
            }
        )
    })()
    .map_err(io_err)?;
    Ok(if report.shift_detected {
        EXIT_SHIFT
    } else {
        EXIT_OK
    })
}

fn load_pool(
    path: &Path,
    format: PoolFormat,
    kappa: ConfidenceFunction,
    header: bool,
) -> Result<Reference> {
    Ok(match format {
        PoolFormat::Raw => Reference::Scores(load_scores(
            path,
            &LoadOptions {
                format: ScoreFormat::RawScores,
                kappa,
                header,
            },
        )?),
        PoolFormat::Softmax => Reference::Vectors(load_vectors(path, VectorKind::Softmax, header)?),
        PoolFormat::Embedding => {
            Reference::Vectors(load_vectors(path, VectorKind::Embedding, header)?)
        }
    })
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let plan = TrialPlan {
        window_sizes: a.window_sizes.clone(),
        n_trials: a.trials,
        alpha: a.alpha,
        seed: a.seed,
    };
    plan.validate()?;
    check_delta(a.delta)?;
    check_coverages(a.coverages)?;
    let method_name: MethodName = a.method.into();
    if a.format == PoolFormat::Embedding
        && matches!(
            method_name,
            MethodName::Ours | MethodName::SingleSr | MethodName::SingleEnt
        )
    {
        return Err(Error::invalid(format!(
            "method {method_name} needs raw scores or softmax pools"
        )));
    }
    if method_name == MethodName::Mmd && a.permutations == 0 {
        return Err(Error::invalid("--permutations must be >= 1"));
    }

    let kappa: ConfidenceFunction = a.kappa.into();
    let id_full = load_pool(&a.id, a.format, kappa, a.header)?;
    let shifted = load_pool(&a.shifted, a.format, kappa, a.header)?;
    let (train, id) = match &a.train {
        Some(p) => (load_pool(p, a.format, kappa, a.header)?, id_full),
        None => split_pool(&id_full, a.seed)?,
    };

    let (method, id, shifted) = match method_name {
        MethodName::Ours => {
            let model = detector::fit(&scores_of(&train, kappa)?, a.delta, a.coverages)?;
            (
                EvalMethod::Ours(model),
                Reference::Scores(scores_of(&id, kappa)?),
                Reference::Scores(scores_of(&shifted, kappa)?),
            )
        }
        other => {
            let baseline = match other {
                MethodName::Ks => BaselineMethod::Ks,
                MethodName::Mmd => BaselineMethod::Mmd,
                MethodName::SingleSr => BaselineMethod::SingleSr,
                _ => BaselineMethod::SingleEntropy,
            };
            let config = BaselineConfig {
                n_permutations: a.permutations,
                mmd_cap: a.mmd_cap,
                seed: a.seed,
            };
            (
                EvalMethod::Baseline(BaselineDetector::new(baseline, train, config)),
                id,
                shifted,
            )
        }
    };

    let result = run_trials(&id, &shifted, &method, &plan)?;
    let csv = metrics_csv(&result.rows);
    write_atomic(&a.out, csv.as_bytes())?;
    out.write_all(csv.as_bytes()).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let spec: DistSpec = a.dist.parse()?;
    if a.n == 0 {
        return Err(Error::invalid("--n must be >= 1"));
    }
    let mut rng = Rng::new(a.seed);
    let mut text = String::new();
    match &spec {
        DistSpec::Scores(d) => {
            for s in gen_scores(d, a.n, &mut rng)?.scores() {
                text.push_str(&format!("{s}\n"));
            }
        }
        DistSpec::Vectors(d) => {
            for row in gen_vectors(d, a.n, &mut rng)?.vectors() {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
        }
    }
    write_atomic(&a.out, text.as_bytes())?;
    writeln!(out, "wrote {} draws to {}", a.n, a.out.display()).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        window_size: a.window_size,
        methods: a.methods.clone(),
        dim: a.dim,
        repeats: a.repeats,
        seed: a.seed,
    };
    cfg.validate()?;
    let rows = run_bench(&cfg)?;
    let csv = bench::bench_csv(&rows);
    write_atomic(&a.out, csv.as_bytes())?;
    out.write_all(csv.as_bytes()).map_err(io_err)?;
    Ok(EXIT_OK)
}
