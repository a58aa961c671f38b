//! The `fluxgrad` command line: `attribute`, `verify`, `eval` and `train-toy`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluxgrad_core::baselines::{
    integrated_gradients_with, smoothgrad_with, IgConfig, SmoothGradConfig,
};
use fluxgrad_core::divergence::{divergence_theorem_report_with, DivergenceReport};
use fluxgrad_core::evalkit::{
    self, benchmark_with, BenchConfig, BenchMethod, BenchmarkReport, Grid, MethodSpec, Replacement,
};
use fluxgrad_core::gradfield::{fit_toy_model, MlpArch, TrainConfig};
use fluxgrad_core::neflag::{neflag_attribute_with, NeflagConfig, StepRule};
use fluxgrad_core::{Activation, AttributionMap, Error, Model, SphereSpec};
use serde::{Deserialize, Serialize};

use crate::io::{self, IoError};
use crate::pool::Pool;

pub mod exit {
    pub const OK: u8 = 0;
    /// Unexpected failure, e.g. an output file could not be written.
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NO_NEGATIVE_FLUX: u8 = 3;
    pub const VERIFY_FAILED: u8 = 4;
    pub const EMPTY_RESULT: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(
    name = "fluxgrad",
    version,
    about = "Gradient-flux feature attribution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute one input and write JSON, CSV and (with --grid) PGM files.
    Attribute(AttributeArgs),
    /// Check the divergence theorem on a ball around an input.
    Verify(VerifyArgs),
    /// Deletion/insertion benchmark over a set of inputs.
    Eval(EvalArgs),
    /// Train a small MLP classifier on a labeled CSV.
    TrainToy(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Neflag,
    Ig,
    Smoothgrad,
    Saliency,
    Taylor,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepRuleArg {
    Sign,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReplacementArg {
    Black,
    Mean,
    Blur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Softplus,
    Tanh,
    Relu,
}

/// Method parameters. Unset values fall back to each method's defaults.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// NeFLAG sphere radius.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// NeFLAG points or SmoothGrad draws.
    #[arg(long)]
    pub samples: Option<usize>,
    /// NeFLAG recurrence steps or IG integration steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = StepRuleArg::Sign)]
    pub step_rule: StepRuleArg,
    /// IG baseline or Taylor root: comma-separated values or one broadcast value.
    #[arg(long, allow_hyphen_values = true)]
    pub baseline: Option<String>,
    /// SmoothGrad noise level.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding one input row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Neflag)]
    pub method: MethodArg,
    #[command(flatten)]
    pub params: MethodArgs,
    /// Input layout as HxW; enables the PGM heatmap.
    #[arg(long, value_parser = io::parse_grid)]
    pub grid: Option<Grid>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path prefix; writes PREFIX.json, PREFIX.csv and PREFIX.pgm.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding the ball center; the origin when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ball radius.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Monte-Carlo samples for each side.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of inputs, one per row (a trailing label column is ignored).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = [MethodArg::Neflag, MethodArg::Ig, MethodArg::Smoothgrad, MethodArg::Saliency, MethodArg::Random]
    )]
    pub method: Vec<MethodArg>,
    #[command(flatten)]
    pub params: MethodArgs,
    /// Single-round replacement. By default black then blur (with --grid) or mean.
    #[arg(long, value_enum)]
    pub replacement: Option<ReplacementArg>,
    #[arg(long, value_parser = io::parse_grid)]
    pub grid: Option<Grid>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-sample curves to PREFIX.curves.csv.
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV; the last column is the class.
    #[arg(long)]
    pub input: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    /// Hidden layer widths, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [16])]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Softplus)]
    pub activation: ActivationArg,
}

/// The `eval` JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub seed: u64,
    pub methods: Vec<BenchMethod>,
    pub config: BenchConfig,
    pub report: BenchmarkReport,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    fn reading(flag: &str, e: IoError) -> Self {
        Failure::usage(format!("--{flag} {e}"))
    }

    fn writing(e: impl std::fmt::Display) -> Self {
        Failure {
            code: exit::FAILURE,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoNegativeFlux { .. } | Error::StationaryGradient => exit::NO_NEGATIVE_FLUX,
            _ => exit::USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: &Command) -> Result<u8, Failure> {
    let pool = Pool::from_env().map_err(|e| Failure::usage(e.to_string()))?;
    match command {
        Command::Attribute(a) => cmd_attribute(a, &pool),
        Command::Verify(a) => cmd_verify(a, &pool),
        Command::Eval(a) => cmd_eval(a, &pool),
        Command::TrainToy(a) => cmd_train_toy(a),
    }
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    io::read_model(path).map_err(|e| Failure::reading("model", e))
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn check_grid(grid: Option<Grid>, dim: usize) -> Result<(), Failure> {
    match grid {
        Some(g) if g.height * g.width != dim => Err(Failure::usage(format!(
            "--grid {}x{} does not match model dimension {dim}",
            g.height, g.width
        ))),
        _ => Ok(()),
    }
}

/// Builds the method configuration from the command-line parameters.
pub fn method_spec(method: MethodArg, p: &MethodArgs, dim: usize) -> Result<MethodSpec, Failure> {
    let baseline = p
        .baseline
        .as_deref()
        .map(|b| io::parse_vector(b, dim))
        .transpose()
        .map_err(|e| Failure::usage(format!("--baseline {e}")))?;
    Ok(match method {
        MethodArg::Neflag => {
            let d = NeflagConfig::default();
            let cfg = NeflagConfig {
                epsilon: p.epsilon.unwrap_or(d.epsilon),
                samples: p.samples.unwrap_or(d.samples),
                steps: p.steps.unwrap_or(d.steps),
                step_rule: match p.step_rule {
                    StepRuleArg::Sign => StepRule::Sign,
                    StepRuleArg::Normalized => StepRule::Normalized,
                },
                ..d
            };
            cfg.validate()?;
            MethodSpec::Neflag(cfg)
        }
        MethodArg::Ig => MethodSpec::Ig(IgConfig {
            baseline,
            steps: p.steps.unwrap_or(IgConfig::default().steps),
        }),
        MethodArg::Smoothgrad => {
            let d = SmoothGradConfig::default();
            MethodSpec::Smoothgrad(SmoothGradConfig {
                sigma: p.sigma.unwrap_or(d.sigma),
                samples: p.samples.unwrap_or(d.samples),
                ..d
            })
        }
        MethodArg::Saliency => MethodSpec::Saliency,
        MethodArg::Taylor => MethodSpec::Taylor { root: baseline },
        MethodArg::Random => MethodSpec::Random,
    })
}

fn attribute_one(
    model: &Model,
    x: &[f64],
    spec: &MethodSpec,
    seed: u64,
    pool: &Pool,
) -> fluxgrad_core::Result<AttributionMap> {
    match spec {
        MethodSpec::Neflag(cfg) => {
            neflag_attribute_with(model, x, &NeflagConfig { seed, ..*cfg }, pool)
        }
        MethodSpec::Smoothgrad(cfg) => {
            smoothgrad_with(model, x, &SmoothGradConfig { seed, ..*cfg }, pool)
        }
        MethodSpec::Ig(cfg) => integrated_gradients_with(model, x, cfg, pool),
        other => evalkit::attribute(model, x, other, seed, 0),
    }
}

fn single_input(path: &Path, dim: usize) -> Result<Vec<f64>, Failure> {
    let mut rows = io::read_inputs(path, dim).map_err(|e| Failure::reading("input", e))?;
    match rows.len() {
        1 => Ok(rows.remove(0)),
        n => Err(Failure::usage(format!(
            "--input {}: expected exactly one row, found {n}",
            path.display()
        ))),
    }
}

pub fn cmd_attribute(a: &AttributeArgs, pool: &Pool) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    let x = single_input(&a.input, model.dim())?;
    check_grid(a.grid, model.dim())?;
    let spec = method_spec(a.method, &a.params, model.dim())?;
    let map = attribute_one(&model, &x, &spec, a.seed, pool)?;

    io::write_json(&with_suffix(&a.out, "json"), &map).map_err(Failure::writing)?;
    io::write_text(&with_suffix(&a.out, "csv"), &io::attribution_csv(&map))
        .map_err(Failure::writing)?;
    if let Some(grid) = a.grid {
        let pgm = io::attribution_pgm(&map, grid).map_err(Failure::usage)?;
        io::write_text(&with_suffix(&a.out, "pgm"), &pgm).map_err(Failure::writing)?;
    }
    Ok(exit::OK)
}

pub fn cmd_verify(a: &VerifyArgs, pool: &Pool) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    let center = match &a.input {
        Some(path) => single_input(path, model.dim())?,
        None => vec![0.0; model.dim()],
    };
    let sphere = SphereSpec::new(center, a.epsilon)?;
    let report: DivergenceReport =
        divergence_theorem_report_with(&model, &sphere, a.samples, a.samples, a.seed, pool)?;
    match &a.out {
        Some(path) => io::write_json(path, &report).map_err(Failure::writing)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(Failure::writing)?
        ),
    }
    eprintln!(
        "{}: volume {} surface {} (diff {}, stderr {})",
        if report.pass { "PASS" } else { "FAIL" },
        report.lhs,
        report.rhs,
        report.diff,
        report.stderr
    );
    Ok(if report.pass {
        exit::OK
    } else {
        exit::VERIFY_FAILED
    })
}

pub fn cmd_eval(a: &EvalArgs, pool: &Pool) -> Result<u8, Failure> {
    let model = load_model(&a.model)?;
    let inputs =
        io::read_inputs(&a.input, model.dim()).map_err(|e| Failure::reading("input", e))?;
    if inputs.is_empty() {
        return Err(Failure::usage(format!(
            "--input {}: no inputs",
            a.input.display()
        )));
    }
    check_grid(a.grid, model.dim())?;

    let mut methods: Vec<BenchMethod> = Vec::new();
    for &m in &a.method {
        let method: BenchMethod = method_spec(m, &a.params, model.dim())?.into();
        if methods.iter().any(|b| b.label == method.label) {
            return Err(Failure::usage(format!(
                "--method {} given twice",
                method.label
            )));
        }
        methods.push(method);
    }
    let mut config = BenchConfig::two_round(a.grid);
    if let Some(r) = a.replacement {
        let replacement = match r {
            ReplacementArg::Black => Replacement::Black,
            ReplacementArg::Mean => Replacement::Mean,
            ReplacementArg::Blur => Replacement::Blur,
        };
        if replacement == Replacement::Blur && a.grid.is_none() {
            return Err(Failure::usage("--replacement blur needs --grid"));
        }
        config.rounds = vec![replacement];
    }
    config.keep_curves = a.curves;

    let report = benchmark_with(&model, &inputs, &methods, &config, a.seed, pool)?;
    for s in report.samples.iter().filter(|s| s.error.is_some()) {
        eprintln!(
            "{} on input {}: {}",
            s.label,
            s.input,
            s.error.as_deref().unwrap_or("")
        );
    }
    let table = io::benchmark_table_csv(&report).map_err(Failure::writing)?;
    io::write_text(&with_suffix(&a.out, "csv"), &table).map_err(Failure::writing)?;
    if a.curves {
        let curves = io::curves_csv(&report).map_err(Failure::writing)?;
        io::write_text(&with_suffix(&a.out, "curves.csv"), &curves).map_err(Failure::writing)?;
    }
    let empty = report.succeeded() == 0;
    let doc = EvalDocument {
        seed: a.seed,
        methods,
        config,
        report,
    };
    io::write_json(&with_suffix(&a.out, "json"), &doc).map_err(Failure::writing)?;
    print!("{table}");
    if empty {
        return Err(Failure {
            code: exit::EMPTY_RESULT,
            message: "no sample succeeded".into(),
        });
    }
    Ok(exit::OK)
}

pub fn cmd_train_toy(a: &TrainArgs) -> Result<u8, Failure> {
    let data = io::read_dataset(&a.input).map_err(|e| Failure::reading("input", e))?;
    let arch = MlpArch {
        hidden: a.hidden.clone(),
        activation: match a.activation {
            ActivationArg::Softplus => Activation::Softplus,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Relu => Activation::Relu,
        },
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    let trained = fit_toy_model(&data, &arch, &cfg)?;
    io::write_model(&a.out, &trained.model).map_err(Failure::writing)?;
    println!(
        "final_loss {} accuracy {}",
        trained.final_loss, trained.accuracy
    );
    Ok(exit::OK)
}
