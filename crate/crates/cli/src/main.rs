//! Batch front-end: dataset synthesis, pipeline runs, lambda sweeps, and
//! parameter audits.

mod fit;
mod presets;
mod sweep;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use subspacekit::evaldata::{save_labels, save_matrix, SyntheticSpec};
use subspacekit::pipeline::Method;

#[derive(Parser)]
#[command(
    name = "subspacekit",
    version,
    about = "Subspace clustering with a closed-form self-expressive map"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate union-of-subspaces data with ground-truth labels
    Synth(SynthArgs),
    /// Train (or solve directly) and cluster one dataset
    Fit(FitArgs),
    /// Run one fit per lambda and tabulate the results
    Sweep(SweepArgs),
    /// Audit per-layer and total parameter counts of an architecture
    Params(ParamsArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of subspaces
    #[arg(long)]
    k: usize,
    /// Intrinsic dimension of each subspace
    #[arg(long)]
    dim: usize,
    /// Samples drawn per subspace
    #[arg(long = "per-class")]
    per_class: usize,
    /// Ambient dimension
    #[arg(long)]
    ambient: usize,
    /// Additive Gaussian noise level
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw independent (not mutually orthogonal) subspaces
    #[arg(long)]
    independent: bool,
    /// Output directory for data.sscm and labels.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Dcfsc,
    Dsc,
    Shallow,
}

impl MethodArg {
    fn into_method(self) -> Method {
        match self {
            MethodArg::Dcfsc => Method::Dcfsc,
            MethodArg::Dsc => Method::Dsc,
            MethodArg::Shallow => Method::Shallow,
        }
    }
}

/// Flags shared between `fit` and `sweep`.
#[derive(Args, Clone)]
struct FitShared {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Data matrix (.sscm or .csv), one sample per row
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth labels (.csv, one integer per line)
    #[arg(long)]
    labels: PathBuf,
    /// Preset name or path to a JSON architecture file
    #[arg(long)]
    arch: Option<String>,
    /// Coefficient-penalty weight of the baseline objective
    #[arg(long)]
    lambda1: Option<f64>,
    /// Self-expression-residual weight of the baseline objective
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of clusters
    #[arg(long)]
    k: Option<usize>,
    /// Per-row affinity threshold ratio in (0,1]; 1 keeps every entry
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter storage width (arithmetic is always 64-bit)
    #[arg(long, default_value_t = 64)]
    width: u32,
    /// Start from a saved parameter checkpoint instead of a seeded draw
    #[arg(long)]
    init: Option<PathBuf>,
    /// Skip auto-encoder pretraining
    #[arg(long = "no-pretrain")]
    no_pretrain: bool,
    /// Pretraining epochs before the main fit
    #[arg(long = "pretrain-epochs", default_value_t = 100)]
    pretrain_epochs: usize,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    shared: FitShared,
    /// Closed-form regularization weight
    #[arg(long)]
    lambda: Option<f64>,
    /// Output report path (.json); the training log and predicted labels
    /// land next to it
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: FitShared,
    /// Comma-separated lambda values
    #[arg(long = "lambda-list", value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
    /// Geometric lambda range start:end:xFACTOR, e.g. 1:1e6:x10
    #[arg(long = "lambda-range")]
    lambda_range: Option<String>,
    /// Worker threads (capped by SUBSPACEKIT_THREADS)
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Output table path (.csv)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParamsArgs {
    /// Preset name or path to a JSON architecture file
    #[arg(long)]
    arch: String,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] subspacekit::evaldata::IoError),
    #[error(transparent)]
    Synth(#[from] subspacekit::evaldata::SynthError),
    #[error(transparent)]
    Eval(#[from] subspacekit::evaldata::EvalError),
    #[error(transparent)]
    Pipeline(#[from] subspacekit::pipeline::PipelineError),
    #[error(transparent)]
    Spectral(#[from] subspacekit::spectral::SpectralError),
    #[error(transparent)]
    SelfExpress(#[from] subspacekit::selfexpress::SelfExpressError),
    #[error(transparent)]
    Checkpoint(#[from] subspacekit::neuralnet::CheckpointError),
    #[error("unknown preset or missing architecture file {0:?}; presets: {1}")]
    UnknownPreset(String, String),
    #[error("--lambda is required for method {0}")]
    MissingLambda(&'static str),
    #[error("--arch is required for method {0}")]
    MissingArch(&'static str),
    #[error("--k is required (no preset supplies a cluster count)")]
    MissingK,
    #[error("invalid flag: {0}")]
    InvalidFlag(String),
    #[error("architecture file {0}: {1}")]
    BadArchFile(PathBuf, String),
    #[error("writing output failed: {0}")]
    IoFailure(#[from] std::io::Error),
}

impl CliError {
    /// Short machine-greppable name of the underlying failure.
    fn name(&self) -> &'static str {
        use subspacekit::evaldata::{EvalError, IoError};
        use subspacekit::linalg::LinalgError;
        use subspacekit::neuralnet::NeuralError;
        use subspacekit::pipeline::PipelineError;
        use subspacekit::selfexpress::SelfExpressError;
        use subspacekit::spectral::SpectralError;

        fn linalg(e: &LinalgError) -> &'static str {
            match e {
                LinalgError::DimensionMismatch { .. } => "DimensionMismatch",
                LinalgError::NotSymmetric => "NotSymmetric",
                LinalgError::NotPositiveDefinite => "NotPositiveDefinite",
                LinalgError::ConvergenceFailure => "ConvergenceFailure",
                LinalgError::EmptyInput => "EmptyInput",
                LinalgError::KTooLarge { .. } => "KTooLarge",
                LinalgError::NonFinite => "NonFinite",
            }
        }
        fn selfexpress(e: &SelfExpressError) -> &'static str {
            match e {
                SelfExpressError::NonPositiveLambda(_) => "NonPositiveLambda",
                SelfExpressError::TooFewSamples(_) => "TooFewSamples",
                SelfExpressError::ZeroDiagonalPivot { .. } => "ZeroDiagonalPivot",
                SelfExpressError::Linalg(inner) => linalg(inner),
            }
        }
        fn neural(e: &NeuralError) -> &'static str {
            match e {
                NeuralError::ShapeMismatch { .. } => "ShapeMismatch",
                NeuralError::InvalidSpec(_) => "InvalidSpec",
                NeuralError::StaleTape => "StaleTape",
                NeuralError::UnknownBlock(_) => "UnknownBlock",
                NeuralError::NonFinite(_) => "NonFinite",
            }
        }
        match self {
            CliError::Io(e) => match e {
                IoError::MalformedFile(_) => "MalformedFile",
                IoError::EmptyDirectory(_) => "EmptyDirectory",
                IoError::UnsupportedFormat(_) => "UnsupportedFormat",
                IoError::IoFailure(_) => "IoFailure",
            },
            CliError::Synth(_) => "InfeasibleSpec",
            CliError::Eval(e) => match e {
                EvalError::LengthMismatch { .. } => "LengthMismatch",
                EvalError::EmptyLabels => "EmptyLabels",
                EvalError::TooManyClusters(_) => "TooManyClusters",
            },
            CliError::Pipeline(e) => match e {
                PipelineError::Neural(inner) => neural(inner),
                PipelineError::SelfExpress(inner) => selfexpress(inner),
                PipelineError::Linalg(inner) => linalg(inner),
                PipelineError::NonFiniteLoss { .. } => "NonFiniteLoss",
                PipelineError::InvalidConfig(_) => "InvalidConfig",
            },
            CliError::Spectral(e) => match e {
                SpectralError::AllZeroRow(_) => "AllZeroRow",
                SpectralError::InvalidAffinity(_) => "InvalidAffinity",
                SpectralError::InvalidConfig(_) => "InvalidConfig",
                SpectralError::Linalg(inner) => linalg(inner),
            },
            CliError::SelfExpress(e) => selfexpress(e),
            CliError::Checkpoint(_) => "MalformedCheckpoint",
            CliError::UnknownPreset(..) => "UnknownPreset",
            CliError::MissingLambda(_) => "MissingLambda",
            CliError::MissingArch(_) => "MissingArch",
            CliError::MissingK => "MissingK",
            CliError::InvalidFlag(_) => "InvalidFlag",
            CliError::BadArchFile(..) => "BadArchFile",
            CliError::IoFailure(_) => "IoFailure",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Fit(args) => fit::cmd_fit(&args),
        Command::Sweep(args) => sweep::cmd_sweep(&args),
        Command::Params(args) => cmd_params(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}: {err}", err.name());
            ExitCode::FAILURE
        }
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        k: args.k,
        subspace_dim: args.dim,
        points_per_subspace: args.per_class,
        ambient_dim: args.ambient,
        noise_sigma: args.noise,
        orthogonal: !args.independent,
        seed: args.seed,
    };
    let (data, labels) = spec.generate()?;
    std::fs::create_dir_all(&args.out)?;
    save_matrix(&args.out.join("data.sscm"), &data)?;
    save_labels(&args.out.join("labels.csv"), &labels)?;
    println!(
        "wrote {} samples x {} features to {}",
        data.rows(),
        data.cols(),
        args.out.display()
    );
    Ok(())
}

fn cmd_params(args: &ParamsArgs) -> Result<(), CliError> {
    let (spec, _) = fit::load_arch(&args.arch)?;
    println!("{:<5}  {:>12}  description", "layer", "params");
    for layer in spec.param_breakdown() {
        println!("{:<5}  {:>12}  {}", layer.index, layer.count, layer.label);
    }
    println!("total  {:>12}", spec.param_total());
    if let Some(idx) = spec.self_expressive_index() {
        if let subspacekit::LayerSpec::SelfExpressive { n } = spec.layers[idx] {
            println!(
                "note: the self-expressive block alone holds {n}x{n} = {} coefficients \
                 ({} bytes at 64-bit)",
                n * n,
                n * n * 8
            );
        }
    }
    Ok(())
}
