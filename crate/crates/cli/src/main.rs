//! `ppv`: command-line frontend for preprocessing verification experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppv_core::{Error, ErrorClass};

#[derive(Parser)]
#[command(
    name = "ppv",
    version,
    about = "Verify model preprocessing from explanations of a privately released dataset"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// How to read a CSV table.
#[derive(Args, Clone)]
pub struct TableArgs {
    /// Schema sidecar (JSON); inferred from the data when omitted.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Label column when inferring; defaults to the last column.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Arch {
    Logreg,
    Dtree,
    Rforest,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ExplainerArg {
    Lime,
    Shap,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Ml,
    Threshold,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Binary,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PaperCompat,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GranularityArg {
    PerQuery,
    Concatenated,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic classification table.
    Synth {
        /// Synthetic spec (JSON); defaults apply to omitted fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        features: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Also write the schema sidecar here.
        #[arg(long)]
        schema_output: Option<PathBuf>,
    },
    /// Release a Laplace-noised copy of a table.
    Privatize {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        /// Privacy budget, a positive number or `inf`.
        #[arg(long)]
        epsilon: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise the label column too.
        #[arg(long)]
        noise_label: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply a preprocessing pipeline to a table.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        /// Pipeline bitmask: 1 drop duplicates, 2 drop outliers, 4 scale, 8 resample.
        #[arg(long)]
        pipeline: u8,
        #[arg(long, value_enum, default_value = "paper-compat")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Held-out table to transform with the fitted scaler.
        #[arg(long, requires = "test_output")]
        test: Option<PathBuf>,
        #[arg(long)]
        test_output: Option<PathBuf>,
    },
    /// Train a classifier.
    Train {
        #[arg(long, value_enum)]
        arch: Arch,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        /// Training parameters (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Preprocess with this pipeline bitmask first; the model then
        /// accepts unscaled inputs.
        #[arg(long)]
        pipeline: Option<u8>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Explain a model's predictions, one attribution row per query.
    Explain {
        #[command(flatten)]
        run: ExplainRun,
    },
    /// Build response vectors (attributions, intercept, prediction).
    Respond {
        #[command(flatten)]
        run: ExplainRun,
    },
    /// Fit a verifier on labeled response files.
    FitVerifier {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "binary")]
        task: TaskArg,
        /// Response file and its pipeline bitmask, as FILE:MASK. Repeat
        /// for every model.
        #[arg(long = "labeled", required = true)]
        labeled: Vec<String>,
        #[arg(long, value_enum, default_value = "paper-compat")]
        mode: ModeArg,
        /// Proper-model responses (threshold method; defaults to the
        /// labeled file with the full mask).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "per-query")]
        granularity: GranularityArg,
        /// Verifier model parameters (JSON, ML method).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Classify a model from its responses.
    Verify {
        #[arg(long)]
        verifier: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also write the verdict JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Hamming-distance membership inference against a released table.
    Attack {
        #[arg(long)]
        released: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        control: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 0.05)]
        fpr: f64,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        /// Directory for attack.json and the per-sample distance CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full ε sweep and write the report.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long, env = "PPV_SEED")]
        seed: Option<u64>,
    },
}

#[derive(Args)]
pub struct ExplainRun {
    #[arg(long)]
    pub model: PathBuf,
    /// Query table.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_enum, default_value = "lime")]
    pub explainer: ExplainerArg,
    /// Explainer parameters (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Background table; defaults to the queries.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Internal => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| commands::run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(4),
    }
}
