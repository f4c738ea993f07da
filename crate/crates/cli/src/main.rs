mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Universal graph embeddings: kernel precomputation, pretraining,
/// fine-tuning, embedding export and evaluation.
#[derive(Parser, Debug)]
#[command(name = "unigraph", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults apply to every missing field.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.max_epoch=200`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute and cache the WL, shortest-path and FGSD kernel matrices.
    Kernels {
        /// Datasets to process; all configured datasets by default.
        #[arg(long = "dataset", short)]
        datasets: Vec<String>,
    },
    /// Train the shared encoder on several datasets and write a checkpoint.
    Pretrain {
        #[arg(long = "dataset", short)]
        datasets: Vec<String>,
    },
    /// k-fold fine-tuning on one dataset.
    Finetune {
        #[arg(long, short)]
        dataset: String,
        /// Start every fold from this checkpoint instead of fresh weights.
        #[arg(long)]
        from_checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// With --from-checkpoint, also run the same folds from fresh
        /// weights and report both.
        #[arg(long, requires = "from_checkpoint")]
        compare_fresh: bool,
    },
    /// Write one embedding row per graph.
    Embed {
        #[arg(long, short)]
        dataset: String,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output file; `<out_dir>/embed/<dataset>/embeddings.csv` by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline accuracies and, with a checkpoint, the model's accuracy.
    Eval {
        #[arg(long, short)]
        dataset: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also score the three-or-more-cycles rule (MUTAG-style labels).
        #[arg(long)]
        cycle_rule: bool,
    },
}

/// A failure reported as one line on stderr.
#[derive(Debug)]
pub struct CliError(String);

impl CliError {
    pub fn msg(m: impl Into<String>) -> Self {
        CliError(m.into())
    }
}

impl From<unigraph::Error> for CliError {
    fn from(e: unigraph::Error) -> Self {
        match e {
            unigraph::Error::MissingKernel { dataset, kind } => CliError(format!(
                "no cached {kind} kernel for dataset `{dataset}` under this kernel config; run `unigraph kernels` first"
            )),
            e => CliError(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(format!("i/o error: {e}"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(cli.common.config.as_deref(), &cli.common.overrides, cli.common.seed)?;
    if let Some(d) = cli.common.out_dir {
        cfg.out_dir = d;
    }
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::msg("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::msg(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Kernels { datasets } => commands::kernels(&cfg, &datasets),
        Command::Pretrain { datasets } => commands::pretrain(&cfg, &datasets),
        Command::Finetune {
            dataset,
            from_checkpoint,
            folds,
            compare_fresh,
        } => commands::finetune(&cfg, &dataset, from_checkpoint.as_deref(), folds, compare_fresh),
        Command::Embed {
            dataset,
            checkpoint,
            out,
        } => commands::embed(&cfg, &dataset, &checkpoint, out.as_deref()),
        Command::Eval {
            dataset,
            checkpoint,
            cycle_rule,
        } => commands::eval(&cfg, &dataset, checkpoint.as_deref(), cycle_rule),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError(m)) => {
            eprintln!("error: {}", m.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
