mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gazeboost::corpus::Dv;
use gazeboost::error::{Error, ErrorCategory, Result};

use commands::Ctx;
use manifest::{DataSplit, RunManifest};

#[derive(Parser)]
#[command(
    name = "gazeboost",
    about = "Gradient-boosted prediction of eye-tracking reading measures",
    version
)]
struct Cli {
    /// Run manifest (JSON) naming the data, resources and configs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Restrict to one DV (nFix, FFD, GPT, TRT, fixProp) or "all".
    #[arg(long, global = true, default_value = "all")]
    dv: String,
    /// Override the manifest's experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the manifest's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the feature matrix and write it with its manifest.
    Features {
        /// Which data split to featurize.
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Train one final model per DV on the full training set.
    Train {
        /// Take per-DV iteration counts from a cv_report.json.
        #[arg(long)]
        iters: Option<PathBuf>,
    },
    /// Predict the test split with trained models; writes clipped values.
    Predict,
    /// Sentence-level k-fold cross-validation per DV.
    Cv,
    /// Random hyperparameter search per DV.
    Tune {
        /// Number of sampled configurations.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Retrain with feature groups removed and report deviations.
    Ablate,
    /// Stepwise linear-regression baseline under the same protocol.
    Baseline,
    /// Per-DV MAEs and their mean, from files or direct values.
    Score {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Five comma-separated per-DV MAEs.
        #[arg(long)]
        maes: Option<String>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_dvs(spec: &str) -> Result<Vec<Dv>> {
    if spec == "all" {
        return Ok(Dv::ALL.to_vec());
    }
    let dv = Dv::parse(spec).ok_or_else(|| {
        Error::Config(format!(
            "unknown DV {spec:?}; expected one of nFix, FFD, GPT, TRT, fixProp or all"
        ))
    })?;
    Ok(vec![dv])
}

fn load_ctx(cli: &Cli) -> Result<Ctx> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <manifest.json>".into()))?;
    let manifest = RunManifest::load(config_path)?;
    let seed = cli.seed.unwrap_or(manifest.seed);
    let out_dir = cli.out.clone().unwrap_or_else(|| manifest.out_dir.clone());
    let dvs = parse_dvs(&cli.dv)?;
    Ok(Ctx {
        manifest,
        seed,
        out_dir,
        dvs,
    })
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // Ignore a second initialization (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Features { split } => {
            let split = match split.as_str() {
                "train" => DataSplit::Train,
                "test" => DataSplit::Test,
                other => {
                    return Err(Error::Config(format!(
                        "unknown split {other:?}; expected train or test"
                    )))
                }
            };
            commands::cmd_features(&load_ctx(cli)?, split)
        }
        Command::Train { iters } => commands::cmd_train(&load_ctx(cli)?, iters.as_deref()),
        Command::Predict => commands::cmd_predict(&load_ctx(cli)?),
        Command::Cv => commands::cmd_cv(&load_ctx(cli)?),
        Command::Tune { trials } => commands::cmd_tune(&load_ctx(cli)?, *trials),
        Command::Ablate => commands::cmd_ablate(&load_ctx(cli)?),
        Command::Baseline => commands::cmd_baseline(&load_ctx(cli)?),
        Command::Score {
            pred,
            gold,
            maes,
            json,
        } => commands::cmd_score(
            pred.as_deref(),
            gold.as_deref(),
            maes.as_deref(),
            json.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.category() {
                ErrorCategory::Input => 2,
                ErrorCategory::Contract => 3,
                ErrorCategory::Internal => 1,
            };
            ExitCode::from(code)
        }
    }
}
