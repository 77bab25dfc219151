//! `w2s` — scripted weak-to-strong experiments over embedding files.
//!
//! One subcommand per pipeline stage (`gen`, `train-weak`, `supervise`,
//! `train-strong`, `eval`) plus `bench` for the full multi-domain,
//! multi-seed protocol. Stages communicate only through files, so any
//! intermediate artifact can be swapped with externally produced
//! embeddings or logits.
//!
//! Exit codes: 0 success, 2 usage/config error, 1 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;

#[derive(Parser)]
#[command(name = "w2s", version, about = "Weak-to-strong class-prototype learning")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Root seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory for all written artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Logging verbosity: quiet, info, or debug.
    #[arg(long, global = true, default_value = "info")]
    log_level: LogLevel,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, clap::ValueEnum)]
enum LogLevel {
    Quiet,
    Info,
    Debug,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic benchmark embeddings and label files.
    Gen {
        /// Benchmark spec JSON.
        #[arg(long)]
        spec: PathBuf,
    },

    /// Train the weak model on embeddings with ground-truth labels.
    TrainWeak {
        /// Training embeddings (.w2sm), weak feature space.
        #[arg(long)]
        embeddings: PathBuf,
        /// Ground-truth labels (.w2sl).
        #[arg(long)]
        labels: PathBuf,
        /// Checkpoint base name (written under --out).
        #[arg(long, default_value = "weak")]
        model_out: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        warmup_ratio: Option<f64>,
        /// TrainConfig overrides (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Apply a weak checkpoint to embeddings, writing logits.
    Supervise {
        /// Weak checkpoint base path (expects .w2sm + .json).
        #[arg(long)]
        model: PathBuf,
        /// Embeddings to supervise (.w2sm), weak feature space.
        #[arg(long)]
        embeddings: PathBuf,
        /// Output logits file name (written under --out).
        #[arg(long, default_value = "weak_logits.w2sm")]
        logits_out: String,
        /// Write hard argmax pseudo-labels (.w2sl) instead of logits.
        #[arg(long, default_value_t = false)]
        hard: bool,
        /// Optional ground-truth labels; prints agreement when given.
        #[arg(long)]
        labels: Option<PathBuf>,
    },

    /// Train a strong head on embeddings under weak or label supervision.
    TrainStrong {
        /// Training embeddings (.w2sm), strong feature space.
        #[arg(long)]
        embeddings: PathBuf,
        /// Weak-logit supervision (.w2sm); soft losses require this.
        #[arg(long, conflicts_with = "labels")]
        supervision: Option<PathBuf>,
        /// Hard-label supervision (.w2sl); required by --loss ce.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Objective: cpl, ce, kd, auxconf, adaptconf.
        #[arg(long, default_value = "cpl")]
        loss: String,
        /// Head: prototype or linear. Defaults to prototype for cpl,
        /// linear otherwise.
        #[arg(long)]
        head: Option<String>,
        /// Softmax temperature for soft losses.
        #[arg(long)]
        tau: Option<f64>,
        /// Prototype init: anchor embeddings (.w2sm) averaged per class.
        #[arg(long, requires = "anchor_labels")]
        anchor_embeddings: Option<PathBuf>,
        /// Labels for the anchor embeddings (.w2sl).
        #[arg(long)]
        anchor_labels: Option<PathBuf>,
        /// Anchors averaged per class.
        #[arg(long, default_value_t = 5)]
        per_class: usize,
        /// Prototype init: load a k x d matrix file verbatim.
        #[arg(long, conflicts_with = "anchor_embeddings")]
        init_file: Option<PathBuf>,
        /// Checkpoint base name (written under --out).
        #[arg(long, default_value = "strong")]
        model_out: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        warmup_ratio: Option<f64>,
        /// TrainConfig overrides (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Evaluate a checkpoint on labeled embeddings.
    Eval {
        /// Checkpoint base path (expects .w2sm + .json).
        #[arg(long)]
        model: PathBuf,
        /// Evaluation embeddings (.w2sm).
        #[arg(long)]
        embeddings: PathBuf,
        /// Ground-truth labels (.w2sl).
        #[arg(long)]
        labels: PathBuf,
        /// Metrics JSON file name (written under --out).
        #[arg(long, default_value = "metrics.json")]
        metrics_out: String,
    },

    /// Run the full benchmark: every (domain, seed) pipeline plus reports.
    Bench {
        /// Benchmark spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated methods (default: all five).
        #[arg(long, default_value = "cpl,ce,kd,auxconf,adaptconf")]
        methods: String,
        /// Seeds: inclusive range `0..4` or comma list `0,1,2`.
        #[arg(long, default_value = "0..4")]
        seeds: String,
        /// Parallel (domain, seed) runs; 1 keeps everything sequential.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// TrainConfig overrides for strong-model training (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { spec } => commands::cmd_gen(&cli.global, &spec),
        Command::TrainWeak {
            embeddings,
            labels,
            model_out,
            epochs,
            batch_size,
            lr,
            warmup_ratio,
            config,
        } => commands::cmd_train_weak(
            &cli.global,
            &embeddings,
            &labels,
            &model_out,
            config::Overrides {
                epochs,
                batch_size,
                base_lr: lr,
                warmup_ratio,
                tau: None,
                config_file: config,
            },
        ),
        Command::Supervise {
            model,
            embeddings,
            logits_out,
            hard,
            labels,
        } => commands::cmd_supervise(
            &cli.global,
            &model,
            &embeddings,
            &logits_out,
            hard,
            labels.as_deref(),
        ),
        Command::TrainStrong {
            embeddings,
            supervision,
            labels,
            loss,
            head,
            tau,
            anchor_embeddings,
            anchor_labels,
            per_class,
            init_file,
            model_out,
            epochs,
            batch_size,
            lr,
            warmup_ratio,
            config,
        } => commands::cmd_train_strong(
            &cli.global,
            commands::TrainStrongArgs {
                embeddings,
                supervision,
                labels,
                loss,
                head,
                anchor_embeddings,
                anchor_labels,
                per_class,
                init_file,
                model_out,
            },
            config::Overrides {
                epochs,
                batch_size,
                base_lr: lr,
                warmup_ratio,
                tau,
                config_file: config,
            },
        ),
        Command::Eval {
            model,
            embeddings,
            labels,
            metrics_out,
        } => commands::cmd_eval(&cli.global, &model, &embeddings, &labels, &metrics_out),
        Command::Bench {
            spec,
            methods,
            seeds,
            jobs,
            config,
        } => commands::cmd_bench(&cli.global, &spec, &methods, &seeds, jobs, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Usage-level validation that a referenced input file exists.
fn require_file(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "input file not found: {}",
            path.display()
        )));
    }
    Ok(())
}
