//! `gaitnet`: synthesize, ingest, augment, train, cross-validate, ablate and
//! export gate importances for two-stream gait classifiers.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O or input
//! data error, 4 numeric failure during training.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Io(m) => write!(f, "input/output error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<gaitnet::Error> for Failure {
    fn from(e: gaitnet::Error) -> Self {
        use gaitnet::Error as E;
        let msg = e.to_string();
        match e {
            E::NonFinite { .. } => Failure::Numeric(msg),
            E::Config(_) | E::Shape(_) | E::Leakage(_) => Failure::Config(msg),
            E::Io { .. } | E::Parse { .. } | E::EmptyDataset | E::InvalidSample { .. } | E::Checkpoint(_) | E::Json(_) => {
                Failure::Io(msg)
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "gaitnet", version, about = "Two-stream CNN gait disorder classification")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads a run configuration.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// TOML run configuration with [data], [model], [train], [augment] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest (overrides data.manifest).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override any config field, e.g. `--set model.pool_out=[2,2]`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    /// Network: 2s-cnn, 3djp-cnn, 3drjdp-cnn or fcnet.
    #[arg(long)]
    variant: Option<String>,
    /// Head: full, no-cnn, no-maxp or sin-cnn.
    #[arg(long)]
    head: Option<String>,
    /// Target frame count after temporal normalization.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    head_channels: Option<usize>,
    #[arg(long)]
    stream_channels: Option<usize>,
    /// Enable the joint and pair gates.
    #[arg(long)]
    attention: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training seed (initialization, folds, mixup, batch order).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Mixup weight of the first parent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Balance every class to this many samples instead of the largest class.
    #[arg(long)]
    target_per_class: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Result<Overrides, Failure> {
        let mut o = Overrides::default();
        let int = |v: usize| v as i64;
        o.set_opt("data.manifest", self.data.as_ref().map(|p| p.display().to_string()));
        o.set_opt("model.architecture", self.variant.clone());
        o.set_opt("model.head_variant", self.head.clone());
        o.set_opt("model.frames", self.frames.map(int));
        o.set_opt("model.head_channels", self.head_channels.map(int));
        o.set_opt("model.stream_channels", self.stream_channels.map(int));
        if self.attention {
            o.set("model.attention", true);
        }
        o.set_opt("train.epochs", self.epochs.map(int));
        o.set_opt("train.lr", self.lr);
        o.set_opt("train.batch_size", self.batch_size.map(int));
        o.set_opt("train.seed", self.seed.map(|s| s as i64));
        o.set_opt("train.k_folds", self.folds.map(int));
        o.set_opt("augment.lambda", self.lambda);
        o.set_opt("augment.target_per_class", self.target_per_class.map(int));
        for raw in &self.sets {
            o.push_assignment(raw)?;
        }
        Ok(o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic motion dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Samples per class: healthy,joint_problem,muscle_weakness,neurological_defect.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frames per generated motion.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate and normalize a dataset; dump JP and RJDP tensors.
    Ingest(Common),
    /// Balance a dataset with inter-class mixup.
    Augment(Common),
    /// Train one model on the whole (balanced) dataset and save a checkpoint.
    Train(Common),
    /// Stratified k-fold cross-validation with metrics and plots.
    Cv {
        #[command(flatten)]
        common: Common,
        /// Folds trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Measure per-sample test time.
        #[arg(long)]
        timing: bool,
    },
    /// Cross-validate the four head variants with identical seeds and splits.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Cross-validate with gates enabled and export importance tables and charts.
    Attention {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-render reports from saved metrics.json files.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let log = commands::Log { quiet: cli.quiet };
    match cli.command {
        Command::Synth {
            out,
            counts,
            seed,
            frames,
            config,
        } => {
            let mut o = Overrides::default();
            if let Some(c) = counts {
                o.set("data.counts", c.into_iter().map(|n| n as i64).collect::<Vec<_>>());
            }
            o.set_opt("data.seed", seed.map(|s| s as i64));
            o.set_opt("data.frames", frames.map(|f| f as i64));
            let cfg = config::load(config.as_deref(), &o)?;
            commands::synth(&cfg, &out, &log)
        }
        Command::Ingest(c) => commands::ingest(&load(&c)?, &c.out, &log),
        Command::Augment(c) => commands::augment(&load(&c)?, &c.out, &log),
        Command::Train(c) => commands::train(&load(&c)?, &c.out, &log),
        Command::Cv { common, jobs, timing } => commands::cv(&load(&common)?, &common.out, jobs, timing, &log),
        Command::Ablate { common, jobs } => commands::ablate(&load(&common)?, &common.out, jobs, &log),
        Command::Attention { common, jobs } => commands::attention(&load(&common)?, &common.out, jobs, &log),
        Command::Report { metrics, out } => commands::report(&metrics, &out, &log),
    }
}

fn load(c: &Common) -> Result<config::RunConfig, Failure> {
    config::load(c.config.as_deref(), &c.overrides()?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gaitnet: {f}");
            ExitCode::from(f.code())
        }
    }
}
