use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spp_core::{Hyperparams, Loss, StructureKind, TaskKind};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "spp", version, about = "Sparse Elastic-Net models over itemset and sequence patterns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Fit,
    Path,
    Cv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at one lambda (a fraction of lambda_max) for every kappa.
    Fit(RunArgs),
    /// Solve the lambda-by-kappa grid with warm starts.
    Path(RunArgs),
    /// Cross-validate the lambda path for every kappa and select the best pair.
    Cv(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Itemset,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Squared,
    Logistic,
}

/// Fold layout for `cv`: leave-one-out or `k:<int>` shuffled folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSpec {
    LeaveOneOut,
    KFold(usize),
}

impl FromStr for FoldSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "loo" {
            return Ok(FoldSpec::LeaveOneOut);
        }
        let k = s
            .strip_prefix("k:")
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| format!("expected `loo` or `k:<int>`, got {s:?}"))?;
        if k < 2 {
            return Err(format!("need at least 2 folds, got {k}"));
        }
        Ok(FoldSpec::KFold(k))
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Dataset file: one instance per line, label first, then item ids.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "itemset")]
    pub structure: StructureArg,
    #[arg(long, value_enum, default_value = "squared")]
    pub loss: LossArg,
    /// Number of lambda values on the path.
    #[arg(long, default_value_t = 10)]
    pub lambda_count: usize,
    /// Smallest lambda as a fraction of lambda_max; also the `fit` lambda.
    #[arg(long, default_value_t = 0.01)]
    pub lambda_ratio: f64,
    /// Comma-separated kappa values, ascending and starting at 0.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1,1,10,100")]
    pub kappa: Vec<f64>,
    /// Duality-gap tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Longest pattern considered.
    #[arg(long, default_value_t = 3)]
    pub max_len: usize,
    /// Epochs during which both references are advanced.
    #[arg(long = "dyn-M", default_value_t = 1)]
    pub dyn_m: usize,
    /// Every-other-epoch screening cycles before screening every 10th epoch.
    #[arg(long = "dense-T", default_value_t = 5)]
    pub dense_t: usize,
    /// `loo` or `k:<int>`.
    #[arg(long, default_value = "loo")]
    pub folds: FoldSpec,
    /// Worker threads for cross-validation folds.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for the k-fold shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: PathBuf,
    pub structure: StructureKind,
    pub loss: Loss,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
    pub kappas: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub folds: FoldSpec,
    pub threads: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let (command, args) = match cli.command {
            Command::Fit(a) => (CommandKind::Fit, a),
            Command::Path(a) => (CommandKind::Path, a),
            Command::Cv(a) => (CommandKind::Cv, a),
        };
        let config = |msg: String| CliError::Config(msg);
        if args.lambda_count == 0 {
            return Err(config("--lambda-count must be at least 1".into()));
        }
        if !(args.lambda_ratio > 0.0 && args.lambda_ratio <= 1.0) {
            return Err(config(format!("--lambda-ratio must lie in (0, 1], got {}", args.lambda_ratio)));
        }
        if args.kappa.is_empty() {
            return Err(config("--kappa needs at least one value".into()));
        }
        if args.threads == 0 {
            return Err(config("--threads must be at least 1".into()));
        }
        let hyperparams = Hyperparams {
            epsilon: args.eps,
            dyn_m: args.dyn_m,
            dense_t: args.dense_t,
            max_len: args.max_len,
            ..Default::default()
        };
        hyperparams.validate().map_err(|e| config(e.to_string()))?;
        Ok(RunConfig {
            command,
            input: args.input,
            structure: match args.structure {
                StructureArg::Itemset => StructureKind::Itemset,
                StructureArg::Sequence => StructureKind::Sequence,
            },
            loss: match args.loss {
                LossArg::Squared => Loss::Squared,
                LossArg::Logistic => Loss::Logistic,
            },
            lambda_count: args.lambda_count,
            lambda_ratio: args.lambda_ratio,
            kappas: args.kappa,
            hyperparams,
            folds: args.folds,
            threads: args.threads,
            out: args.out,
            seed: args.seed,
        })
    }

    pub fn task(&self) -> TaskKind {
        match self.loss {
            Loss::Squared => TaskKind::Regression,
            Loss::Logistic => TaskKind::Classification,
        }
    }
}
