use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use openset::classifier::{classify_set, write_decisions};
use openset::dataset::{generate_synthetic, load_feature_set, write_feature_set, SynthSpec};
use openset::harness::{run_comparison, tally, ComparisonConfig, ConfigEcho};
use openset::roc::{calibrate_with_curves, load_thresholds, save_thresholds, write_roc_dump, Strategy};
use openset::targets::{build_target_matrix, DEFAULT_NEGATIVE_VALUE};
use openset::trainer::{load_model, save_model, train_model, TrainConfig};
use openset::{ClassifierModel, Error, FeatureSet, Result, ThresholdSet};

#[derive(Parser)]
#[command(
    name = "openset",
    version,
    about = "Open-set classifier head with ROC-calibrated rejection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic train.csv / val.csv pair.
    Synth {
        #[arg(long)]
        n_rel: usize,
        #[arg(long)]
        n_irr: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        per_class_train: usize,
        #[arg(long)]
        per_class_val: usize,
        #[arg(long)]
        spread: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train per-class weights on a feature CSV.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NEGATIVE_VALUE, allow_negative_numbers = true)]
        negative: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive per-class rejection thresholds from training scores.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        constraint: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        roc_dump: Option<PathBuf>,
    },
    /// Classify a validation CSV and write an accuracy report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Run our method (normal and ROC thresholds) against both baselines.
    Compare {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        constraint: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Normal,
    Roc,
    RocConstrained,
}

fn strategy(arg: StrategyArg, constraint: Option<f64>) -> Result<Strategy> {
    match (arg, constraint) {
        (StrategyArg::Normal, None) => Ok(Strategy::Normal),
        (StrategyArg::Roc, None) => Ok(Strategy::RocOptimal),
        (StrategyArg::RocConstrained, Some(constraint)) if (0.0..=1.0).contains(&constraint) => {
            Ok(Strategy::RocConstrained { constraint })
        }
        (StrategyArg::RocConstrained, Some(q)) => Err(Error::InvalidConfig(format!("constraint {q} outside [0, 1]"))),
        (StrategyArg::RocConstrained, None) => Err(Error::InvalidConfig("roc-constrained needs --constraint".into())),
        (_, Some(_)) => Err(Error::InvalidConfig(
            "--constraint only applies to roc-constrained".into(),
        )),
    }
}

fn write_json<S: serde::Serialize>(value: &S, path: &PathBuf) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            n_rel,
            n_irr,
            dim,
            per_class_train,
            per_class_val,
            spread,
            seed,
            out,
        } => {
            let spec = SynthSpec {
                n_rel,
                n_irr,
                dim,
                per_class_train,
                per_class_val,
                spread,
                seed,
            };
            let (train, val) = generate_synthetic::<f64>(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            write_feature_set(&train, out.join("train.csv"))?;
            write_feature_set(&val, out.join("val.csv"))
        }
        Command::Train {
            train,
            negative,
            epochs,
            lr,
            tol,
            seed,
            out,
        } => {
            let data: FeatureSet = load_feature_set(&train)?;
            let cfg = TrainConfig {
                epochs,
                lr0: lr,
                tol,
                seed,
                ..TrainConfig::default()
            };
            let targets = build_target_matrix(&data, negative)?;
            let model = train_model(&data, &targets, &cfg)?;
            save_model(&model, &out)
        }
        Command::Calibrate {
            model,
            train,
            strategy: arg,
            constraint,
            out,
            roc_dump,
        } => {
            let strategy = strategy(arg, constraint)?;
            let model: ClassifierModel = load_model(&model)?;
            let data: FeatureSet = load_feature_set(&train)?;
            let (set, curves) = calibrate_with_curves(&model, &data, strategy)?;
            save_thresholds(&set, &out)?;
            if let Some(dir) = roc_dump {
                write_roc_dump(dir, &set, &curves)?;
            }
            Ok(())
        }
        Command::Eval {
            model,
            thresholds,
            val,
            out,
            decisions,
        } => {
            let model: ClassifierModel = load_model(&model)?;
            let set: ThresholdSet = load_thresholds(&thresholds)?;
            let data: FeatureSet = load_feature_set(&val)?;
            let made = classify_set(&model, &data, &set)?;
            let echo = ConfigEcho {
                negative_value: model.train_meta.negative_value,
                strategy: Some(set.strategy),
                constraint: set.strategy.constraint(),
                seed: model.train_meta.config.seed,
            };
            let report = tally("evaluation", &made, &data, echo)?;
            write_json(&report, &out)?;
            if let Some(path) = decisions {
                write_decisions(&made, &model.class_names, path)?;
            }
            Ok(())
        }
        Command::Compare {
            train,
            val,
            constraint,
            seed,
            out,
        } => {
            if let Some(q) = constraint {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidConfig(format!("constraint {q} outside [0, 1]")));
                }
            }
            let train: FeatureSet = load_feature_set(&train)?;
            let val: FeatureSet = load_feature_set(&val)?;
            let cfg = ComparisonConfig {
                train: TrainConfig {
                    seed,
                    ..TrainConfig::default()
                },
                constraint,
                ..ComparisonConfig::default()
            };
            let table = run_comparison(&train, &val, &cfg)?;
            write_json(&table, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("openset: {e}");
            ExitCode::FAILURE
        }
    }
}
