//! `cntq` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cntq_core::pipeline::{self, FeatureSourceConfig, PipelineConfig};
use cntq_core::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "cntq", version, about = "Synthetic CNT-forest image pipeline")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of trees per forest; overrides the config file.
    #[arg(long, global = true)]
    trees: Option<usize>,
    /// `builtin` or `import:PATH`; overrides the config file.
    #[arg(long, global = true)]
    features: Option<FeatureSourceConfig>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate single-layer images and the layer manifest.
    Gen,
    /// Blend layer stacks into MLS images and label them.
    Blend,
    /// Stratified train/val/test split of the MLS images.
    Split,
    /// Extract feature rows for every split.
    Featurize,
    /// Train the regression forest (and classifier).
    Train,
    /// Score the test split and write the evaluation report.
    Eval,
    /// Write the label distribution report.
    Report,
    /// Run every stage in order.
    RunAll,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(trees) = cli.trees {
        cfg.rf.n_trees = trees;
    }
    if let Some(f) = &cli.features {
        cfg.features = f.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::Gen => {
            let layers = pipeline::cmd_gen(&cfg)?;
            println!("{} layers", layers.len());
        }
        Command::Blend => {
            let mls = pipeline::cmd_blend(&cfg)?;
            println!("{} MLS images", mls.len());
        }
        Command::Split => {
            let s = pipeline::cmd_split(&cfg)?;
            println!("train {} / val {} / test {}", s.train.len(), s.val.len(), s.test.len());
        }
        Command::Featurize => {
            let c = pipeline::cmd_featurize(&cfg)?;
            println!("rows: train {} / val {} / test {}", c.train, c.val, c.test);
        }
        Command::Train => {
            let m = pipeline::cmd_train(&cfg)?;
            println!("{} trees{}", m.regressor.trees.len(), if m.classifier.is_some() { " (+ classifier)" } else { "" });
        }
        Command::Report => {
            let path = pipeline::cmd_report(&cfg)?;
            println!("{}", path.display());
        }
        Command::Eval | Command::RunAll => {
            let report = if matches!(cli.command, Command::Eval) { pipeline::cmd_eval(&cfg)? } else { pipeline::run_all(&cfg)? };
            for (name, t) in &report.per_target {
                println!("{name}: rmse {:.6} baseline {:.6}", t.rmse, t.baseline_rmse);
            }
            if let Some(oa) = report.oa {
                println!("oa: {oa:.4}");
            }
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CNTQ_LOG", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
