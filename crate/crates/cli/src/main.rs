//! Command-line driver for the beam-selection simulation pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 scene-generation failure,
//! 4 numeric failure, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use panobeam::harness::{
    build_dataset, describe_record, evaluate_top_m, read_dataset, run_features_stage, run_fig5,
    run_fig6, run_gen_stage, run_trace_stage, split_by_environment, write_dataset,
    write_loss_csv, write_metrics_csv, write_per_env_csv, FeatureKind, RecordSet, RunConfig,
};
use panobeam::neuralnet::{load_checkpoint, save_checkpoint, BeamSelectionNet, ModelConfig};
use panobeam::Error;

#[derive(Parser)]
#[command(
    name = "panobeam",
    about = "Scene-based mmWave beam selection: synthetic cells, ray-traced channels, voxel features, and a 3-D CNN predictor.",
    version
)]
struct Cli {
    /// TOML config file; defaults apply for missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory for artifacts and reports.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Panoramic,
    Lidar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fig5,
    Fig6,
}

#[derive(Subcommand)]
enum Command {
    /// Generate environments and their panoramic point clouds.
    Gen,
    /// Trace channels and label optimal beam pairs for generated environments.
    Trace,
    /// Extract features and assemble the dataset directory.
    Features {
        /// Feature kind; defaults to the config's choice.
        #[arg(long)]
        kind: Option<KindArg>,
    },
    /// Train the beam-selection network on the dataset in the run directory.
    Train,
    /// Evaluate a trained checkpoint on the held-out environments.
    Eval,
    /// Run an end-to-end accuracy-trend experiment.
    Experiment {
        #[arg(long)]
        mode: ModeArg,
    },
    /// Print one dataset record human-readably.
    Inspect {
        /// Record index within records.bin.
        #[arg(long, default_value_t = 0)]
        record: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::OutOfRange(_) | Error::ShapeMismatch(_) => 2,
        Error::Generation(_) => 3,
        Error::Numeric(_) | Error::NoLink => 4,
        Error::Io(_) | Error::Format(_) => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut cfg = load_config(cli)?;
    let out = cli.out.clone();

    match &cli.command {
        Command::Gen => {
            let summary = run_gen_stage(&cfg, &out)?;
            println!(
                "generated {} environments, {} cloud points -> {}",
                summary.environments,
                summary.total_points,
                out.display()
            );
        }
        Command::Trace => {
            let summary = run_trace_stage(&cfg, &out)?;
            println!(
                "traced {} links ({} paths): {} labeled, {} shadowed",
                summary.samples, summary.total_paths, summary.labeled, summary.dropped
            );
        }
        Command::Features { kind } => {
            if let Some(kind) = kind {
                cfg.feature_kind = match kind {
                    KindArg::Panoramic => FeatureKind::Panoramic,
                    KindArg::Lidar => FeatureKind::Lidar,
                };
            }
            let manifest = run_features_stage(&cfg, &out)?;
            println!(
                "wrote {} records ({} dropped) of {:?} features -> {}",
                manifest.n_records,
                manifest.n_dropped,
                manifest.feature_kind,
                out.display()
            );
        }
        Command::Train => {
            let dataset = match read_dataset(&out) {
                Ok(ds) => ds,
                // No staged dataset yet: build one in memory from the config.
                Err(Error::Io(_)) => {
                    let ds = build_dataset(&cfg)?;
                    write_dataset(&out, &ds)?;
                    ds
                }
                Err(e) => return Err(e),
            };
            let (train, _) = split_by_environment(&dataset.records, &dataset.manifest)?;
            if train.is_empty() {
                return Err(Error::Config("training split is empty".into()));
            }
            let mut net = BeamSelectionNet::<f64>::new(
                ModelConfig::default_for(dataset.manifest.codebook_n),
                cfg.model.seed,
            )?;
            let mut cache = net.zeroed_state();
            let curve = net.train(
                &RecordSet { records: train },
                &cfg.model.schedule(),
                &cfg.model.optimizer(),
                &mut cache,
            )?;
            write_loss_csv(&out.join("loss.csv"), &curve)?;
            save_checkpoint(&net, &out.join("model.ckpt"))?;
            println!(
                "trained {} epochs, final mean loss {:.6} -> {}",
                curve.len(),
                curve.last().copied().unwrap_or(f64::NAN),
                out.join("model.ckpt").display()
            );
        }
        Command::Eval => {
            let dataset = read_dataset(&out)?;
            let net = load_checkpoint::<f64>(&out.join("model.ckpt"))?;
            let (_, test) = split_by_environment(&dataset.records, &dataset.manifest)?;
            if test.is_empty() {
                return Err(Error::Config("test split is empty".into()));
            }
            let metrics = evaluate_top_m(&net, &test, &cfg.eval.m_values)?;
            write_metrics_csv(&out.join("metrics.csv"), &metrics)?;
            write_per_env_csv(&out.join("metrics_per_env.csv"), &metrics)?;
            for (m, acc) in &metrics.top_m {
                println!("top-{m}: {:.4}", acc);
            }
        }
        Command::Experiment { mode } => match mode {
            ModeArg::Fig5 => {
                let rows = run_fig5(&cfg, &out)?;
                for row in rows {
                    println!(
                        "fraction {:.2}: {} samples, top-5 {:.4}",
                        row.fraction, row.n_samples, row.top5_accuracy
                    );
                }
            }
            ModeArg::Fig6 => {
                let rows = run_fig6(&cfg, &out)?;
                for row in rows {
                    println!(
                        "M={} S={:.0}m: panoramic {:.4}, lidar {:.4}",
                        row.m, row.lidar_range_m, row.panoramic_accuracy, row.lidar_accuracy
                    );
                }
            }
        },
        Command::Inspect { record } => {
            let dataset = read_dataset(&out)?;
            let rec = dataset.records.get(*record).ok_or_else(|| {
                Error::OutOfRange(format!(
                    "record {} outside 0..{}",
                    record,
                    dataset.records.len()
                ))
            })?;
            println!("{}", describe_record(&dataset.manifest, rec));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
