use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use shse_core::features::Variant;
use shse_enhancer::summary::{REFERENCE_FLOPS, REFERENCE_PARAMS};
use shse_enhancer::{count_params_flops, EnhancerConfig};
use shse_pipeline::rir::Mode;
use shse_pipeline::{eval, features, mix, rir, synth, train, ExperimentConfig};

#[derive(Parser)]
#[command(name = "shse", version, about = "Spherical-harmonic multichannel speech enhancement pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration as TOML.
    Config,
    /// Write a synthetic speech and noise corpus (`speech/`, `noise/`).
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate room scenarios and their impulse responses.
    Rir {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "train")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix speech and noise through the simulated rooms.
    Mix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        speech: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        rirs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute STFT and SHT feature tensors for a mixed dataset.
    Features {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// SHT truncation order; overrides the configuration.
        #[arg(long)]
        order: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the enhancer.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an evaluation dataset, optionally enhanced by a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print parameter and FLOP counts.
    Info {
        /// Experiment configuration whose model is described; the full-size
        /// model of `--variant` when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "parallel")]
        variant: Variant,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Config => print!("{}", ExperimentConfig::default().to_toml()),
        Command::Synth { common, out } => {
            let (speech, noise) = synth::cmd_synth(&common.load()?, &out)?;
            println!("wrote {speech} speech and {noise} noise files to {}", out.display());
        }
        Command::Rir { common, mode, out } => {
            let scenarios = rir::cmd_rir(&common.load()?, mode, &out)?;
            println!("wrote {} scenarios to {}", scenarios.len(), out.display());
        }
        Command::Mix {
            common,
            speech,
            noise,
            rirs,
            out,
        } => {
            let pairs = mix::cmd_mix(&common.load()?, &speech, &noise, &rirs, &out)?;
            println!("wrote {} pairs to {}", pairs.len(), out.display());
        }
        Command::Features {
            common,
            dataset,
            order,
            out,
        } => {
            let mut config = common.load()?;
            if let Some(order) = order {
                config.features.order = order;
                config.model.sht_channels = 2 * shse_core::spherical::coefficient_count(order);
            }
            let records = features::cmd_features(&config, &dataset, &out)?;
            println!("wrote features for {} utterances to {}", records.len(), out.display());
        }
        Command::Train {
            common,
            dataset,
            features,
            resume,
            out,
        } => {
            let config = common.load()?;
            let history = train::cmd_train(&config, &dataset, &features, &out, resume.as_deref(), &mut |r| {
                let valid = r.valid_loss.map_or("-".to_string(), |v| format!("{v:.6e}"));
                eprintln!("epoch {:>3}  lr {:.2e}  train {:.6e}  valid {valid}", r.epoch + 1, r.lr, r.train_loss);
            })?;
            println!("trained {} epochs; checkpoint {}", history.len(), train::checkpoint_path(&out).display());
        }
        Command::Eval {
            common,
            dataset,
            model,
            out,
        } => {
            let config = common.load()?;
            let report = eval::cmd_eval(&config, model.as_deref(), &dataset, out.as_deref())?;
            print!("{}", eval::format_table(&report, &config.data.eval_t60));
        }
        Command::Info { config, variant } => info(config.as_deref(), variant)?,
    }
    Ok(())
}

fn info(config: Option<&Path>, variant: Variant) -> anyhow::Result<()> {
    let model = match config {
        Some(path) => ExperimentConfig::load(path).context("loading configuration")?.model,
        None => EnhancerConfig::for_variant(variant),
    };
    model.validate()?;
    let summary = count_params_flops(&model);
    println!("variant      {}", model.variant);
    println!("parameters   {} ({:.3} M)", summary.params, summary.params as f64 / 1e6);
    println!("reference    {:.2} M parameters", REFERENCE_PARAMS / 1e6);
    println!("ratio        {:.3}", summary.params as f64 / REFERENCE_PARAMS);
    println!("flops/s      {:.3} G", summary.flops_per_second / 1e9);
    println!("reference    {:.2} G FLOPs", REFERENCE_FLOPS / 1e9);
    Ok(())
}
