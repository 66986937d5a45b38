//! Command-line entry point.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use covcast::augment::augment_corpus;
use covcast::baselines::{fit_in_context, in_context_forecast, seasonal_naive_sample};
use covcast::config::{load_config, ConfigSet};
use covcast::dataio::{load_corpus, load_forecasts, save_corpus, save_forecasts, ForecastRecord};
use covcast::evaluation::{evaluate_forecasts, rolling_tasks, task_sample};
use covcast::experiments::{
    ablation_report, run_impact_sensitivity, train_variant, training_corpus, LagMode,
};
use covcast::model::gradcheck::{check_sample, gradient_check};
use covcast::model::{checkpoint, init_params, train, Forecaster};
use covcast::rng::stream;
use covcast::series::{generate_corpus, SeriesConfig};
use covcast::{Error, Result};

#[derive(Parser)]
#[command(name = "covcast", version, about = "Covariate-aware probabilistic forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Root seed of every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Configuration file (`key = value` lines); defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ConfigSet> {
        match &self.config {
            Some(p) => load_config(p),
            None => Ok(ConfigSet::default()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cosmic,
    CosmicNocov,
    SeasonalNaive,
    RidgeCtx,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Ablation,
    ImpactSensitivity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lag {
    Fixed0,
    Geometric,
}

#[derive(Subcommand)]
enum Command {
    /// Write a corpus of synthetic seasonal target series.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 256)]
        length: usize,
        #[arg(long, default_value_t = 32)]
        horizon: usize,
    },
    /// Attach sampled covariates and impacts to windows of a corpus.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Train a forecaster and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional file receiving one loss per line.
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Forecast every sample of a corpus.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Model checkpoint; required by cosmic methods, optional base model
        /// for ridge-ctx (seasonal naive otherwise).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Forecast at the rolling evaluation origins instead of each
        /// sample's own context length.
        #[arg(long)]
        rolling: bool,
    },
    /// Score forecast files against a corpus.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Forecast file; the model is named after the file stem. Repeatable.
        #[arg(long, required = true)]
        forecasts: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted study and write `<name>.json` and `<name>.csv`.
    Experiment {
        #[arg(value_enum)]
        study: Study,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "fixed0")]
        lag_mode: Lag,
        /// Use this trained model for impact sensitivity instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    CheckGrad {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        entries: usize,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_model(path: &Option<PathBuf>, method: &str) -> Result<Forecaster> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::Capability(format!("method {method} needs --checkpoint")))?;
    checkpoint::load(p)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            common,
            out,
            samples,
            length,
            horizon,
        } => {
            let cfg = common.config()?;
            let series = SeriesConfig {
                length,
                horizon,
                level: cfg.experiment.target_level,
                ..SeriesConfig::default()
            };
            let corpus = generate_corpus(samples, &series, common.seed)?;
            save_corpus(&corpus, &out)?;
            log::info!("wrote {} samples to {}", corpus.len(), out.display());
        }
        Command::Augment {
            common,
            corpus,
            out,
            samples,
        } => {
            let cfg = common.config()?;
            let source = load_corpus(&corpus)?;
            let augmented = augment_corpus(&source, samples, &cfg.augment, common.seed)?;
            save_corpus(&augmented, &out)?;
            log::info!("wrote {} augmented samples to {}", augmented.len(), out.display());
        }
        Command::Train {
            common,
            corpus,
            out,
            loss_log,
        } => {
            let cfg = common.config()?;
            let data = load_corpus(&corpus)?;
            let mut model = Forecaster::new(cfg.model.clone(), common.seed)?;
            log::info!("training {} parameters", model.num_parameters());
            let report = train::train(&mut model, &data, &cfg.augment, &cfg.train, common.seed)?;
            checkpoint::save(&model, &out)?;
            if let Some(p) = loss_log {
                let text: String = report.losses.iter().map(|l| format!("{l}\n")).collect();
                write(&p, text)?;
            }
            if let Some(l) = report.losses.last() {
                log::info!("final loss {l:.5}");
            }
        }
        Command::Forecast {
            common,
            corpus,
            method,
            checkpoint: ckpt,
            out,
            rolling,
        } => {
            let cfg = common.config()?;
            let data = load_corpus(&corpus)?;
            let model = match method {
                Method::Cosmic => Some(load_model(&ckpt, "cosmic")?),
                Method::CosmicNocov => Some(load_model(&ckpt, "cosmic-nocov")?),
                Method::RidgeCtx => ckpt.as_ref().map(checkpoint::load).transpose()?,
                Method::SeasonalNaive => None,
            };
            let mut records = Vec::new();
            for sample in &data {
                let tasks = if rolling {
                    let (tasks, skipped) =
                        rolling_tasks(sample, &cfg.eval.horizon_periods, cfg.eval.rolling_fraction);
                    for s in skipped {
                        log::warn!("skipping '{}' at horizon {}: {}", s.sample_id, s.horizon, s.reason);
                    }
                    tasks.iter().map(|t| task_sample(sample, t)).collect()
                } else {
                    vec![sample.clone()]
                };
                for s in tasks {
                    let origin = s.context_length;
                    let s = match &model {
                        Some(m) => s.crop_context(m.config.max_context),
                        None => s,
                    };
                    let values = match (method, &model) {
                        (Method::Cosmic, Some(m)) => m.predict(&s, true, true)?,
                        (Method::CosmicNocov, Some(m)) => m.predict(&s, false, true)?,
                        (Method::SeasonalNaive, _) => seasonal_naive_sample(&s)?,
                        (Method::RidgeCtx, m) => {
                            let fit = fit_in_context(&s, cfg.eval.ridge_lambda, &cfg.eval.ridge_lags)?;
                            match m {
                                Some(m) => in_context_forecast(&fit, &s, |r| m.predict(r, false, true))?,
                                None => in_context_forecast(&fit, &s, seasonal_naive_sample)?,
                            }
                        }
                        _ => unreachable!("cosmic methods load a model"),
                    };
                    records.push(ForecastRecord::new(&s.id, origin, values));
                }
            }
            save_forecasts(&records, &out)?;
            log::info!("wrote {} forecasts to {}", records.len(), out.display());
        }
        Command::Evaluate {
            common: _,
            corpus,
            forecasts,
            out,
        } => {
            let data = load_corpus(&corpus)?;
            let mut models = Vec::new();
            for p in &forecasts {
                let name = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                models.push((name, load_forecasts(p)?));
            }
            let table = evaluate_forecasts(&data, &models)?;
            for w in &table.warnings {
                log::warn!("{w}");
            }
            write(&out, serde_json::to_string_pretty(&table)? + "\n")?;
        }
        Command::Experiment {
            study,
            common,
            out_dir,
            lag_mode,
            checkpoint: ckpt,
        } => {
            let cfg = common.config()?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            match study {
                Study::Ablation => {
                    let corpus = training_corpus(&cfg, common.seed)?;
                    log::info!("training augmented variant");
                    let aug = train_variant(&cfg, &corpus, true, common.seed)?;
                    log::info!("training unaugmented variant");
                    let unaug = train_variant(&cfg, &corpus, false, common.seed)?;
                    let report = ablation_report(&cfg, common.seed, &aug, &unaug)?;
                    write(&out_dir.join("ablation.json"), serde_json::to_string_pretty(&report)? + "\n")?;
                    write(&out_dir.join("ablation.csv"), report.to_csv())?;
                }
                Study::ImpactSensitivity => {
                    let model = match &ckpt {
                        Some(p) => checkpoint::load(p)?,
                        None => {
                            let corpus = training_corpus(&cfg, common.seed)?;
                            log::info!("training augmented model");
                            train_variant(&cfg, &corpus, true, common.seed)?.0
                        }
                    };
                    let mode = match lag_mode {
                        Lag::Fixed0 => LagMode::Fixed0,
                        Lag::Geometric => LagMode::Geometric,
                    };
                    let report = run_impact_sensitivity(&cfg, Some(&model), mode, common.seed)?;
                    write(
                        &out_dir.join("impact_sensitivity.json"),
                        serde_json::to_string_pretty(&report)? + "\n",
                    )?;
                    write(&out_dir.join("impact_sensitivity.csv"), report.to_csv())?;
                }
            }
            log::info!("reports written to {}", out_dir.display());
        }
        Command::CheckGrad {
            common,
            entries,
            epsilon,
            tolerance,
        } => {
            let cfg = common.config()?;
            let params = init_params::<f64>(&cfg.model, &mut stream(common.seed, "check-grad-init"));
            if params.num_values() > 5000 {
                log::warn!(
                    "{} parameters; gradient checks are meant for tiny configurations",
                    params.num_values()
                );
            }
            let sample = check_sample(common.seed);
            let report = gradient_check(&params, &cfg.model, &sample, epsilon, entries, common.seed)?;
            println!("max relative error: {:e}", report.max_relative_error);
            return Ok(report.max_relative_error < tolerance);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
