//! `warpmask` command-line interface.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 when the input data or
//! configuration is rejected.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use log::info;
use warpmask::config::{parse_list, RunConfig};
use warpmask::metrics::{log_spectral_distance, segmental_snr, si_sdr};
use warpmask::mixer::{
    mix_at_snr, write_synthetic_corpus, CorpusSpec, Manifest, MixSpec, NoiseKind,
};
use warpmask::neural::{read_model, train, write_model};
use warpmask::pipeline::{sweep, sweep_csv, Enhancer, Task};
use warpmask::{read_wav, write_wav, Error};

#[derive(Debug, Parser)]
#[command(
    name = "warpmask",
    version,
    about = "Task-aware mask-based speech enhancement"
)]
struct Cli {
    /// Flat key=value run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mix a clean and a noise file at a target SNR.
    Mix(MixArgs),
    /// Write a synthetic training corpus and its manifest.
    SynthCorpus(CorpusArgs),
    /// Train a mask estimator from a manifest.
    Train(TrainArgs),
    /// Enhance one noisy file.
    Enhance(EnhanceArgs),
    /// Evaluate a model over a gamma x SNR grid and write CSV.
    Sweep(SweepArgs),
    /// Score an estimate against a clean reference.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct MixArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the scaled noise here.
    #[arg(long)]
    noise_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    num_clean: usize,
    #[arg(long, default_value_t = 4.0)]
    clean_duration: f64,
    /// Comma-separated noise kinds: white, pink, babble-surrogate.
    #[arg(long, default_value = "white,pink")]
    noises: String,
    #[arg(long, default_value = "0,5,10", allow_hyphen_values = true)]
    snrs: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file, or a directory when several gammas are given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, conflicts_with_all = ["task", "gammas"])]
    gamma: Option<f64>,
    /// Preset gamma: asv, asr or quality.
    #[arg(long, conflicts_with = "gammas")]
    task: Option<String>,
    /// Comma-separated gammas, all from one network pass.
    #[arg(long)]
    gammas: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    gammas: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snrs: Option<String>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Clean reference.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::read(p),
        None => Ok(RunConfig::default()),
    }
}

fn required(value: Option<PathBuf>, what: &str) -> Result<PathBuf, Error> {
    value.ok_or_else(|| Error::Config(format!("no {what} given (flag or config key)")))
}

fn gamma_label(g: f64) -> String {
    format!("gamma_{g}").replace('.', "p")
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Mix(a) => {
            let clean = read_wav(&a.clean)?;
            let noise = read_wav(&a.noise)?;
            let mix = mix_at_snr(&clean, &noise, &MixSpec::new(a.snr, a.seed))?;
            write_wav(&a.out, &mix.noisy)?;
            if let Some(p) = a.noise_out {
                write_wav(p, &mix.scaled_noise)?;
            }
        }
        Command::SynthCorpus(a) => {
            let noise_kinds = a
                .noises
                .split(',')
                .map(|s| s.trim().parse::<NoiseKind>())
                .collect::<Result<Vec<_>, _>>()?;
            let spec = CorpusSpec {
                num_clean: a.num_clean,
                clean_duration_s: a.clean_duration,
                noise_duration_s: a.clean_duration * 1.5,
                noise_kinds,
                snrs_db: parse_list(&a.snrs)?,
                seed: a.seed,
            };
            let (manifest, path) = write_synthetic_corpus(&a.out, &spec)?;
            info!("wrote {} mixtures to {}", manifest.len(), path.display());
            println!("{}", path.display());
        }
        Command::Train(a) => {
            if let Some(v) = a.alpha {
                cfg.set("alpha", &v.to_string())?;
            }
            if let Some(v) = a.epochs {
                cfg.set("epochs", &v.to_string())?;
            }
            if let Some(v) = a.seed {
                cfg.set("seed", &v.to_string())?;
            }
            if a.manifest.is_some() {
                cfg.manifest = a.manifest;
            }
            if a.out.is_some() {
                cfg.model = a.out;
            }
            cfg.validate()?;
            info!("run configuration:\n{}", cfg.to_text());
            let manifest = Manifest::read(required(cfg.manifest.clone(), "manifest")?)?;
            let out = required(cfg.model.clone(), "model output")?;
            let (params, history) = train(&manifest, &cfg.train, &cfg.net)?;
            for e in &history.epochs {
                info!(
                    "epoch {} lr {:.6} train {:.6} validation {}",
                    e.epoch,
                    e.lr,
                    e.train_loss,
                    e.validation_loss.map_or("-".into(), |v| format!("{v:.6}"))
                );
            }
            write_model(&out, &params)?;
        }
        Command::Enhance(a) => {
            let model = required(a.model.or(cfg.model.clone()), "model")?;
            let params = read_model(model)?;
            let enhancer = Enhancer::new(&params)?;
            let noisy = read_wav(&a.input)?;
            if let Some(list) = a.gammas {
                let gammas = parse_list(&list)?;
                fs::create_dir_all(&a.out)?;
                for (g, w) in gammas.iter().zip(enhancer.enhance_many(&noisy, &gammas)?) {
                    write_wav(a.out.join(format!("{}.wav", gamma_label(*g))), &w)?;
                }
            } else {
                let gamma = match (a.gamma, a.task) {
                    (Some(g), _) => g,
                    (None, Some(t)) => Task::parse(&t)
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "unknown task {t:?}; expected asv, asr or quality"
                            ))
                        })?
                        .gamma(),
                    (None, None) => cfg.gamma,
                };
                info!(
                    "enhancing with gamma {gamma}, alpha {}",
                    params.alpha_trained
                );
                write_wav(&a.out, &enhancer.enhance(&noisy, gamma)?)?;
            }
        }
        Command::Sweep(a) => {
            if let Some(g) = a.gammas {
                cfg.set("gammas", &g)?;
            }
            if let Some(s) = a.snrs {
                cfg.set("snrs", &s)?;
            }
            cfg.validate()?;
            info!("run configuration:\n{}", cfg.to_text());
            let params = read_model(required(a.model.or(cfg.model.clone()), "model")?)?;
            let manifest =
                Manifest::read(required(a.manifest.or(cfg.manifest.clone()), "manifest")?)?;
            let csv = sweep_csv(&sweep(&manifest, &params, &cfg.gammas, &cfg.snrs)?);
            match a.out.or(cfg.out.clone()) {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Eval(a) => {
            let reference = read_wav(&a.reference)?;
            let est = read_wav(&a.input)?;
            println!("seg_snr_db,si_sdr_db,lsd_db");
            println!(
                "{:.6},{:.6},{:.6}",
                segmental_snr(&reference, &est)?,
                si_sdr(&reference, &est)?,
                log_spectral_distance(&reference, &est)?
            );
        }
    }
    Ok(())
}

/// Runs with `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
