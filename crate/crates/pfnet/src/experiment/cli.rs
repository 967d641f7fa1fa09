//! The command-line interface behind the `pfnet` binary.
//!
//! Exit codes: 0 success, 1 runtime/training failure, 2 configuration error,
//! 3 verification-suite failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::manifest::write_corpus;
use crate::error::Error;
use crate::experiment::bench::{run_bench, BenchConfig};
use crate::experiment::checkpoint::Checkpoint;
use crate::experiment::config::ExperimentConfig;
use crate::experiment::train::{evaluate, load_corpus, train_loop};
use crate::export::export_filter_responses;
use crate::filterbank::{
    init_filterbank_opts, write_filterbank_text, FilterBankParams, InitOptions,
};
use crate::nn::gradcheck::{gradient_check_suite, GradCheckConfig};
use crate::nn::model::{FrontEndKind, SpeakerNet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Parser)]
#[command(
    name = "pfnet",
    version,
    about = "Learnable filter-bank front ends for raw-waveform speaker recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML); defaults to the built-in desk profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the front end: pfnet | sincnet | raw_fir.
    #[arg(long)]
    front_end: Option<String>,
    /// Override the epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic corpus as WAV files plus a manifest.
    GenData(Common),
    /// Train a model and write metrics log + checkpoint.
    Train(Common),
    /// Evaluate a trained checkpoint on the configured test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the finite-difference gradient verification suite.
    Gradcheck {
        /// RNG seed for the probes.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export per-filter time-domain taps and frequency responses as CSV.
    ExportFilters {
        #[command(flatten)]
        common: Common,
        /// Optional checkpoint; without it the initialized bank is exported.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Frequency grid points over [0, 0.5].
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Measure symmetric-vs-naive kernel synthesis and forward throughput.
    Bench {
        #[arg(long, default_value_t = 80)]
        filters: usize,
        #[arg(long, default_value_t = 251)]
        kernel_len: usize,
        #[arg(long, default_value_t = 5)]
        deform_points: usize,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        #[arg(long, default_value_t = 400)]
        frame_len: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

fn load_config(common: &Common) -> crate::error::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        if let Some(synth) = &mut cfg.data.synth {
            synth.seed = seed;
        }
    }
    if let Some(front) = &common.front_end {
        cfg.front_end = FrontEndKind::parse(front)?;
        if cfg.front_end == FrontEndKind::Sincnet {
            cfg.filter.num_deform_points = 0;
        }
    }
    if let Some(epochs) = common.epochs {
        cfg.epochs = epochs;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Precondition(_) | Error::Format { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parse and run; never panics on user input.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also for --help/--version)
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { EXIT_OK } else { EXIT_CONFIG };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(cli: Cli) -> crate::error::Result<i32> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = load_config(&common)?;
            let spec = cfg.data.synth.clone().ok_or_else(|| {
                Error::config("gen-data needs a [data.synth] section (manifest input is already materialized)")
            })?;
            let corpus = crate::data::synth::synth_corpus(&spec)?;
            let out = cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("pfnet-data"));
            let manifest = write_corpus(&corpus, &out)?;
            println!(
                "wrote {} utterances ({} classes) under {}",
                corpus.utterances.len(),
                corpus.num_classes,
                out.display()
            );
            println!("manifest: {}", manifest.display());
            Ok(EXIT_OK)
        }
        Command::Train(common) => {
            let mut cfg = load_config(&common)?;
            if cfg.output_dir.is_none() {
                cfg.output_dir = Some(PathBuf::from(format!(
                    "pfnet-run-{}-seed{}",
                    cfg.front_end.name(),
                    cfg.seed
                )));
            }
            let out = train_loop(&cfg)?;
            for r in &out.record.reports {
                println!("{}  (wall {:.1}s)", r.log_line(), r.wall_time_s);
            }
            if let Some(e) = out.record.epochs_to_threshold {
                println!("epochs to 95% frame accuracy: {e}");
            }
            if let Some(p) = &out.record.checkpoint_path {
                println!("checkpoint: {}", p.display());
            }
            if let Some(p) = &out.record.metrics_log_path {
                println!("metrics log: {}", p.display());
            }
            Ok(EXIT_OK)
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let corpus = load_corpus(&cfg)?;
            let test = crate::data::preprocess::frame_batch(
                &corpus,
                crate::data::Split::Test,
                &cfg.frames,
            )?;
            let trials = crate::data::synth::make_trial_list(
                &corpus,
                cfg.verification.nontargets_per_target,
                cfg.seed,
            )
            .ok();
            let mut model = SpeakerNet::new(
                &cfg.front_end_config(),
                &cfg.head,
                corpus.num_classes,
                test.frame_len(),
                cfg.seed,
            )?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            if ckpt.config_hash != cfg.setup_hash() {
                eprintln!(
                    "note: checkpoint setup hash {} differs from this config's {}",
                    ckpt.config_hash,
                    cfg.setup_hash()
                );
            }
            ckpt.apply(&mut model)?;
            let scores = evaluate(&mut model, &test, trials.as_ref())?;
            let eer = match scores.eer_percent {
                Some(v) => format!("{v:.3}"),
                None => "n/a".to_string(),
            };
            println!(
                "epoch {} | FER {:.3}% | CER {:.3}% | EER {}%",
                ckpt.epoch, scores.fer_percent, scores.cer_percent, eer
            );
            Ok(EXIT_OK)
        }
        Command::Gradcheck { seed } => {
            let cfg = GradCheckConfig {
                seed: seed.unwrap_or(0xF17),
                corrupt_probe: false,
            };
            let report = gradient_check_suite(&cfg)?;
            print!("{}", report.render());
            if report.all_pass() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_VERIFICATION)
            }
        }
        Command::ExportFilters {
            common,
            checkpoint,
            grid,
        } => {
            let cfg = load_config(&common)?;
            let spec = cfg.filter.spec();
            let params: FilterBankParams = match checkpoint {
                Some(path) => {
                    let ckpt = Checkpoint::load(&path)?;
                    bank_from_checkpoint(&ckpt, &spec)?
                }
                None => init_filterbank_opts(
                    &spec,
                    crate::seeds::derive_seed(cfg.seed, "front-end-init"),
                    &InitOptions {
                        mel_low_hz: cfg.filter.mel_low_hz,
                        dh_init_range: cfg.filter.dh_init_range,
                    },
                )?,
            };
            let out = cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("pfnet-filters"));
            std::fs::create_dir_all(&out)?;
            let time_path = out.join("filters_time.csv");
            let freq_path = out.join("filters_freq.csv");
            export_filter_responses(&spec, &params, grid, &time_path, &freq_path)?;
            let bank_path = out.join("filterbank.txt");
            std::fs::write(&bank_path, write_filterbank_text(&spec, &params)?)?;
            println!("wrote {}", time_path.display());
            println!("wrote {}", freq_path.display());
            println!("wrote {}", bank_path.display());
            Ok(EXIT_OK)
        }
        Command::Bench {
            filters,
            kernel_len,
            deform_points,
            batch,
            frame_len,
            reps,
        } => {
            let report = run_bench(&BenchConfig {
                num_filters: filters,
                kernel_len,
                num_deform_points: deform_points,
                batch,
                frame_len,
                reps,
                seed: 42,
            })?;
            println!("{}", report.render());
            Ok(EXIT_OK)
        }
    }
}

/// Rebuild the raw filter bank from checkpoint tensors (pfnet/sincnet runs).
fn bank_from_checkpoint(
    ckpt: &Checkpoint,
    spec: &crate::filterbank::FilterSpec,
) -> crate::error::Result<FilterBankParams> {
    if ckpt.front_end == "raw_fir" {
        return Err(Error::config(
            "raw_fir checkpoints have free taps, not filter-shape parameters; export-filters needs a pfnet or sincnet checkpoint",
        ));
    }
    let find = |name: &str| -> crate::error::Result<&(String, Vec<usize>, Vec<f64>)> {
        ckpt.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| Error::config(format!("checkpoint lacks tensor '{name}'")))
    };
    let base = find("front.base_raw")?;
    let incr = find("front.incr_raw")?;
    let dh = find("front.dh")?;
    let f = spec.num_filters;
    let segs = spec.num_segments();
    let knots = spec.num_knots();
    if base.2.len() != f || incr.2.len() != f * segs || dh.2.len() != f * knots {
        return Err(Error::config(
            "checkpoint filter tensors do not match the configured filter geometry",
        ));
    }
    let filters = (0..f)
        .map(|i| crate::filterbank::FilterParams {
            base_raw: base.2[i],
            incr_raw: incr.2[i * segs..(i + 1) * segs].to_vec(),
            dh: dh.2[i * knots..(i + 1) * knots].to_vec(),
        })
        .collect();
    Ok(FilterBankParams { filters })
}

/// Entry point used by the binary: `argv` should include the program name.
pub fn main_from_env() -> i32 {
    run_command(std::env::args_os())
}
