mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use adavits::complexity::{count_flops, flow_sharing_terms, Convention, Scope};
use adavits::io::container::{read_phonemes, read_ppg, write_ppg};
use adavits::io::{load_weights, read_config, read_wav, save_weights, write_wav};
use adavits::losses::{evaluate_losses, TrainingExample};
use adavits::ppg2wav::synthesize;
use adavits::text2ppg::text2ppg_forward;
use adavits::{init_weights, ModelConfig};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adavits",
    version,
    about = "Lightweight PPG-based TTS forward inference and complexity analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set share_flow=false`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ModelConfig> {
        let base = match &self.config {
            Some(p) => read_config(p).with_context(|| format!("reading config {}", p.display()))?,
            None => ModelConfig::default(),
        };
        Ok(base.with_overrides(self.overrides.iter().map(String::as_str))?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parameter and FLOP report.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "inference")]
        scope: Scope,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long, default_value = "mac2")]
        convention: Convention,
        #[arg(long)]
        json: bool,
    },
    /// Render a PPG to a 16 kHz WAV.
    Synthesize {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        ppg: PathBuf,
        #[arg(long)]
        speaker: usize,
        #[arg(long, default_value_t = 0.667)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a PPG from phoneme ids.
    Text2ppg {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        phonemes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the training objectives on one example.
    Losses {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        ppg: PathBuf,
        #[arg(long)]
        speaker: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded random weight file.
    InitWeights {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze {
            config,
            scope,
            seconds,
            convention,
            json,
        } => {
            let cfg = config.load()?;
            let report = count_flops(&cfg, seconds, scope, convention)?;
            if json {
                let (coupling, fle) = flow_sharing_terms(&cfg)?;
                let mut v = serde_json::to_value(&report)?;
                v["flow_coupling_params"] = coupling.into();
                v["fle_table_params"] = fle.into();
                emit(format_args!("{}", serde_json::to_string_pretty(&v)?))?;
            } else {
                emit(format_args!("{report}"))?;
            }
        }
        Command::Synthesize {
            config,
            weights,
            ppg,
            speaker,
            temperature,
            seed,
            out,
        } => {
            let cfg = config.load()?;
            let store = load_weights(&weights, Some(&cfg)).with_context(|| format!("loading {}", weights.display()))?;
            let ppg = read_ppg(&ppg).with_context(|| format!("reading {}", ppg.display()))?;
            let wave = synthesize(&ppg, speaker, &store, &cfg, temperature, seed)?;
            let s = write_wav(&wave, &out).with_context(|| format!("writing {}", out.display()))?;
            emit(format_args!("{}", serde_json::to_string(&s)?))?;
        }
        Command::Text2ppg {
            config,
            weights,
            phonemes,
            out,
        } => {
            let cfg = config.load()?;
            let store = load_weights(&weights, Some(&cfg)).with_context(|| format!("loading {}", weights.display()))?;
            let seq =
                read_phonemes(&phonemes, cfg.vocab_size).with_context(|| format!("reading {}", phonemes.display()))?;
            let (ppg, durations) = text2ppg_forward(&seq, &cfg, &store, None)?;
            write_ppg(&ppg, &out).with_context(|| format!("writing {}", out.display()))?;
            emit(serde_json::json!({ "frames": ppg.n_frames(), "durations": durations }))?;
        }
        Command::Losses {
            config,
            weights,
            wav,
            ppg,
            speaker,
            seed,
            json,
        } => {
            let cfg = config.load()?;
            let store = load_weights(&weights, Some(&cfg)).with_context(|| format!("loading {}", weights.display()))?;
            let ex = TrainingExample {
                wave: read_wav(&wav).with_context(|| format!("reading {}", wav.display()))?,
                ppg: read_ppg(&ppg).with_context(|| format!("reading {}", ppg.display()))?,
                speaker_id: speaker,
            };
            let report = evaluate_losses(&ex, &cfg, &store, seed)?;
            if json {
                emit(format_args!("{}", serde_json::to_string_pretty(&report)?))?;
            } else {
                for (k, v) in serde_json::to_value(report)?.as_object().into_iter().flatten() {
                    emit(format_args!("{k:<8} {v}"))?;
                }
            }
        }
        Command::InitWeights { config, seed, out } => {
            let cfg = config.load()?;
            let store = init_weights(&cfg, seed)?;
            save_weights(&store, &out).with_context(|| format!("writing {}", out.display()))?;
            emit(serde_json::json!({ "tensors": store.len(), "params": store.num_params() }))?;
        }
        Command::Selftest { filter } => {
            let (ran, failed) = selftest::run(filter.as_deref());
            if ran == 0 {
                anyhow::bail!("no self-test name contains {:?}", filter.unwrap_or_default());
            }
            if failed > 0 {
                anyhow::bail!("{failed} of {ran} self-tests failed");
            }
        }
    }
    Ok(())
}

/// Writes one line to stdout; a closed pipe ends output quietly.
fn emit(line: impl std::fmt::Display) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn error_code(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<adavits::Error>())
        .map_or("error", adavits::Error::code)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", error_code(&e), one_line(&format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
