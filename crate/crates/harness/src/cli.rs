//! Command-line interface. Exit codes: 0 success, 1 usage or config error,
//! 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use xrsim_core::media_calc::{latency_budget, Codec, MediaSpec, TYPICAL_SENSING_MS};

use crate::calc;
use crate::config::{parse_config_file, ExperimentConfig, PolicySpec};
use crate::run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "xrsim",
    version,
    about = "Deterministic XR streaming simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Display bandwidth and latency arithmetic.
    Calc(CalcArgs),
    /// Run one scenario under the configured policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides run.policy: oracle, trained or "fixed <level>".
        #[arg(long)]
        policy: Option<String>,
        /// Checkpoint for the trained policy; overrides run.checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the bitrate agents and write a checkpoint and training log.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate trained, fixed and oracle policies on held-out seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Checkpoint of the trained policy; overrides run.checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.output_dir (default: out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalcArgs {
    /// Print the published worked examples beside the computed values.
    #[arg(long)]
    verify_paper: bool,
    #[command(subcommand)]
    what: Option<CalcCommand>,
}

#[derive(Subcommand, Debug)]
enum CalcCommand {
    /// Raw and compressed bit rate of a display.
    Rate {
        #[arg(long)]
        width: u64,
        #[arg(long)]
        height: u64,
        #[arg(long, default_value_t = 8)]
        bits: u32,
        #[arg(long)]
        fps: f64,
        #[arg(long, default_value = "none")]
        codec: String,
        #[arg(long, default_value_t = 1)]
        eyes: u32,
    },
    /// Frame deadline and streaming budget at a refresh rate.
    Latency {
        #[arg(long)]
        fps: f64,
        #[arg(long, default_value_t = TYPICAL_SENSING_MS)]
        sensing_ms: f64,
        #[arg(long, default_value_t = 0.0)]
        rendering_ms: f64,
        #[arg(long, default_value_t = 0.0)]
        display_ms: f64,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Runs the CLI on `args` (including the program name), writing results to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, u64, PathBuf), Failure> {
    let cfg = parse_config_file(&common.config)
        .map_err(|e| Failure::Usage(format!("invalid config {}:\n{e}", common.config.display())))?;
    let seed = common.seed.unwrap_or(cfg.run.seed);
    let dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, seed, dir))
}

fn checkpoint_path<'a>(cfg: &'a ExperimentConfig, cli: Option<&'a Path>) -> Option<&'a Path> {
    cli.or(cfg.run.checkpoint.as_deref())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Calc(args) => calc_command(args, out),
        Command::Simulate {
            common,
            policy,
            checkpoint,
        } => {
            let (cfg, seed, dir) = load(&common)?;
            let spec = match policy {
                Some(p) => p.parse::<PolicySpec>().map_err(Failure::Usage)?,
                None => cfg.run.policy.clone(),
            };
            if let PolicySpec::Fixed(l) = spec {
                if l >= cfg.session.ladder.len() {
                    return Err(Failure::Usage(format!(
                        "level {l} outside a ladder of {} levels",
                        cfg.session.ladder.len()
                    )));
                }
            }
            let policy =
                run::resolve_policy(&cfg, &spec, checkpoint_path(&cfg, checkpoint.as_deref()))?;
            let report = run::run_scenario(&cfg, &policy, seed)?;
            report.write_to(&dir)?;
            write!(out, "{}", report.summary())?;
            Ok(())
        }
        Command::Train { common, resume } => {
            let (cfg, seed, dir) = load(&common)?;
            let resume = resume.as_deref().map(run::read_checkpoint).transpose()?;
            let ckpt = run::train_to_dir(&cfg, seed, resume, run::thread_budget(), &dir)?;
            writeln!(
                out,
                "trained {} steps per agent with {} agent(s); checkpoint {}",
                ckpt.steps_done,
                cfg.rl.agents,
                dir.join("checkpoint.bin").display()
            )?;
            writeln!(out, "config_hash: {}\nseed: {seed}", cfg.hash())?;
            Ok(())
        }
        Command::Compare { common, checkpoint } => {
            let (cfg, seed, dir) = load(&common)?;
            let ckpt = checkpoint_path(&cfg, checkpoint.as_deref())
                .map(run::read_checkpoint)
                .transpose()?;
            let results = run::compare_baselines(&cfg, ckpt.as_ref(), seed, run::thread_budget())?;
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("compare.csv"), run::comparison_table(&results))?;
            fs::write(
                dir.join("compare_runs.csv"),
                run::comparison_runs_csv(&results),
            )?;
            write!(out, "{}", run::format_comparison(&results))?;
            writeln!(out, "config_hash: {}\nseed: {seed}", cfg.hash())?;
            Ok(())
        }
    }
}

fn calc_command(args: CalcArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let usage = |e: xrsim_core::Error| Failure::Usage(e.to_string());
    match args.what {
        Some(CalcCommand::Rate {
            width,
            height,
            bits,
            fps,
            codec,
            eyes,
        }) => {
            let codec: Codec = codec.parse().map_err(usage)?;
            let spec = MediaSpec::explicit(width, height, bits, fps, eyes).with_codec(codec);
            let violations = spec.violations();
            if !violations.is_empty() {
                let msgs: Vec<String> = violations.iter().map(|e| e.to_string()).collect();
                return Err(Failure::Usage(msgs.join("; ")));
            }
            let r = calc::rate(&spec).map_err(usage)?;
            write!(out, "{}", calc::format_rate(&r))?;
        }
        Some(CalcCommand::Latency {
            fps,
            sensing_ms,
            rendering_ms,
            display_ms,
        }) => {
            let b = latency_budget(fps, sensing_ms, rendering_ms, display_ms).map_err(usage)?;
            write!(out, "{}", calc::format_latency(&b))?;
        }
        None if !args.verify_paper => {
            return Err(Failure::Usage(
                "calc needs 'rate', 'latency' or --verify-paper".into(),
            ))
        }
        None => {}
    }
    if args.verify_paper {
        let checks = calc::published_checks().map_err(|e| Failure::Runtime(e.into()))?;
        write!(out, "{}", calc::format_published_checks(&checks))?;
    }
    Ok(())
}
