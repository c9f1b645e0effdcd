use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oasr_cli::commands::{cmd_ablate, cmd_eval, cmd_inspect, cmd_sr, cmd_train};
use oasr_cli::error::{EXIT_CONFIG, EXIT_OK};
use oasr_cli::{CliError, Result, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "oasr", version, about = "Orientation-aware super-resolution trainer and tools")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Upscaling factor.
    #[arg(long, global = true)]
    scale: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Checkpoint to read (eval, sr, inspect) or resume from (train).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record the run as deterministic.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network.
    Train,
    /// Score a checkpoint (or bicubic alone) on the eval manifests.
    Eval,
    /// Super-resolve one image.
    Sr { input: PathBuf, output: PathBuf },
    /// Train and score the nine ablation variants.
    Ablate,
    /// Print a checkpoint header.
    Inspect { path: Option<PathBuf> },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(r) = cli.scale {
        cfg.network.scale = r;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.network.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    for o in &cli.overrides {
        cfg.set_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn need_checkpoint(cli: &Cli) -> Result<&PathBuf> {
    cli.checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Config("--checkpoint is required".into()))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train => {
            let cfg = run_config(cli)?;
            let report = cmd_train(&cfg, cli.checkpoint.as_deref())?;
            println!(
                "trained {} steps (total {}), loss {:?} -> {:?}",
                report.steps_run, report.total_steps, report.first_loss, report.final_loss
            );
            println!("checkpoint {}", report.final_checkpoint.display());
        }
        Command::Eval => {
            let cfg = run_config(cli)?;
            for s in cmd_eval(&cfg, cli.checkpoint.as_deref())? {
                println!("wrote {}", s.csv.display());
            }
        }
        Command::Sr { input, output } => {
            let out = cmd_sr(need_checkpoint(cli)?, input, output, cli.scale)?;
            println!("wrote {} ({}x{})", output.display(), out.width(), out.height());
        }
        Command::Ablate => {
            let cfg = run_config(cli)?;
            let (rows, path) = cmd_ablate(&cfg)?;
            for r in &rows {
                println!("{}\t{}\t{}\t{}", r.variant, r.config_hash, r.param_count, r.final_loss);
            }
            println!("wrote {}", path.display());
        }
        Command::Inspect { path } => {
            let p = match path {
                Some(p) => p,
                None => need_checkpoint(cli)?,
            };
            print!("{}", cmd_inspect(p)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
