use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{Baseline, Job};
use config::{parse_seeds, usage, Source, UsageError};
use output::Manifest;

/// Evolve budgeted sequential classifiers and run the supporting experiments.
#[derive(Parser)]
#[command(name = "seqbudget", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolutionary search for each seed.
    Evolve(Common),
    /// Enumerate the whole solution space and store its Pareto front.
    Oracle(Common),
    /// Track how much of a stored front each generation holds.
    Recovery(Common),
    /// Measure a hand-built plan on the test split.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        which: Baseline,
    },
    /// Pick search parameters from a grid by short runs.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration, or a manifest.json from an earlier run to repeat it.
    #[arg(long)]
    config: PathBuf,
    /// Seeds to run: `7`, `0,3,9` or `0-49`. Overrides the config.
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (1 gives the reference schedule; results do not
    /// depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn job(command: &'static str, variant: Option<String>, c: &Common) -> Result<Job> {
    let is_manifest = c.config.extension().is_some_and(|e| e == "json");
    let (source, manifest_seeds) = if is_manifest {
        let m = Manifest::read(&c.config)?;
        if m.command != command {
            return Err(usage(format!(
                "{} records a `{}` run, not `{command}`",
                c.config.display(),
                m.command
            )));
        }
        if m.variant != variant {
            return Err(usage(format!(
                "{} records baseline {:?}, not {:?}",
                c.config.display(),
                m.variant,
                variant
            )));
        }
        let source = Source {
            text: m.config_text,
            base_dir: m.config_base_dir,
            origin: m.config_origin,
        };
        (source, Some(m.seeds))
    } else {
        (Source::read(&c.config)?, None)
    };
    let config = source.parse()?;
    config.check()?;
    let seeds = match (&c.seed, manifest_seeds, &config.seeds) {
        (Some(s), _, _) => parse_seeds(s)?,
        (None, Some(s), _) => s,
        (None, None, Some(s)) => s.clone(),
        (None, None, None) => vec![0],
    };
    if seeds.is_empty() {
        return Err(usage("seed list is empty"));
    }
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(format!("cannot set up {t} threads: {e}")))?;
    }
    Ok(Job {
        command,
        variant,
        source,
        config,
        seeds,
        out: c.out.clone(),
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evolve(c) => commands::evolve(&job("evolve", None, &c)?),
        Command::Oracle(c) => commands::oracle(&job("oracle", None, &c)?),
        Command::Recovery(c) => commands::recovery(&job("recovery", None, &c)?),
        Command::Baseline { common, which } => {
            let j = job("baseline", Some(which.name().to_string()), &common)?;
            commands::baseline(&j, which)
        }
        Command::Sweep(c) => commands::sweep(&job("sweep", None, &c)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
