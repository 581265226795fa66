use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::http::HeaderValue;
use clap::{Args, Parser, Subcommand};
use semloop::config::ExperimentConfig;
use semloop::harness::{fidelity, format_fidelity, format_report, prepare, report_dir, run_experiment, summarize, write_result_log};
use semloop::io::write_json;
use semloop::service::{serve, ServiceState};
use semloop_core::strategies::Strategy;

/// Explanatory interactive learning experiments.
#[derive(Parser)]
#[command(name = "semloop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write the result log.
    Run {
        #[command(flatten)]
        common: Common,
        /// Results directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Comma-separated strategy names, replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Compare the local fidelity of LIME and topicLIME.
    Fidelity {
        #[command(flatten)]
        common: Common,
        /// Also write `fidelity.json` into this directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Summarize a results directory and write `curves.csv`.
    Report { results: PathBuf },
    /// Start the session service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Allowed CORS origin; any origin when absent.
        #[arg(long)]
        ui_origin: Option<String>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides both the file and the SEMLOOP_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => {
                let mut cfg = ExperimentConfig::default();
                cfg.apply_seed_env()?;
                cfg
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, out, strategies, iterations } => {
            let mut cfg = common.load()?;
            if let Some(names) = strategies {
                cfg.strategies = names
                    .iter()
                    .map(|n| Strategy::from_name(n).with_context(|| format!("unknown strategy `{n}`")))
                    .collect::<Result<_>>()?;
            }
            if let Some(t) = iterations {
                cfg.iterations = t;
            }
            let log = run_experiment(&cfg)?;
            write_result_log(&log, &out)?;
            print!("{}", format_report(&summarize(&log)));
            eprintln!("results written to {}", out.display());
        }
        Command::Fidelity { common, out } => {
            let cfg = common.load()?;
            let prepared = prepare(&cfg)?;
            let table = fidelity(&cfg, &prepared)?;
            print!("{}", format_fidelity(&table));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
                write_json(&dir.join("fidelity.json"), &table)?;
            }
        }
        Command::Report { results } => print!("{}", report_dir(Path::new(&results))?),
        Command::Serve { common, addr, ui_origin } => {
            let cfg = common.load()?;
            let origin = ui_origin.map(|o| HeaderValue::from_str(&o)).transpose().context("--ui-origin")?;
            eprintln!("preparing corpus, topic model and Gold Standards");
            let prepared = prepare(&cfg)?;
            let state = Arc::new(ServiceState::new(cfg, &prepared));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}/v1", listener.local_addr()?);
                serve(listener, state, origin).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
        Command::DefaultConfig => println!("{}", serde_json::to_string_pretty(&ExperimentConfig::default())?),
    }
    Ok(())
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
