//! `vf`: train fixtures, run and check scenarios, serve live sessions.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vfix::sim::{self, eval, LoadOptions};

mod server;

#[derive(Parser)]
#[command(name = "vf", version, about = "Probabilistic virtual fixtures: learn, simulate, inspect")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn every demo-based fixture of a scenario and write the models.
    Train {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario offline and write a JSON-lines trace.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Directory of trained models to use instead of training on load.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Check a trace against a criteria file.
    Eval {
        trace: PathBuf,
        #[arg(long)]
        check: PathBuf,
    },
    /// Serve a live session over WebSocket.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Simulated seconds per wall-clock second; 0 runs unthrottled.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Start stepping immediately instead of at the first connection.
        #[arg(long)]
        no_wait: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Train { scenario, out } => {
            let ids = sim::train(&scenario, &out).with_context(|| format!("training {}", scenario.display()))?;
            for id in ids {
                println!("{}", out.join(format!("{id}.json")).display());
            }
        }
        Cmd::Run { scenario, out, seed, dt, models } => {
            let s = sim::load(&scenario, &LoadOptions { models, seed, dt })?;
            let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let n = sim::run_to_writer(s, file)?;
            println!("{n} steps -> {}", out.display());
        }
        Cmd::Eval { trace, check } => {
            let records = sim::read_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let text = std::fs::read_to_string(&check).with_context(|| format!("reading {}", check.display()))?;
            let criteria = eval::Criteria::parse(&text)?;
            let results = eval::evaluate(&criteria, &records);
            let mut all = true;
            for r in &results {
                all &= r.pass;
                println!("{} {} {}", if r.pass { "PASS" } else { "FAIL" }, r.check, r.detail);
            }
            if !all {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Serve { scenario, port, trace, rate, models, no_wait } => {
            let s = sim::load(&scenario, &LoadOptions { models, ..LoadOptions::default() })?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(s, server::ServeOptions { port, trace, rate, wait: !no_wait }))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
