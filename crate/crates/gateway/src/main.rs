use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mirroreyes_gateway::config::SimConfig;
use mirroreyes_gateway::headless::{load_script, parse_stops, run_checks, run_scenario, RunOptions};
use mirroreyes_gateway::server;

#[derive(Parser)]
#[command(name = "mirroreyes", version, about = "Gaze-referencing robot head simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the live simulation with a WebSocket/HTTP interface.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory listed by /scenarios and used for relative load_scenario paths.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Play a scenario headless and write logs and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Per-trial stop times, `-` for none, e.g. `-,4.66,14.58`.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        stops: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also dump eye frames as PNG, every N ticks.
        #[arg(long, num_args = 0..=1, default_missing_value = "1")]
        record: Option<u64>,
    },
    /// Validate a config and run its invariant checks.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<SimConfig, ExitCode> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => SimConfig::load(p).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Serve {
            config,
            port,
            host,
            scenarios,
        } => {
            let config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            rt.block_on(async move {
                let listener = match tokio::net::TcpListener::bind((host.as_str(), port)).await {
                    Ok(l) => l,
                    Err(e) => {
                        eprintln!("error: cannot bind {host}:{port}: {e}");
                        return ExitCode::FAILURE;
                    }
                };
                let handle = match server::spawn(listener, config, scenarios).await {
                    Ok(h) => h,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::FAILURE;
                    }
                };
                tracing::info!("listening on {}", handle.addr);
                let _ = tokio::signal::ctrl_c().await;
                handle.shutdown().await;
                ExitCode::SUCCESS
            })
        }
        Cmd::Run {
            scenario,
            stops,
            out,
            config,
            record,
        } => {
            let config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let stops = match parse_stops(&stops) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let script = match load_script(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions {
                out: Some(out.clone()),
                record_every: record,
            };
            match run_scenario(&config, &script, &stops, &opts) {
                Ok(trials) => {
                    for t in &trials {
                        let stop = t.stop_time.map_or("-".to_string(), |s| s.to_string());
                        println!("trial {} {:?} stop={} {}", t.trial, t.classification, stop, t.instruction);
                    }
                    println!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Cmd::Check { config } => {
            let config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let results = run_checks(&config);
            for r in &results {
                println!("{} {}: {}", if r.ok { "ok  " } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.ok) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
