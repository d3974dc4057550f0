//! Command-line front end: `serve`, `inspect` and `stats`.

use std::io::{self, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use spiar_core::demo::demo_app;
use spiar_core::traffic;
use spiar_http::{bind_from_env, Server, ServerConfig};

pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spiar",
    version,
    about = "Serve the demo application and inspect delta traffic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the bundled demo application over HTTP.
    Serve(ServeArgs),
    /// Print a readable trace of a traffic log.
    Inspect { log: PathBuf },
    /// Report delta sizes against full renders for a traffic log.
    Stats { log: PathBuf },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Port on 127.0.0.1; SPIAR_BIND=host:port overrides it.
    #[arg(long, default_value_t = 8080, value_parser = parse_port)]
    pub port: u16,
    /// Append every exchange to this traffic log.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Directory served under /assets.
    #[arg(long, default_value = default_assets())]
    pub assets: PathBuf,
    /// Idle sessions expire after this many seconds.
    #[arg(long, default_value_t = 1800, value_parser = clap::value_parser!(u64).range(1..))]
    pub timeout_secs: u64,
}

fn default_assets() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/assets")
}

pub fn parse_port(s: &str) -> Result<u16, String> {
    s.parse::<u16>().map_err(|_| format!("invalid port `{s}`"))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Serve(args) => serve_blocking(args),
        Command::Inspect { log } => inspect_file(&log, &mut io::stdout().lock()),
        Command::Stats { log } => stats_file(&log, &mut io::stdout().lock()),
    }
}

fn read_log(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("spiar: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_DATA)
    })
}

pub fn inspect_file(path: &Path, out: &mut impl Write) -> ExitCode {
    let text = match read_log(path) {
        Ok(text) => text,
        Err(code) => return code,
    };
    match traffic::inspect(&text, out) {
        Ok(summary) if summary.malformed == 0 => ExitCode::SUCCESS,
        Ok(summary) => {
            eprintln!("spiar: {} malformed record(s)", summary.malformed);
            ExitCode::from(EXIT_DATA)
        }
        Err(e) => {
            eprintln!("spiar: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

pub fn stats_file(path: &Path, out: &mut impl Write) -> ExitCode {
    let text = match read_log(path) {
        Ok(text) => text,
        Err(code) => return code,
    };
    let report = match traffic::stats(&text) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("spiar: {e}");
            return ExitCode::from(EXIT_DATA);
        }
    };
    match report.write_table(out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spiar: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

pub fn server_config(args: &ServeArgs) -> Result<ServerConfig, spiar_http::ConfigError> {
    let flag = SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), args.port);
    let mut config = ServerConfig::new(bind_from_env(flag)?, args.assets.clone());
    config.idle_timeout = Duration::from_secs(args.timeout_secs);
    config.record = args.record.clone();
    Ok(config)
}

fn serve_blocking(args: ServeArgs) -> ExitCode {
    let config = match server_config(&args) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("spiar: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("spiar: {e}");
            return ExitCode::FAILURE;
        }
    };
    runtime.block_on(async move {
        let server = match Server::bind(config, demo_app()).await {
            Ok(server) => server,
            Err(e) => {
                eprintln!("spiar: {e}");
                return ExitCode::FAILURE;
            }
        };
        println!("listening on http://{}/app", server.local_addr());
        if let Err(e) = tokio::signal::ctrl_c().await {
            tracing::warn!(error = %e, "cannot wait for ctrl-c");
        }
        tracing::info!("shutting down");
        match server.shutdown().await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("spiar: {e}");
                ExitCode::FAILURE
            }
        }
    })
}
