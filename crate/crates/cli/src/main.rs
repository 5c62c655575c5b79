use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lighthouse_api::{BiasRequest, NaiveRequest, VerifyRequest};
use lighthouse_client::{ClientError, LighthouseClient};
use lighthouse_core::experiments::BiasMode;

/// Exit codes.
const PASS: u8 = 0;
const VERIFY_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const UNREACHABLE: u8 = 3;
const RUN_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "lighthouse", version, about = "Randomness beacon simulator")]
struct Cli {
    /// Service URL. Without it an embedded service is started for the
    /// duration of the command.
    #[arg(long, global = true, env = "LIGHTHOUSE_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8645")]
        bind: SocketAddr,
    },
    /// Run a scenario config and write its logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "lighthouse-out")]
        out: PathBuf,
    },
    /// Measure how far a mining coalition biases one output bit.
    Bias {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.05,0.1,0.2,0.3,0.4,0.5"
        )]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value = "raw-blockhash")]
        mode: BiasMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bias a producer gets by choosing its value after seeing the block hash.
    NaiveDemo {
        #[arg(long = "k", default_value_t = 10)]
        k_attempts: u32,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every pulse in a log from public data.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    pulses: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    blocks: PathBuf,
    /// Accepted for symmetry with the other commands; verification is
    /// deterministic and uses no randomness.
    #[arg(long, hide = true)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ConfigJson {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("embedded service: {0}")]
    Embedded(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigJson { .. } | CliError::Read { .. } => CONFIG_ERROR,
            CliError::Client(ClientError::Unreachable { .. }) => UNREACHABLE,
            CliError::Client(e) if e.is_invalid_input() => CONFIG_ERROR,
            _ => RUN_FAILED,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, text).map_err(wrap)
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

async fn connect(server: Option<String>) -> Result<LighthouseClient, CliError> {
    if let Some(url) = server {
        return Ok(LighthouseClient::new(url));
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(CliError::Embedded)?;
    let addr = listener.local_addr().map_err(CliError::Embedded)?;
    tokio::spawn(lighthouse_server::serve(listener));
    Ok(LighthouseClient::new(format!("http://{addr}")))
}

fn output_path(out: &Path, configured: Option<&str>, default: &str) -> PathBuf {
    out.join(configured.unwrap_or(default))
}

async fn run(
    client: &LighthouseClient,
    config: &Path,
    seed: Option<u64>,
    out: &Path,
) -> Result<u8, CliError> {
    let mut value: serde_json::Value =
        serde_json::from_str(&read(config)?).map_err(|source| CliError::ConfigJson {
            path: config.to_path_buf(),
            source,
        })?;
    if let (Some(seed), Some(obj)) = (seed, value.as_object_mut()) {
        obj.insert("master_seed".into(), seed.into());
    }
    let outputs = value.get("outputs").cloned().unwrap_or_default();
    let path_of = |key: &str, default: &str| {
        output_path(out, outputs.get(key).and_then(|v| v.as_str()), default)
    };
    let result = client.run_scenario_json(&value).await?;
    write(&path_of("pulses", "pulses.jsonl"), &result.pulse_log)?;
    write(&path_of("events", "events.jsonl"), &result.event_log)?;
    write(&path_of("blocks", "blocks.jsonl"), &result.block_log)?;
    write(&out.join("summary.json"), &pretty(&result.summary))?;
    for (name, cp) in &result.checkpoints {
        write(
            &out.join("checkpoints").join(format!("{name}.json")),
            &cp.to_json(),
        )?;
    }
    print!("{}", pretty(&result.summary));
    Ok(PASS)
}

async fn execute(cli: Cli) -> Result<u8, CliError> {
    if let Command::Serve { bind } = cli.command {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(CliError::Embedded)?;
        eprintln!(
            "listening on {}",
            listener.local_addr().map_err(CliError::Embedded)?
        );
        lighthouse_server::serve(listener)
            .await
            .map_err(CliError::Embedded)?;
        return Ok(PASS);
    }
    let client = connect(cli.server).await?;
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Run { config, seed, out } => run(&client, &config, seed, &out).await,
        Command::Bias {
            fractions,
            trials,
            mode,
            seed,
            csv,
            out,
        } => {
            let report = client
                .bias(&BiasRequest {
                    fractions,
                    trials,
                    seed,
                    mode,
                })
                .await?;
            let text = if csv {
                report.to_csv()
            } else {
                report.to_table()
            };
            print!("{text}");
            if let Some(path) = out {
                write(&path, &text)?;
            }
            Ok(PASS)
        }
        Command::NaiveDemo {
            k_attempts,
            trials,
            seed,
            out,
        } => {
            let report = client
                .naive_demo(&NaiveRequest {
                    k_attempts,
                    trials,
                    seed,
                })
                .await?;
            print!("{}", report.to_table());
            if let Some(path) = out {
                write(&path, &pretty(&report))?;
            }
            Ok(PASS)
        }
        Command::Verify(args) => {
            let verdict = client
                .verify(&VerifyRequest {
                    pulse_log: read(&args.pulses)?,
                    event_log: read(&args.events)?,
                    block_log: read(&args.blocks)?,
                })
                .await?;
            print!("{}", verdict.render());
            if let Some(path) = args.out {
                write(&path, &pretty(&verdict))?;
            }
            Ok(if verdict.ok { PASS } else { VERIFY_FAILED })
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Serve { .. }) {
        tracing_subscriber::fmt().init();
    }
    match execute(cli).await {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
