//! `concierge` command line: interactive REPL, HTTP service and parser
//! evaluation. Exit status is 0 on success, 2 on configuration errors and 1
//! on anything else.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use concierge::config::{ConfigError, EngineOptions};
use concierge::http::router;
use concierge::service::ChatService;
use concierge_core::eval::{load_corpus, run_corpus, CorpusError};
use concierge_core::session::TurnError;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "concierge", version, about = "Explainable restaurant concierge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chat on the terminal. `:state` prints the dialog state, `:quit` exits.
    Repl {
        #[command(flatten)]
        engine: EngineOptions,
    },
    /// Serve the JSON chat API.
    Serve {
        #[command(flatten)]
        engine: EngineOptions,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Persist sessions as one JSON file each in this directory.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
    /// Score a parser on a JSON-lines corpus and print a JSON report.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        engine: EngineOptions,
        /// Print only the summary, without per-example rows.
        #[arg(long)]
        summary: bool,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(CorpusError),
    #[error("invalid listen address: {0}")]
    Address(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Corpus(_) | CliError::Address(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn init_logging(default: &str) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn repl(opts: &EngineOptions) -> Result<(), CliError> {
    let engine = opts.build_engine()?;
    let mut session = engine.new_session();
    let mut out = std::io::stdout().lock();
    for entry in &session.transcript {
        writeln!(out, "concierge: {}", entry.text)?;
    }
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        match line.trim() {
            "" => continue,
            ":quit" | ":q" => break,
            ":state" => {
                writeln!(out, "{}", session.state.listing())?;
                continue;
            }
            _ => {}
        }
        match engine.turn(&mut session, &line) {
            Ok(turn) => writeln!(out, "concierge: {}", turn.reply)?,
            Err(TurnError::Rejected(e)) => eprintln!("message rejected: {e}"),
        }
        out.flush()?;
    }
    Ok(())
}

fn eval(corpus: &PathBuf, opts: &EngineOptions, summary: bool) -> Result<(), CliError> {
    let kb = opts.knowledgebase()?;
    let style = opts.style_table()?;
    let parser = opts.parser(&kb, &style)?;
    let examples = load_corpus(corpus).map_err(CliError::Corpus)?;
    let mut report = run_corpus(&examples, parser.as_ref()).map_err(CliError::Corpus)?;
    if summary {
        report.per_example.clear();
    }
    let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    println!("{text}");
    Ok(())
}

fn serve(opts: &EngineOptions, host: &str, port: u16, state_dir: Option<PathBuf>) -> Result<(), CliError> {
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|_| CliError::Address(format!("{host}:{port}")))?;
    let mut service = ChatService::new(opts.build_engine()?);
    if let Some(dir) = state_dir {
        service = service.with_store(dir)?;
    }
    let app = router(Arc::new(service));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Repl { engine } => {
            init_logging("warn");
            repl(engine)
        }
        Command::Serve { engine, host, port, state_dir } => {
            init_logging("info");
            serve(engine, host, *port, state_dir.clone())
        }
        Command::Eval { corpus, engine, summary } => {
            init_logging("warn");
            eval(corpus, engine, *summary)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("concierge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
