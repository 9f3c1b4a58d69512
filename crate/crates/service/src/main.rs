use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use tod_core::eval::InformMode;
use tod_service::chat::{run_chat, ChatOutcome};
use tod_service::commands::{self, summary_line};
use tod_service::config::{split_list, ExtractorKind, Layer, Settings};
use tod_service::data;
use tod_service::store::SessionStore;

#[derive(Parser)]
#[command(name = "tod", version, about = "Information-state task-oriented dialogue engine")]
struct Cli {
    /// TOML config file (lowest precedence; also TOD_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// MultiWOZ schema file; without it the built-in fixture databases are used.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Directory holding `<domain>_db.json` files.
    #[arg(long, global = true)]
    db_dir: Option<PathBuf>,
    /// Directory of dialogue files (with `train/`, `dev/`, `test/` subdirectories).
    #[arg(long, global = true)]
    dialogues_dir: Option<PathBuf>,
    /// Comma-separated domains.
    #[arg(long, global = true)]
    domains: Option<String>,
    /// Extraction backend: rule or llm.
    #[arg(long, global = true)]
    extractor: Option<ExtractorKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the per-domain dictionaries and dump them.
    Ingest {
        /// Output directory for `<domain>.json`; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chat in the terminal.
    Chat {
        #[arg(long)]
        domain: String,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        idle_timeout_secs: Option<u64>,
    },
    /// Replay conversations and report inform/success.
    Replay {
        #[arg(long, default_value = "test")]
        split: String,
        /// Exact goal equality instead of no-contradiction.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score another system's prediction file.
    ScorePredictions {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn mode(strict: bool) -> InformMode {
    if strict {
        InformMode::Strict
    } else {
        InformMode::NoContradiction
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut layer = Layer {
        schema: cli.data.schema,
        db_dir: cli.data.db_dir,
        dialogues_dir: cli.data.dialogues_dir,
        domains: cli.data.domains.as_deref().map(split_list),
        extractor: cli.data.extractor,
        ..Layer::default()
    };
    if let Command::Serve {
        bind,
        idle_timeout_secs,
    } = &cli.command
    {
        layer.bind = bind.clone();
        layer.idle_timeout_secs = *idle_timeout_secs;
    }
    let settings = Settings::load(layer, cli.config.as_deref())?;
    let dictionaries = data::load_dictionaries(&settings)?;

    match cli.command {
        Command::Ingest { out } => {
            let text = commands::ingest(&dictionaries, out.as_deref())?;
            println!("{text}");
        }
        Command::Chat { domain } => {
            let dict = dictionaries
                .get(&domain.to_lowercase())
                .cloned()
                .ok_or_else(|| format!("domain `{domain}` is not loaded"))?;
            let engine = data::build_engine(settings.extractor)?;
            let stdin = io::stdin();
            let outcome = run_chat(dict, engine, stdin.lock(), &mut io::stdout().lock())?;
            if outcome == ChatOutcome::InputEnded {
                log::info!("conversation left incomplete");
            }
        }
        Command::Serve { .. } => {
            let engine = data::build_engine(settings.extractor)?;
            let store = Arc::new(SessionStore::new(dictionaries, engine, settings.idle_timeout));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(tod_service::api::serve(store, settings.bind))?;
        }
        Command::Replay { split, strict, out } => {
            let engine = data::build_engine(settings.extractor)?;
            let conversations = data::load_conversations(&settings, &dictionaries, &split)?;
            let doc = commands::replay(&conversations, &dictionaries, &engine, &commands::default_options(mode(strict)))?;
            eprintln!("{}", summary_line(&doc.summary));
            commands::write_output(out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
        }
        Command::ScorePredictions {
            pred,
            split,
            strict,
            out,
        } => {
            let conversations = data::load_conversations(&settings, &dictionaries, &split)?;
            let text = std::fs::read_to_string(&pred).map_err(|e| format!("{}: {e}", pred.display()))?;
            let score = commands::score_predictions(&text, &conversations, mode(strict))?;
            for id in &score.missing {
                eprintln!("no prediction for conversation {id}");
            }
            for id in &score.unmatched {
                eprintln!("prediction {id} matches no conversation");
            }
            if let Some(summary) = &score.summary {
                eprintln!("{}", summary_line(summary));
            }
            commands::write_output(out.as_deref(), &serde_json::to_string_pretty(&score)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
