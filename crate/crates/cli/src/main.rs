//! `chainshell`: validate, format and run knowledge bases, hold terminal
//! consultations, and launch the HTTP service.
//!
//! Exit codes: 0 success, 1 validation or inference failure, 2 usage error.

mod consult;
mod input;
mod output;
mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chainshell_core::engine::{start_session, Answer, Mode, Status};
use chainshell_core::kb::{validate_kb, KnowledgeBase};
use chainshell_core::lang::{parse_kb_bytes, parse_kb_with_spans, serialize_kb, ParseError};
use chainshell_service::Config;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chainshell", version, about = "Rule-based expert-system shell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base and print its diagnostics
    Validate { kb: PathBuf },
    /// Run inference without a terminal and print the conclusions
    Run {
        kb: PathBuf,
        #[arg(long, value_enum, default_value_t = RunMode::Forward)]
        mode: RunMode,
        /// Initial facts, one `variable = value` per line
        #[arg(long)]
        facts: Option<PathBuf>,
        /// Replies to questions (hybrid), one `variable = value` or `variable = unknown` per line
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Append the inference trace
        #[arg(long)]
        trace: bool,
    },
    /// Hold an interactive consultation on the terminal
    Consult {
        kb: PathBuf,
        #[arg(long, value_enum, default_value_t = ConsultMode::Backward)]
        mode: ConsultMode,
        /// Variable to establish (backward mode)
        #[arg(long)]
        goal: Option<String>,
    },
    /// Print a knowledge base in canonical form
    Fmt {
        kb: PathBuf,
        /// Print nothing; fail if the file is not already canonical
        #[arg(long)]
        check: bool,
    },
    /// Run the HTTP service until interrupted
    Serve {
        /// Port to listen on; 0 picks a free one [env: CHAINSHELL_PORT]
        #[arg(long)]
        port: Option<u16>,
        /// Where users, knowledge bases and cases are kept [env: CHAINSHELL_DATA_DIR]
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Directory of the web client to serve [env: CHAINSHELL_WEB_DIR]
        #[arg(long)]
        web_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RunMode {
    Forward,
    Hybrid,
    #[value(hide = true)]
    Backward,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ConsultMode {
    Backward,
    Hybrid,
    #[value(hide = true)]
    Forward,
}

/// Why a command stopped. An empty message prints nothing.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable inputs: exit 2.
    Usage(String),
    /// Invalid knowledge base or failed inference: exit 1.
    Failed(String),
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Usage(format!("{} is not UTF-8 text", path.display())))
}

fn parse(bytes: &[u8]) -> Result<(String, KnowledgeBase, chainshell_core::lang::SourceMap), Vec<ParseError>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_kb_with_spans(text).map(|(kb, map)| (text.to_string(), kb, map)),
        Err(_) => Err(parse_kb_bytes(bytes).expect_err("invalid UTF-8 never parses")),
    }
}

fn lines<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Loads a knowledge base that is fit to run: it parses and has no errors.
fn load_runnable(path: &Path) -> Result<Arc<KnowledgeBase>, Failure> {
    let (_, kb, _) = parse(&read(path)?).map_err(|errors| Failure::Failed(lines(&errors)))?;
    let errors: Vec<_> = validate_kb(&kb).into_iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(Failure::Failed(lines(&errors)));
    }
    Ok(Arc::new(kb))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let (_, kb, _) = match parse(&read(path)?) {
        Ok(parsed) => parsed,
        Err(errors) => {
            println!("{}", lines(&errors));
            return Err(Failure::Failed(String::new()));
        }
    };
    let diagnostics = validate_kb(&kb);
    for d in &diagnostics {
        println!("{d}");
    }
    if diagnostics.iter().any(|d| d.is_error()) {
        return Err(Failure::Failed(String::new()));
    }
    Ok(())
}

fn fmt(path: &Path, check: bool) -> Result<(), Failure> {
    let (text, kb, _) = parse(&read(path)?).map_err(|errors| Failure::Failed(lines(&errors)))?;
    let canonical = serialize_kb(&kb);
    if check {
        return if canonical == text {
            Ok(())
        } else {
            Err(Failure::Failed(String::new()))
        };
    }
    print!("{canonical}");
    Ok(())
}

fn run(path: &Path, mode: RunMode, facts: Option<&Path>, answers: Option<&Path>, trace: bool) -> Result<(), Failure> {
    let mode = match mode {
        RunMode::Forward => Mode::Forward,
        RunMode::Hybrid => Mode::Hybrid,
        RunMode::Backward => {
            return Err(Failure::Usage(
                "backward runs ask questions; use `chainshell consult --mode backward`".into(),
            ))
        }
    };
    if mode == Mode::Forward && answers.is_some() {
        return Err(Failure::Usage("forward runs never ask questions; --answers needs --mode hybrid".into()));
    }
    let kb = load_runnable(path)?;
    let in_file = |p: &Path| {
        let p = p.to_path_buf();
        move |e: input::LineError| Failure::Usage(format!("{}: {e}", p.display()))
    };
    let facts = match facts {
        Some(p) => input::parse_facts(&kb, &read_text(p)?).map_err(in_file(p))?,
        None => Vec::new(),
    };
    let answers = match answers {
        Some(p) => input::parse_answers(&kb, &read_text(p)?).map_err(in_file(p))?,
        None => Vec::new(),
    };

    let failed = |e: chainshell_core::engine::EngineError| Failure::Failed(e.to_string());
    let mut s = start_session(kb, mode, &facts).map_err(failed)?;
    while let Status::NeedsAnswer(q) = s.status() {
        // a question with no recorded reply is refused
        let answer = answers
            .iter()
            .find(|(v, _)| *v == q.variable)
            .map_or(Answer::Unknown, |(_, a)| a.clone());
        s = s.resume(answer).map_err(failed)?;
    }
    let outcome = s.outcome().expect("a session that stopped asking is done");
    print!("{}", output::conclusions(outcome));
    if trace {
        print!("{}", output::trace(s.trace()));
    }
    Ok(())
}

fn consult(path: &Path, mode: ConsultMode, goal: Option<String>) -> Result<(), Failure> {
    let mode = match (mode, goal) {
        (ConsultMode::Forward, _) => {
            return Err(Failure::Usage(
                "forward chaining never asks questions; use `chainshell run`".into(),
            ))
        }
        (ConsultMode::Backward, Some(goal)) => Mode::Backward { goal },
        (ConsultMode::Backward, None) => return Err(Failure::Usage("backward consultations need --goal".into())),
        (ConsultMode::Hybrid, None) => Mode::Hybrid,
        (ConsultMode::Hybrid, Some(_)) => return Err(Failure::Usage("--goal applies to backward mode only".into())),
    };
    let kb = load_runnable(path)?;
    consult::consult(kb, mode, std::io::stdin().lock(), std::io::stdout().lock())
}

fn serve(port: Option<u16>, data_dir: Option<PathBuf>, web_dir: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = Config::from_env().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(port) = port {
        config.port = port;
    }
    if let Some(dir) = data_dir {
        config.data_dir = dir;
    }
    if web_dir.is_some() {
        config.web_dir = web_dir;
    }
    serve::run(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { kb } => validate(&kb),
        Command::Run {
            kb,
            mode,
            facts,
            answers,
            trace,
        } => run(&kb, mode, facts.as_deref(), answers.as_deref(), trace),
        Command::Consult { kb, mode, goal } => consult(&kb, mode, goal),
        Command::Fmt { kb, check } => fmt(&kb, check),
        Command::Serve {
            port,
            data_dir,
            web_dir,
        } => serve(port, data_dir, web_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("run `chainshell --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Failed(message)) => {
            if !message.is_empty() {
                eprintln!("{message}");
            }
            ExitCode::from(1)
        }
    }
}
