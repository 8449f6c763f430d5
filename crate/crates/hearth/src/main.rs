use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use hearth::agent::{Agent, SystemClock};
use hearth::config::{Config, ProviderKind};
use hearth::gateway::{self, Gateway};
use hearth::scenario::{render_transcript, run_scenario, write_transcripts, ScenarioName};
use hearth_core::session::{EventKind, EventLog};

#[derive(Parser)]
#[command(name = "hearth", version, about = "Chat-driven home agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ServiceArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Scene file, or `builtin:scenario1` / `builtin:scenario2`.
    #[arg(long)]
    scene: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Cache similarity threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Executor step budget.
    #[arg(long)]
    budget: Option<u64>,
}

impl ServiceArgs {
    fn config(&self) -> anyhow::Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(p) = self.provider {
            c.provider = p;
        }
        if let Some(s) = &self.scene {
            c.scene = s.clone();
        }
        if let Some(p) = self.port {
            c.port = p;
        }
        if let Some(t) = self.tau {
            c.tau = t;
        }
        if let Some(b) = self.budget {
            c.budget = b;
        }
        c.check()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve(ServiceArgs),
    /// Replay a scenario offline, write transcripts and check the outcome.
    RunScenario {
        #[arg(value_enum)]
        name: ScenarioName,
        /// Directory for the transcripts.
        #[arg(long, default_value = "transcripts")]
        out: PathBuf,
    },
    /// Chat with the agent in the terminal.
    Repl {
        #[command(flatten)]
        service: ServiceArgs,
        #[arg(long, default_value = "Eason")]
        user: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(&args),
        Command::RunScenario { name, out } => scenario(name, &out),
        Command::Repl { service, user } => repl(&service, &user),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn serve(args: &ServiceArgs) -> anyhow::Result<ExitCode> {
    let config = args.config()?;
    let agent = Agent::from_config(&config, Arc::new(SystemClock::default()))?;
    let addr = format!("{}:{}", config.host, config.port);
    let runtime = tokio::runtime::Runtime::new().context("cannot start the async runtime")?;
    runtime.block_on(gateway::serve(Gateway::new(Arc::new(agent)), &addr))?;
    Ok(ExitCode::SUCCESS)
}

fn scenario(name: ScenarioName, out: &std::path::Path) -> anyhow::Result<ExitCode> {
    let run = run_scenario(name)?;
    let (jsonl, human) = write_transcripts(&run, out)?;
    println!("wrote {} and {}", jsonl.display(), human.display());
    for c in &run.checks {
        if c.passed() {
            println!("ok    {}", c.name);
        } else {
            println!("FAIL  {}\n      expected: {}\n      actual:   {}", c.name, c.expected, c.actual);
        }
    }
    Ok(if run.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn repl(args: &ServiceArgs, user: &str) -> anyhow::Result<ExitCode> {
    let config = args.config()?;
    let agent = Agent::from_config(&config, Arc::new(SystemClock::default()))?;
    let mut conv = agent.conversation("repl", user);
    let mut log = EventLog::new();
    let mut last_turn = 1;
    println!("Chatting as {user}. /events shows the last turn's events; Ctrl-D quits.");
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        print!("> ");
        std::io::stdout().flush()?;
        let Some(line) = lines.next() else { break };
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/events" {
            print!("{}", render_transcript(log.since(last_turn)));
            continue;
        }
        last_turn = log.next_seq();
        agent.send(&mut conv, &mut log, text);
        for e in log.since(last_turn) {
            let shown = match e.kind {
                EventKind::Message | EventKind::Report | EventKind::Failure => {
                    e.role != Some(hearth_core::session::Role::User)
                }
                _ => false,
            };
            if let (true, Some(t)) = (shown, &e.text) {
                println!("{t}");
            } else if matches!(e.kind, EventKind::CacheHit | EventKind::Generating | EventKind::Retry | EventKind::Executing) {
                if let Some(t) = &e.text {
                    println!("  · {t}");
                }
            }
        }
    }
    println!();
    Ok(ExitCode::SUCCESS)
}
