use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use disambig_core::harness::{
    aggregate, load_tasks, render_table, run_experiment, tasks_to_jsonl, write_outputs, ExperimentConfig,
    ExperimentOutput, Method, OracleKind, Task,
};
use disambig_core::llm::http::{HttpProvider, ProviderConfig};
use disambig_core::llm::mock::ScriptedProvider;
use disambig_core::llm::{ChatProvider, Gateway, RetryPolicy};
use disambig_core::metrics::{score_specs, Embedder, ExternalEmbedder, FallbackEmbedder};
use disambig_core::pool::Answer;
use disambig_core::session::{Clarifier, SessionConfig, StepOutcome};
use disambig_core::spec::{parse_spec, serialize_spec};
use disambig_core::synthetic::{synthetic_tasks, SyntheticProvider};
use disambig_service::{AppState, OracleMode, ServiceConfig, DEFAULT_PORT};

#[derive(Parser)]
#[command(name = "disambig", version, about = "Clarify ambiguous infrastructure requests by asking about candidate disagreements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    /// Scripted replies with --mock-script, the seeded synthetic world otherwise
    Mock,
    /// OpenAI-compatible endpoint from LLM_BASE_URL / LLM_API_KEY / LLM_MODEL
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKind {
    External,
    Fallback,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Rule,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServeOracle {
    Off,
    Rule,
}

#[derive(clap::Args, Clone)]
struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderKind,
    /// JSONL reply script for the mock provider
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Score a generated spec against a reference
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "gen")]
        generated: PathBuf,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        #[arg(long, value_enum, default_value = "fallback")]
        embedder: EmbedderKind,
    },
    /// Run one method over a task file and write results
    Run {
        #[arg(long)]
        tasks: PathBuf,
        /// ours, direct, best-of-n, self-consistency, or a comma-separated list
        #[arg(long, default_value = "ours")]
        method: String,
        /// question budget K, or a comma-separated list
        #[arg(long, default_value = "5")]
        budget: String,
        #[arg(long, default_value_t = 8)]
        pool_size: usize,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long, value_enum, default_value = "rule")]
        oracle: OracleArg,
        #[arg(long, value_enum, default_value = "on")]
        rr: OnOff,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long, value_enum, default_value = "fallback")]
        embedder: EmbedderKind,
        #[arg(long, default_value_t = 30)]
        ged_timeout_secs: u64,
        /// method the summary deltas are taken against
        #[arg(long, default_value = "direct")]
        reference: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the session API over HTTP
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long, value_enum, default_value = "off")]
        oracle_mode: ServeOracle,
    },
    /// Write the built-in synthetic task suite as JSONL
    SynthTasks {
        /// output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clarify a request interactively on the terminal
    Clarify {
        #[arg(long)]
        intent: String,
        #[arg(long, default_value_t = 5)]
        budget: u32,
        #[arg(long, default_value_t = 8)]
        pool_size: usize,
        #[command(flatten)]
        provider: ProviderArgs,
    },
}

fn build_provider(args: &ProviderArgs) -> Result<Arc<dyn ChatProvider>> {
    Ok(match (args.provider, &args.mock_script) {
        (ProviderKind::Mock, Some(path)) => Arc::new(ScriptedProvider::from_file(path)?),
        (ProviderKind::Mock, None) => Arc::new(SyntheticProvider::new(args.seed)),
        (ProviderKind::Http, _) => {
            let config = ProviderConfig::from_env().map_err(anyhow::Error::msg)?;
            Arc::new(HttpProvider::new(config).map_err(anyhow::Error::msg)?)
        }
    })
}

fn gateway_for(args: &ProviderArgs) -> Result<Gateway> {
    let gw = Gateway::new(build_provider(args)?);
    Ok(match args.provider {
        ProviderKind::Mock => gw.with_retry(RetryPolicy::immediate(0)),
        ProviderKind::Http => gw,
    })
}

fn embedder(kind: EmbedderKind) -> Result<Box<dyn Embedder>> {
    Ok(match kind {
        EmbedderKind::Fallback => Box::new(FallbackEmbedder),
        EmbedderKind::External => Box::new(ExternalEmbedder::from_env()?),
    })
}

fn read_spec(path: &Path) -> Result<disambig_core::Spec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spec(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| anyhow::anyhow!("invalid {what} `{s}`: {e}")))
        .collect()
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Eval { reference, generated, timeout_secs, embedder: kind } => {
            if timeout_secs == 0 {
                bail!("--timeout-secs must be positive");
            }
            let (r, g) = (read_spec(&reference)?, read_spec(&generated)?);
            let report = score_specs(&r, &g, Duration::from_secs(timeout_secs), embedder(kind)?.as_ref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run {
            tasks,
            method,
            budget,
            pool_size,
            provider,
            oracle,
            rr,
            concurrency,
            embedder: kind,
            ged_timeout_secs,
            reference,
            out,
        } => {
            let methods: Vec<Method> = parse_list(&method, "method")?;
            let budgets: Vec<u32> = parse_list(&budget, "budget")?;
            let tasks = load_tasks(&tasks)?;
            // fail fast on provider configuration before spawning work
            build_provider(&provider)?;
            let config = ExperimentConfig {
                session: SessionConfig {
                    pool_size,
                    rr_enabled: matches!(rr, OnOff::On),
                    ..Default::default()
                },
                oracle: match oracle {
                    OracleArg::Rule => OracleKind::Rule,
                    OracleArg::Llm => OracleKind::Llm,
                },
                concurrency,
                ged_timeout: Duration::from_secs(ged_timeout_secs),
                ..Default::default()
            };
            let factory = move |_: &Task| gateway_for(&provider).expect("provider was validated");
            let embedder = embedder(kind)?;
            let mut all = ExperimentOutput::default();
            for &m in &methods {
                for &k in &budgets {
                    let part = run_experiment(&tasks, m, k, &config, &factory, embedder.as_ref())?;
                    eprintln!("{m} K={k}: {} ok, {} failed", part.results.len(), part.failures.len());
                    for f in &part.failures {
                        eprintln!("  {} failed: {}", f.task_id, f.error);
                    }
                    all.results.extend(part.results);
                    all.failures.extend(part.failures);
                }
            }
            let summary = aggregate(&all.results, reference)?;
            write_outputs(&out, &all, &summary)?;
            print!("{}", render_table(&summary));
        }
        Command::Serve { port, provider, oracle_mode } => {
            build_provider(&provider)?;
            let factory = move || gateway_for(&provider).expect("provider was validated");
            let config = ServiceConfig {
                oracle_mode: match oracle_mode {
                    ServeOracle::Off => OracleMode::Off,
                    ServeOracle::Rule => OracleMode::Rule,
                },
                ..Default::default()
            };
            let state = AppState::new(Arc::new(factory), config);
            let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
            eprintln!("serving on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(disambig_service::serve(addr, state))?;
        }
        Command::SynthTasks { out } => {
            let jsonl = tasks_to_jsonl(&synthetic_tasks());
            match out {
                Some(path) => std::fs::write(path, jsonl)?,
                None => print!("{jsonl}"),
            }
        }
        Command::Clarify { intent, budget, pool_size, provider } => {
            let clarifier = Clarifier::new(gateway_for(&provider)?, SessionConfig { budget_k: budget, pool_size, ..Default::default() });
            let (mut session, mut outcome) = clarifier.start("cli", &intent).map_err(|a| a.error)?;
            let stdin = std::io::stdin();
            let mut lines = stdin.lock().lines();
            loop {
                match outcome {
                    StepOutcome::Finalized(result) => {
                        eprintln!("finalized after {} questions ({:?})", session.rounds_used, result.termination);
                        println!("{}", serialize_spec(&result.spec));
                        break;
                    }
                    StepOutcome::Question(q) => {
                        eprint!("[{}/{}] {} (pool {}) [yes/no] ", q.round, budget, q.text, q.pool_size);
                        std::io::stderr().flush()?;
                        let answer = loop {
                            let Some(line) = lines.next() else { bail!("input closed before the session finished") };
                            match line?.parse::<Answer>() {
                                Ok(a) => break a,
                                Err(e) => eprint!("{e}; yes/no? "),
                            }
                        };
                        outcome = clarifier.step(&mut session, answer)?;
                    }
                }
            }
        }
    }
    Ok(())
}
