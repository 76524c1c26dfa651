//! The `ampo` command line. Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ampo_core::search::{
    replay::replay, run_ampo, run_apo_beam, run_mcts_lite, SearchEnv, Strategy, StrategyParams,
};
use ampo_core::{
    Agents, EvalError, Evaluator, LanguageModel, PatternStrategy, PrePruneRule, PromptCandidate,
    RunConfig, Split, StopReason,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{config, runtime, Result};
use crate::gateway::{CaptureLog, Gateway, HttpBackend, RetryPolicy, ScriptedBackend};
use crate::rundir::{FrozenConfig, RunDir, SystemClock};
use crate::{compare, events, task, templates};

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(name = "ampo", version, about = "Multi-branched prompt optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a first prompt from a few training examples.
    Init(InitArgs),
    /// Optimize a prompt and record the run.
    Optimize(OptimizeArgs),
    /// Score a prompt on one split.
    Eval(EvalArgs),
    /// Tabulate finished runs.
    Compare(CompareArgs),
    /// Re-derive a run's selections from its event log.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Openai,
}

#[derive(Args, Debug)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    pub backend: BackendKind,
    /// JSONL script for the mock backend.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, env = "AMPO_API_BASE")]
    pub api_base: Option<String>,
    #[arg(long, default_value = "gpt-4o-mini")]
    pub target_model: String,
    #[arg(long, default_value = "gpt-4o")]
    pub optimizer_model: String,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 3)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub n_examples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "prompt.txt")]
    pub out: PathBuf,
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    /// Also write every model call here.
    #[arg(long)]
    pub capture: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub prompt: PathBuf,
    #[arg(long, default_value = "ampo", value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 5)]
    pub iterations: u32,
    /// Failures sampled per iteration.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Patterns revised per iteration.
    #[arg(long, default_value_t = 1)]
    pub top_n: usize,
    #[arg(long, default_value = "top_score", value_parser = parse_pattern_strategy)]
    pub pattern_strategy: PatternStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub min_delta: f64,
    #[arg(long, default_value_t = 1)]
    pub patience: u32,
    #[arg(long, default_value_t = 1.0)]
    pub analyzer_temperature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub summarizer_temperature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub revisor_temperature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub target_temperature: f64,
    /// Share of train held out when the task has no validation split.
    #[arg(long, default_value_t = 0.10)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 4)]
    pub beam: usize,
    #[arg(long, default_value_t = 3)]
    pub expansions: usize,
    #[arg(long, default_value_t = 1)]
    pub expansion_multiplier: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: u32,
    #[arg(long, default_value_t = 3)]
    pub breadth: usize,
    #[arg(long, default_value_t = 52)]
    pub total_budget: usize,
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub prompt: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    #[arg(long, default_value_t = 0.0)]
    pub target_temperature: f64,
    /// Write the full report (JSON) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub capture: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(required = true)]
    pub run_dirs: Vec<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub run_dir: PathBuf,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse()
}

fn parse_pattern_strategy(s: &str) -> std::result::Result<PatternStrategy, String> {
    s.parse()
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|_| format!("unknown split `{s}`"))
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Init(a) => init(a),
        Command::Optimize(a) => optimize(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare_runs(a),
        Command::Replay(a) => replay_run(a),
    }
}

fn gateway(args: &BackendArgs, capture: Option<&Path>) -> Result<Gateway> {
    if args.parallelism == 0 {
        return Err(config("--parallelism must be >= 1"));
    }
    if args.max_attempts == 0 {
        return Err(config("--max-attempts must be >= 1"));
    }
    let mut gateway = match args.backend {
        BackendKind::Mock => {
            let script = args
                .script
                .as_deref()
                .ok_or_else(|| config("--backend mock needs --script"))?;
            Gateway::new(ScriptedBackend::load(script).map_err(config)?)
        }
        BackendKind::Openai => {
            let timeout = Duration::from_secs(args.timeout_secs);
            let backend = match &args.api_base {
                Some(base) => HttpBackend::new(base, std::env::var(crate::gateway::http::API_KEY_VAR).ok(), timeout),
                None => HttpBackend::from_env(timeout),
            };
            Gateway::new(backend)
        }
    };
    gateway = gateway.with_retry(RetryPolicy {
        max_attempts: args.max_attempts,
        base_backoff_ms: args.backoff_ms,
    });
    if let Some(path) = capture {
        let log = CaptureLog::create(path).map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
        gateway = gateway.with_capture(log);
    }
    Ok(gateway)
}

fn read_prompt(path: &Path) -> Result<PromptCandidate> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read prompt {}: {e}", path.display())))?;
    PromptCandidate::initial("p0", text.trim()).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn init(a: InitArgs) -> Result<i32> {
    let task = task::load(&a.task)?;
    let templates = templates::load(a.templates_dir.as_deref())?;
    let gateway = gateway(&a.backend, a.capture.as_deref())?;
    let mut agents = Agents::new(&gateway, a.backend.optimizer_model.clone(), templates, &RunConfig::default());
    agents.max_tokens = a.backend.max_tokens;
    let prompt = agents
        .initialize_prompt(&task, a.n_examples, a.seed, "p0")
        .map_err(|e| match e {
            ampo_core::agents::AgentError::Precondition(_) => config(e),
            e => runtime(e),
        })?;
    std::fs::write(&a.out, &prompt.text).map_err(|e| runtime(format!("cannot write {}: {e}", a.out.display())))?;
    say!("{}", a.out.display());
    Ok(0)
}

fn optimize(a: OptimizeArgs) -> Result<i32> {
    let task = task::load(&a.task)?;
    let templates = templates::load(a.templates_dir.as_deref())?;
    let p0 = read_prompt(&a.prompt)?;
    let run_config = RunConfig {
        iterations: a.iterations,
        failures_per_iter: a.k,
        top_patterns: a.top_n,
        pattern_strategy: a.pattern_strategy,
        seed: a.seed,
        pre_prune: PrePruneRule { min_delta: a.min_delta, patience: a.patience },
        analyzer_temperature: a.analyzer_temperature,
        summarizer_temperature: a.summarizer_temperature,
        revisor_temperature: a.revisor_temperature,
        target_temperature: a.target_temperature,
        val_fraction: a.val_fraction,
    };
    run_config.validate().map_err(config)?;
    let params = match a.strategy {
        Strategy::Ampo => StrategyParams::Ampo,
        Strategy::ApoBeam => StrategyParams::ApoBeam {
            beam_width: a.beam,
            expansions_per_prompt: a.expansions,
            expansion_multiplier: a.expansion_multiplier,
        },
        Strategy::MctsLite => StrategyParams::MctsLite {
            depth: a.depth,
            breadth: a.breadth,
            total_budget: a.total_budget,
            exploration_weight: ampo_core::search::mcts::DEFAULT_EXPLORATION_WEIGHT,
        },
    };
    let run_id = a.run_id.clone().unwrap_or_else(|| {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis());
        format!("{}-s{}-{now}", a.strategy, a.seed)
    });
    // Validate backend flags before touching the filesystem.
    gateway(&a.backend, None)?;
    let dir = RunDir::create(&a.runs_dir, &run_id)?;
    dir.write_config(&FrozenConfig {
        run_id: run_id.clone(),
        run_config: run_config.clone(),
        params: params.clone(),
        task: a.task.clone(),
        prompt: a.prompt.clone(),
        backend: format!("{:?}", a.backend.backend).to_lowercase(),
        target_model: a.backend.target_model.clone(),
        optimizer_model: a.backend.optimizer_model.clone(),
        parallelism: a.backend.parallelism,
        max_tokens: a.backend.max_tokens,
        templates_dir: a.templates_dir.clone(),
    })?;
    let gateway = gateway(&a.backend, Some(&dir.capture_path()))?;
    let env = SearchEnv {
        run_id: run_id.clone(),
        model: &gateway,
        target_model: a.backend.target_model.clone(),
        optimizer_model: a.backend.optimizer_model.clone(),
        templates,
        parallelism: a.backend.parallelism,
        max_tokens: a.backend.max_tokens,
        clock: &SystemClock,
    };
    let mut sink = dir.sink()?;
    let record = match params {
        StrategyParams::Ampo => run_ampo(&env, &task, &p0, &run_config, &mut sink),
        StrategyParams::ApoBeam { beam_width, expansions_per_prompt, expansion_multiplier } => run_apo_beam(
            &env,
            &task,
            &p0,
            &run_config,
            beam_width,
            expansions_per_prompt,
            expansion_multiplier,
            &mut sink,
        ),
        StrategyParams::MctsLite { depth, breadth, total_budget, .. } => {
            run_mcts_lite(&env, &task, &p0, &run_config, depth, breadth, total_budget, &mut sink)
        }
    }
    .map_err(config)?;
    sink.finish()?;

    let usage = gateway.usage();
    say!("run_id {}", record.run_id);
    say!("run_dir {}", dir.root().display());
    say!("stop_reason {}", record.stop_reason.as_str());
    if !record.global_best_id.is_empty() {
        let best = record.global_best();
        say!("best_prompt {}", dir.candidate_path(&best.id).display());
        say!("best_val {:.4}", best.val_score.unwrap_or_default());
    }
    say!("candidates {}", record.ledger.candidates_generated);
    say!("iterations {}", record.ledger.per_iteration.len());
    say!("target_calls {}", record.ledger.target_calls);
    say!("optimizer_calls {}", record.ledger.optimizer_calls);
    say!("tokens prompt={} completion={}", usage.prompt_tokens, usage.completion_tokens);
    if record.stop_reason == StopReason::Error {
        eprintln!("error: {}", record.error.unwrap_or_default());
        return Ok(1);
    }
    Ok(0)
}

fn eval(a: EvalArgs) -> Result<i32> {
    let task = task::load(&a.task)?;
    let prompt = read_prompt(&a.prompt)?;
    let gateway = gateway(&a.backend, a.capture.as_deref())?;
    let evaluator = Evaluator {
        model: &gateway as &dyn LanguageModel,
        target_model: a.backend.target_model.clone(),
        temperature: a.target_temperature,
        max_tokens: a.backend.max_tokens,
        parallelism: a.backend.parallelism,
    };
    let report = evaluator.evaluate(&prompt, &task, a.split).map_err(|e| match e {
        EvalError::EmptySplit(_) => config(e),
        e => runtime(e),
    })?;
    if let Some(path) = &a.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json + "\n").map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    say!("accuracy {:.4}", report.accuracy);
    say!("correct {}/{}", report.correct, report.n);
    Ok(0)
}

fn compare_runs(a: CompareArgs) -> Result<i32> {
    let rows = compare::load_rows(&a.run_dirs)?;
    say!("{}", compare::table(&rows).trim_end());
    if let Some(path) = &a.csv {
        std::fs::write(path, compare::csv(&rows)).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(0)
}

fn replay_run(a: ReplayArgs) -> Result<i32> {
    let events = RunDir::open(&a.run_dir).read_events()?;
    let summary = replay(&events).map_err(|e| match e.index() {
        Some(i) => runtime(format!("replay mismatch at event {i}: {e}")),
        None => runtime(e),
    })?;
    say!("replay OK");
    say!("strategy {}", summary.strategy);
    say!("incumbents {}", summary.incumbents.join(","));
    say!("global_best {}", summary.global_best_id);
    say!("fingerprint {}", events::fingerprint(&events));
    Ok(0)
}
