//! `diffprobe`: run difficulty experiments, benchmark the solver, correlate
//! agent results with human statistics and render reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use diffprobe_core::agent::transport::{HttpTransport, TransportConfig};
use diffprobe_core::agent::{build_agent, AgentConfig, AgentContext, PromptBundle};
use diffprobe_core::battle::{BattleGame, Roster};
use diffprobe_core::game::{play_game, Game};
use diffprobe_core::harness::{
    aggregate, aggregates_by_agent, load_trials, run, AggregateOptions, Challenge, RunConfig,
};
use diffprobe_core::protocol::{run_external_challenge, serve_game, ExternalCommand};
use diffprobe_core::report::{
    build_report, load_human_csv, render_report, CsvSchema, ReportFormats,
};
use diffprobe_core::solver::{bench, Solver};
use diffprobe_core::stats::{correlate_agents, format_p, MetricPair, StatsError};
use diffprobe_core::wordle::{load_word_list, Word, WordList};

const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_STATS: u8 = 4;
const EXIT_USAGE: u8 = 64;
/// Reference point printed beside solver benchmarks.
const HUMAN_REFERENCE_GUESSES: f64 = 3.97;

#[derive(Parser, Debug)]
#[command(
    name = "diffprobe",
    version,
    about = "Measure game challenge difficulty with agent trials"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for run artifacts and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Base seed for every derived trial seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trial workers.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Trials per (challenge, agent).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Maximum Wordle guesses per puzzle.
    #[arg(long, global = true)]
    guess_cap: Option<usize>,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Solve every answer with the entropy solver and summarize.
    #[command(visible_alias = "bench")]
    BenchSolver(BenchArgs),
    /// Show the solver's guesses for one answer.
    Solve {
        /// Answer to solve (also accepted as `--answer`).
        #[arg(
            required_unless_present = "answer_flag",
            conflicts_with = "answer_flag"
        )]
        answer: Option<String>,
        #[arg(long = "answer", id = "answer_flag")]
        answer_flag: Option<String>,
        #[command(flatten)]
        lists: WordListArgs,
    },
    /// Run trials for every (challenge, agent, trial) tuple.
    Run(RunArgs),
    /// Aggregate trials, correlate with human data and write reports.
    Correlate(CorrelateArgs),
    /// Play the deck-battle demo against the boss roster.
    DemoBattle(DemoArgs),
    /// Run one challenge against an external game command and print the result.
    ProtocolCheck(ProtocolCheckArgs),
    /// Serve the deck-battle game over the stdio protocol.
    ServeBattle(ServeArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct WordListArgs {
    /// Allowed-guess list (one word per line). Defaults to the bundled list.
    #[arg(long)]
    allowed: Option<PathBuf>,
    /// Answer list. Defaults to the bundled list.
    #[arg(long)]
    answers: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct BenchArgs {
    #[command(flatten)]
    lists: WordListArgs,
    /// Guess cap; overrides `--guess-cap`.
    #[arg(long)]
    cap: Option<usize>,
    /// Per-answer CSV path. Defaults to `<out-dir>/bench_solver.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    /// Game to run: wordle, battle or external.
    #[arg(long)]
    game: Option<String>,
    /// Agent spec (repeatable): solver, random[:seed], scripted:expert,
    /// scripted:A,B, zs[:model], cot[:model], cotplus[:model].
    #[arg(long = "agent")]
    agents: Vec<String>,
    #[command(flatten)]
    lists: WordListArgs,
    /// Use only the first N answers.
    #[arg(long)]
    limit: Option<usize>,
    /// Boss roster JSON. Defaults to the bundled roster.
    #[arg(long)]
    roster: Option<PathBuf>,
    /// Comma-separated boss names (default: all).
    #[arg(long)]
    bosses: Option<String>,
    /// Deck name from the roster.
    #[arg(long)]
    deck: Option<String>,
    /// Turn cap per battle.
    #[arg(long)]
    turn_cap: Option<u32>,
    /// External game command; runs each challenge id as a subprocess.
    #[arg(long)]
    game_cmd: Option<String>,
    /// Comma-separated challenge ids for external games.
    #[arg(long)]
    challenges: Option<String>,
    /// Chat-completions endpoint for LLM agents.
    #[arg(long)]
    endpoint: Option<String>,
    /// Text file with strategy guidance for CoT+ agents.
    #[arg(long)]
    strategy_file: Option<PathBuf>,
    /// Stop after this many new trials (resume later by rerunning).
    #[arg(long)]
    max_new_trials: Option<usize>,
    /// Do not write per-trial transcripts.
    #[arg(long)]
    no_transcripts: bool,
}

#[derive(Args, Debug, Clone)]
struct CorrelateArgs {
    /// trials.jsonl produced by `run`.
    #[arg(long)]
    trials_file: PathBuf,
    /// Human statistics CSV.
    #[arg(long)]
    human: PathBuf,
    /// JSON column mapping for the human CSV.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Metric pairing agent~human (repeatable), e.g. avg_guesses~avg_metric.
    #[arg(long = "metric")]
    metrics: Vec<String>,
    /// Drop protocol failures instead of counting them as losses.
    #[arg(long)]
    exclude_protocol_failures: bool,
    /// Skip the Markdown report.
    #[arg(long)]
    no_markdown: bool,
    /// Skip SVG scatter plots.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args, Debug, Clone)]
struct DemoArgs {
    /// Agent spec.
    #[arg(long, default_value = "scripted:expert")]
    agent: String,
    /// Fight only this boss.
    #[arg(long)]
    boss: Option<String>,
    #[arg(long, default_value = "standard")]
    deck: String,
    #[arg(long)]
    roster: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    turn_cap: u32,
    /// Print every observation and action.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug, Clone)]
struct ProtocolCheckArgs {
    /// Game command line.
    #[arg(long)]
    game_cmd: String,
    #[arg(long, default_value = "check")]
    challenge: String,
    #[arg(long, default_value = "scripted:expert")]
    agent: String,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Args, Debug, Clone)]
struct ServeArgs {
    /// Boss to fight; defaults to the challenge id sent in hello.
    #[arg(long)]
    boss: Option<String>,
    #[arg(long, default_value = "standard")]
    deck: String,
    #[arg(long)]
    roster: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    turn_cap: u32,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.to_string(),
        }
    }

    fn stats(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_STATS,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::BenchSolver(args) => cmd_bench_solver(&cli.global, args),
        Command::Solve {
            answer,
            answer_flag,
            lists,
        } => {
            let answer = answer
                .as_deref()
                .or(answer_flag.as_deref())
                .unwrap_or_default();
            cmd_solve(&cli.global, answer, lists)
        }
        Command::Run(args) => cmd_run(&cli.global, args),
        Command::Correlate(args) => cmd_correlate(&cli.global, args),
        Command::DemoBattle(args) => cmd_demo_battle(&cli.global, args),
        Command::ProtocolCheck(args) => cmd_protocol_check(&cli.global, args),
        Command::ServeBattle(args) => cmd_serve_battle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Values a JSON config file may set. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    parallelism: Option<usize>,
    trials: Option<usize>,
    guess_cap: Option<usize>,
    turn_cap: Option<u32>,
    game: Option<String>,
    agents: Vec<AgentEntry>,
    allowed: Option<PathBuf>,
    answers: Option<PathBuf>,
    limit: Option<usize>,
    roster: Option<PathBuf>,
    bosses: Vec<String>,
    deck: Option<String>,
    game_cmd: Option<String>,
    challenges: Vec<String>,
    strict_guesses: Option<bool>,
    write_transcripts: Option<bool>,
    endpoint: Option<TransportConfig>,
    strategy_file: Option<PathBuf>,
    prompts: BTreeMap<String, PromptBundle>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AgentEntry {
    Spec(String),
    Full(AgentConfig),
}

fn load_file_config(global: &GlobalArgs) -> Result<FileConfig, Failure> {
    let Some(path) = &global.config else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// The argument vector and the config file text, both verbatim.
fn invocation(global: &GlobalArgs) -> Result<serde_json::Value, Failure> {
    let file_text = match &global.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    Ok(serde_json::json!({
        "args": std::env::args().collect::<Vec<_>>(),
        "config_file": global.config,
        "config_text": file_text,
    }))
}

fn word_lists(allowed: Option<&Path>, answers: Option<&Path>) -> Result<WordList, Failure> {
    let list = match (allowed, answers) {
        (None, None) => WordList::default_lists(),
        (Some(a), ans) => load_word_list(a, ans).map_err(Failure::input)?,
        (None, Some(ans)) => diffprobe_core::wordle::load_answers_with_default_allowed(ans)
            .map_err(Failure::input)?,
    };
    if list.answers().is_empty() {
        return Err(Failure::input("answer list is empty"));
    }
    Ok(list)
}

fn out_dir(global: &GlobalArgs, file: &FileConfig, default: &str) -> PathBuf {
    global
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn write_file(path: &Path, content: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, content).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn cmd_bench_solver(global: &GlobalArgs, args: &BenchArgs) -> CliResult {
    let file = load_file_config(global)?;
    let allowed = args.lists.allowed.clone().or(file.allowed.clone());
    let answers = args.lists.answers.clone().or(file.answers.clone());
    let list = word_lists(allowed.as_deref(), answers.as_deref())?;
    let cap = args
        .cap
        .or(global.guess_cap)
        .or(file.guess_cap)
        .unwrap_or(12);
    if cap == 0 {
        return Err(Failure::input("the guess cap must be at least 1"));
    }
    let solver = Solver::new(Arc::new(list));
    let summary = bench(&solver, cap).map_err(Failure::input)?;

    let mut csv = String::from("answer,guesses,solved\n");
    for (word, count) in &summary.per_answer {
        match count {
            Some(n) => csv.push_str(&format!("{word},{n},true\n")),
            None => csv.push_str(&format!("{word},{cap},false\n")),
        }
    }
    let path = match &args.out {
        Some(p) => p.clone(),
        None => out_dir(global, &file, ".").join("bench_solver.csv"),
    };
    write_file(&path, &csv)?;
    println!(
        "puzzles={} mean_guesses={:.4} win_rate_within_6={:.4} win_rate_within_{cap}={:.4} (human reference {HUMAN_REFERENCE_GUESSES}) csv={}",
        summary.puzzles,
        summary.mean_guesses,
        summary.win_rate_within_6,
        summary.win_rate_within_cap,
        path.display()
    );
    Ok(())
}

fn cmd_solve(global: &GlobalArgs, answer: &str, args: &WordListArgs) -> CliResult {
    let list = word_lists(args.allowed.as_deref(), args.answers.as_deref())?;
    let word = Word::parse(answer).map_err(Failure::input)?;
    if !list.answers().contains(&word) {
        return Err(Failure::input(format!("{word} is not in the answer list")));
    }
    let cap = global.guess_cap.unwrap_or(12);
    let solver = Solver::new(Arc::new(list));
    let outcome = solver.solve(word, cap.max(1)).map_err(Failure::input)?;
    let guesses: Vec<String> = outcome.guesses().iter().map(Word::to_string).collect();
    println!(
        "{} {} in {}: {}",
        word,
        if outcome.is_solved() {
            "solved"
        } else {
            "failed"
        },
        guesses.len(),
        guesses.join(" ")
    );
    Ok(())
}

fn parse_agents(specs: &[String], entries: Vec<AgentEntry>) -> Result<Vec<AgentConfig>, Failure> {
    let mut agents = Vec::new();
    if specs.is_empty() {
        for e in entries {
            agents.push(match e {
                AgentEntry::Spec(s) => AgentConfig::from_spec(&s).map_err(Failure::input)?,
                AgentEntry::Full(c) => c,
            });
        }
    } else {
        for s in specs {
            agents.push(AgentConfig::from_spec(s).map_err(Failure::input)?);
        }
    }
    if agents.is_empty() {
        return Err(Failure::input("no agents given (use --agent)"));
    }
    Ok(agents)
}

fn load_roster(path: Option<&Path>) -> Result<Roster, Failure> {
    match path {
        Some(p) => Roster::load(p).map_err(Failure::input),
        None => Ok(Roster::default_roster()),
    }
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn cmd_run(global: &GlobalArgs, args: &RunArgs) -> CliResult {
    let mut file = load_file_config(global)?;
    let game_cmd = args.game_cmd.clone().or(file.game_cmd.clone());
    let game = args.game.clone().or(file.game.clone()).unwrap_or_else(|| {
        if game_cmd.is_some() {
            "external"
        } else {
            "wordle"
        }
        .into()
    });
    let agents = parse_agents(&args.agents, std::mem::take(&mut file.agents))?;
    let allowed = args.lists.allowed.clone().or(file.allowed.clone());
    let answers = args.lists.answers.clone().or(file.answers.clone());
    let list = Arc::new(word_lists(allowed.as_deref(), answers.as_deref())?);

    let mut config = RunConfig {
        agents,
        out_dir: out_dir(global, &file, "runs/latest"),
        ..RunConfig::default()
    };
    if let Some(v) = global.trials.or(file.trials) {
        config.trials_per_challenge = v;
    }
    if let Some(v) = global.guess_cap.or(file.guess_cap) {
        config.guess_cap = v;
    }
    if let Some(v) = args.turn_cap.or(file.turn_cap) {
        config.turn_cap = v;
    }
    if let Some(v) = global.parallelism.or(file.parallelism) {
        config.parallelism = v;
    }
    if let Some(v) = global.seed.or(file.seed) {
        config.base_seed = v;
    }
    if let Some(v) = file.strict_guesses {
        config.strict_guesses = v;
    }
    config.write_transcripts = !args.no_transcripts && file.write_transcripts.unwrap_or(true);
    config.max_new_trials = args.max_new_trials;
    config.invocation = Some(invocation(global)?);
    let strategy_path = args.strategy_file.clone().or(file.strategy_file.clone());
    if let Some(path) = strategy_path {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        for a in &mut config.agents {
            if a.strategy_text.is_none() {
                a.strategy_text = Some(text.clone());
            }
        }
    }

    let challenges: Vec<Challenge> = match game.as_str() {
        "wordle" => {
            let limit = args.limit.or(file.limit).unwrap_or(usize::MAX);
            list.answers()
                .iter()
                .take(limit)
                .map(|w| Challenge::wordle(*w))
                .collect()
        }
        "battle" => {
            let roster = load_roster(args.roster.as_deref().or(file.roster.as_deref()))?;
            let deck_name = args
                .deck
                .clone()
                .or(file.deck.clone())
                .unwrap_or_else(|| "standard".into());
            let deck = roster.deck(&deck_name).map_err(Failure::input)?;
            let names = match &args.bosses {
                Some(b) => split_list(b),
                None => file.bosses.clone(),
            };
            let bosses = if names.is_empty() {
                roster.bosses.clone()
            } else {
                names
                    .iter()
                    .map(|n| {
                        roster
                            .boss(n)
                            .cloned()
                            .ok_or_else(|| Failure::input(format!("unknown boss {n:?}")))
                    })
                    .collect::<Result<_, _>>()?
            };
            bosses
                .into_iter()
                .map(|b| Challenge::battle(b, deck.clone(), roster.player_hp))
                .collect()
        }
        "external" => {
            let cmd = game_cmd
                .as_deref()
                .and_then(ExternalCommand::parse)
                .ok_or_else(|| Failure::input("external games need --game-cmd"))?;
            let ids = match &args.challenges {
                Some(c) => split_list(c),
                None => file.challenges.clone(),
            };
            if ids.is_empty() {
                return Err(Failure::input("external games need --challenges"));
            }
            ids.into_iter()
                .map(|id| Challenge::External {
                    id,
                    command: cmd.clone(),
                })
                .collect()
        }
        other => return Err(Failure::input(format!("unknown game {other:?}"))),
    };
    if challenges.is_empty() {
        return Err(Failure::input("no challenges selected"));
    }

    let mut ctx = AgentContext::new(list);
    ctx.bundles = std::mem::take(&mut file.prompts);
    if config.agents.iter().any(|a| a.kind.is_llm()) {
        let mut tc = file.endpoint.clone().unwrap_or_default();
        if let Some(e) = &args.endpoint {
            tc.endpoint = e.clone();
        }
        tc.max_in_flight = tc.max_in_flight.max(config.parallelism);
        ctx = ctx.with_transport(Arc::new(HttpTransport::from_env(tc)));
    }

    let summary = run(&config, &challenges, &ctx).map_err(|e| match e {
        diffprobe_core::harness::HarnessError::Config(_)
        | diffprobe_core::harness::HarnessError::Agent(_) => Failure::input(e),
        other => Failure::io(other),
    })?;
    eprintln!(
        "[run] {} tuples: {} already done, {} written ({} protocol failures)",
        summary.total, summary.skipped, summary.written, summary.protocol_failures
    );
    println!("{}", summary.trials_path.display());
    Ok(())
}

fn cmd_correlate(global: &GlobalArgs, args: &CorrelateArgs) -> CliResult {
    let file = load_file_config(global)?;
    if !args.human.exists() {
        return Err(Failure::input(format!(
            "{}: no such file",
            args.human.display()
        )));
    }
    let records = load_trials(&args.trials_file).map_err(Failure::input)?;
    let schema = match &args.schema {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<CsvSchema>(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        None => CsvSchema::default(),
    };
    let human = load_human_csv(&args.human, &schema).map_err(Failure::input)?;
    let options = AggregateOptions {
        guess_cap: global.guess_cap.or(file.guess_cap),
        exclude_protocol_failures: args.exclude_protocol_failures,
    };
    let aggregates = aggregate(&records, options).map_err(Failure::input)?;
    let by_agent = aggregates_by_agent(aggregates);

    let pairs: Vec<MetricPair> = if args.metrics.is_empty() {
        let battle = records
            .iter()
            .any(|r| r.metrics.contains_key("hp_remaining"));
        vec![if battle {
            "avg_hp_remaining~win_rate".parse()
        } else {
            "avg_guesses~avg_metric".parse()
        }
        .expect("default pair")]
    } else {
        args.metrics
            .iter()
            .map(|m| m.parse().map_err(Failure::input))
            .collect::<Result<_, _>>()?
    };
    let correlations = correlate_agents(&by_agent, &human, &pairs).map_err(|e| match e {
        StatsError::JoinTooSmall { .. } | StatsError::DegenerateInput(_) => Failure::stats(e),
    })?;

    let dir = global
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| {
            args.trials_file
                .parent()
                .unwrap_or(Path::new("."))
                .to_path_buf()
        });
    let manifest = args
        .trials_file
        .parent()
        .map(|p| p.join(diffprobe_core::harness::MANIFEST_FILE))
        .filter(|p| p.exists())
        .and_then(|p| std::fs::read(p).ok())
        .map(|bytes| diffprobe_core::seed::sha256_hex(&bytes));
    let report = build_report(&by_agent, &human, &correlations, pairs[0], manifest)
        .map_err(Failure::stats)?;
    let formats = ReportFormats {
        markdown: !args.no_markdown,
        svg: !args.no_svg,
    };
    let written = render_report(&report, &dir, formats).map_err(Failure::io)?;
    for c in &correlations {
        println!(
            "{} {}: n={} r={:.6} p={} ({})",
            c.agent,
            c.metric,
            c.result.n,
            c.result.r,
            format_p(c.result.p),
            c.result.bucket
        );
    }
    for p in written {
        eprintln!("[correlate] wrote {}", p.display());
    }
    Ok(())
}

fn cmd_demo_battle(global: &GlobalArgs, args: &DemoArgs) -> CliResult {
    let roster = load_roster(args.roster.as_deref())?;
    let deck = roster.deck(&args.deck).map_err(Failure::input)?;
    let bosses: Vec<_> = match &args.boss {
        Some(name) => vec![roster
            .boss(name)
            .cloned()
            .ok_or_else(|| Failure::input(format!("unknown boss {name:?}")))?],
        None => roster.bosses.clone(),
    };
    let cfg = AgentConfig::from_spec(&args.agent).map_err(Failure::input)?;
    if cfg.kind.is_llm() {
        return Err(Failure::input(
            "demo-battle runs offline agents only; use `run --game battle`",
        ));
    }
    let ctx = AgentContext::new(Arc::new(WordList::default_lists()));
    let base = global.seed.unwrap_or(0);
    let trials = global.trials.unwrap_or(1);
    println!("boss,trial,outcome,hp_remaining,turns,flags");
    for boss in &bosses {
        for t in 0..trials {
            let seed = diffprobe_core::seed::trial_seed(base, &boss.name, &cfg.id, t);
            let mut agent = build_agent(&cfg, &ctx, seed).map_err(Failure::input)?;
            let mut game = BattleGame::new(boss, &deck, roster.player_hp, seed, args.turn_cap);
            let outcome = if args.verbose {
                let mut agent = Verbose(agent.as_mut());
                play_game(&mut game, &mut agent, usize::MAX)
            } else {
                play_game(&mut game, agent.as_mut(), usize::MAX)
            }
            .unwrap_or_else(|e| {
                eprintln!("agent failed: {e}");
                game.forfeit("protocol_failure")
            });
            println!(
                "{},{},{},{},{},{}",
                boss.name,
                t,
                if outcome.won { "win" } else { "loss" },
                outcome.metrics["hp_remaining"],
                outcome.metrics["turns"],
                outcome.flags.join(";")
            );
        }
    }
    Ok(())
}

/// Echoes every observation and action to stderr.
struct Verbose<'a>(&'a mut dyn diffprobe_core::agent::Agent);

impl diffprobe_core::agent::Agent for Verbose<'_> {
    fn act(
        &mut self,
        obs: &diffprobe_core::agent::Observation,
    ) -> Result<diffprobe_core::agent::AgentAction, diffprobe_core::agent::AgentError> {
        eprintln!("----\n{}", obs.state_text);
        let a = self.0.act(obs)?;
        eprintln!("> {}", a.parsed());
        Ok(a)
    }

    fn transcript(&self) -> &diffprobe_core::agent::Transcript {
        self.0.transcript()
    }
}

fn cmd_protocol_check(global: &GlobalArgs, args: &ProtocolCheckArgs) -> CliResult {
    let cmd =
        ExternalCommand::parse(&args.game_cmd).ok_or_else(|| Failure::input("empty --game-cmd"))?;
    let cfg = AgentConfig::from_spec(&args.agent).map_err(Failure::input)?;
    let ctx = AgentContext::new(Arc::new(WordList::default_lists()));
    let seed = global.seed.unwrap_or(0);
    let mut agent = build_agent(&cfg, &ctx, seed).map_err(Failure::input)?;
    let limits = diffprobe_core::protocol::ExternalLimits {
        wall_clock: std::time::Duration::from_secs_f64(args.timeout.max(0.1)),
        ..Default::default()
    };
    match run_external_challenge(&cmd, &args.challenge, seed, agent.as_mut(), limits) {
        Ok(run) => {
            println!(
                "game={} outcome={} turns={} metrics={}",
                run.game_id,
                if run.outcome.won { "win" } else { "loss" },
                run.turns,
                serde_json::to_string(&run.outcome.metrics).expect("metrics serialize")
            );
            Ok(())
        }
        Err(e) => Err(Failure::io(format!("[{}] {e}", e.flag()))),
    }
}

fn cmd_serve_battle(args: &ServeArgs) -> CliResult {
    let roster = load_roster(args.roster.as_deref())?;
    let deck = roster.deck(&args.deck).map_err(Failure::input)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let result = serve_game(stdin.lock(), stdout.lock(), |hello| {
        let name = args
            .boss
            .clone()
            .or_else(|| hello.challenge_id.clone())
            .ok_or_else(|| "no boss given and hello carried no challenge id".to_string())?;
        let boss = roster
            .boss(&name)
            .ok_or_else(|| format!("unknown boss {name:?}"))?;
        let game: Box<dyn Game> = Box::new(BattleGame::new(
            boss,
            &deck,
            roster.player_hp,
            hello.seed.unwrap_or(0),
            args.turn_cap,
        ));
        Ok(game)
    });
    result.map_err(Failure::io)
}
