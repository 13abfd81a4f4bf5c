//! Trial runner and aggregation.
//!
//! Every (challenge, agent, trial) tuple runs with a seed derived from its
//! identity and is appended to `trials.jsonl` as soon as it finishes, so a
//! killed run resumes where it stopped and parallelism never changes results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::action::{BATTLE, WORDLE};
use crate::agent::{build_agent, Agent, AgentConfig, AgentContext, AgentError};
use crate::battle::{BattleGame, BossSpec, Card};
use crate::game::{play_game, Game, GameOutcome, WordleGame};
use crate::protocol::{run_external_challenge, ExternalCommand, ExternalLimits, ProtocolError};
use crate::wordle::Word;

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Challenge {
    Wordle {
        id: String,
        answer: Word,
    },
    Battle {
        id: String,
        boss: BossSpec,
        deck: Vec<Card>,
        player_hp: u32,
    },
    External {
        id: String,
        command: ExternalCommand,
    },
}

impl Challenge {
    /// Wordle challenges are keyed by their uppercased answer.
    pub fn wordle(answer: Word) -> Self {
        Challenge::Wordle {
            id: answer.to_string(),
            answer,
        }
    }

    pub fn battle(boss: BossSpec, deck: Vec<Card>, player_hp: u32) -> Self {
        Challenge::Battle {
            id: boss.name.clone(),
            boss,
            deck,
            player_hp,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Challenge::Wordle { id, .. }
            | Challenge::Battle { id, .. }
            | Challenge::External { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Challenge::Wordle { .. } => WORDLE,
            Challenge::Battle { .. } => BATTLE,
            Challenge::External { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub trials_per_challenge: usize,
    pub guess_cap: usize,
    pub turn_cap: u32,
    pub parallelism: usize,
    pub base_seed: u64,
    pub agents: Vec<AgentConfig>,
    pub out_dir: PathBuf,
    /// Reject Wordle guesses outside the allowed list.
    pub strict_guesses: bool,
    pub external: ExternalLimits,
    pub write_transcripts: bool,
    /// Stop after this many new trials; the run can be resumed later.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_new_trials: Option<usize>,
    /// How the run was requested (config file text, arguments); copied into
    /// the manifest unchanged.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invocation: Option<serde_json::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials_per_challenge: 20,
            guess_cap: 12,
            turn_cap: 30,
            parallelism: 1,
            base_seed: 0,
            agents: Vec::new(),
            out_dir: PathBuf::from("runs/latest"),
            strict_guesses: true,
            external: ExternalLimits::default(),
            write_transcripts: true,
            max_new_trials: None,
            invocation: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.trials_per_challenge == 0 {
            return bad("trials_per_challenge must be at least 1");
        }
        if self.guess_cap == 0 || self.turn_cap == 0 {
            return bad("caps must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.agents.is_empty() {
            return bad("no agents configured");
        }
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id.as_str()) {
                return Err(HarnessError::Config(format!("duplicate agent id {}", a.id)));
            }
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Win,
    Loss,
    ProtocolFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub challenge_id: String,
    pub agent_id: String,
    pub trial_index: usize,
    pub seed: u64,
    pub game: String,
    pub outcome: TrialOutcome,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<String>,
    pub wall_ms: u64,
}

impl TrialRecord {
    pub fn key(&self) -> (String, String, usize) {
        (
            self.challenge_id.clone(),
            self.agent_id.clone(),
            self.trial_index,
        )
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("record {challenge}/{agent} lacks metric {metric}")]
    MissingMetric {
        challenge: String,
        agent: String,
        metric: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs one trial in-process (or through the subprocess protocol).
pub fn run_trial(
    challenge: &Challenge,
    agent_config: &AgentConfig,
    trial_index: usize,
    config: &RunConfig,
    ctx: &AgentContext,
) -> (TrialRecord, Option<Box<dyn Agent>>) {
    let started = Instant::now();
    let seed = crate::seed::trial_seed(
        config.base_seed,
        challenge.id(),
        &agent_config.id,
        trial_index,
    );
    let mut record = TrialRecord {
        challenge_id: challenge.id().to_string(),
        agent_id: agent_config.id.clone(),
        trial_index,
        seed,
        game: challenge.kind().to_string(),
        outcome: TrialOutcome::ProtocolFailure,
        metrics: BTreeMap::new(),
        flags: Vec::new(),
        error: None,
        transcript_path: None,
        wall_ms: 0,
    };
    let mut agent = match build_agent(agent_config, ctx, seed) {
        Ok(a) => a,
        Err(e) => {
            record.flags.push("agent_build".into());
            record.error = Some(e.to_string());
            record.wall_ms = started.elapsed().as_millis() as u64;
            return (record, None);
        }
    };

    let finish = |record: &mut TrialRecord, outcome: GameOutcome, failure: Option<String>| {
        record.outcome = match (&failure, outcome.won) {
            (Some(_), _) => TrialOutcome::ProtocolFailure,
            (None, true) => TrialOutcome::Win,
            (None, false) => TrialOutcome::Loss,
        };
        record.metrics = outcome.metrics;
        record.flags.extend(outcome.flags);
        record.error = failure;
    };

    match challenge {
        Challenge::Wordle { answer, .. } => {
            let mut game = WordleGame::new(
                *answer,
                ctx.word_list.clone(),
                config.guess_cap,
                config.strict_guesses,
            );
            play_in_process(&mut game, agent.as_mut(), &mut record, finish);
        }
        Challenge::Battle {
            boss,
            deck,
            player_hp,
            ..
        } => {
            let mut game = BattleGame::new(boss, deck, *player_hp, seed, config.turn_cap);
            play_in_process(&mut game, agent.as_mut(), &mut record, finish);
        }
        Challenge::External { command, id } => {
            match run_external_challenge(command, id, seed, agent.as_mut(), config.external) {
                Ok(run) => {
                    record.game = run.game_id;
                    finish(&mut record, run.outcome, None);
                }
                Err(ProtocolError::TurnLimitExceeded { last_metrics, .. }) => {
                    let outcome = GameOutcome {
                        won: false,
                        metrics: last_metrics,
                        flags: vec!["turn_limit".into()],
                    };
                    finish(&mut record, outcome, None);
                }
                Err(e) => {
                    let outcome = GameOutcome {
                        won: false,
                        metrics: BTreeMap::new(),
                        flags: vec![e.flag().to_string()],
                    };
                    finish(&mut record, outcome, Some(e.to_string()));
                }
            }
        }
    }
    record.wall_ms = started.elapsed().as_millis() as u64;
    (record, Some(agent))
}

fn play_in_process(
    game: &mut dyn Game,
    agent: &mut dyn Agent,
    record: &mut TrialRecord,
    finish: impl Fn(&mut TrialRecord, GameOutcome, Option<String>),
) {
    match play_game(game, agent, usize::MAX) {
        Ok(outcome) => finish(record, outcome, None),
        Err(e) => {
            let outcome = game.forfeit("protocol_failure");
            finish(record, outcome, Some(e.to_string()));
        }
    }
}

fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Reads records, ignoring a truncated final line.
pub fn load_trials(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    let (records, _) = parse_trials(path, &text)?;
    Ok(records)
}

/// Parses complete lines; returns the byte length of the valid prefix.
fn parse_trials(path: &Path, text: &str) -> Result<(Vec<TrialRecord>, usize), HarnessError> {
    let mut records = Vec::new();
    let mut valid = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            break;
        }
        if !line.trim().is_empty() {
            let rec = serde_json::from_str(line).map_err(|e| HarnessError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        valid += line.len();
    }
    Ok((records, valid))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials_path: PathBuf,
    pub total: usize,
    pub skipped: usize,
    pub written: usize,
    pub protocol_failures: usize,
    pub manifest_hash: String,
}

/// Writes `run_manifest.json` and returns its hash.
fn write_manifest(
    config: &RunConfig,
    challenges: &[Challenge],
    ctx: &AgentContext,
) -> Result<String, HarnessError> {
    let challenges_json = serde_json::to_vec(challenges).expect("challenges serialize");
    let manifest = serde_json::json!({
        "config": config,
        "challenge_count": challenges.len(),
        "challenges_hash": crate::seed::sha256_hex(&challenges_json),
        "word_list_hash": ctx.word_list.content_hash(),
        "challenge_ids": challenges.iter().map(|c| c.id()).collect::<Vec<_>>(),
    });
    let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = config.out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, &bytes).map_err(io_err(&path))?;
    Ok(crate::seed::sha256_hex(&bytes))
}

/// Executes every pending tuple, appending records as they complete.
pub fn run(
    config: &RunConfig,
    challenges: &[Challenge],
    ctx: &AgentContext,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let mut ids = BTreeSet::new();
    for c in challenges {
        if !ids.insert(c.id()) {
            return Err(HarnessError::Config(format!(
                "duplicate challenge id {}",
                c.id()
            )));
        }
    }
    for a in &config.agents {
        if a.kind.is_llm() && ctx.transport.is_none() {
            return Err(HarnessError::Config(format!(
                "agent {} needs an LLM endpoint but none is configured",
                a.id
            )));
        }
    }
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let manifest_hash = write_manifest(config, challenges, ctx)?;

    let trials_path = out.join(TRIALS_FILE);
    let mut existing = String::new();
    if trials_path.exists() {
        File::open(&trials_path)
            .and_then(|mut f| f.read_to_string(&mut existing))
            .map_err(io_err(&trials_path))?;
    }
    let (done_records, valid_len) = parse_trials(&trials_path, &existing)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&trials_path)
        .map_err(io_err(&trials_path))?;
    if valid_len < existing.len() {
        // A killed run can leave half a line behind.
        file.set_len(valid_len as u64)
            .map_err(io_err(&trials_path))?;
    }
    let done: BTreeSet<_> = done_records.iter().map(TrialRecord::key).collect();

    let mut pending = Vec::new();
    for c in challenges {
        for a in &config.agents {
            for t in 0..config.trials_per_challenge {
                if !done.contains(&(c.id().to_string(), a.id.clone(), t)) {
                    pending.push((c, a, t));
                }
            }
        }
    }
    let total = challenges.len() * config.agents.len() * config.trials_per_challenge;
    let skipped = total - pending.len();
    if let Some(limit) = config.max_new_trials {
        pending.truncate(limit);
    }

    let next = AtomicUsize::new(0);
    let pending = Arc::new(pending);
    let mut written = 0;
    let mut protocol_failures = 0;
    let workers = config.parallelism.min(pending.len()).max(1);
    let transcript_dir = out.join("transcripts");

    std::thread::scope(|scope| -> Result<(), HarnessError> {
        let (tx, rx) = mpsc::channel::<TrialRecord>();
        for _ in 0..workers {
            let tx = tx.clone();
            let pending = pending.clone();
            let next = &next;
            let transcript_dir = &transcript_dir;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((c, a, t)) = pending.get(i) else {
                    break;
                };
                let (mut record, agent) = run_trial(c, a, *t, config, ctx);
                if let Some(agent) = agent.filter(|_| config.write_transcripts) {
                    let transcript = agent.transcript();
                    if !transcript.entries().is_empty() {
                        let name =
                            format!("{}__{}__{}.jsonl", sanitize(c.id()), sanitize(&a.id), t);
                        let path = transcript_dir.join(&name);
                        if transcript.write_jsonl(&path).is_ok() {
                            record.transcript_path = Some(format!("transcripts/{name}"));
                        }
                    }
                }
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(io_err(&trials_path))?;
            written += 1;
            if record.outcome == TrialOutcome::ProtocolFailure {
                protocol_failures += 1;
            }
            if written % 50 == 0 || written == pending.len() {
                eprintln!("[run] {written}/{} new trials written", pending.len());
            }
        }
        Ok(())
    })?;
    file.sync_all().map_err(io_err(&trials_path))?;

    Ok(RunSummary {
        trials_path,
        total,
        skipped,
        written,
        protocol_failures,
        manifest_hash,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeAggregate {
    pub challenge_id: String,
    pub agent_id: String,
    pub n_trials: usize,
    pub wins: usize,
    pub win_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_guesses: Option<f64>,
    /// Mean guesses over solved trials only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_guesses_solved: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_hp_remaining: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_turns: Option<f64>,
    pub protocol_failure_count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Cap charged to failed Wordle trials lacking a `guess_cap` metric.
    pub guess_cap: Option<usize>,
    /// Drop protocol failures instead of counting them as losses.
    pub exclude_protocol_failures: bool,
}

/// Order-independent mean: values are sorted before summation.
fn mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Some(values.into_iter().sum::<f64>() / n)
}

/// Per (agent, challenge) aggregates, sorted by agent then challenge id.
///
/// Failed Wordle trials count as the guess cap; battle losses count as 0 HP;
/// protocol failures are losses unless excluded, and are always counted.
pub fn aggregate(
    records: &[TrialRecord],
    options: AggregateOptions,
) -> Result<Vec<ChallengeAggregate>, HarnessError> {
    let mut groups: BTreeMap<(&str, &str), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.agent_id.as_str(), r.challenge_id.as_str()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((agent, challenge), group) in groups {
        let protocol_failure_count = group
            .iter()
            .filter(|r| r.outcome == TrialOutcome::ProtocolFailure)
            .count();
        let used: Vec<&TrialRecord> = group
            .into_iter()
            .filter(|r| {
                !(options.exclude_protocol_failures && r.outcome == TrialOutcome::ProtocolFailure)
            })
            .collect();
        if used.is_empty() {
            continue;
        }
        let missing = |metric: &str| HarnessError::MissingMetric {
            challenge: challenge.to_string(),
            agent: agent.to_string(),
            metric: metric.to_string(),
        };
        let is_wordle = used.iter().any(|r| r.game == WORDLE);
        let is_battle = !is_wordle
            && used
                .iter()
                .any(|r| r.game == BATTLE || r.metrics.contains_key("hp_remaining"));
        let wins = used
            .iter()
            .filter(|r| r.outcome == TrialOutcome::Win)
            .count();

        let mut avg_guesses = None;
        let mut avg_guesses_solved = None;
        if is_wordle {
            let mut all = Vec::with_capacity(used.len());
            let mut solved = Vec::new();
            for r in &used {
                if r.outcome == TrialOutcome::Win {
                    let g = *r.metrics.get("guesses").ok_or_else(|| missing("guesses"))?;
                    all.push(g);
                    solved.push(g);
                } else {
                    let cap = r
                        .metrics
                        .get("guess_cap")
                        .copied()
                        .or(options.guess_cap.map(|c| c as f64))
                        .ok_or_else(|| missing("guess_cap"))?;
                    all.push(cap);
                }
            }
            avg_guesses = mean(all);
            avg_guesses_solved = mean(solved);
        }
        let avg_hp_remaining = if is_battle {
            let mut hp = Vec::with_capacity(used.len());
            for r in &used {
                if r.outcome == TrialOutcome::Win {
                    hp.push(
                        *r.metrics
                            .get("hp_remaining")
                            .ok_or_else(|| missing("hp_remaining"))?,
                    );
                } else {
                    hp.push(0.0);
                }
            }
            mean(hp)
        } else {
            None
        };
        let avg_turns = mean(
            used.iter()
                .filter_map(|r| r.metrics.get("turns").copied())
                .collect(),
        );
        out.push(ChallengeAggregate {
            challenge_id: challenge.to_string(),
            agent_id: agent.to_string(),
            n_trials: used.len(),
            wins,
            win_rate: wins as f64 / used.len() as f64,
            avg_guesses,
            avg_guesses_solved,
            avg_hp_remaining,
            avg_turns,
            protocol_failure_count,
        });
    }
    Ok(out)
}

/// Aggregates grouped by agent id.
pub fn aggregates_by_agent(
    aggregates: Vec<ChallengeAggregate>,
) -> BTreeMap<String, Vec<ChallengeAggregate>> {
    let mut map: BTreeMap<String, Vec<ChallengeAggregate>> = BTreeMap::new();
    for a in aggregates {
        map.entry(a.agent_id.clone()).or_default().push(a);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMetric {
    AvgGuesses,
    AvgGuessesSolved,
    WinRate,
    AvgHpRemaining,
}

impl AgentMetric {
    pub const ALL: [AgentMetric; 4] = [
        AgentMetric::AvgGuesses,
        AgentMetric::AvgGuessesSolved,
        AgentMetric::WinRate,
        AgentMetric::AvgHpRemaining,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AgentMetric::AvgGuesses => "avg_guesses",
            AgentMetric::AvgGuessesSolved => "avg_guesses_solved",
            AgentMetric::WinRate => "win_rate",
            AgentMetric::AvgHpRemaining => "avg_hp_remaining",
        }
    }

    pub fn value(self, a: &ChallengeAggregate) -> Option<f64> {
        match self {
            AgentMetric::AvgGuesses => a.avg_guesses,
            AgentMetric::AvgGuessesSolved => a.avg_guesses_solved,
            AgentMetric::WinRate => Some(a.win_rate),
            AgentMetric::AvgHpRemaining => a.avg_hp_remaining,
        }
    }

    /// True when a larger value means an easier challenge.
    pub fn higher_is_easier(self) -> bool {
        matches!(self, AgentMetric::WinRate | AgentMetric::AvgHpRemaining)
    }
}

impl FromStr for AgentMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentMetric::ALL
            .into_iter()
            .find(|m| m.key() == s.trim())
            .ok_or_else(|| format!("unknown agent metric {s:?}"))
    }
}

/// Reads every JSON object from an NDJSON reader; used for ad-hoc tooling.
pub fn read_records(reader: impl Read) -> Result<Vec<TrialRecord>, serde_json::Error> {
    BufReader::new(reader)
        .lines()
        .map_while(Result::ok)
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(&l))
        .collect()
}
