//! Newline-delimited JSON over stdio, so external games can run as
//! subprocesses. See `PROTOCOL.md` for the message schemas.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::agent::{Agent, AgentError, Observation};
use crate::game::{Game, GameOutcome};

pub const PROTOCOL_VERSION: u32 = 1;
const STDERR_LIMIT: usize = 64 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HelloPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub challenge_id: String,
    pub turn: u64,
    pub state_text: String,
    #[serde(default)]
    pub structured_state: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_actions: Option<Vec<String>>,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPayload {
    pub action_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultOutcome {
    Win,
    Loss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPayload {
    pub outcome: ResultOutcome,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    Hello(HelloPayload),
    State(StatePayload),
    Action(ActionPayload),
    Result(ResultPayload),
    Error(ErrorPayload),
}

impl ProtocolMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            ProtocolMessage::Hello(_) => "hello",
            ProtocolMessage::State(_) => "state",
            ProtocolMessage::Action(_) => "action",
            ProtocolMessage::Result(_) => "result",
            ProtocolMessage::Error(_) => "error",
        }
    }

    pub fn action(text: impl Into<String>) -> Self {
        ProtocolMessage::Action(ActionPayload {
            action_text: text.into(),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("schema error: {message} in line {line:?}")]
    Schema { line: String, message: String },
    #[error("no hello from the game within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u64 },
    #[error("turn limit of {limit} exceeded")]
    TurnLimitExceeded {
        limit: usize,
        last_metrics: BTreeMap<String, f64>,
    },
    #[error("wall-clock limit of {0:?} exceeded")]
    WallClock(Duration),
    #[error("game subprocess exited unexpectedly ({status}); stderr: {stderr}")]
    SubprocessCrash { status: String, stderr: String },
    #[error("could not launch game: {0}")]
    Spawn(String),
    #[error("io: {0}")]
    Io(String),
    #[error("game reported a fatal error: {0}")]
    Game(String),
    #[error("agent: {0}")]
    Agent(#[from] AgentError),
}

impl ProtocolError {
    /// Short flag recorded on the trial.
    pub fn flag(&self) -> &'static str {
        match self {
            ProtocolError::Schema { .. } => "schema_error",
            ProtocolError::HandshakeTimeout(_) => "handshake_timeout",
            ProtocolError::VersionMismatch { .. } => "version_mismatch",
            ProtocolError::TurnLimitExceeded { .. } => "turn_limit",
            ProtocolError::WallClock(_) => "wall_clock",
            ProtocolError::SubprocessCrash { .. } => "subprocess_crash",
            ProtocolError::Spawn(_) => "spawn_error",
            ProtocolError::Io(_) => "io_error",
            ProtocolError::Game(_) => "game_error",
            ProtocolError::Agent(_) => "protocol_failure",
        }
    }
}

/// One compact JSON object terminated by a newline.
pub fn encode(msg: &ProtocolMessage) -> String {
    let payload = match msg {
        ProtocolMessage::Hello(p) => serde_json::to_value(p),
        ProtocolMessage::State(p) => serde_json::to_value(p),
        ProtocolMessage::Action(p) => serde_json::to_value(p),
        ProtocolMessage::Result(p) => serde_json::to_value(p),
        ProtocolMessage::Error(p) => serde_json::to_value(p),
    }
    .expect("payloads serialize");
    let mut line = json!({
        "type": msg.type_name(),
        "protocol_version": PROTOCOL_VERSION,
        "payload": payload,
    })
    .to_string();
    line.push('\n');
    line
}

/// Parses and validates one line. Unknown extra fields are ignored.
pub fn decode(line: &str) -> Result<ProtocolMessage, ProtocolError> {
    let schema = |message: String| ProtocolError::Schema {
        line: line.trim_end().to_string(),
        message,
    };
    let value: Value = serde_json::from_str(line.trim()).map_err(|e| schema(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema("message is not a JSON object".into()))?;
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("missing field `type`".into()))?;
    let version = obj
        .get("protocol_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| schema("missing field `protocol_version`".into()))?;
    if version != PROTOCOL_VERSION as u64 {
        return Err(ProtocolError::VersionMismatch {
            expected: PROTOCOL_VERSION,
            got: version,
        });
    }
    let payload = obj
        .get("payload")
        .cloned()
        .ok_or_else(|| schema("missing field `payload`".into()))?;
    fn de<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, String> {
        serde_json::from_value(v).map_err(|e| e.to_string())
    }
    let msg = match kind {
        "hello" => de(payload).map(ProtocolMessage::Hello),
        "state" => de(payload).map(ProtocolMessage::State),
        "action" => de(payload).map(ProtocolMessage::Action),
        "result" => de(payload).map(ProtocolMessage::Result),
        "error" => de(payload).map(ProtocolMessage::Error),
        other => Err(format!("unknown message type {other:?}")),
    };
    msg.map_err(schema)
}

/// How to launch an external game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl ExternalCommand {
    /// Splits a command line on whitespace, honouring double quotes.
    pub fn parse(line: &str) -> Option<ExternalCommand> {
        let mut parts = Vec::new();
        let mut cur = String::new();
        let mut quoted = false;
        let mut any = false;
        for ch in line.chars() {
            match ch {
                '"' => {
                    quoted = !quoted;
                    any = true;
                }
                c if c.is_whitespace() && !quoted => {
                    if any {
                        parts.push(std::mem::take(&mut cur));
                        any = false;
                    }
                }
                c => {
                    cur.push(c);
                    any = true;
                }
            }
        }
        if any {
            parts.push(cur);
        }
        let mut it = parts.into_iter();
        Some(ExternalCommand {
            program: it.next()?,
            args: it.collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLimits {
    pub max_turns: usize,
    pub wall_clock: Duration,
    pub handshake_timeout: Duration,
}

impl Default for ExternalLimits {
    fn default() -> Self {
        ExternalLimits {
            max_turns: 1_000,
            wall_clock: Duration::from_secs(600),
            handshake_timeout: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRun {
    pub game_id: String,
    pub outcome: GameOutcome,
    pub turns: usize,
    pub stderr: String,
}

/// Kills and reaps the child on every exit path.
struct ChildGuard {
    child: Child,
}

impl ChildGuard {
    fn status(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            Ok(None) => "still running".into(),
            Err(e) => e.to_string(),
        }
    }

    fn wait_briefly(&mut self, timeout: Duration) {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
    }
}

impl Drop for ChildGuard {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

fn spawn_line_reader(stream: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let reader = BufReader::new(stream);
        for line in reader.lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

fn spawn_stderr_collector(stream: impl Read + Send + 'static) -> Arc<Mutex<String>> {
    let buf = Arc::new(Mutex::new(String::new()));
    let sink = buf.clone();
    thread::spawn(move || {
        let reader = BufReader::new(stream);
        for line in reader.lines().map_while(Result::ok) {
            let mut b = sink.lock().expect("stderr buffer");
            if b.len() < STDERR_LIMIT {
                b.push_str(&line);
                b.push('\n');
            }
        }
    });
    buf
}

fn send(stdin: &mut ChildStdin, msg: &ProtocolMessage) -> Result<(), ProtocolError> {
    stdin
        .write_all(encode(msg).as_bytes())
        .and_then(|_| stdin.flush())
        .map_err(|e| ProtocolError::Io(e.to_string()))
}

/// Runs one challenge in an external game subprocess.
///
/// The game is authoritative for legality and termination; the harness only
/// relays states to the agent and actions back, strictly one at a time.
pub fn run_external_challenge(
    command: &ExternalCommand,
    challenge_id: &str,
    seed: u64,
    agent: &mut dyn Agent,
    limits: ExternalLimits,
) -> Result<ExternalRun, ProtocolError> {
    let child = Command::new(&command.program)
        .args(&command.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ProtocolError::Spawn(format!("{}: {e}", command.program)))?;
    let mut guard = ChildGuard { child };
    let mut stdin = guard.child.stdin.take().expect("piped stdin");
    let lines = spawn_line_reader(guard.child.stdout.take().expect("piped stdout"));
    let stderr = spawn_stderr_collector(guard.child.stderr.take().expect("piped stderr"));
    let started = Instant::now();

    let crash = |guard: &mut ChildGuard| {
        guard.wait_briefly(Duration::from_millis(200));
        ProtocolError::SubprocessCrash {
            status: guard.status(),
            stderr: stderr.lock().expect("stderr buffer").clone(),
        }
    };

    send(
        &mut stdin,
        &ProtocolMessage::Hello(HelloPayload {
            challenge_id: Some(challenge_id.to_string()),
            seed: Some(seed),
            game_id: None,
        }),
    )
    .map_err(|_| crash(&mut guard))?;

    let game_id = match lines.recv_timeout(limits.handshake_timeout) {
        Ok(Ok(line)) => match decode(&line)? {
            ProtocolMessage::Hello(h) => h.game_id.unwrap_or_else(|| "external".into()),
            other => {
                return Err(ProtocolError::Schema {
                    line,
                    message: format!("expected hello, got {}", other.type_name()),
                })
            }
        },
        Ok(Err(e)) => return Err(ProtocolError::Io(e.to_string())),
        Err(RecvTimeoutError::Timeout) => {
            return Err(ProtocolError::HandshakeTimeout(limits.handshake_timeout))
        }
        Err(RecvTimeoutError::Disconnected) => return Err(crash(&mut guard)),
    };

    let mut turns = 0usize;
    let mut terminal = false;
    let mut last_metrics = BTreeMap::new();
    loop {
        let remaining = limits
            .wall_clock
            .checked_sub(started.elapsed())
            .ok_or(ProtocolError::WallClock(limits.wall_clock))?;
        let line = match lines.recv_timeout(remaining) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(ProtocolError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                return Err(ProtocolError::WallClock(limits.wall_clock))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(crash(&mut guard)),
        };
        if line.trim().is_empty() {
            continue;
        }
        match decode(&line)? {
            ProtocolMessage::State(state) => {
                if terminal {
                    return Err(ProtocolError::Schema {
                        line,
                        message: "state after a terminal state".into(),
                    });
                }
                if let Some(m) = &state.metrics {
                    last_metrics = m.clone();
                }
                if state.terminal {
                    terminal = true;
                    continue;
                }
                if turns >= limits.max_turns {
                    return Err(ProtocolError::TurnLimitExceeded {
                        limit: limits.max_turns,
                        last_metrics,
                    });
                }
                let obs = Observation {
                    game_id: game_id.clone(),
                    turn_index: state.turn as usize,
                    state_text: state.state_text,
                    structured_state: state.structured_state,
                    legal_actions: state.legal_actions,
                };
                let action = agent.act(&obs)?;
                turns += 1;
                send(&mut stdin, &ProtocolMessage::action(action.parsed()))
                    .map_err(|_| crash(&mut guard))?;
            }
            ProtocolMessage::Result(result) => {
                drop(stdin);
                guard.wait_briefly(Duration::from_millis(500));
                return Ok(ExternalRun {
                    game_id,
                    outcome: GameOutcome {
                        won: result.outcome == ResultOutcome::Win,
                        metrics: result.metrics,
                        flags: result.flags,
                    },
                    turns,
                    stderr: stderr.lock().expect("stderr buffer").clone(),
                });
            }
            // Rejection notes; the next state carries the consequences.
            ProtocolMessage::Error(e) => {
                let mut b = stderr.lock().expect("stderr buffer");
                if b.len() < STDERR_LIMIT {
                    b.push_str(&format!("[game error] {}\n", e.message));
                }
            }
            other => {
                return Err(ProtocolError::Schema {
                    line,
                    message: format!("unexpected {} message from game", other.type_name()),
                })
            }
        }
    }
}

/// Game side of the protocol: waits for hello, builds the game from it and
/// serves states until the game ends or the input closes.
pub fn serve_game<R, W, F>(input: R, mut output: W, make_game: F) -> Result<(), ProtocolError>
where
    R: BufRead,
    W: Write,
    F: FnOnce(&HelloPayload) -> Result<Box<dyn Game>, String>,
{
    let io = |e: std::io::Error| ProtocolError::Io(e.to_string());
    let mut lines = input.lines();
    let mut next_message = || -> Result<Option<ProtocolMessage>, ProtocolError> {
        for line in lines.by_ref() {
            let line = line.map_err(io)?;
            if !line.trim().is_empty() {
                return decode(&line).map(Some);
            }
        }
        Ok(None)
    };
    let hello = match next_message()? {
        Some(ProtocolMessage::Hello(h)) => h,
        Some(other) => {
            return Err(ProtocolError::Schema {
                line: encode(&other),
                message: "expected hello".into(),
            })
        }
        None => return Ok(()),
    };
    let mut write = |msg: ProtocolMessage| -> Result<(), ProtocolError> {
        output.write_all(encode(&msg).as_bytes()).map_err(io)?;
        output.flush().map_err(io)
    };
    let mut game = match make_game(&hello) {
        Ok(g) => g,
        Err(e) => {
            write(ProtocolMessage::Error(ErrorPayload { message: e.clone() }))?;
            return Err(ProtocolError::Game(e));
        }
    };
    let challenge_id = hello.challenge_id.clone().unwrap_or_default();
    write(ProtocolMessage::Hello(HelloPayload {
        challenge_id: hello.challenge_id.clone(),
        seed: None,
        game_id: Some(game.game_id().to_string()),
    }))?;

    let mut actions = 0usize;
    loop {
        let forced = if game.outcome().is_none() && actions >= game.max_actions() {
            Some(game.forfeit("action_limit"))
        } else {
            None
        };
        let outcome = forced.or_else(|| game.outcome());
        let obs = game.observe();
        write(ProtocolMessage::State(StatePayload {
            challenge_id: challenge_id.clone(),
            turn: obs.turn_index as u64,
            state_text: obs.state_text,
            structured_state: obs.structured_state,
            legal_actions: if outcome.is_some() {
                None
            } else {
                obs.legal_actions
            },
            terminal: outcome.is_some(),
            metrics: Some(game.live_metrics()),
        }))?;
        if let Some(o) = outcome {
            return write(ProtocolMessage::Result(ResultPayload {
                outcome: if o.won {
                    ResultOutcome::Win
                } else {
                    ResultOutcome::Loss
                },
                metrics: o.metrics,
                flags: o.flags,
            }));
        }
        match next_message()? {
            Some(ProtocolMessage::Action(a)) => {
                actions += 1;
                if let Err(e) = game.apply(&a.action_text) {
                    write(ProtocolMessage::Error(ErrorPayload { message: e }))?;
                }
            }
            Some(other) => {
                return Err(ProtocolError::Schema {
                    line: encode(&other),
                    message: "expected action".into(),
                })
            }
            None => return Ok(()),
        }
    }
}
