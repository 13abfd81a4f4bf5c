//! Agents: a uniform `act(observation)` interface over LLM-backed and
//! deterministic players.

pub mod action;
mod llm;
mod mock;
pub mod prompt;
pub mod transport;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{format_action, parse_action, AgentAction, GameAction, ParseFailure};
pub use llm::LlmAgent;
pub use mock::{expert_battle_action, RandomAgent, ScriptedAgent, SolverAgent};
pub use prompt::{build_prompt, PromptBundle};
pub use transport::{ChatMessage, Transcript, Transport, TransportError};

use crate::solver::{Solver, SolverError};
use crate::wordle::WordList;

/// What a player can perceive at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub game_id: String,
    pub turn_index: usize,
    pub state_text: String,
    #[serde(default)]
    pub structured_state: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_actions: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    ZeroShot,
    #[serde(rename = "cot")]
    CoT,
    #[serde(rename = "cot_plus")]
    CoTPlus,
    Random,
    Scripted,
    SolverBacked,
}

impl AgentKind {
    pub fn is_llm(self) -> bool {
        matches!(
            self,
            AgentKind::ZeroShot | AgentKind::CoT | AgentKind::CoTPlus
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Label used in trial records; defaults to the spec string.
    pub id: String,
    pub kind: AgentKind,
    pub model_name: String,
    pub temperature: f64,
    pub max_parse_retries: usize,
    pub seed: u64,
    pub strategy_text: Option<String>,
    /// Actions replayed by `Scripted` agents, in canonical or reply form.
    pub script: Vec<String>,
    /// Named built-in policy for `Scripted` agents (`expert`).
    pub policy: Option<String>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            id: "agent".into(),
            kind: AgentKind::Random,
            model_name: "gpt-4".into(),
            temperature: 1.0,
            max_parse_retries: 3,
            seed: 0,
            strategy_text: None,
            script: Vec::new(),
            policy: None,
        }
    }
}

impl AgentConfig {
    /// Parses a compact agent spec:
    /// `solver`, `random`, `scripted:expert`, `scripted:CRANE,SLATE`,
    /// `zs[:model]`, `cot[:model]`, `cotplus[:model]`.
    pub fn from_spec(spec: &str) -> Result<AgentConfig, AgentError> {
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h.trim(), Some(r.trim())),
            None => (spec.trim(), None),
        };
        let mut config = AgentConfig {
            id: spec.trim().to_string(),
            ..AgentConfig::default()
        };
        match head.to_ascii_lowercase().as_str() {
            "solver" | "solver_backed" => config.kind = AgentKind::SolverBacked,
            "random" => {
                config.kind = AgentKind::Random;
                if let Some(seed) = rest {
                    config.seed = seed
                        .parse()
                        .map_err(|_| AgentError::Config(format!("bad random seed {seed:?}")))?;
                }
            }
            "scripted" => {
                config.kind = AgentKind::Scripted;
                let rest = rest.filter(|r| !r.is_empty()).ok_or_else(|| {
                    AgentError::Config("scripted agents need `scripted:<policy or actions>`".into())
                })?;
                if rest.eq_ignore_ascii_case("expert") {
                    config.policy = Some("expert".into());
                } else {
                    config.script = rest.split(',').map(|s| s.trim().to_string()).collect();
                }
            }
            "zs" | "zero_shot" | "zeroshot" => config.kind = AgentKind::ZeroShot,
            "cot" => config.kind = AgentKind::CoT,
            "cotplus" | "cot_plus" | "cot+" => config.kind = AgentKind::CoTPlus,
            other => return Err(AgentError::Config(format!("unknown agent kind {other:?}"))),
        }
        if config.kind.is_llm() {
            if let Some(model) = rest.filter(|r| !r.is_empty()) {
                config.model_name = model.to_string();
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(AgentError::Config("temperature must be >= 0".into()));
        }
        if self.kind == AgentKind::CoTPlus {
            if let Some(s) = &self.strategy_text {
                if s.trim().is_empty() {
                    return Err(AgentError::Config("CoT+ strategy text is empty".into()));
                }
            }
        }
        if self.kind == AgentKind::Scripted && self.script.is_empty() && self.policy.is_none() {
            return Err(AgentError::Config("scripted agent has no script".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error("unparseable response after {attempts} attempt(s): {reason}")]
    ProtocolFailure { reason: String, attempts: usize },
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Unsupported(String),
}

pub trait Agent: Send {
    fn act(&mut self, obs: &Observation) -> Result<AgentAction, AgentError>;

    fn transcript(&self) -> &Transcript;
}

/// Shared resources agents are built from.
#[derive(Clone)]
pub struct AgentContext {
    pub word_list: Arc<WordList>,
    pub solver: Arc<Solver>,
    pub transport: Option<Arc<dyn Transport>>,
    /// Per-game prompt overrides; games without an entry use the defaults.
    pub bundles: BTreeMap<String, PromptBundle>,
}

impl AgentContext {
    pub fn new(word_list: Arc<WordList>) -> Self {
        AgentContext {
            solver: Arc::new(Solver::new(word_list.clone())),
            word_list,
            transport: None,
            bundles: BTreeMap::new(),
        }
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn bundle_for(&self, game_id: &str) -> PromptBundle {
        self.bundles
            .get(game_id)
            .cloned()
            .unwrap_or_else(|| PromptBundle::for_game(game_id))
    }
}

/// Builds a fresh agent for one trial. `trial_seed` drives every random choice.
pub fn build_agent(
    config: &AgentConfig,
    ctx: &AgentContext,
    trial_seed: u64,
) -> Result<Box<dyn Agent>, AgentError> {
    config.validate()?;
    let seed = crate::seed::mix(trial_seed, config.seed);
    Ok(match config.kind {
        AgentKind::Random => Box::new(RandomAgent::new(seed, ctx.word_list.clone())),
        AgentKind::Scripted => Box::new(ScriptedAgent::new(config, ctx.solver.clone())),
        AgentKind::SolverBacked => Box::new(SolverAgent::new(ctx.solver.clone())),
        AgentKind::ZeroShot | AgentKind::CoT | AgentKind::CoTPlus => {
            let transport = ctx.transport.clone().ok_or_else(|| {
                AgentError::Config(format!(
                    "agent {} needs an LLM endpoint but no transport is configured",
                    config.id
                ))
            })?;
            Box::new(LlmAgent::new(config.clone(), ctx.clone(), transport))
        }
    })
}
