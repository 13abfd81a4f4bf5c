//! Deterministic, offline agents: random, scripted and solver-backed.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::action::{parse_action, GameAction, BATTLE, WORDLE};
use super::{Agent, AgentAction, AgentConfig, AgentError, Observation, Transcript};
use crate::battle::{compute_damage, Card, Combatant, Intent};
use crate::solver::{filter_candidates, CandidateSet, Solver};
use crate::wordle::{FeedbackPattern, Word, WordList};

/// Feedback history carried in a Wordle observation.
pub fn wordle_history(obs: &Observation) -> Result<Vec<(Word, FeedbackPattern)>, AgentError> {
    let bad = |what: &str| AgentError::Unsupported(format!("malformed wordle history: {what}"));
    let Some(history) = obs.structured_state.get("history") else {
        return Ok(Vec::new());
    };
    let entries = history.as_array().ok_or_else(|| bad("not a list"))?;
    entries
        .iter()
        .map(|e| {
            let letters: String = e
                .get("guess")
                .and_then(|g| g.as_array())
                .ok_or_else(|| bad("guess"))?
                .iter()
                .filter_map(|l| l.as_str())
                .collect();
            let word = Word::parse(&letters).map_err(|_| bad("guess letters"))?;
            let fb = e
                .get("feedback")
                .and_then(|f| f.as_str())
                .and_then(FeedbackPattern::from_compact)
                .ok_or_else(|| bad("feedback"))?;
            Ok((word, fb))
        })
        .collect()
}

fn observation_rng(seed: u64, obs: &Observation) -> ChaCha8Rng {
    let s = crate::seed::derive(&[
        &seed.to_le_bytes(),
        &(obs.turn_index as u64).to_le_bytes(),
        obs.state_text.as_bytes(),
    ]);
    ChaCha8Rng::seed_from_u64(s)
}

/// Picks uniformly among consistent answers (Wordle) or legal actions.
pub struct RandomAgent {
    seed: u64,
    list: Arc<WordList>,
    transcript: Transcript,
}

impl RandomAgent {
    pub fn new(seed: u64, list: Arc<WordList>) -> Self {
        RandomAgent {
            seed,
            list,
            transcript: Transcript::new(),
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, obs: &Observation) -> Result<AgentAction, AgentError> {
        let mut rng = observation_rng(self.seed, obs);
        let action = if obs.game_id == WORDLE {
            let mut set = CandidateSet::from_answers(&self.list);
            for (guess, fb) in wordle_history(obs)? {
                set = filter_candidates(&set, guess, fb)?;
            }
            let word = *set.words().choose(&mut rng).expect("non-empty candidates");
            GameAction::Guess { word }
        } else {
            let legal = obs
                .legal_actions
                .as_deref()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| {
                    AgentError::Unsupported(format!(
                        "random agent needs legal actions for {}",
                        obs.game_id
                    ))
                })?;
            let pick = legal.choose(&mut rng).expect("non-empty");
            GameAction::from_canonical(&obs.game_id, pick)
                .map_err(|e| AgentError::Unsupported(e.to_string()))?
        };
        Ok(AgentAction::from_action(&obs.game_id, action))
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

/// Replays a fixed script, or follows a named built-in policy.
pub struct ScriptedAgent {
    script: Vec<String>,
    policy: Option<String>,
    solver: Arc<Solver>,
    calls: usize,
    transcript: Transcript,
}

impl ScriptedAgent {
    pub fn new(config: &AgentConfig, solver: Arc<Solver>) -> Self {
        ScriptedAgent {
            script: config.script.clone(),
            policy: config.policy.clone(),
            solver,
            calls: 0,
            transcript: Transcript::new(),
        }
    }
}

/// Resolves `action` against the legal list; untargeted plays match the
/// first targeted legal play of the same card.
fn match_legal(action: &GameAction, legal: &[String], game_id: &str) -> Option<GameAction> {
    let wanted = action.canonical();
    if let Some(hit) = legal.iter().find(|l| l.eq_ignore_ascii_case(&wanted)) {
        return GameAction::from_canonical(game_id, hit).ok();
    }
    if let GameAction::Play { card, target: None } = action {
        for l in legal {
            if let Ok(g @ GameAction::Play { .. }) = GameAction::from_canonical(game_id, l) {
                if let GameAction::Play { card: c, .. } = &g {
                    if c.eq_ignore_ascii_case(card) {
                        return Some(g);
                    }
                }
            }
        }
    }
    None
}

impl Agent for ScriptedAgent {
    fn act(&mut self, obs: &Observation) -> Result<AgentAction, AgentError> {
        if self.policy.as_deref() == Some("expert") {
            let action = match obs.game_id.as_str() {
                WORDLE => GameAction::Guess {
                    word: self.solver.guess_for_history(&wordle_history(obs)?)?,
                },
                _ => expert_battle_action(obs)?,
            };
            return Ok(AgentAction::from_action(&obs.game_id, action));
        }
        if self.script.is_empty() {
            return Err(AgentError::Config("scripted agent has no script".into()));
        }
        let entry = &self.script[self.calls % self.script.len()];
        self.calls += 1;
        let action = parse_action(entry, &obs.game_id)
            .map(|a| a.action)
            .or_else(|_| GameAction::from_canonical(&obs.game_id, entry))
            .map_err(|e| AgentError::Config(format!("bad script entry {entry:?}: {e}")))?;
        let action = match obs.legal_actions.as_deref() {
            Some(legal) if !legal.is_empty() => match match_legal(&action, legal, &obs.game_id) {
                Some(a) => a,
                // Fall back to the last legal action (END TURN in battles).
                None => GameAction::from_canonical(&obs.game_id, legal.last().expect("non-empty"))
                    .map_err(|e| AgentError::Unsupported(e.to_string()))?,
            },
            _ => action,
        };
        Ok(AgentAction::from_action(&obs.game_id, action))
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

/// Plays the solver's guess in Wordle and the expert policy in battles.
pub struct SolverAgent {
    solver: Arc<Solver>,
    transcript: Transcript,
}

impl SolverAgent {
    pub fn new(solver: Arc<Solver>) -> Self {
        SolverAgent {
            solver,
            transcript: Transcript::new(),
        }
    }
}

impl Agent for SolverAgent {
    fn act(&mut self, obs: &Observation) -> Result<AgentAction, AgentError> {
        let action = match obs.game_id.as_str() {
            WORDLE => GameAction::Guess {
                word: self.solver.guess_for_history(&wordle_history(obs)?)?,
            },
            BATTLE => expert_battle_action(obs)?,
            other => {
                return Err(AgentError::Unsupported(format!(
                    "no solver for game {other:?}"
                )))
            }
        };
        Ok(AgentAction::from_action(&obs.game_id, action))
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

#[derive(Debug, Deserialize)]
struct EnemyView {
    name: String,
    hp: u32,
    block: u32,
    strength: i32,
    vulnerable_turns: u32,
    intent: Intent,
    alive: bool,
}

#[derive(Debug, Deserialize)]
struct BattleView {
    energy: u32,
    player: Combatant,
    enemies: Vec<EnemyView>,
    hand: Vec<Card>,
}

/// A greedy hand-written policy: lethal, setup, defend, damage, end turn.
pub fn expert_battle_action(obs: &Observation) -> Result<GameAction, AgentError> {
    let view: BattleView =
        serde_json::from_value(serde_json::Value::Object(obs.structured_state.clone()))
            .map_err(|e| AgentError::Unsupported(format!("malformed battle state: {e}")))?;
    let Some(target) = view
        .enemies
        .iter()
        .filter(|e| e.alive)
        .min_by_key(|e| e.hp + e.block)
    else {
        return Ok(GameAction::EndTurn);
    };
    let legal = |g: &GameAction| match obs.legal_actions.as_deref() {
        Some(list) => list.iter().any(|l| l.eq_ignore_ascii_case(&g.canonical())),
        None => true,
    };
    let mut options: Vec<(&Card, GameAction)> = Vec::new();
    for card in &view.hand {
        if card.cost > view.energy || options.iter().any(|(c, _)| c.name == card.name) {
            continue;
        }
        let action = GameAction::Play {
            card: card.name.clone(),
            target: card.needs_target().then(|| target.name.clone()),
        };
        if legal(&action) {
            options.push((card, action));
        }
    }
    let damage = |c: &Card| {
        if c.damage == 0 {
            0
        } else {
            compute_damage(
                c.damage,
                view.player.strength,
                c.strength_multiplier,
                target.vulnerable_turns > 0,
            )
        }
    };
    let pick = |pred: &dyn Fn(&Card) -> bool, key: &dyn Fn(&Card) -> i64| {
        options
            .iter()
            .filter(|(c, _)| pred(c))
            .max_by(|(a, _), (b, _)| key(a).cmp(&key(b)).then_with(|| b.name.cmp(&a.name)))
            .map(|(_, g)| g.clone())
    };

    let lethal = target.hp + target.block;
    if let Some(g) = pick(&|c| damage(c) >= lethal, &|c| -(c.cost as i64)) {
        return Ok(g);
    }
    if let Some(g) = pick(&|c| c.grants_strength > 0, &|c| c.grants_strength as i64) {
        return Ok(g);
    }
    if target.vulnerable_turns == 0 {
        if let Some(g) = pick(&|c| c.applies_vulnerable > 0, &|c| damage(c) as i64) {
            return Ok(g);
        }
    }
    let incoming: u32 = view
        .enemies
        .iter()
        .filter(|e| e.alive)
        .map(|e| match e.intent {
            Intent::Attack(n) => compute_damage(n, e.strength, 1, view.player.vulnerable_turns > 0),
            _ => 0,
        })
        .sum();
    let unblocked = incoming.saturating_sub(view.player.block);
    if unblocked >= 6 {
        if let Some(g) = pick(&|c| c.block > 0, &|c| c.block as i64) {
            return Ok(g);
        }
    }
    if let Some(g) = pick(&|c| damage(c) > 0, &|c| {
        damage(c) as i64 * 10 - c.cost as i64
    }) {
        return Ok(g);
    }
    if unblocked > 0 {
        if let Some(g) = pick(&|c| c.block > 0, &|c| c.block as i64) {
            return Ok(g);
        }
    }
    if let Some(g) = pick(&|c| c.draw > 0, &|c| c.draw as i64) {
        return Ok(g);
    }
    Ok(GameAction::EndTurn)
}
