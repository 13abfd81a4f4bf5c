//! The game side of the agent loop: observations out, canonical actions in.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agent::action::WORDLE;
use crate::agent::{Agent, AgentError, Observation};
use crate::wordle::{submit_guess, GuessError, PuzzleState, PuzzleStatus, Word, WordList};

/// Final result of one challenge as reported by the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub won: bool,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

pub trait Game {
    fn game_id(&self) -> &str;

    fn observe(&self) -> Observation;

    /// Applies one canonical action. Rejected actions are reported back and
    /// surfaced in the next observation; they never end the game by themselves.
    fn apply(&mut self, action: &str) -> Result<(), String>;

    /// `Some` once the challenge is completed or failed.
    fn outcome(&self) -> Option<GameOutcome>;

    /// Ends the game as a loss, tagging it with `flag`.
    fn forfeit(&mut self, flag: &str) -> GameOutcome;

    /// Per-turn difficulty indicators.
    fn live_metrics(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    /// Safety bound on actions, counting rejected ones.
    fn max_actions(&self) -> usize {
        1_000
    }
}

/// Drives `agent` against `game` until the game ends or the action bound hits.
///
/// An agent error leaves the game as it was so the caller can forfeit it.
pub fn play_game(
    game: &mut dyn Game,
    agent: &mut dyn Agent,
    max_actions: usize,
) -> Result<GameOutcome, AgentError> {
    let limit = max_actions.min(game.max_actions());
    let mut taken = 0;
    loop {
        if let Some(outcome) = game.outcome() {
            return Ok(outcome);
        }
        if taken >= limit {
            return Ok(game.forfeit("action_limit"));
        }
        let obs = game.observe();
        let action = agent.act(&obs)?;
        taken += 1;
        // Rejections are fed back through the next observation.
        let _ = game.apply(&action.parsed());
    }
}

/// One Wordle puzzle.
#[derive(Debug, Clone)]
pub struct WordleGame {
    state: PuzzleState,
    list: Arc<WordList>,
    strict: bool,
    steps: usize,
    rejected: usize,
    last_rejection: Option<String>,
    flags: Vec<String>,
    forfeited: bool,
}

impl WordleGame {
    pub fn new(answer: Word, list: Arc<WordList>, guess_cap: usize, strict: bool) -> Self {
        WordleGame {
            state: PuzzleState::new(answer, guess_cap.max(1)),
            list,
            strict,
            steps: 0,
            rejected: 0,
            last_rejection: None,
            flags: Vec::new(),
            forfeited: false,
        }
    }

    pub fn state(&self) -> &PuzzleState {
        &self.state
    }

    fn metrics(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("guesses".into(), self.state.guesses_used() as f64);
        m.insert("guess_cap".into(), self.state.guess_cap() as f64);
        m.insert("rejected_guesses".into(), self.rejected as f64);
        m
    }

    fn state_text(&self) -> String {
        let cap = self.state.guess_cap();
        let used = self.state.guesses_used();
        let mut text = String::new();
        if self.state.history().is_empty() {
            text.push_str("No guesses yet.\n");
        } else {
            text.push_str("Guess history:\n");
            for (i, (guess, fb)) in self.state.history().iter().enumerate() {
                let verdicts: Vec<String> = guess
                    .as_str()
                    .chars()
                    .zip(fb.0.iter())
                    .map(|(c, v)| format!("{c} is {}", v.name()))
                    .collect();
                text.push_str(&format!(
                    "{}. {} -> {}\n",
                    i + 1,
                    guess.bracketed(),
                    verdicts.join(", ")
                ));
            }
        }
        text.push_str(&format!(
            "\nGuesses used: {used} of {cap}. Guesses remaining: {}.\n",
            cap - used
        ));
        if let Some(r) = &self.last_rejection {
            text.push_str(&format!("\nYour previous guess was rejected: {r}\n"));
        }
        text
    }
}

impl Game for WordleGame {
    fn game_id(&self) -> &str {
        WORDLE
    }

    fn observe(&self) -> Observation {
        let history: Vec<_> = self
            .state
            .history()
            .iter()
            .map(|(g, fb)| {
                json!({
                    "guess": g.as_str().chars().map(|c| c.to_string()).collect::<Vec<_>>(),
                    "feedback": fb.compact(),
                })
            })
            .collect();
        let mut structured = serde_json::Map::new();
        structured.insert("history".into(), json!(history));
        structured.insert("guess_cap".into(), json!(self.state.guess_cap()));
        structured.insert(
            "guesses_remaining".into(),
            json!(self.state.guess_cap() - self.state.guesses_used()),
        );
        Observation {
            game_id: WORDLE.into(),
            turn_index: self.steps,
            state_text: self.state_text(),
            structured_state: structured,
            legal_actions: None,
        }
    }

    fn apply(&mut self, action: &str) -> Result<(), String> {
        self.steps += 1;
        match submit_guess(&self.state, action, &self.list, self.strict) {
            Ok((next, _)) => {
                self.state = next;
                self.last_rejection = None;
                Ok(())
            }
            Err(e) => {
                if !matches!(e, GuessError::GameOver) {
                    self.rejected += 1;
                }
                let msg = e.to_string();
                self.last_rejection = Some(msg.clone());
                Err(msg)
            }
        }
    }

    fn outcome(&self) -> Option<GameOutcome> {
        let won = match self.state.status() {
            PuzzleStatus::Solved if !self.forfeited => true,
            PuzzleStatus::InProgress if !self.forfeited => return None,
            _ => false,
        };
        Some(GameOutcome {
            won,
            metrics: self.metrics(),
            flags: self.flags.clone(),
        })
    }

    fn forfeit(&mut self, flag: &str) -> GameOutcome {
        self.forfeited = true;
        self.flags.push(flag.to_string());
        self.outcome().expect("forfeited game has an outcome")
    }

    fn live_metrics(&self) -> BTreeMap<String, f64> {
        self.metrics()
    }

    fn max_actions(&self) -> usize {
        // Rejected guesses do not count against the cap; bound them anyway.
        self.state.guess_cap() * 4 + 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{AgentAction, GameAction, Transcript};

    struct Replay(Vec<&'static str>, Transcript);

    impl Agent for Replay {
        fn act(&mut self, _obs: &Observation) -> Result<AgentAction, AgentError> {
            let w = self.0.remove(0);
            Ok(AgentAction {
                raw_text: w.into(),
                action: GameAction::Text { text: w.into() },
            })
        }

        fn transcript(&self) -> &Transcript {
            &self.1
        }
    }

    fn game(answer: &str, cap: usize) -> WordleGame {
        WordleGame::new(
            Word::parse(answer).unwrap(),
            Arc::new(WordList::default_lists()),
            cap,
            true,
        )
    }

    #[test]
    fn solved_game_reports_guess_count() {
        let mut g = game("apple", 6);
        let mut agent = Replay(vec!["CRANE", "QQQQQ", "APPLE"], Transcript::new());
        let out = play_game(&mut g, &mut agent, 100).unwrap();
        assert!(out.won);
        assert_eq!(out.metrics["guesses"], 2.0);
        assert_eq!(out.metrics["rejected_guesses"], 1.0);
    }

    #[test]
    fn observation_lists_letters_not_words() {
        let mut g = game("apple", 6);
        g.apply("CRANE").unwrap();
        let obs = g.observe();
        assert!(obs.state_text.contains("[C, R, A, N, E]"));
        assert!(!obs.state_text.contains("CRANE"));
        assert_eq!(obs.structured_state["history"][0]["feedback"], "..Y.G");
        assert_eq!(obs.structured_state["guesses_remaining"], 5);
    }

    #[test]
    fn cap_exhaustion_is_a_loss() {
        let mut g = game("apple", 2);
        let mut agent = Replay(vec!["CRANE", "SLATE"], Transcript::new());
        let out = play_game(&mut g, &mut agent, 100).unwrap();
        assert!(!out.won);
        assert_eq!(out.metrics["guesses"], 2.0);
    }

    #[test]
    fn action_limit_forfeits() {
        let mut g = game("apple", 6);
        let mut agent = Replay(vec!["QQQQQ"; 5], Transcript::new());
        let out = play_game(&mut g, &mut agent, 3).unwrap();
        assert!(!out.won);
        assert_eq!(out.flags, vec!["action_limit".to_string()]);
    }
}
