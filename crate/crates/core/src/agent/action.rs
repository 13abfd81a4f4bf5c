//! Canonical actions and the final-line answer markers agents reply with.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wordle::Word;

pub const WORDLE: &str = "wordle";
pub const BATTLE: &str = "battle";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameAction {
    Guess {
        word: Word,
    },
    Play {
        card: String,
        target: Option<String>,
    },
    EndTurn,
    Text {
        text: String,
    },
}

impl GameAction {
    /// The canonical string the game consumes, e.g. `CRANE`,
    /// `PLAY Bash TARGET Acid Slime` or `END TURN`.
    pub fn canonical(&self) -> String {
        match self {
            GameAction::Guess { word } => word.to_string(),
            GameAction::Play {
                card,
                target: Some(t),
            } => format!("PLAY {card} TARGET {t}"),
            GameAction::Play { card, target: None } => format!("PLAY {card}"),
            GameAction::EndTurn => "END TURN".to_string(),
            GameAction::Text { text } => text.clone(),
        }
    }

    /// Inverse of [`GameAction::canonical`] for the given game.
    pub fn from_canonical(game_id: &str, text: &str) -> Result<GameAction, ParseFailure> {
        let text = text.trim();
        match game_id {
            WORDLE => Word::parse(text)
                .map(|word| GameAction::Guess { word })
                .map_err(|e| ParseFailure::MalformedList(e.to_string())),
            BATTLE => {
                let re = regex!(r"(?i)^PLAY\s+(.+?)(?:\s+TARGET\s+(.+))?$");
                if regex!(r"(?i)^END\s+TURN$").is_match(text) {
                    Ok(GameAction::EndTurn)
                } else if let Some(c) = re.captures(text) {
                    Ok(GameAction::Play {
                        card: c[1].trim().to_string(),
                        target: c.get(2).map(|m| m.as_str().trim().to_string()),
                    })
                } else {
                    Err(ParseFailure::NoMarker)
                }
            }
            _ => Ok(GameAction::Text {
                text: text.to_string(),
            }),
        }
    }
}

impl fmt::Display for GameAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    #[error("no answer marker found")]
    NoMarker,
    #[error("malformed letter list: {0}")]
    MalformedList(String),
    #[error("expected 5 letters, got {0}")]
    WrongLength(usize),
    #[error("empty action")]
    Empty,
}

/// The full agent response together with the action extracted from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub raw_text: String,
    pub action: GameAction,
}

impl AgentAction {
    pub fn from_action(game_id: &str, action: GameAction) -> Self {
        AgentAction {
            raw_text: format_action(&action, game_id),
            action,
        }
    }

    pub fn parsed(&self) -> String {
        self.action.canonical()
    }
}

/// Renders an action in the reply format the prompt asks for.
pub fn format_action(action: &GameAction, game_id: &str) -> String {
    match action {
        GameAction::Guess { word } => format!("GUESS: {}", word.bracketed()),
        GameAction::Play {
            card,
            target: Some(t),
        } => format!("PLAY: {card} | TARGET: {t}"),
        GameAction::Play { card, target: None } => format!("PLAY: {card}"),
        GameAction::EndTurn => "END TURN".to_string(),
        GameAction::Text { text } if game_id == BATTLE || game_id == WORDLE => text.clone(),
        GameAction::Text { text } => format!("ACTION: {text}"),
    }
}

/// Extracts the action from the last line carrying the game's answer marker.
pub fn parse_action(raw: &str, game_id: &str) -> Result<AgentAction, ParseFailure> {
    let action = match game_id {
        WORDLE => parse_guess(raw)?,
        BATTLE => parse_battle(raw)?,
        _ => parse_generic(raw)?,
    };
    Ok(AgentAction {
        raw_text: raw.to_string(),
        action,
    })
}

fn clean(line: &str) -> String {
    // Markdown emphasis around markers is common in model output.
    line.replace(['*', '`'], "").trim().to_string()
}

fn parse_guess(raw: &str) -> Result<GameAction, ParseFailure> {
    let marker = regex!(r"(?i)\bguess\s*:\s*(.*)$");
    let rest = raw
        .lines()
        .map(clean)
        .filter_map(|l| marker.captures(&l).map(|c| c[1].trim().to_string()))
        .next_back()
        .ok_or(ParseFailure::NoMarker)?;
    let list = regex!(r"^\[([^\[\]]*)\]\s*\.?$");
    let inner = list
        .captures(&rest)
        .ok_or_else(|| ParseFailure::MalformedList(rest.clone()))?[1]
        .to_string();
    let mut letters = String::new();
    let mut count = 0;
    for part in inner.split(',') {
        let part = part.trim().trim_matches(|c| c == '"' || c == '\'');
        if part.is_empty() && inner.trim().is_empty() {
            break;
        }
        let mut chars = part.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_alphabetic() => {
                letters.push(c.to_ascii_uppercase());
                count += 1;
            }
            _ => return Err(ParseFailure::MalformedList(rest.clone())),
        }
    }
    if count != 5 {
        return Err(ParseFailure::WrongLength(count));
    }
    let word = Word::parse(&letters).map_err(|e| ParseFailure::MalformedList(e.to_string()))?;
    Ok(GameAction::Guess { word })
}

fn parse_battle(raw: &str) -> Result<GameAction, ParseFailure> {
    let play = regex!(r"(?i)^play\s*:\s*(.+?)\s*(?:\|\s*target\s*:\s*(.*?))?\s*$");
    let end = regex!(r"(?i)^end\s+turn\.?$");
    for line in raw.lines().rev().map(clean) {
        if end.is_match(&line) {
            return Ok(GameAction::EndTurn);
        }
        if let Some(c) = play.captures(&line) {
            let card = c[1].trim().to_string();
            if card.is_empty() {
                return Err(ParseFailure::Empty);
            }
            let target = c
                .get(2)
                .map(|m| m.as_str().trim().to_string())
                .filter(|t| !t.is_empty());
            return Ok(GameAction::Play { card, target });
        }
    }
    Err(ParseFailure::NoMarker)
}

fn parse_generic(raw: &str) -> Result<GameAction, ParseFailure> {
    let marker = regex!(r"(?i)^action\s*:\s*(.*)$");
    let text = raw
        .lines()
        .map(clean)
        .filter_map(|l| marker.captures(&l).map(|c| c[1].trim().to_string()))
        .next_back()
        .ok_or(ParseFailure::NoMarker)?;
    if text.is_empty() {
        return Err(ParseFailure::Empty);
    }
    Ok(GameAction::Text { text })
}
