//! Prompt bundles and message construction for the LLM agent kinds.
//!
//! The shipped bundle texts are reconstructions written for this project;
//! they are inputs, not fixed parts of the method.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::action::{format_action, GameAction, BATTLE, WORDLE};
use super::transport::{ChatMessage, Role, Transcript};
use super::{AgentConfig, AgentError, AgentKind, Observation};
use crate::wordle::Word;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub rules_text: String,
    pub io_format_text: String,
    #[serde(default)]
    pub reasoning_text: String,
    #[serde(default)]
    pub strategy_text: String,
}

impl PromptBundle {
    pub fn for_game(game_id: &str) -> PromptBundle {
        match game_id {
            WORDLE => Self::wordle(),
            BATTLE => Self::battle(),
            _ => Self::generic(),
        }
    }

    pub fn wordle() -> PromptBundle {
        PromptBundle {
            rules_text: "\
You are playing a word puzzle. There is a secret five-letter English word.
Each turn you propose one five-letter word and receive feedback for every letter position:
- green: the letter is in the secret word at this exact position.
- yellow: the letter is in the secret word but at a different position.
- gray: the letter does not appear in the secret word (or not as many times as you used it).
Repeated letters are scored left to right: exact matches are counted first, then each extra copy is yellow only while unmatched copies remain in the secret word.
Words are always written as lists of letters, for example [P, L, A, N, T], so that every position is explicit.
You win by finding the secret word before running out of guesses."
                .into(),
            io_format_text: "\
Reply with your reasoning if you like, then end your reply with one final line of exactly this form:
GUESS: [X, X, X, X, X]
where each X is one uppercase letter."
                .into(),
            reasoning_text: "\
Think step by step before you answer:
1. List the letters known to be at fixed positions (green).
2. List the letters that must appear somewhere else (yellow) and the positions they are excluded from.
3. List the letters that are ruled out (gray).
4. Propose candidate words that satisfy every constraint and check each one against all of the feedback so far.
5. Choose the candidate that best fits the constraints, or, early in the game, one that tests many new common letters."
                .into(),
            strategy_text: "\
Strategies used by experienced players:
- Open with a word that has several common, distinct letters (vowels such as a, e, o and consonants such as r, s, t, l, n).
- Never reuse a letter that has been marked gray, and keep every green letter in place.
- Move each yellow letter to a position where it has not yet been tried.
- Remember that a letter can appear twice in the secret word.
- When many words still fit, spend a guess on new letters that split the remaining words, instead of guessing them one by one."
                .into(),
        }
    }

    pub fn battle() -> PromptBundle {
        PromptBundle {
            rules_text: "\
You are playing a turn-based card battle against a boss.
Each turn you have 3 energy and a hand of 5 cards drawn from your deck. Playing a card costs its energy.
Attack damage is first absorbed by the target's block; the rest reduces its HP. Your block disappears at the start of your next turn.
Strength adds to the damage of your attacks (some cards multiply it). A vulnerable creature takes 50% more attack damage, rounded down, while vulnerable lasts.
After you end your turn, the enemy performs the intent it announced (attack, block or debuff), and you draw a new hand.
You win when every enemy reaches 0 HP and lose when your HP reaches 0."
                .into(),
            io_format_text: "\
End your reply with one final line of one of these forms:
PLAY: <card name> | TARGET: <enemy name>
PLAY: <card name>   (for cards without a target)
END TURN"
                .into(),
            reasoning_text: "\
Before choosing, analyze the situation: your HP, block and energy, each enemy's HP and intent.
Decide on a strategy for this turn, evaluate every playable card, then choose the single next card to play (or end the turn)."
                .into(),
            strategy_text: String::new(),
        }
    }

    pub fn generic() -> PromptBundle {
        PromptBundle {
            rules_text: "You are playing a game. Each turn you receive the current state and choose one action.".into(),
            io_format_text: "End your reply with one final line of the form:\nACTION: <action>".into(),
            reasoning_text: "Think step by step about the state and your options before answering.".into(),
            strategy_text: String::new(),
        }
    }
}

/// In-play words of a Wordle observation: every guess recorded in its history.
pub fn in_play_words(obs: &Observation) -> Vec<Word> {
    let mut words = BTreeSet::new();
    if let Some(history) = obs
        .structured_state
        .get("history")
        .and_then(|h| h.as_array())
    {
        for entry in history {
            if let Some(letters) = entry.get("guess").and_then(|g| g.as_array()) {
                let text: String = letters.iter().filter_map(|l| l.as_str()).collect();
                if let Ok(w) = Word::parse(&text) {
                    words.insert(w);
                }
            }
        }
    }
    words.into_iter().collect()
}

/// Matches a standalone word in any letter case.
fn word_pattern(word: &Word) -> regex::Regex {
    regex::Regex::new(&format!(r"(?i)\b{}\b", word.as_str())).expect("word pattern")
}

/// True when the hit is the reply marker `GUESS:` rather than a word in play.
fn is_marker(text: &str, start: usize, end: usize) -> bool {
    text[start..end].eq_ignore_ascii_case("GUESS") && text[end..].trim_start().starts_with(':')
}

/// Rewrites standalone occurrences of the given words, in any case, as
/// letter lists.
pub fn bracketize(text: &str, words: &[Word]) -> String {
    let mut out = text.to_string();
    for word in words {
        let re = word_pattern(word);
        let mut next = String::with_capacity(out.len());
        let mut last = 0;
        for hit in re.find_iter(&out) {
            if is_marker(&out, hit.start(), hit.end()) {
                continue;
            }
            next.push_str(&out[last..hit.start()]);
            next.push_str(&word.bracketed());
            last = hit.end();
        }
        next.push_str(&out[last..]);
        out = next;
    }
    out
}

/// Counts bare (non-list) occurrences of in-play words in a message list.
pub fn bare_word_violations(messages: &[ChatMessage], words: &[Word]) -> usize {
    let mut count = 0;
    for m in messages {
        for word in words {
            count += word_pattern(word)
                .find_iter(&m.content)
                .filter(|hit| !is_marker(&m.content, hit.start(), hit.end()))
                .count();
        }
    }
    count
}

fn render_observation(obs: &Observation) -> String {
    let mut text = obs.state_text.clone();
    if let Some(actions) = &obs.legal_actions {
        text.push_str("\n\nAvailable actions:\n");
        for a in actions {
            let line = GameAction::from_canonical(&obs.game_id, a)
                .map(|act| format_action(&act, &obs.game_id))
                .unwrap_or_else(|_| a.clone());
            text.push_str("- ");
            text.push_str(&line);
            text.push('\n');
        }
    }
    text
}

/// Assembles the messages sent for one turn.
pub fn build_prompt(
    config: &AgentConfig,
    bundle: &PromptBundle,
    obs: &Observation,
    transcript: &Transcript,
) -> Result<Vec<ChatMessage>, AgentError> {
    let mut system = format!(
        "{}\n\n{}",
        bundle.rules_text.trim(),
        bundle.io_format_text.trim()
    );
    match config.kind {
        AgentKind::CoT | AgentKind::CoTPlus if !bundle.reasoning_text.trim().is_empty() => {
            system.push_str("\n\n");
            system.push_str(bundle.reasoning_text.trim());
        }
        _ => {}
    }
    if config.kind == AgentKind::CoTPlus {
        let strategy = config
            .strategy_text
            .as_deref()
            .unwrap_or(&bundle.strategy_text);
        if strategy.trim().is_empty() {
            return Err(AgentError::Config(
                "CoT+ agents need non-empty strategy text".into(),
            ));
        }
        system.push_str("\n\n");
        system.push_str(strategy.trim());
    }

    let words = if obs.game_id == WORDLE {
        in_play_words(obs)
    } else {
        Vec::new()
    };
    let mut messages = vec![ChatMessage::system(bracketize(&system, &words))];
    for turn in transcript.turns() {
        let content = match turn.role {
            Role::System => continue,
            _ => bracketize(&turn.content, &words),
        };
        messages.push(ChatMessage {
            role: turn.role,
            content,
        });
    }
    messages.push(ChatMessage::user(bracketize(
        &render_observation(obs),
        &words,
    )));
    Ok(messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn wordle_obs(history: &[(&str, &str)]) -> Observation {
        let entries: Vec<_> = history
            .iter()
            .map(|(g, f)| {
                json!({
                    "guess": g.chars().map(|c| c.to_string()).collect::<Vec<_>>(),
                    "feedback": f,
                })
            })
            .collect();
        let mut state = serde_json::Map::new();
        state.insert("history".into(), json!(entries));
        let mut text = String::from("Guess history:\n");
        for (g, f) in history {
            text.push_str(&format!("{g} -> {f}\n"));
        }
        Observation {
            game_id: WORDLE.into(),
            turn_index: history.len(),
            state_text: text,
            structured_state: state,
            legal_actions: None,
        }
    }

    fn config(kind: AgentKind) -> AgentConfig {
        AgentConfig {
            kind,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn zero_shot_first_turn_has_rules_only() {
        let bundle = PromptBundle::wordle();
        let msgs = build_prompt(
            &config(AgentKind::ZeroShot),
            &bundle,
            &wordle_obs(&[]),
            &Transcript::new(),
        )
        .unwrap();
        assert_eq!(msgs.len(), 2);
        assert!(msgs[0].content.contains(&bundle.rules_text));
        assert!(msgs[0].content.contains("GUESS: [X, X, X, X, X]"));
        assert!(!msgs[0].content.contains(&bundle.reasoning_text));
        assert!(!msgs[0].content.contains(&bundle.strategy_text));
    }

    #[test]
    fn cot_variants_add_reasoning_and_strategy() {
        let bundle = PromptBundle::wordle();
        let obs = wordle_obs(&[]);
        let cot = build_prompt(&config(AgentKind::CoT), &bundle, &obs, &Transcript::new()).unwrap();
        assert!(cot[0].content.contains(&bundle.reasoning_text));
        assert!(!cot[0].content.contains(&bundle.strategy_text));
        let plus = build_prompt(
            &config(AgentKind::CoTPlus),
            &bundle,
            &obs,
            &Transcript::new(),
        )
        .unwrap();
        assert!(plus[0].content.contains(&bundle.strategy_text));
    }

    #[test]
    fn history_words_are_rendered_as_lists() {
        let obs = wordle_obs(&[("APPLE", "G.Y..")]);
        let mut transcript = Transcript::new();
        transcript.push(ChatMessage::user("Previous state"));
        transcript.push(ChatMessage::assistant(
            "I think APPLE fits.\nGUESS: [A, P, P, L, E]",
        ));
        let msgs = build_prompt(
            &config(AgentKind::CoT),
            &PromptBundle::wordle(),
            &obs,
            &transcript,
        )
        .unwrap();
        let all: String = msgs.iter().map(|m| m.content.as_str()).collect();
        assert!(all.contains("[A, P, P, L, E]"));
        assert!(!all.contains("APPLE"));
        assert_eq!(bare_word_violations(&msgs, &in_play_words(&obs)), 0);
    }

    #[test]
    fn violation_scanner_finds_bare_words() {
        let words = [Word::parse("CRANE").unwrap(), Word::parse("GUESS").unwrap()];
        let msgs = [ChatMessage::user("try CRANE\nGUESS: [C, R, A, N, E]")];
        assert_eq!(bare_word_violations(&msgs, &words), 1);
    }

    #[test]
    fn cot_plus_without_strategy_is_config_error() {
        let mut bundle = PromptBundle::wordle();
        bundle.strategy_text.clear();
        let mut cfg = config(AgentKind::CoTPlus);
        assert!(matches!(
            build_prompt(&cfg, &bundle, &wordle_obs(&[]), &Transcript::new()),
            Err(AgentError::Config(_))
        ));
        cfg.strategy_text = Some("  ".into());
        assert!(matches!(
            build_prompt(
                &cfg,
                &PromptBundle::wordle(),
                &wordle_obs(&[]),
                &Transcript::new()
            ),
            Err(AgentError::Config(_))
        ));
    }

    #[test]
    fn prompts_are_deterministic() {
        let obs = wordle_obs(&[("CRANE", "..Y.G"), ("SLATE", ".GG.G")]);
        let bundle = PromptBundle::wordle();
        let a = build_prompt(
            &config(AgentKind::CoTPlus),
            &bundle,
            &obs,
            &Transcript::new(),
        )
        .unwrap();
        let b = build_prompt(
            &config(AgentKind::CoTPlus),
            &bundle,
            &obs,
            &Transcript::new(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn battle_actions_are_listed_in_reply_format() {
        let obs = Observation {
            game_id: BATTLE.into(),
            turn_index: 0,
            state_text: "Energy: 3".into(),
            structured_state: serde_json::Map::new(),
            legal_actions: Some(vec!["PLAY Bash TARGET Boss".into(), "END TURN".into()]),
        };
        let msgs = build_prompt(
            &config(AgentKind::ZeroShot),
            &PromptBundle::battle(),
            &obs,
            &Transcript::new(),
        )
        .unwrap();
        assert!(msgs[1].content.contains("- PLAY: Bash | TARGET: Boss"));
        assert!(msgs[1].content.contains("- END TURN"));
    }

    #[test]
    fn bracketing_ignores_case_but_keeps_the_marker() {
        let words = [Word::parse("APPLE").unwrap(), Word::parse("GUESS").unwrap()];
        let text = "Apple and apple, then guess again.\nGUESS: [A, B, C, D, E]";
        let out = bracketize(text, &words);
        assert_eq!(
            out,
            "[A, P, P, L, E] and [A, P, P, L, E], then [G, U, E, S, S] again.\nGUESS: [A, B, C, D, E]"
        );
        assert_eq!(bare_word_violations(&[ChatMessage::user(text)], &words), 3);
        assert_eq!(bare_word_violations(&[ChatMessage::user(out)], &words), 0);
        // A colon after another word does not exempt it.
        assert_eq!(
            bare_word_violations(&[ChatMessage::user("APPLE: maybe")], &words),
            1
        );
    }
}
