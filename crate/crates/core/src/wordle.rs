//! Wordle rules: words, feedback scoring, puzzle progression and word lists.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const WORD_LEN: usize = 5;

/// Default guess cap. The original game allows 6; trials raise it so weak
/// agents still produce a graded guess count.
pub const DEFAULT_GUESS_CAP: usize = 12;

/// Number of distinct feedback patterns (3^5).
pub const PATTERN_COUNT: usize = 243;

const DEFAULT_ANSWERS: &str = include_str!("../data/answers.txt");
const DEFAULT_ALLOWED: &str = include_str!("../data/allowed.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("expected {WORD_LEN} letters, got {0}")]
    WrongLength(usize),
    #[error("non-alphabetic character {0:?}")]
    NonAlphabetic(char),
}

/// A five-letter word, stored as uppercase ASCII.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word([u8; WORD_LEN]);

impl Word {
    pub fn parse(text: &str) -> Result<Self, WordError> {
        let text = text.trim();
        let count = text.chars().count();
        if count != WORD_LEN {
            return Err(WordError::WrongLength(count));
        }
        let mut letters = [0u8; WORD_LEN];
        for (slot, ch) in letters.iter_mut().zip(text.chars()) {
            if !ch.is_ascii_alphabetic() {
                return Err(WordError::NonAlphabetic(ch));
            }
            *slot = ch.to_ascii_uppercase() as u8;
        }
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[u8; WORD_LEN] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // Always ASCII uppercase by construction.
        std::str::from_utf8(&self.0).expect("ascii word")
    }

    /// Renders the word as an explicit letter list, e.g. `[A, P, P, L, E]`.
    pub fn bracketed(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|b| (*b as char).to_string()).collect();
        format!("[{}]", parts.join(", "))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.as_str())
    }
}

impl FromStr for Word {
    type Err = WordError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word::parse(s)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Word::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Gray,
    Yellow,
    Green,
}

impl Verdict {
    fn digit(self) -> u8 {
        match self {
            Verdict::Gray => 0,
            Verdict::Yellow => 1,
            Verdict::Green => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Gray => "gray",
            Verdict::Yellow => "yellow",
            Verdict::Green => "green",
        }
    }
}

/// Per-letter verdicts for one guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeedbackPattern(pub [Verdict; WORD_LEN]);

impl FeedbackPattern {
    pub const ALL_GREEN: FeedbackPattern = FeedbackPattern([Verdict::Green; WORD_LEN]);

    pub fn is_solved(&self) -> bool {
        *self == Self::ALL_GREEN
    }

    /// Base-3 code in `0..PATTERN_COUNT`, first letter most significant.
    pub fn code(&self) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, v| acc * 3 + v.digit() as usize)
    }

    /// Compact form such as `GYY..` (G green, Y yellow, `.` gray).
    pub fn compact(&self) -> String {
        self.0
            .iter()
            .map(|v| match v {
                Verdict::Green => 'G',
                Verdict::Yellow => 'Y',
                Verdict::Gray => '.',
            })
            .collect()
    }

    pub fn from_compact(text: &str) -> Option<Self> {
        let chars: Vec<char> = text.chars().collect();
        if chars.len() != WORD_LEN {
            return None;
        }
        let mut cells = [Verdict::Gray; WORD_LEN];
        for (cell, ch) in cells.iter_mut().zip(chars) {
            *cell = match ch.to_ascii_uppercase() {
                'G' => Verdict::Green,
                'Y' => Verdict::Yellow,
                '.' | 'X' | 'B' | '-' => Verdict::Gray,
                _ => return None,
            };
        }
        Some(FeedbackPattern(cells))
    }
}

/// Scores `guess` against `answer`.
///
/// Greens are assigned first and consume one count of their letter from the
/// answer; remaining positions are then scanned left to right and marked
/// yellow while an unconsumed count of that letter is left.
pub fn score_guess(answer: Word, guess: Word) -> FeedbackPattern {
    let answer = answer.letters();
    let guess = guess.letters();
    let mut remaining = [0u8; 26];
    let mut cells = [Verdict::Gray; WORD_LEN];
    for i in 0..WORD_LEN {
        if guess[i] == answer[i] {
            cells[i] = Verdict::Green;
        } else {
            remaining[(answer[i] - b'A') as usize] += 1;
        }
    }
    for i in 0..WORD_LEN {
        if cells[i] == Verdict::Green {
            continue;
        }
        let slot = &mut remaining[(guess[i] - b'A') as usize];
        if *slot > 0 {
            *slot -= 1;
            cells[i] = Verdict::Yellow;
        }
    }
    FeedbackPattern(cells)
}

/// Same as [`score_guess`] but returns only the base-3 pattern code.
pub fn score_code(answer: Word, guess: Word) -> u8 {
    let answer = answer.letters();
    let guess = guess.letters();
    let mut remaining = [0u8; 26];
    let mut green = [false; WORD_LEN];
    for i in 0..WORD_LEN {
        if guess[i] == answer[i] {
            green[i] = true;
        } else {
            remaining[(answer[i] - b'A') as usize] += 1;
        }
    }
    let mut code = 0u8;
    for i in 0..WORD_LEN {
        let digit = if green[i] {
            2
        } else {
            let slot = &mut remaining[(guess[i] - b'A') as usize];
            if *slot > 0 {
                *slot -= 1;
                1
            } else {
                0
            }
        };
        code = code * 3 + digit;
    }
    code
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PuzzleStatus {
    InProgress,
    Solved,
    Failed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuessError {
    #[error("guess rejected: {0}")]
    Rejected(String),
    #[error("game is over")]
    GameOver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleState {
    answer: Word,
    history: Vec<(Word, FeedbackPattern)>,
    guess_cap: usize,
    status: PuzzleStatus,
}

impl PuzzleState {
    pub fn new(answer: Word, guess_cap: usize) -> Self {
        assert!(guess_cap > 0, "guess cap must be positive");
        PuzzleState {
            answer,
            history: Vec::new(),
            guess_cap,
            status: PuzzleStatus::InProgress,
        }
    }

    pub fn answer(&self) -> Word {
        self.answer
    }

    pub fn history(&self) -> &[(Word, FeedbackPattern)] {
        &self.history
    }

    pub fn guess_cap(&self) -> usize {
        self.guess_cap
    }

    pub fn status(&self) -> PuzzleStatus {
        self.status
    }

    pub fn guesses_used(&self) -> usize {
        self.history.len()
    }
}

/// Validates and scores one guess, returning the advanced state.
///
/// `guess` is raw text so malformed input is rejected here rather than at the
/// call site. On error the input state is untouched.
pub fn submit_guess(
    state: &PuzzleState,
    guess: &str,
    word_list: &WordList,
    strict: bool,
) -> Result<(PuzzleState, FeedbackPattern), GuessError> {
    if state.status != PuzzleStatus::InProgress {
        return Err(GuessError::GameOver);
    }
    let word = Word::parse(guess).map_err(|e| GuessError::Rejected(e.to_string()))?;
    if strict && !word_list.is_allowed(&word) {
        return Err(GuessError::Rejected(format!(
            "{word} is not in the word list"
        )));
    }
    let feedback = score_guess(state.answer, word);
    let mut next = state.clone();
    next.history.push((word, feedback));
    next.status = if feedback.is_solved() {
        PuzzleStatus::Solved
    } else if next.history.len() >= next.guess_cap {
        PuzzleStatus::Failed
    } else {
        PuzzleStatus::InProgress
    };
    Ok((next, feedback))
}

#[derive(Debug, Error)]
pub enum WordListError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

/// Allowed guesses and possible answers, both sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    allowed: Vec<Word>,
    answers: Vec<Word>,
    allowed_set: HashSet<Word>,
}

impl WordList {
    pub fn new(
        allowed: impl IntoIterator<Item = Word>,
        answers: impl IntoIterator<Item = Word>,
    ) -> Result<Self, String> {
        let answers: BTreeSet<Word> = answers.into_iter().collect();
        let allowed: BTreeSet<Word> = allowed.into_iter().collect();
        if answers.is_empty() || allowed.is_empty() {
            return Err("word lists must be non-empty".into());
        }
        if let Some(missing) = answers.iter().find(|w| !allowed.contains(w)) {
            return Err(format!("answer {missing} is not in the allowed list"));
        }
        Ok(WordList {
            allowed_set: allowed.iter().copied().collect(),
            allowed: allowed.into_iter().collect(),
            answers: answers.into_iter().collect(),
        })
    }

    /// The bundled lists: 2,315 answers and 12,972 allowed guesses.
    pub fn default_lists() -> Self {
        let answers = parse_words("<bundled answers>", DEFAULT_ANSWERS).expect("bundled answers");
        let allowed = parse_words("<bundled allowed>", DEFAULT_ALLOWED).expect("bundled allowed");
        WordList::new(allowed, answers).expect("bundled lists are consistent")
    }

    pub fn allowed(&self) -> &[Word] {
        &self.allowed
    }

    pub fn answers(&self) -> &[Word] {
        &self.answers
    }

    pub fn is_allowed(&self, word: &Word) -> bool {
        self.allowed_set.contains(word)
    }

    /// Replaces the answer list, keeping the allowed list.
    pub fn with_answers(&self, answers: Vec<Word>) -> Result<Self, String> {
        WordList::new(self.allowed.iter().copied(), answers)
    }

    /// Stable content hash used for solver caching and run provenance.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.allowed {
            hasher.update(w.letters());
        }
        hasher.update(b"|");
        for w in &self.answers {
            hasher.update(w.letters());
        }
        hex::encode(hasher.finalize())
    }
}

fn parse_words(path: &str, text: &str) -> Result<Vec<Word>, WordListError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let word = Word::parse(line).map_err(|e| WordListError::Format {
            path: path.to_string(),
            line: idx + 1,
            message: format!("{line:?}: {e}"),
        })?;
        out.push(word);
    }
    Ok(out)
}

fn read_words(path: &Path) -> Result<Vec<Word>, WordListError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| WordListError::Io {
        path: display.clone(),
        source,
    })?;
    parse_words(&display, &text)
}

/// Loads a word list file. With no separate answers file, every allowed
/// word is also a possible answer.
pub fn load_word_list(
    allowed_path: &Path,
    answers_path: Option<&Path>,
) -> Result<WordList, WordListError> {
    let allowed = read_words(allowed_path)?;
    let answers = match answers_path {
        Some(p) => read_words(p)?,
        None => allowed.clone(),
    };
    if allowed.is_empty() {
        return Err(WordListError::Format {
            path: allowed_path.display().to_string(),
            line: 0,
            message: "no words".into(),
        });
    }
    let allowed_set: HashSet<Word> = allowed.iter().copied().collect();
    if let Some(p) = answers_path {
        let text = std::fs::read_to_string(p).map_err(|source| WordListError::Io {
            path: p.display().to_string(),
            source,
        })?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let word = Word::parse(line).expect("validated above");
            if !allowed_set.contains(&word) {
                return Err(WordListError::Format {
                    path: p.display().to_string(),
                    line: idx + 1,
                    message: format!("answer {word} is missing from the allowed list"),
                });
            }
        }
    }
    WordList::new(allowed, answers).map_err(|message| WordListError::Format {
        path: answers_path.unwrap_or(allowed_path).display().to_string(),
        line: 0,
        message,
    })
}

/// Loads an answers file against the bundled allowed list, adding any
/// answers it lacks to the allowed set.
pub fn load_answers_with_default_allowed(path: &Path) -> Result<WordList, WordListError> {
    let answers = read_words(path)?;
    if answers.is_empty() {
        return Err(WordListError::Format {
            path: path.display().to_string(),
            line: 0,
            message: "no words".into(),
        });
    }
    let base = WordList::default_lists();
    let allowed: Vec<Word> = base
        .allowed()
        .iter()
        .copied()
        .chain(answers.iter().copied())
        .collect();
    WordList::new(allowed, answers).map_err(|message| WordListError::Format {
        path: path.display().to_string(),
        line: 0,
        message,
    })
}
