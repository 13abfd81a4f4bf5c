//! Entropy-maximizing Wordle solver used as the deterministic baseline agent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::wordle::{score_code, FeedbackPattern, Word, WordList, PATTERN_COUNT};

/// Set sizes at or below this use the candidates themselves as the guess pool.
pub const CANDIDATE_POOL_THRESHOLD: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("no candidate is consistent with the feedback history")]
    EmptyResult,
}

/// Remaining possible answers, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet(Vec<Word>);

impl CandidateSet {
    pub fn new(mut words: Vec<Word>) -> Self {
        words.sort_unstable();
        words.dedup();
        CandidateSet(words)
    }

    pub fn from_answers(list: &WordList) -> Self {
        CandidateSet(list.answers().to_vec())
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, word: &Word) -> bool {
        self.0.binary_search(word).is_ok()
    }
}

pub fn filter_candidates(
    set: &CandidateSet,
    guess: Word,
    observed: FeedbackPattern,
) -> Result<CandidateSet, SolverError> {
    let code = observed.code() as u8;
    let kept: Vec<Word> = set
        .0
        .iter()
        .copied()
        .filter(|c| score_code(*c, guess) == code)
        .collect();
    if kept.is_empty() {
        Err(SolverError::EmptyResult)
    } else {
        Ok(CandidateSet(kept))
    }
}

/// Shannon entropy, in bits, of the feedback partition `guess` induces on `set`.
pub fn entropy_of_guess(guess: Word, set: &CandidateSet) -> f64 {
    let mut counts = [0u32; PATTERN_COUNT];
    for c in &set.0 {
        counts[score_code(*c, guess) as usize] += 1;
    }
    entropy_from_counts(&mut counts, set.len())
}

fn entropy_from_counts(counts: &mut [u32; PATTERN_COUNT], total: usize) -> f64 {
    // Sorting makes equal partitions produce bit-identical sums, so ties are
    // detected exactly.
    let mut sizes: Vec<u32> = counts.iter().copied().filter(|c| *c > 0).collect();
    sizes.sort_unstable();
    let n = total as f64;
    let weighted: f64 = sizes
        .iter()
        .map(|&c| {
            let c = c as f64;
            c * c.log2()
        })
        .sum();
    (n.log2() - weighted / n).max(0.0)
}

/// Chooses the next guess for a candidate set.
pub fn next_guess(set: &CandidateSet, allowed: &WordList) -> Result<Word, SolverError> {
    if set.is_empty() {
        return Err(SolverError::EmptyResult);
    }
    if set.len() <= 2 {
        return Ok(set.0[0]);
    }
    let pool: &[Word] = if set.len() > CANDIDATE_POOL_THRESHOLD {
        allowed.allowed()
    } else {
        set.words()
    };
    let mut best: Option<(f64, bool, Word)> = None;
    let mut counts = [0u32; PATTERN_COUNT];
    for &guess in pool {
        counts.iter_mut().for_each(|c| *c = 0);
        for c in &set.0 {
            counts[score_code(*c, guess) as usize] += 1;
        }
        let h = entropy_from_counts(&mut counts, set.len());
        let is_candidate = set.contains(&guess);
        let better = match best {
            None => true,
            Some((bh, bc, bw)) => {
                h > bh || (h == bh && ((is_candidate && !bc) || (is_candidate == bc && guess < bw)))
            }
        };
        if better {
            best = Some((h, is_candidate, guess));
        }
    }
    Ok(best.expect("pool is non-empty").2)
}

fn opener_cache() -> &'static Mutex<HashMap<String, Arc<OnceLock<Word>>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<OnceLock<Word>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The opening guess for a word list, computed once per list content hash.
pub fn opening_guess(list: &WordList) -> Word {
    let cell = {
        let mut cache = opener_cache().lock().expect("opener cache poisoned");
        cache.entry(list.content_hash()).or_default().clone()
    };
    *cell.get_or_init(|| {
        next_guess(&CandidateSet::from_answers(list), list).expect("answers are non-empty")
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Solved(Vec<Word>),
    Failed(Vec<Word>),
}

impl SolveOutcome {
    pub fn guesses(&self) -> &[Word] {
        match self {
            SolveOutcome::Solved(g) | SolveOutcome::Failed(g) => g,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved(_))
    }
}

/// A solver bound to one word list, memoizing decisions by feedback history.
///
/// Because the policy is deterministic, a history of (guess, pattern) pairs
/// fully determines the next guess; the memo turns a full benchmark into one
/// walk of the decision tree.
pub struct Solver {
    list: Arc<WordList>,
    memo: Mutex<HashMap<Vec<(Word, u8)>, Word>>,
}

impl Solver {
    pub fn new(list: Arc<WordList>) -> Self {
        Solver {
            list,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn word_list(&self) -> &WordList {
        &self.list
    }

    /// Candidates consistent with a feedback history.
    pub fn candidates_for(
        &self,
        history: &[(Word, FeedbackPattern)],
    ) -> Result<CandidateSet, SolverError> {
        let mut set = CandidateSet::from_answers(&self.list);
        for (guess, fb) in history {
            set = filter_candidates(&set, *guess, *fb)?;
        }
        Ok(set)
    }

    pub fn guess_for_history(
        &self,
        history: &[(Word, FeedbackPattern)],
    ) -> Result<Word, SolverError> {
        if history.is_empty() {
            return Ok(opening_guess(&self.list));
        }
        let key: Vec<(Word, u8)> = history.iter().map(|(w, f)| (*w, f.code() as u8)).collect();
        if let Some(w) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(*w);
        }
        let set = self.candidates_for(history)?;
        let guess = next_guess(&set, &self.list)?;
        self.memo.lock().expect("memo poisoned").insert(key, guess);
        Ok(guess)
    }

    /// Plays one puzzle to completion or until `cap` guesses are used.
    pub fn solve(&self, answer: Word, cap: usize) -> Result<SolveOutcome, SolverError> {
        let mut history: Vec<(Word, FeedbackPattern)> = Vec::new();
        let mut guesses = Vec::new();
        while guesses.len() < cap {
            let guess = self.guess_for_history(&history)?;
            guesses.push(guess);
            let fb = crate::wordle::score_guess(answer, guess);
            if fb.is_solved() {
                return Ok(SolveOutcome::Solved(guesses));
            }
            history.push((guess, fb));
        }
        Ok(SolveOutcome::Failed(guesses))
    }
}

/// Stand-alone convenience wrapper around [`Solver::solve`].
pub fn solve(answer: Word, list: &WordList, cap: usize) -> Result<SolveOutcome, SolverError> {
    Solver::new(Arc::new(list.clone())).solve(answer, cap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub puzzles: usize,
    pub mean_guesses: f64,
    pub win_rate_within_6: f64,
    pub win_rate_within_cap: f64,
    /// Per-answer guess count; `None` marks a failure at the cap.
    pub per_answer: Vec<(Word, Option<usize>)>,
}

/// Solves every answer in the list. Failures count as `cap` in the mean.
pub fn bench(solver: &Solver, cap: usize) -> Result<BenchSummary, SolverError> {
    let answers = solver.word_list().answers().to_vec();
    let mut per_answer = Vec::with_capacity(answers.len());
    for answer in answers {
        let outcome = solver.solve(answer, cap)?;
        let count = outcome.is_solved().then(|| outcome.guesses().len());
        per_answer.push((answer, count));
    }
    let n = per_answer.len() as f64;
    let total: usize = per_answer.iter().map(|(_, c)| c.unwrap_or(cap)).sum();
    let within = |limit: usize| {
        per_answer
            .iter()
            .filter(|(_, c)| matches!(c, Some(g) if *g <= limit))
            .count() as f64
            / n
    };
    Ok(BenchSummary {
        puzzles: per_answer.len(),
        mean_guesses: total as f64 / n,
        win_rate_within_6: within(6),
        win_rate_within_cap: within(cap),
        per_answer,
    })
}
