//! Full-list solver benchmark with values pinned from the first run.

use std::sync::Arc;

use diffprobe_core::solver::{bench, opening_guess, Solver};
use diffprobe_core::wordle::{Word, WordList};

const PINNED_OPENER: &str = "SOARE";
const PINNED_TOTAL_GUESSES: usize = 8020;
const PINNED_MAX_GUESSES: usize = 6;

#[test]
fn default_list_benchmark_is_pinned() {
    let list = Arc::new(WordList::default_lists());
    assert_eq!(opening_guess(&list).as_str(), PINNED_OPENER);

    let solver = Solver::new(list.clone());
    let summary = bench(&solver, 12).unwrap();
    assert_eq!(summary.puzzles, 2315);
    let total: usize = summary.per_answer.iter().map(|(_, c)| c.unwrap()).sum();
    assert_eq!(total, PINNED_TOTAL_GUESSES);
    assert_eq!(summary.mean_guesses, PINNED_TOTAL_GUESSES as f64 / 2315.0);
    assert!(summary.mean_guesses <= 4.1);
    assert_eq!(summary.win_rate_within_6, 1.0);
    assert_eq!(summary.win_rate_within_cap, 1.0);
    let max = summary
        .per_answer
        .iter()
        .filter_map(|(_, c)| *c)
        .max()
        .unwrap();
    assert_eq!(max, PINNED_MAX_GUESSES);

    let apple = solver.solve(Word::parse("APPLE").unwrap(), 12).unwrap();
    let path: Vec<&str> = apple.guesses().iter().map(|w| w.as_str()).collect();
    assert_eq!(path, ["SOARE", "GAULT", "AMPLE", "APPLE"]);

    // A fresh solver (empty memo) reproduces every count.
    let again = bench(&Solver::new(list), 12).unwrap();
    assert_eq!(again.per_answer, summary.per_answer);
}

#[test]
fn single_answer_list_solves_in_one() {
    let full = WordList::default_lists();
    let one = full
        .with_answers(vec![Word::parse("CRANE").unwrap()])
        .unwrap();
    let summary = bench(&Solver::new(Arc::new(one)), 12).unwrap();
    assert_eq!(summary.mean_guesses, 1.0);
}
