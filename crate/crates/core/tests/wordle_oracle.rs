//! `score_guess` against an independent multiset-bookkeeping oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diffprobe_core::wordle::{score_code, score_guess, FeedbackPattern, Verdict, Word, WordList};

/// Greens first; then each remaining guess letter is yellow only while the
/// multiset of unmatched answer letters still holds a copy.
fn oracle(answer: &str, guess: &str) -> [char; 5] {
    let a: Vec<char> = answer.chars().collect();
    let g: Vec<char> = guess.chars().collect();
    let mut out = ['.'; 5];
    let mut pool: Vec<char> = Vec::new();
    for i in 0..5 {
        if g[i] == a[i] {
            out[i] = 'G';
        } else {
            pool.push(a[i]);
        }
    }
    for i in 0..5 {
        if out[i] == 'G' {
            continue;
        }
        if let Some(pos) = pool.iter().position(|c| *c == g[i]) {
            pool.remove(pos);
            out[i] = 'Y';
        }
    }
    out
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[u8]) -> Word {
    let s: String = (0..5)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect();
    Word::parse(&s).unwrap()
}

#[test]
fn ten_thousand_random_pairs_match() {
    let list = WordList::default_lists();
    let mut rng = ChaCha8Rng::seed_from_u64(20240607);
    // A small alphabet forces many repeated letters.
    let tight = b"AEELPS";
    for i in 0..10_000 {
        let (answer, guess) = match i % 3 {
            0 => (
                list.answers()[rng.gen_range(0..list.answers().len())],
                list.allowed()[rng.gen_range(0..list.allowed().len())],
            ),
            1 => (random_word(&mut rng, tight), random_word(&mut rng, tight)),
            _ => (
                random_word(&mut rng, b"ABCDEFGHIJKLMNOPQRSTUVWXYZ"),
                random_word(&mut rng, b"ABCDEFGHIJKLMNOPQRSTUVWXYZ"),
            ),
        };
        let expected: String = oracle(answer.as_str(), guess.as_str()).iter().collect();
        let got = score_guess(answer, guess);
        assert_eq!(got.compact(), expected, "{answer} / {guess}");
        assert_eq!(score_code(answer, guess) as usize, got.code());
    }
}

#[test]
fn worked_examples() {
    let p =
        |a: &str, g: &str| score_guess(Word::parse(a).unwrap(), Word::parse(g).unwrap()).compact();
    assert_eq!(p("APPLE", "PAPER"), "YYGY.");
    assert_eq!(p("ABBEY", "BABES"), "YYGG.");
    assert_eq!(p("CRANE", "CRANE"), "GGGGG");
    assert_eq!(p("LLAMA", "ALLEY"), "YGY..");
    let solved = FeedbackPattern([Verdict::Green; 5]);
    assert!(solved.is_solved());
}
