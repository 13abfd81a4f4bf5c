//! Measuring game challenge difficulty by running agents through independent
//! challenges and correlating their performance with human play statistics.

/// Compiles a regex literal once and hands out a `&'static Regex`.
macro_rules! regex {
    ($re:literal $(,)?) => {{
        static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
        RE.get_or_init(|| regex::Regex::new($re).expect("valid regex"))
    }};
}

pub mod agent;
pub mod battle;
pub mod game;
pub mod harness;
pub mod protocol;
pub mod report;
pub mod seed;
pub mod solver;
pub mod stats;
pub mod wordle;
