use std::io::Write;
use std::sync::Arc;

use diffprobe_core::agent::{AgentConfig, AgentContext};
use diffprobe_core::battle::Roster;
use diffprobe_core::harness::{self, Challenge, RunConfig, TrialOutcome, TrialRecord, TRIALS_FILE};
use diffprobe_core::wordle::WordList;

fn ctx() -> AgentContext {
    AgentContext::new(Arc::new(WordList::default_lists()))
}

fn agents() -> Vec<AgentConfig> {
    ["solver", "random:3", "scripted:CRANE,SLATE,ADIEU"]
        .iter()
        .map(|s| AgentConfig::from_spec(s).unwrap())
        .collect()
}

fn wordle_challenges(ctx: &AgentContext, n: usize) -> Vec<Challenge> {
    ctx.word_list
        .answers()
        .iter()
        .step_by(41)
        .take(n)
        .map(|w| Challenge::wordle(*w))
        .collect()
}

fn config(dir: &std::path::Path, parallelism: usize) -> RunConfig {
    RunConfig {
        trials_per_challenge: 5,
        parallelism,
        base_seed: 99,
        agents: agents(),
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Everything but wall-clock time, in key order.
fn canonical(mut records: Vec<TrialRecord>) -> String {
    records.sort_by_key(TrialRecord::key);
    records
        .into_iter()
        .map(|mut r| {
            r.wall_ms = 0;
            serde_json::to_string(&r).unwrap()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn parallel_runs_match_serial_runs() {
    let ctx = ctx();
    let challenges = wordle_challenges(&ctx, 50);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = harness::run(&config(a.path(), 1), &challenges, &ctx).unwrap();
    let sb = harness::run(&config(b.path(), 8), &challenges, &ctx).unwrap();
    assert_eq!(sa.total, 50 * 3 * 5);
    assert_eq!((sa.written, sb.written), (750, 750));
    // The manifest records parallelism, so only the trial data must agree.
    let ra = harness::load_trials(&sa.trials_path).unwrap();
    let rb = harness::load_trials(&sb.trials_path).unwrap();
    assert_eq!(canonical(ra.clone()), canonical(rb));
    let solved = ra
        .iter()
        .filter(|r| r.agent_id == "solver" && r.outcome == TrialOutcome::Win)
        .count();
    assert_eq!(solved, 250);
}

#[test]
fn resume_skips_done_trials_and_drops_partial_line() {
    let ctx = ctx();
    let challenges = wordle_challenges(&ctx, 10);
    let full = tempfile::tempdir().unwrap();
    let reference = harness::run(&config(full.path(), 4), &challenges, &ctx).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 4);
    cfg.max_new_trials = Some(37);
    let first = harness::run(&cfg, &challenges, &ctx).unwrap();
    assert_eq!(first.written, 37);
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(dir.path().join(TRIALS_FILE))
        .unwrap();
    f.write_all(br#"{"challenge_id":"CRA"#).unwrap();
    drop(f);

    cfg.max_new_trials = None;
    let second = harness::run(&cfg, &challenges, &ctx).unwrap();
    assert_eq!((second.skipped, second.written), (37, 150 - 37));
    let again = harness::run(&cfg, &challenges, &ctx).unwrap();
    assert_eq!(again.written, 0);

    let resumed = harness::load_trials(&second.trials_path).unwrap();
    assert_eq!(resumed.len(), 150);
    assert_eq!(
        canonical(resumed),
        canonical(harness::load_trials(&reference.trials_path).unwrap())
    );
}

#[test]
fn battle_runs_are_deterministic() {
    let ctx = ctx();
    let roster = Roster::default_roster();
    let deck = roster.deck("standard").unwrap();
    let challenges: Vec<_> = roster
        .bosses
        .iter()
        .map(|b| Challenge::battle(b.clone(), deck.clone(), roster.player_hp))
        .collect();
    let mk = |dir: &std::path::Path, p| RunConfig {
        agents: vec![
            AgentConfig::from_spec("scripted:expert").unwrap(),
            AgentConfig::from_spec("random").unwrap(),
        ],
        ..config(dir, p)
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = harness::run(&mk(a.path(), 1), &challenges, &ctx).unwrap();
    let sb = harness::run(&mk(b.path(), 8), &challenges, &ctx).unwrap();
    let ra = harness::load_trials(&sa.trials_path).unwrap();
    assert_eq!(
        canonical(ra.clone()),
        canonical(harness::load_trials(&sb.trials_path).unwrap())
    );
    for r in ra.iter().filter(|r| r.outcome != TrialOutcome::Win) {
        assert_eq!(r.metrics["hp_remaining"], 0.0);
    }
}

#[test]
fn rejects_bad_configs() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let challenges = wordle_challenges(&ctx, 2);
    let mut cfg = config(dir.path(), 1);
    cfg.agents.push(AgentConfig::from_spec("solver").unwrap());
    assert!(harness::run(&cfg, &challenges, &ctx).is_err());
    let cfg = config(dir.path(), 1);
    let dup = vec![challenges[0].clone(), challenges[0].clone()];
    assert!(harness::run(&cfg, &dup, &ctx).is_err());
    let llm = RunConfig {
        agents: vec![AgentConfig::from_spec("cot").unwrap()],
        ..config(dir.path(), 1)
    };
    assert!(harness::run(&llm, &challenges, &ctx).is_err());
}
