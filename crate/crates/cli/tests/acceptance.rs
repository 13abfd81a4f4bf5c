//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every tolerance and time limit is a
//! constant below.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use diffprobe_core::agent::transport::FnTransport;
use diffprobe_core::agent::{AgentConfig, AgentContext, ChatMessage};
use diffprobe_core::battle::{
    compute_damage, play_named, run_battle, BattleOutcome, BattleState, BossSpec, Intent, Roster,
};
use diffprobe_core::harness::{
    self, aggregate, AggregateOptions, Challenge, RunConfig, TrialOutcome, TrialRecord,
};
use diffprobe_core::protocol::{ExternalCommand, ExternalLimits};
use diffprobe_core::solver::{bench, Solver};
use diffprobe_core::stats::{bucket, p_value, Bucket};
use diffprobe_core::wordle::{score_guess, Word, WordList};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLI: &str = env!("CARGO_BIN_EXE_diffprobe");
const ECHO: &str = env!("CARGO_BIN_EXE_diffprobe-echo-game");

const SCORING_PAIRS: usize = 10_000;
const SCORING_LIMIT: Duration = Duration::from_secs(5);
const SOLVER_MAX_MEAN: f64 = 4.1;
const SOLVER_MIN_WIN_6: f64 = 0.99;
const SOLVER_LIMIT: Duration = Duration::from_secs(300);
const P_TOLERANCE: f64 = 1e-6;
const HARNESS_LIMIT: Duration = Duration::from_secs(120);
const R_TOLERANCE: f64 = 1e-12;
const G1_TRIALS: usize = 100;
const AGGREGATION_SETS: usize = 1_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn word(s: &str) -> Word {
    Word::parse(s).expect("five letters")
}

fn ctx() -> AgentContext {
    AgentContext::new(Arc::new(WordList::default_lists()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("C1 scoring oracle", scoring_oracle),
        ("C2 solver benchmark", solver_benchmark),
        ("C3 p-value oracle and buckets", p_value_oracle),
        ("C4 battle math", battle_math),
        ("C5 harness determinism and resume", harness_determinism),
        ("C6 end-to-end correlate", end_to_end_correlate),
        ("C7 protocol equivalence", protocol_equivalence),
        ("C8 no bare in-play words", no_bare_words),
        ("C9 aggregation accounting", aggregation_accounting),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail} ({secs:.2}s)");
            }
        }
        let _ = std::io::stdout().flush();
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Multiset scoring written independently of the engine.
fn oracle_score(answer: &[u8], guess: &[u8]) -> String {
    let mut out = ['.'; 5];
    let mut left: BTreeMap<u8, usize> = BTreeMap::new();
    for i in 0..5 {
        if guess[i] == answer[i] {
            out[i] = 'G';
        } else {
            *left.entry(answer[i]).or_default() += 1;
        }
    }
    for i in 0..5 {
        if out[i] == 'G' {
            continue;
        }
        if let Some(n) = left.get_mut(&guess[i]).filter(|n| **n > 0) {
            *n -= 1;
            out[i] = 'Y';
        }
    }
    out.iter().collect()
}

fn scoring_oracle() -> Check {
    let list = WordList::default_lists();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c0e);
    let started = Instant::now();
    let mut checked = 0;
    for i in 0..SCORING_PAIRS {
        let (a, g) = match i % 3 {
            0 => (
                *list.answers().choose(&mut rng).unwrap(),
                *list.allowed().choose(&mut rng).unwrap(),
            ),
            // A tiny alphabet forces repeated letters on both sides.
            1 => {
                let mut make = || -> String {
                    (0..5)
                        .map(|_| *b"AELPS".choose(&mut rng).unwrap() as char)
                        .collect()
                };
                (word(&make()), word(&make()))
            }
            _ => {
                let mut make =
                    || -> String { (0..5).map(|_| rng.gen_range(b'A'..=b'Z') as char).collect() };
                (word(&make()), word(&make()))
            }
        };
        let got = score_guess(a, g).compact();
        let want = oracle_score(a.as_str().as_bytes(), g.as_str().as_bytes());
        ensure!(got == want, "{a}/{g}: engine {got}, oracle {want}");
        checked += 1;
    }
    let elapsed = started.elapsed();
    ensure!(
        elapsed < SCORING_LIMIT,
        "took {elapsed:?}, limit {SCORING_LIMIT:?}"
    );
    Ok(format!(
        "{checked} pairs match the multiset oracle in {:.2}s (limit {}s)",
        elapsed.as_secs_f64(),
        SCORING_LIMIT.as_secs()
    ))
}

fn solver_benchmark() -> Check {
    let started = Instant::now();
    let list = Arc::new(WordList::default_lists());
    let a = bench(&Solver::new(list.clone()), 12).map_err(|e| e.to_string())?;
    let b = bench(&Solver::new(list), 12).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(
        a.mean_guesses <= SOLVER_MAX_MEAN,
        "mean {} > {SOLVER_MAX_MEAN}",
        a.mean_guesses
    );
    ensure!(
        a.win_rate_within_6 >= SOLVER_MIN_WIN_6,
        "win within 6 = {}",
        a.win_rate_within_6
    );
    ensure!(
        a.win_rate_within_cap == 1.0,
        "win within 12 = {}",
        a.win_rate_within_cap
    );
    ensure!(a == b, "two runs differ");
    ensure!(elapsed < SOLVER_LIMIT, "took {elapsed:?}");
    Ok(format!(
        "{} puzzles, mean {:.5} (max {SOLVER_MAX_MEAN}), within 6 {:.4} (min {SOLVER_MIN_WIN_6}), within 12 {:.4}, two runs identical",
        a.puzzles, a.mean_guesses, a.win_rate_within_6, a.win_rate_within_cap
    ))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Tail mass of the t distribution via t = sqrt(df) tan(theta), where the
/// density becomes proportional to cos^(df-1)(theta).
fn quadrature_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let t = r.abs() * (df / (1.0 - r * r)).sqrt();
    let theta = (t / df.sqrt()).atan();
    let f = |x: f64| x.cos().powf(df - 1.0);
    let hp = std::f64::consts::FRAC_PI_2;
    simpson(f, theta, hp, 200_000) / simpson(f, 0.0, hp, 200_000)
}

fn p_value_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for n in [10usize, 100, 529] {
        for k in 0..10 {
            let r = k as f64 / 10.0;
            let got = p_value(r, n).map_err(|e| e.to_string())?;
            let diff = (got - quadrature_p(r, n)).abs();
            worst = worst.max(diff);
            ensure!(diff < P_TOLERANCE, "r={r} n={n}: off by {diff:e}");
        }
    }
    let p = p_value(0.624, 529).map_err(|e| e.to_string())?;
    ensure!(p < 0.001, "p(0.624, 529) = {p}");
    let table = [
        (0.075, Bucket::VeryWeak),
        (0.237, Bucket::Weak),
        (0.365, Bucket::Weak),
        (0.387, Bucket::Weak),
        (0.259, Bucket::Weak),
        (0.435, Bucket::Moderate),
        (0.471, Bucket::Moderate),
        (0.513, Bucket::Moderate),
        (0.479, Bucket::Moderate),
        (0.482, Bucket::Moderate),
        (0.624, Bucket::Strong),
        (0.657, Bucket::Strong),
        (0.742, Bucket::Strong),
        (0.710, Bucket::Strong),
        (0.871, Bucket::Strong),
    ];
    for (r, b) in table {
        ensure!(bucket(r) == b, "bucket({r}) = {:?}, want {b:?}", bucket(r));
    }
    Ok(format!(
        "30 grid points within {worst:.1e} (tol {P_TOLERANCE:e}); p(0.624, 529) = {p:.1e} < 0.001; {} bucket labels match",
        table.len()
    ))
}

fn battle_math() -> Check {
    let roster = Roster::default_roster();
    let card = |n: &str| roster.card(n).unwrap().clone();
    let dummy = |hp, intent| BossSpec {
        name: "Dummy".into(),
        hp,
        intent_script: vec![intent],
    };
    let start =
        |name: &str, intent| BattleState::new(80, &[dummy(200, intent)], &vec![card(name); 5], 0);
    let dealt = |s: &BattleState| 200 - s.enemies[0].combatant.hp;

    let s = play_named(&start("Strike", Intent::Attack(5)), "Strike", None)
        .map_err(|e| e.to_string())?;
    ensure!(dealt(&s) == 6, "Strike dealt {}", dealt(&s));
    let mut v = start("Strike", Intent::Attack(5));
    v.enemies[0].combatant.vulnerable_turns = 2;
    let v = play_named(&v, "Strike", None).map_err(|e| e.to_string())?;
    ensure!(dealt(&v) == 9, "Strike on vulnerable dealt {}", dealt(&v));

    let b =
        play_named(&start("Bash", Intent::Attack(5)), "Bash", None).map_err(|e| e.to_string())?;
    ensure!(
        dealt(&b) == 8 && b.enemies[0].combatant.vulnerable_turns > 0,
        "Bash dealt {} / no vulnerable",
        dealt(&b)
    );

    for (strength, want) in [(12, 50), (15, 59)] {
        let mut h = start("Heavy Blade", Intent::Attack(5));
        h.player.strength = strength;
        let h = play_named(&h, "Heavy Blade", None).map_err(|e| e.to_string())?;
        ensure!(
            dealt(&h) == want,
            "Heavy Blade at {strength} dealt {}",
            dealt(&h)
        );
    }
    ensure!(
        compute_damage(14, 12, 3, false) == 50,
        "compute_damage mismatch"
    );

    ensure!(
        play_named(
            &start("Spot Weakness", Intent::Attack(9)),
            "Spot Weakness",
            None
        )
        .is_ok(),
        "Spot Weakness refused vs attack"
    );
    ensure!(
        play_named(
            &start("Spot Weakness", Intent::Block(5)),
            "Spot Weakness",
            None
        )
        .is_err(),
        "Spot Weakness allowed vs block"
    );
    ensure!(
        play_named(
            &start("Spot Weakness", Intent::Debuff),
            "Spot Weakness",
            None
        )
        .is_err(),
        "Spot Weakness allowed vs debuff"
    );

    let cfg = AgentConfig::from_spec("scripted:END TURN").map_err(|e| e.to_string())?;
    let mut agent = diffprobe_core::agent::ScriptedAgent::new(&cfg, ctx().solver);
    let r = run_battle(
        &dummy(999, Intent::Attack(16)),
        &[card("Defend")],
        &mut agent,
        1,
        30,
        64,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        r.outcome == BattleOutcome::Loss && r.hp_remaining == 0,
        "loss recorded {r:?}"
    );
    Ok("Strike 6/9, Bash 8 + vulnerable, Heavy Blade 50/59, Spot Weakness needs attack intent, loss has hp_remaining 0".into())
}

fn mock_agents() -> Vec<&'static str> {
    vec!["solver", "random:3", "scripted:CRANE,SLATE,ADIEU"]
}

/// Record fields that must be reproducible: everything except wall time.
fn canonical(mut records: Vec<TrialRecord>) -> Vec<String> {
    records.sort_by_key(TrialRecord::key);
    records
        .into_iter()
        .map(|mut r| {
            r.wall_ms = 0;
            serde_json::to_string(&r).unwrap()
        })
        .collect()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path)
        .map(|t| t.matches('\n').count())
        .unwrap_or(0)
}

fn harness_determinism() -> Check {
    let started = Instant::now();
    let ctx = ctx();
    let challenges: Vec<_> = ctx
        .word_list
        .answers()
        .iter()
        .take(50)
        .map(|w| Challenge::wordle(*w))
        .collect();
    let agents: Vec<_> = mock_agents()
        .iter()
        .map(|s| AgentConfig::from_spec(s).unwrap())
        .collect();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = |sub: &str, p| RunConfig {
        trials_per_challenge: 5,
        parallelism: p,
        base_seed: 99,
        agents: agents.clone(),
        out_dir: tmp.path().join(sub),
        ..RunConfig::default()
    };
    let serial = harness::run(&config("p1", 1), &challenges, &ctx).map_err(|e| e.to_string())?;
    let parallel = harness::run(&config("p8", 8), &challenges, &ctx).map_err(|e| e.to_string())?;
    let a = canonical(harness::load_trials(&serial.trials_path).map_err(|e| e.to_string())?);
    let b = canonical(harness::load_trials(&parallel.trials_path).map_err(|e| e.to_string())?);
    ensure!(a.len() == 750, "{} records, want 750", a.len());
    ensure!(a == b, "parallelism 1 and 8 disagree");

    // Kill a CLI run partway, tear its last line, then resume.
    let out = tmp.path().join("killed");
    let mut args: Vec<String> = [
        "run",
        "--game",
        "wordle",
        "--trials",
        "5",
        "--limit",
        "50",
        "--seed",
        "99",
        "--parallelism",
        "1",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for a in mock_agents() {
        args.extend(["--agent".to_string(), a.to_string()]);
    }
    args.extend(["--out-dir".to_string(), out.display().to_string()]);
    let trials = out.join(harness::TRIALS_FILE);
    let mut child = Command::new(CLI)
        .args(&args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(60);
    while line_count(&trials) < 20 && Instant::now() < deadline {
        if child.try_wait().map_err(|e| e.to_string())?.is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(1));
    }
    let _ = child.kill();
    let _ = child.wait();
    let at_kill = line_count(&trials);
    ensure!(
        at_kill > 0 && at_kill < 750,
        "kill landed after {at_kill} records; not mid-run"
    );
    std::fs::OpenOptions::new()
        .append(true)
        .open(&trials)
        .and_then(|mut f| f.write_all(br#"{"challenge_id":"ABA"#))
        .map_err(|e| e.to_string())?;
    let status = Command::new(CLI)
        .args(&args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "resume exited with {status}");
    let resumed = canonical(harness::load_trials(&trials).map_err(|e| e.to_string())?);
    let keys: BTreeSet<_> = harness::load_trials(&trials)
        .unwrap()
        .iter()
        .map(TrialRecord::key)
        .collect();
    ensure!(
        resumed.len() == 750 && keys.len() == 750,
        "{} records after resume",
        resumed.len()
    );
    ensure!(
        resumed == a,
        "resumed run differs from an uninterrupted run"
    );

    let elapsed = started.elapsed();
    ensure!(elapsed < HARNESS_LIMIT, "took {elapsed:?}");
    Ok(format!(
        "750 records identical at parallelism 1 and 8; killed after {at_kill} records, resumed to 750 with no duplicates (limit {}s)",
        HARNESS_LIMIT.as_secs()
    ))
}

fn exact_r(x: &[i128], y: &[i128]) -> f64 {
    let n = x.len() as i128;
    let (sx, sy): (i128, i128) = (x.iter().sum(), y.iter().sum());
    let sxy: i128 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: i128 = x.iter().map(|a| a * a).sum();
    let syy: i128 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) as f64
        / (((n * sxx - sx * sx) as f64) * ((n * syy - sy * sy) as f64)).sqrt()
}

fn correlate_cli(trials: &Path, human: &Path, out: &Path) -> Result<serde_json::Value, String> {
    let o = Command::new(CLI)
        .args(["correlate", "--trials-file"])
        .arg(trials)
        .arg("--human")
        .arg(human)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        o.status.success(),
        "correlate failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end_correlate() -> Check {
    let trials = fixture("trials_synthetic.jsonl");
    let human = fixture("human_wordle_synthetic.csv");
    let mut totals: BTreeMap<String, (i128, i128)> = BTreeMap::new();
    for line in std::fs::read_to_string(&trials)
        .map_err(|e| e.to_string())?
        .lines()
    {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let m = &v["metrics"];
        let g = if v["outcome"] == "win" {
            m["guesses"].as_f64()
        } else {
            m["guess_cap"].as_f64()
        }
        .unwrap();
        let e = totals
            .entry(v["challenge_id"].as_str().unwrap().into())
            .or_default();
        e.0 += g as i128;
        e.1 += 1;
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for line in std::fs::read_to_string(&human)
        .map_err(|e| e.to_string())?
        .lines()
        .skip(1)
    {
        let cols: Vec<&str> = line.split(',').collect();
        let (whole, frac) = cols[3].split_once('.').unwrap();
        ys.push(whole.parse::<i128>().unwrap() * 100 + frac.parse::<i128>().unwrap());
        xs.push(totals[cols[0]].0);
    }
    let want = exact_r(&xs, &ys);

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = correlate_cli(&trials, &human, &tmp.path().join("fixture"))?;
    let row = &report["correlations"][0];
    let got = row["r"].as_f64().ok_or("report lacks r")?;
    ensure!((got - want).abs() < R_TOLERANCE, "r {got} vs oracle {want}");
    let got_bucket: Bucket =
        serde_json::from_value(row["bucket"].clone()).map_err(|e| e.to_string())?;
    ensure!(
        got_bucket == bucket(want),
        "bucket {got_bucket:?} vs {:?}",
        bucket(want)
    );

    // Human values equal to the agent's per-challenge means.
    let mirror = tmp.path().join("mirror.csv");
    let mut csv = String::from("challenge_id,avg_guesses\n");
    for (id, (sum, n)) in &totals {
        csv.push_str(&format!("{id},{}\n", *sum as f64 / *n as f64));
    }
    std::fs::write(&mirror, csv).map_err(|e| e.to_string())?;
    let same = correlate_cli(&trials, &mirror, &tmp.path().join("mirror"))?;
    let (r1, p1) = (
        same["correlations"][0]["r"].as_f64(),
        same["correlations"][0]["p"].as_f64(),
    );
    ensure!(
        r1 == Some(1.0) && p1 == Some(0.0),
        "identical values gave r={r1:?} p={p1:?}"
    );
    Ok(format!("r = {got:.12} matches exact oracle within {R_TOLERANCE:e}, bucket {got_bucket:?}; identical values give r = 1, p = 0"))
}

/// Live, non-zombie processes with `tag` as an argument.
fn tagged_processes(tag: &str) -> usize {
    let Ok(dir) = std::fs::read_dir("/proc") else {
        return 0;
    };
    dir.filter_map(Result::ok)
        .filter(|e| {
            e.file_name()
                .to_string_lossy()
                .bytes()
                .all(|b| b.is_ascii_digit())
        })
        .filter(|e| {
            let status = std::fs::read_to_string(e.path().join("status")).unwrap_or_default();
            let zombie = status
                .lines()
                .any(|l| l.starts_with("State:") && l.contains('Z'));
            let cmdline = std::fs::read(e.path().join("cmdline")).unwrap_or_default();
            !zombie
                && String::from_utf8_lossy(&cmdline)
                    .split('\0')
                    .any(|a| a == tag)
        })
        .count()
}

fn protocol_equivalence() -> Check {
    let ctx = ctx();
    let roster = Roster::default_roster();
    let deck = roster.deck("standard").map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let agents = vec![
        AgentConfig::from_spec("scripted:expert").unwrap(),
        AgentConfig::from_spec("scripted:PLAY Bash,PLAY Strike,PLAY Defend,END TURN").unwrap(),
    ];
    let config = |sub: &str| RunConfig {
        trials_per_challenge: 3,
        parallelism: 4,
        base_seed: 7,
        agents: agents.clone(),
        out_dir: tmp.path().join(sub),
        ..RunConfig::default()
    };
    let local: Vec<_> = roster
        .bosses
        .iter()
        .map(|b| Challenge::battle(b.clone(), deck.clone(), roster.player_hp))
        .collect();
    let serve = ExternalCommand {
        program: CLI.into(),
        args: vec!["serve-battle".into()],
    };
    let remote: Vec<_> = roster
        .bosses
        .iter()
        .map(|b| Challenge::External {
            id: b.name.clone(),
            command: serve.clone(),
        })
        .collect();
    let a = harness::run(&config("local"), &local, &ctx).map_err(|e| e.to_string())?;
    let b = harness::run(&config("remote"), &remote, &ctx).map_err(|e| e.to_string())?;
    let ra = canonical(harness::load_trials(&a.trials_path).unwrap());
    let rb = canonical(harness::load_trials(&b.trials_path).unwrap());
    ensure!(ra.len() == 6 * 2 * 3, "{} local records", ra.len());
    ensure!(ra == rb, "in-process and stdio records differ");

    let tag = format!("acceptance-{}", std::process::id());
    let echo = |flag: &str| ExternalCommand {
        program: ECHO.into(),
        args: vec![flag.into(), "--tag".into(), tag.clone()],
    };
    let faults: Vec<_> = ["--crash", "--hang", "--garbage", "--endless"]
        .iter()
        .map(|f| Challenge::External {
            id: f.trim_start_matches('-').into(),
            command: echo(f),
        })
        .collect();
    let cfg = RunConfig {
        trials_per_challenge: 2,
        parallelism: 4,
        agents: vec![AgentConfig::from_spec("scripted:WIN").unwrap()],
        out_dir: tmp.path().join("faults"),
        external: ExternalLimits {
            max_turns: 50,
            wall_clock: Duration::from_secs(2),
            handshake_timeout: Duration::from_secs(2),
        },
        ..RunConfig::default()
    };
    let s = harness::run(&cfg, &faults, &ctx).map_err(|e| e.to_string())?;
    ensure!(
        s.written == 8 && s.protocol_failures == 6,
        "fault run wrote {} with {} failures",
        s.written,
        s.protocol_failures
    );
    let orphans = tagged_processes(&tag);
    ensure!(orphans == 0, "{orphans} orphan game processes");
    Ok(format!("{} trials over 6 bosses identical in-process and over stdio; crash/hang/garbage/endless injected, 0 orphans", ra.len()))
}

fn bracketed_words(text: &str) -> BTreeSet<String> {
    let re = regex::Regex::new(r"\[([A-Z]), ([A-Z]), ([A-Z]), ([A-Z]), ([A-Z])\]").unwrap();
    re.captures_iter(text)
        .map(|c| (1..=5).map(|i| c[i].to_string()).collect())
        .collect()
}

fn bare_hits(text: &str, w: &str) -> usize {
    let re = regex::Regex::new(&format!(r"(?i)\b{w}\b")).unwrap();
    re.find_iter(text)
        .filter(|m| !(w == "GUESS" && text[m.end()..].trim_start().starts_with(':')))
        .count()
}

fn no_bare_words() -> Check {
    let prompts: Arc<Mutex<Vec<Vec<ChatMessage>>>> = Arc::default();
    let allowed: Vec<Word> = WordList::default_lists().allowed().to_vec();
    let seen = prompts.clone();
    // A chatty fake model: names its guess in prose (upper and lower case),
    // and sometimes forgets the answer marker to force a correction turn.
    let transport = FnTransport::new(move |messages: &[ChatMessage]| {
        seen.lock().unwrap().push(messages.to_vec());
        let digest = diffprobe_core::seed::derive(
            &messages
                .iter()
                .map(|m| m.content.as_bytes())
                .collect::<Vec<_>>(),
        );
        let w = allowed[(digest % allowed.len() as u64) as usize];
        let lower = w.as_str().to_lowercase();
        Ok(if digest.is_multiple_of(5) {
            format!("Maybe {w}? Or {lower}.")
        } else {
            format!(
                "I like {w} here; {lower} splits the field.\nGUESS: {}",
                w.bracketed()
            )
        })
    });
    let ctx = ctx().with_transport(Arc::new(transport));
    let challenges: Vec<_> = ctx
        .word_list
        .answers()
        .iter()
        .step_by(97)
        .take(G1_TRIALS / 5)
        .map(|w| Challenge::wordle(*w))
        .collect();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        trials_per_challenge: 5,
        guess_cap: 6,
        parallelism: 4,
        agents: vec![AgentConfig::from_spec("cot").unwrap()],
        out_dir: tmp.path().to_path_buf(),
        ..RunConfig::default()
    };
    let s = harness::run(&cfg, &challenges, &ctx).map_err(|e| e.to_string())?;
    ensure!(s.written == G1_TRIALS, "{} trials", s.written);
    let prompts = prompts.lock().unwrap();
    let mut with_words = 0;
    for prompt in prompts.iter() {
        let all: String = prompt
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let words = bracketed_words(&all);
        // Later turns replay earlier replies, which named their guesses bare.
        if prompt
            .iter()
            .any(|m| m.role == diffprobe_core::agent::transport::Role::Assistant)
        {
            with_words += 1;
        }
        for m in prompt {
            for w in &words {
                let hits = bare_hits(&m.content, w);
                ensure!(
                    hits == 0,
                    "bare {w} in a {:?} message: {:?}",
                    m.role,
                    m.content
                );
            }
        }
    }
    ensure!(with_words > 0, "no prompt carried in-play words");
    Ok(format!("{G1_TRIALS} trials, {} prompts ({with_words} replaying earlier replies), 0 bare in-play words", prompts.len()))
}

fn random_outcome(rng: &mut ChaCha8Rng) -> TrialOutcome {
    match rng.gen_range(0..10) {
        0 => TrialOutcome::ProtocolFailure,
        1..=3 => TrialOutcome::Loss,
        _ => TrialOutcome::Win,
    }
}

fn record(
    challenge: String,
    i: usize,
    game: &str,
    outcome: TrialOutcome,
    metrics: &[(&str, f64)],
) -> TrialRecord {
    TrialRecord {
        challenge_id: challenge,
        agent_id: "a".into(),
        trial_index: i,
        seed: 0,
        game: game.into(),
        outcome,
        metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        flags: vec![],
        error: None,
        transcript_path: None,
        wall_ms: 0,
    }
}

fn aggregation_accounting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cap = 12i64;
    for set_index in 0..AGGREGATION_SETS {
        let mut set = Vec::new();
        for c in 0..rng.gen_range(1..4) {
            for i in 0..rng.gen_range(1..12) {
                let o = random_outcome(&mut rng);
                let g = rng.gen_range(1..=cap) as f64;
                set.push(record(
                    format!("W{c}"),
                    i,
                    "wordle",
                    o,
                    &[("guesses", g), ("guess_cap", cap as f64)],
                ));
                let o = random_outcome(&mut rng);
                let hp = rng.gen_range(0..=80) as f64;
                set.push(record(
                    format!("B{c}"),
                    i,
                    "battle",
                    o,
                    &[("hp_remaining", hp)],
                ));
            }
        }
        let got = aggregate(&set, AggregateOptions::default()).map_err(|e| e.to_string())?;
        for a in &got {
            let group: Vec<_> = set
                .iter()
                .filter(|r| r.challenge_id == a.challenge_id)
                .collect();
            let charged: i64 = group
                .iter()
                .map(
                    |r| match (r.game.as_str(), r.outcome == TrialOutcome::Win) {
                        ("wordle", true) => r.metrics["guesses"] as i64,
                        ("wordle", false) => cap,
                        (_, true) => r.metrics["hp_remaining"] as i64,
                        (_, false) => 0,
                    },
                )
                .sum();
            let want = charged as f64 / group.len() as f64;
            let value = if a.challenge_id.starts_with('W') {
                a.avg_guesses
            } else {
                a.avg_hp_remaining
            };
            ensure!(
                value == Some(want),
                "set {set_index} {}: {value:?} vs {want}",
                a.challenge_id
            );
        }
        let mut shuffled = set.clone();
        shuffled.shuffle(&mut rng);
        ensure!(
            aggregate(&shuffled, AggregateOptions::default()).map_err(|e| e.to_string())? == got,
            "set {set_index}: order changed the aggregate"
        );
    }
    Ok(format!("{AGGREGATION_SETS} random record sets: failures at cap, losses at 0 HP, exact and order-independent"))
}
