//! Reference external game for the stdio protocol.
//!
//! Sends one state, accepts one action and reports a win. Flags inject
//! faults for tests: `--garbage` (non-JSON first line), `--crash` (exit
//! right after the handshake), `--hang` (stop responding after the
//! handshake), `--endless` (never reach a terminal state). `--tag <x>` is
//! ignored and only marks the process.

use std::io::{BufRead, Write};

use diffprobe_core::protocol::{
    decode, encode, HelloPayload, ProtocolMessage, ResultOutcome, ResultPayload, StatePayload,
};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let has = |f: &str| args.iter().any(|a| a == f);
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    let mut lines = stdin.lock().lines();
    let mut send = |msg: ProtocolMessage| {
        let _ = out.write_all(encode(&msg).as_bytes());
        let _ = out.flush();
    };

    if has("--garbage") {
        println!("this is not json");
        let _ = std::io::stdout().flush();
        std::thread::sleep(std::time::Duration::from_secs(30));
        return;
    }
    let challenge_id = match lines.next().map(|l| l.map(|l| decode(&l))) {
        Some(Ok(Ok(ProtocolMessage::Hello(h)))) => h.challenge_id.unwrap_or_default(),
        _ => std::process::exit(2),
    };
    send(ProtocolMessage::Hello(HelloPayload {
        challenge_id: Some(challenge_id.clone()),
        seed: None,
        game_id: Some("echo".into()),
    }));
    if has("--crash") {
        std::process::exit(101);
    }
    if has("--hang") {
        loop {
            std::thread::sleep(std::time::Duration::from_secs(60));
        }
    }

    let mut turn = 0u64;
    loop {
        send(ProtocolMessage::State(StatePayload {
            challenge_id: challenge_id.clone(),
            turn,
            state_text: format!("Echo turn {turn}. Reply with any action."),
            structured_state: Default::default(),
            legal_actions: Some(vec!["WIN".into()]),
            terminal: false,
            metrics: Some([("turn".to_string(), turn as f64)].into_iter().collect()),
        }));
        let action = match lines.next().map(|l| l.map(|l| decode(&l))) {
            Some(Ok(Ok(ProtocolMessage::Action(a)))) => a.action_text,
            _ => std::process::exit(3),
        };
        turn += 1;
        if has("--endless") {
            continue;
        }
        let metrics: std::collections::BTreeMap<String, f64> = [
            ("actions".to_string(), turn as f64),
            ("echo_length".to_string(), action.len() as f64),
        ]
        .into_iter()
        .collect();
        send(ProtocolMessage::State(StatePayload {
            challenge_id: challenge_id.clone(),
            turn,
            state_text: format!("You said {action:?}."),
            structured_state: Default::default(),
            legal_actions: None,
            terminal: true,
            metrics: Some(metrics.clone()),
        }));
        send(ProtocolMessage::Result(ResultPayload {
            outcome: ResultOutcome::Win,
            metrics,
            flags: vec![],
        }));
        return;
    }
}
