//! HttpTransport against a local stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use diffprobe_core::agent::transport::{HttpTransport, TransportConfig};
use diffprobe_core::agent::{ChatMessage, Transport, TransportError};

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn ok(text: &str) -> Reply {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3}
    });
    Reply {
        status: 200,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

fn status(code: u16) -> Reply {
    Reply {
        status: code,
        body: "{\"error\":\"nope\"}".into(),
        delay: Duration::ZERO,
    }
}

#[derive(Default)]
struct Seen {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    headers: Mutex<Vec<String>>,
}

/// Serves `replies` in order (the last one repeats), one thread per connection.
fn serve(replies: Vec<Reply>) -> (String, Arc<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let seen = Arc::new(Seen::default());
    let replies = Arc::new(replies);
    let s = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let seen = s.clone();
            let replies = replies.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                let mut head = String::new();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    if line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let i = seen.requests.fetch_add(1, Ordering::SeqCst);
                seen.headers.lock().unwrap().push(head);
                let now = seen.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                seen.max_in_flight.fetch_max(now, Ordering::SeqCst);
                let reply = &replies[i.min(replies.len() - 1)];
                std::thread::sleep(reply.delay);
                seen.in_flight.fetch_sub(1, Ordering::SeqCst);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    reply.status,
                    reply.body.len(),
                    reply.body
                );
            });
        }
    });
    (url, seen)
}

fn transport(url: &str, timeout_secs: f64) -> HttpTransport {
    let config = TransportConfig {
        endpoint: url.into(),
        timeout_secs,
        max_in_flight: 2,
        max_attempts: 3,
        backoff_base_ms: 10,
    };
    HttpTransport::with_key(config, Some("test-key".into()))
}

fn ask(t: &HttpTransport) -> Result<diffprobe_core::agent::transport::Completion, TransportError> {
    t.complete(&[ChatMessage::user("hi")], "m", 0.0)
}

#[test]
fn parses_content_usage_and_sends_key() {
    let (url, seen) = serve(vec![ok("Final Answer: [C, R, A, N, E]")]);
    let t = transport(&url, 10.0);
    let c = ask(&t).unwrap();
    assert_eq!(c.text, "Final Answer: [C, R, A, N, E]");
    assert_eq!((c.prompt_tokens, c.completion_tokens), (Some(11), Some(3)));
    let head = seen.headers.lock().unwrap()[0].to_ascii_lowercase();
    assert!(head.contains("authorization: bearer test-key"));
}

#[test]
fn server_errors_are_retried_then_reported() {
    let (url, seen) = serve(vec![status(500)]);
    let t = transport(&url, 10.0);
    let err = ask(&t).unwrap_err();
    assert!(
        matches!(err, TransportError::Status { status: 500, .. }),
        "{err:?}"
    );
    assert_eq!(seen.requests.load(Ordering::SeqCst), 3);
    assert_eq!(t.calls(), 3);
    assert!(!err.to_string().contains("test-key"));
}

#[test]
fn rate_limit_recovers() {
    let (url, seen) = serve(vec![status(429), ok("ok")]);
    assert_eq!(ask(&transport(&url, 10.0)).unwrap().text, "ok");
    assert_eq!(seen.requests.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![status(400)]);
    assert!(matches!(
        ask(&transport(&url, 10.0)),
        Err(TransportError::Status { status: 400, .. })
    ));
    assert_eq!(seen.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_body_is_reported() {
    let (url, _) = serve(vec![Reply {
        status: 200,
        body: "{\"choices\":[]}".into(),
        delay: Duration::ZERO,
    }]);
    let t = HttpTransport::with_key(
        TransportConfig {
            endpoint: url,
            max_attempts: 1,
            ..TransportConfig::default()
        },
        None,
    );
    assert!(matches!(ask(&t), Err(TransportError::Malformed(_))));
}

#[test]
fn slow_reply_within_timeout_succeeds() {
    let (url, _) = serve(vec![Reply {
        delay: Duration::from_secs(2),
        ..ok("late")
    }]);
    assert_eq!(ask(&transport(&url, 10.0)).unwrap().text, "late");
}

#[test]
fn slow_reply_past_timeout_times_out() {
    let (url, _) = serve(vec![Reply {
        delay: Duration::from_secs(3),
        ..ok("late")
    }]);
    let t = HttpTransport::with_key(
        TransportConfig {
            endpoint: url,
            timeout_secs: 0.5,
            max_attempts: 1,
            ..TransportConfig::default()
        },
        None,
    );
    assert_eq!(ask(&t).unwrap_err(), TransportError::Timeout);
}

#[test]
fn concurrent_requests_are_bounded() {
    let (url, seen) = serve(vec![Reply {
        delay: Duration::from_millis(150),
        ..ok("x")
    }]);
    let t = Arc::new(transport(&url, 10.0));
    std::thread::scope(|s| {
        for _ in 0..6 {
            let t = t.clone();
            s.spawn(move || ask(&t).unwrap());
        }
    });
    assert_eq!(seen.requests.load(Ordering::SeqCst), 6);
    assert!(seen.max_in_flight.load(Ordering::SeqCst) <= 2);
}
