use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use famlens::backend::{
    BackendError, Backoff, ChatProvider, ChatRequest, EmbeddingProvider, HttpChatProvider,
    HttpEmbedder, HttpSettings,
};
use famlens::exec::InflightLimit;

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves the canned `(status, body)` replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else {
                return;
            };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => length = v.trim().parse().unwrap(),
                    "authorization" => authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line
                    .split_whitespace()
                    .nth(1)
                    .unwrap_or("")
                    .to_string(),
                authorization,
                body: serde_json::from_slice(&buf).unwrap_or(serde_json::Value::Null),
            });
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, seen)
}

fn settings(url: &str) -> HttpSettings {
    HttpSettings {
        base_url: url.to_string(),
        model: "test-model".into(),
        api_key: "sk-test".into(),
        timeout: Duration::from_secs(5),
        backoff: Backoff::new(Duration::from_millis(1), 2.0, Duration::from_millis(4), 3).unwrap(),
    }
}

fn chat(content: &str) -> (u16, String) {
    (
        200,
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
            .to_string(),
    )
}

fn request() -> ChatRequest {
    ChatRequest::new("detect_suppression", "system text", "user text").with_temperature(Some(0.2))
}

fn provider(url: &str) -> HttpChatProvider {
    HttpChatProvider::new(settings(url), Arc::new(InflightLimit::new(2)))
}

#[test]
fn sends_bearer_key_model_and_messages() {
    let (url, seen) = serve(vec![chat("hello")]);
    assert_eq!(provider(&url).complete(&request()).unwrap(), "hello");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sk-test"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "user text");
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, seen) = serve(vec![(401, "{}".into()), chat("never")]);
    assert!(matches!(
        provider(&url).complete(&request()),
        Err(BackendError::Auth(_))
    ));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn server_errors_and_rate_limits_are_retried() {
    let (url, seen) = serve(vec![
        (503, "{}".into()),
        (429, "{}".into()),
        (500, "{}".into()),
        chat("finally"),
    ]);
    assert_eq!(provider(&url).complete(&request()).unwrap(), "finally");
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn retries_are_bounded() {
    let (url, seen) = serve(vec![(502, "{}".into()); 6]);
    match provider(&url).complete(&request()) {
        Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("expected transport failure, got {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn client_errors_surface_status_and_body() {
    let (url, seen) = serve(vec![(400, "{\"error\":\"bad\"}".into())]);
    match provider(&url).complete(&request()) {
        Err(BackendError::Http { status: 400, body }) => assert!(body.contains("bad")),
        other => panic!("expected HTTP 400, got {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn empty_or_malformed_completion_is_typed() {
    let (url, _) = serve(vec![chat("   "), (200, "not json".into())]);
    let p = provider(&url);
    assert_eq!(p.complete(&request()), Err(BackendError::EmptyResponse));
    assert!(matches!(
        p.complete(&request()),
        Err(BackendError::Decode(_))
    ));
}

#[test]
fn unreachable_host_is_transport_failure() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    assert!(matches!(
        provider(&url).complete(&request()),
        Err(BackendError::Transport { attempts: 4, .. })
    ));
}

#[test]
fn embedder_checks_dimension() {
    let body = |n: usize| {
        (
            200,
            serde_json::json!({"data": [{"embedding": vec![0.5; n]}]}).to_string(),
        )
    };
    let (url, seen) = serve(vec![body(4), body(3)]);
    let e = HttpEmbedder::new(settings(&url), 4, Arc::new(InflightLimit::new(1)));
    assert_eq!(e.embed("text").unwrap().dimension(), 4);
    assert!(matches!(e.embed("text"), Err(BackendError::Decode(_))));
    assert_eq!(seen.lock().unwrap()[0].path, "/v1/embeddings");
    assert_eq!(e.embed(""), Err(BackendError::EmptyInput));
}

#[test]
fn key_comes_from_named_environment_variable() {
    let name = "FAMLENS_HTTP_TEST_KEY_ONLY";
    assert!(matches!(
        HttpSettings::from_env("http://x", "m", name),
        Err(BackendError::Config(_))
    ));
    std::env::set_var(name, "sk-env");
    let s = HttpSettings::from_env("http://x/", "m", name).unwrap();
    assert_eq!(
        (s.api_key.as_str(), s.base_url.as_str()),
        ("sk-env", "http://x")
    );
    std::env::remove_var(name);
}
