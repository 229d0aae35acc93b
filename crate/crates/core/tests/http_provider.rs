//! HTTP provider tests against a local stub server: success parsing, retry
//! on 5xx/429, and fail-fast on other 4xx.

use std::io::{Read, Write};
use std::net::TcpListener;

use selfbias::providers::{
    CompletionRequest, HttpProvider, PromptRole, Provider, ProviderConfig, ProviderKind,
};
use selfbias::Error;

/// Serves one canned response per connection, in order, then stops.
fn stub_server(responses: Vec<(u16, String)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = match listener.accept() {
                Ok(conn) => conn,
                Err(_) => return,
            };
            // drain the request headers and body far enough to respond
            let mut buf = [0u8; 65536];
            let _ = stream.read(&mut buf);
            let reason = match status {
                200 => "OK",
                400 => "Bad Request",
                429 => "Too Many Requests",
                _ => "Internal Server Error",
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    format!("http://{addr}/v1/chat/completions")
}

fn config(endpoint: String) -> ProviderConfig {
    ProviderConfig {
        kind: ProviderKind::Http,
        endpoint: Some(endpoint),
        model: Some("stub-model".into()),
        temperature: None,
        max_tokens: None,
        timeout_secs: 5,
        max_retries: 3,
        backoff_ms: 1,
        api_key_env: None,
        path: None,
    }
}

fn request() -> CompletionRequest {
    CompletionRequest {
        sample_id: "s1".into(),
        iteration: 0,
        index: 0,
        role: PromptRole::Initial,
        prompt: "translate this".into(),
        seed: 11,
        temperature: 0.0,
    }
}

fn chat_body(content: &str) -> String {
    format!(r#"{{"choices": [{{"message": {{"role": "assistant", "content": "{content}"}}}}]}}"#)
}

#[test]
fn parses_successful_completion() {
    let endpoint = stub_server(vec![(200, chat_body("bonjour"))]);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    assert_eq!(provider.complete(&request()).unwrap(), "bonjour");
}

#[test]
fn retries_5xx_and_429_until_success() {
    let endpoint = stub_server(vec![
        (500, "oops".into()),
        (429, "slow down".into()),
        (200, chat_body("third time lucky")),
    ]);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    assert_eq!(provider.complete(&request()).unwrap(), "third time lucky");
}

#[test]
fn does_not_retry_client_errors() {
    // a second 200 response is queued; a retry would consume it and succeed
    let endpoint = stub_server(vec![(400, "bad".into()), (200, chat_body("nope"))]);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    match provider.complete(&request()) {
        Err(Error::HttpStatus { status: 400 }) => {}
        other => panic!("expected HttpStatus 400, got {other:?}"),
    }
}

#[test]
fn exhausted_retries_report_attempt_count() {
    let endpoint = stub_server(vec![
        (500, "a".into()),
        (500, "b".into()),
        (500, "c".into()),
        (500, "d".into()),
    ]);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    match provider.complete(&request()) {
        Err(Error::Transport { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("expected Transport error, got {other:?}"),
    }
}
