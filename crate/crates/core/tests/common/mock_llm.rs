//! Minimal in-process chat-completion endpoint for exercising the HTTP client.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

/// Headers (lower-cased names) and JSON body of each request received.
pub type RequestLog = Arc<Mutex<Vec<(Vec<(String, String)>, Value)>>>;

pub struct MockEndpoint {
    pub url: String,
    pub requests: RequestLog,
}

/// Serve `reply(body)` for every POST. `status` lets a test inject
/// failures per call index.
pub fn spawn<F, S>(reply: F, status: S) -> MockEndpoint
where
    F: Fn(&Value) -> String + Send + 'static,
    S: Fn(usize) -> u16 + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    thread::spawn(move || {
        let mut calls = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut content_length = 0usize;
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            loop {
                line.clear();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.trim_end().split_once(':') {
                    let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
                    if k == "content-length" {
                        content_length = v.parse().unwrap();
                    }
                    headers.push((k, v));
                }
            }
            let mut body = vec![0u8; content_length];
            reader.read_exact(&mut body).unwrap();
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let code = status(calls);
            calls += 1;
            let payload = if code == 200 {
                json!({"choices": [{"message": {"role": "assistant", "content": reply(&body)}, "finish_reason": "stop"}]})
                    .to_string()
            } else {
                "{\"error\":\"injected\"}".to_string()
            };
            log.lock().unwrap().push((headers, body));
            let response = format!(
                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            let _ = stream.write_all(response.as_bytes());
            let _ = stream.flush();
        }
    });
    MockEndpoint {
        url: format!("http://{addr}/v1/chat/completions"),
        requests,
    }
}

/// A plausible judge: keyword lookup on the final user turn.
pub fn keyword_judge(body: &Value) -> String {
    let text = body["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .rsplit("Commentary:")
        .next()
        .unwrap_or("")
        .to_lowercase();
    let class = [
        ("goal", "Goal"),
        ("yellow card", "Yellow card"),
        ("substitute", "Substitution"),
        ("crossbar", "Shots on target"),
        ("throw-in", "Throw-in"),
    ]
    .iter()
    .find(|(k, _)| text.contains(k))
    .map(|(_, c)| *c);
    match class {
        Some(c) => format!("YES\n{c}"),
        None => "NO".into(),
    }
}
