//! Running the pipeline against an OpenAI-compatible HTTP endpoint.
//!
//! Spins up a tiny local stub server speaking the chat-completions protocol
//! and fans out against it, so the example is self-contained. Point
//! `BackendDescriptor.endpoint` (or `backend.endpoint` in the config file)
//! at a real server to use one; a bearer token is read from EGRM_API_KEY.
//!
//! Run: cargo run -p egrm --example http_backend

use std::io::{Read, Write};
use std::net::TcpListener;

use egrm::backend::{
    default_schedules, fan_out, BackendDescriptor, BackendKind, HttpBackend,
};
use egrm::consensus::{canonicalize, compute_consensus, extract_final_answer, ExtractorConfig};
use egrm::types::Prompt;

/// Minimal chat-completions stub: every request gets a canned completion
/// that depends on the request's seed, so the probes disagree realistically.
fn spawn_stub() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            std::thread::spawn(move || {
                let mut buf = Vec::new();
                let mut chunk = [0u8; 1024];
                let header_end = loop {
                    if let Some(p) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        break p + 4;
                    }
                    match stream.read(&mut chunk) {
                        Ok(0) | Err(_) => return,
                        Ok(n) => buf.extend_from_slice(&chunk[..n]),
                    }
                };
                let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
                let content_length: usize = head
                    .lines()
                    .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap_or(0)))
                    .unwrap_or(0);
                let mut body = buf[header_end..].to_vec();
                while body.len() < content_length {
                    match stream.read(&mut chunk) {
                        Ok(0) | Err(_) => break,
                        Ok(n) => body.extend_from_slice(&chunk[..n]),
                    }
                }
                let request: serde_json::Value =
                    serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                let seed = request["seed"].as_u64().unwrap_or(0);
                // Seeds 43/44/45 agree, later ones wander.
                let answer = if seed < 46 { 28 } else { 20 + seed };
                let content = format!("Summing the parts gives the total. Answer: {answer}");
                let reply = serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": content}}],
                    "usage": {"completion_tokens": 9}
                })
                .to_string();
                let response = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    format!("http://{addr}/v1")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = spawn_stub();
    println!("stub chat-completions server at {endpoint}\n");

    let descriptor = BackendDescriptor {
        kind: BackendKind::Http,
        endpoint: Some(endpoint),
        model_name: Some("local-model".into()),
        timeout_ms: 5_000,
    };
    let backend = HttpBackend::new(&descriptor, false)?;
    let (parallel, _) = default_schedules(5, 8, &Default::default())?;
    let prompt = Prompt::new("p1", "What is 13 + 15?")?;

    let outcomes = fan_out(&backend, &prompt, &parallel, 8, 0)?;
    let extractor = ExtractorConfig::default();
    let answers: Vec<_> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|g| {
            println!(
                "slot seed {}: {:?} ({} tokens, {:.1} ms)",
                g.params.seed(),
                g.text(),
                g.token_count(),
                g.latency_ms()
            );
            canonicalize(&extract_final_answer(g.text(), &extractor))
        })
        .collect();

    let report = compute_consensus(&answers)?;
    println!(
        "\nconsensus {:.2}, majority {:?} over {:?}",
        report.consensus, report.majority, report.counts
    );
    Ok(())
}
