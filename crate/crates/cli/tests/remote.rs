use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use claimpref::verifier::VerifierClient;
use claimpref_cli::remote::RemoteScorer;

/// Serve one canned status per connection; 200 replies echo the request id.
fn serve(statuses: Vec<u16>) -> (String, Arc<Mutex<usize>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    let hits = Arc::new(Mutex::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for (stream, status) in listener.incoming().zip(statuses) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            *counter.lock().unwrap() += 1;
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let reply = if status == 200 {
                serde_json::json!({"request_id": req["request_id"], "logits": [2.0, -1.0, 0.5]}).to_string()
            } else {
                "{}".to_owned()
            };
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, hits)
}

fn scorer(url: &str, retries: u32) -> RemoteScorer {
    RemoteScorer::new(url, Duration::from_secs(5), retries).with_backoff(Duration::from_millis(1))
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, hits) = serve(vec![503, 503, 200]);
    let logits = scorer(&url, 3).score("x was given", &["x was given on day 2."]).unwrap();
    assert!(logits.is_finite());
    assert_eq!(*hits.lock().unwrap(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = serve(vec![400, 200]);
    let err = scorer(&url, 3).score("x", &[]).unwrap_err();
    assert!(err.to_string().contains("HTTP 400"), "{err}");
    assert_eq!(*hits.lock().unwrap(), 1);
}

#[test]
fn retry_budget_is_bounded() {
    let (url, hits) = serve(vec![500; 5]);
    assert!(scorer(&url, 2).score("x", &[]).is_err());
    assert_eq!(*hits.lock().unwrap(), 3);
}
