//! In-process HTTP server imitating an OpenAI-compatible endpoint, for tests
//! and offline demos.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

use crate::eval::{EmbeddingProvider, HashEmbedder};
use crate::llm::SUMMARY_RULES;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl RecordedRequest {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or(Value::Null)
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl MockResponse {
    pub fn json(status: u16, body: &Value) -> Self {
        MockResponse { status, headers: Vec::new(), body: body.to_string() }
    }

    /// A chat-completion response whose first choice carries `content`.
    pub fn chat(content: &str) -> Self {
        MockResponse::json(
            200,
            &json!({
                "id": "mock",
                "object": "chat.completion",
                "choices": [{ "index": 0, "message": { "role": "assistant", "content": content }, "finish_reason": "stop" }]
            }),
        )
    }

    pub fn rate_limited(retry_after_secs: Option<u32>) -> Self {
        let mut r = MockResponse::json(429, &json!({ "error": { "message": "rate limited" } }));
        if let Some(s) = retry_after_secs {
            r.headers.push(("Retry-After".into(), s.to_string()));
        }
        r
    }

    pub fn status(status: u16) -> Self {
        MockResponse::json(status, &json!({ "error": { "message": format!("status {status}") } }))
    }
}

pub type Handler = Box<dyn Fn(&RecordedRequest) -> MockResponse + Send + Sync>;

struct State {
    handler: Handler,
    delay: Duration,
    log: Mutex<Vec<RecordedRequest>>,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
    stop: AtomicBool,
}

pub struct MockServer {
    addr: SocketAddr,
    state: Arc<State>,
    acceptor: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(handler: Handler) -> std::io::Result<Self> {
        MockServer::start_with_delay(handler, Duration::ZERO)
    }

    /// Every request is held for `delay` before being answered.
    pub fn start_with_delay(handler: Handler, delay: Duration) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(State {
            handler,
            delay,
            log: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
            high_water: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
        });
        let acceptor_state = Arc::clone(&state);
        let acceptor = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if acceptor_state.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let state = Arc::clone(&acceptor_state);
                std::thread::spawn(move || serve(stream, &state));
            }
        });
        Ok(MockServer { addr, state, acceptor: Some(acceptor) })
    }

    /// Base URL suitable for `ClientConfig::base_url`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.log.lock().unwrap().len()
    }

    pub fn reset_log(&self) {
        self.state.log.lock().unwrap().clear();
        self.state.high_water.store(0, Ordering::SeqCst);
    }

    /// Largest number of requests observed in progress at once.
    pub fn max_concurrency(&self) -> usize {
        self.state.high_water.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.state.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, state: &State) {
    let Ok(request) = read_request(&stream) else { return };
    let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.high_water.fetch_max(now, Ordering::SeqCst);
    state.log.lock().unwrap().push(request.clone());
    if !state.delay.is_zero() {
        std::thread::sleep(state.delay);
    }
    let response = (state.handler)(&request);
    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    let _ = write_response(&stream, &response);
    let _ = stream.shutdown(Shutdown::Write);
}

fn read_request(stream: &TcpStream) -> std::io::Result<RecordedRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    Ok(RecordedRequest { method, path, headers, body: String::from_utf8_lossy(&body).into_owned() })
}

fn write_response(mut stream: &TcpStream, r: &MockResponse) -> std::io::Result<()> {
    let mut head = format!(
        "HTTP/1.1 {} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
        r.status,
        r.body.len()
    );
    for (k, v) in &r.headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    stream.write_all(head.as_bytes())?;
    stream.write_all(r.body.as_bytes())?;
    stream.flush()
}

/// Replies from `script` in order; the last entry repeats once exhausted.
pub fn scripted(script: Vec<MockResponse>) -> Handler {
    assert!(!script.is_empty(), "script needs at least one response");
    let next = AtomicUsize::new(0);
    Box::new(move |_| {
        let i = next.fetch_add(1, Ordering::SeqCst);
        script[i.min(script.len() - 1)].clone()
    })
}

fn words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Deterministic stand-in for the cataloguing model. The title comes from
/// the first content line, the abstract from the opening words; the rules
/// variant gets a templated opening.
pub fn cataloguer_reply(request: &Value) -> String {
    let messages = request["messages"].as_array().cloned().unwrap_or_default();
    let text_of = |role: &str| {
        messages
            .iter()
            .find(|m| m["role"] == role)
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
            .to_string()
    };
    let system = text_of("system");
    let user = text_of("user");
    let (site_url, content) = user.split_once('\n').unwrap_or((user.as_str(), ""));
    let host = site_url
        .trim()
        .trim_start_matches("https://")
        .trim_start_matches("http://")
        .trim_end_matches('/');
    // Skip navigation bars such as "Home | About | Contact".
    let first_line = content.lines().find(|l| !l.trim().is_empty() && !l.contains(" | ")).unwrap_or(host);
    let title = words(first_line, 6);
    let body = words(content, 40);
    let abstract_text = if system.contains(SUMMARY_RULES) {
        format!("The website of {title} ({host}) describes: {body}")
    } else {
        body
    };
    json!({ "title": title, "abstract": abstract_text }).to_string()
}

/// Per-token embeddings from [`HashEmbedder`] for `input`.
pub fn embeddings_reply(request: &Value, embedder: &HashEmbedder) -> Value {
    let input = request["input"].as_str().unwrap_or_default();
    let tokens = embedder.embed(input).unwrap_or_default();
    json!({
        "object": "list",
        "data": [{
            "index": 0,
            "tokens": tokens.iter().map(|t| t.token.clone()).collect::<Vec<_>>(),
            "token_embeddings": tokens.iter().map(|t| t.vector.clone()).collect::<Vec<_>>(),
        }]
    })
}

/// Serves `/chat/completions` with [`cataloguer_reply`] and `/embeddings`
/// with [`embeddings_reply`].
pub fn openai_compatible(embedder: HashEmbedder) -> Handler {
    Box::new(move |req| {
        let body = req.json();
        if req.path.ends_with("/chat/completions") {
            MockResponse::chat(&cataloguer_reply(&body))
        } else if req.path.ends_with("/embeddings") {
            MockResponse::json(200, &embeddings_reply(&body, &embedder))
        } else {
            MockResponse::status(404)
        }
    })
}
