//! Chat-completion backend over HTTP.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::extract::extract_assembly;
use super::prompt::build_prompt;
use super::{AssemblyFragment, Backend, TranslateError, TranslationRequest};
use crate::splitter::{BlockView, Decision, HeuristicPolicy, PartKind, SplitConfig, SplitPolicy};

const SYSTEM_PROMPT: &str = "You are a careful compiler that emits GNU assembler x86-64 code in AT&T syntax.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Bearer token; read from the environment, never from config files.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub backoff_ms: u64,
    /// Requests per second across all threads; zero disables throttling.
    pub rate_limit: f64,
    pub temperature: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            timeout_secs: 120,
            attempts: 3,
            backoff_ms: 500,
            rate_limit: 0.0,
            temperature: 0.0,
        }
    }
}

impl LlmConfig {
    /// Overlays `LEGOC_LLM_ENDPOINT`, `LEGOC_LLM_MODEL` and `LEGOC_LLM_API_KEY`.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var("LEGOC_LLM_ENDPOINT") {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var("LEGOC_LLM_MODEL") {
            self.model = v;
        }
        if let Ok(v) = std::env::var("LEGOC_LLM_API_KEY") {
            self.api_key = Some(v);
        }
        self
    }
}

struct Bucket {
    tokens: f64,
    last: Instant,
}

pub struct LlmBackend {
    config: LlmConfig,
    client: reqwest::blocking::Client,
    bucket: Mutex<Bucket>,
}

impl LlmBackend {
    pub fn new(config: LlmConfig) -> Result<Self, TranslateError> {
        if config.endpoint.is_empty() {
            return Err(TranslateError::Config("no LLM endpoint configured".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| TranslateError::Config(e.to_string()))?;
        Ok(LlmBackend {
            client,
            bucket: Mutex::new(Bucket {
                tokens: config.rate_limit.max(1.0),
                last: Instant::now(),
            }),
            config,
        })
    }

    fn throttle(&self) {
        let rate = self.config.rate_limit;
        if rate <= 0.0 {
            return;
        }
        loop {
            let wait = {
                let mut b = self.bucket.lock().expect("bucket lock");
                let now = Instant::now();
                b.tokens = (b.tokens + now.duration_since(b.last).as_secs_f64() * rate).min(rate.max(1.0));
                b.last = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                (1.0 - b.tokens) / rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }

    /// Sends one prompt and returns the reply text, retrying transport
    /// failures, 429 and 5xx with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, TranslateError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        });
        let attempts = self.config.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            self.throttle();
            let mut rb = self.client.post(&self.config.endpoint).json(&body);
            if let Some(k) = &self.config.api_key {
                rb = rb.bearer_auth(k);
            }
            let resp = match rb.send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                last = format!("HTTP {status}");
                continue;
            }
            if !status.is_success() {
                let text = resp.text().unwrap_or_default();
                return Err(TranslateError::Backend(format!("HTTP {status}: {text}")));
            }
            let v: serde_json::Value = resp.json().map_err(|e| TranslateError::Backend(e.to_string()))?;
            let content = v["choices"][0]["message"]["content"].as_str().unwrap_or("");
            if content.trim().is_empty() {
                return Err(TranslateError::EmptyOutput);
            }
            return Ok(content.to_string());
        }
        Err(TranslateError::Backend(format!("gave up after {attempts} attempts: {last}")))
    }
}

impl Backend for LlmBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<AssemblyFragment, TranslateError> {
        if req.part.as_ref().is_some_and(|c| c.part.kind == PartKind::Label) {
            return Ok(AssemblyFragment::default());
        }
        let reply = self.complete(&build_prompt(req))?;
        extract_assembly(&reply)
    }
}

/// Asks the model whether a block should be split further; falls back to the
/// token heuristic when the endpoint fails or the answer is unclear.
pub struct LlmSplitPolicy {
    pub backend: LlmBackend,
}

impl SplitPolicy for LlmSplitPolicy {
    fn decide(&self, block: &BlockView<'_>, config: &SplitConfig) -> Decision {
        if !block.is_control {
            return Decision::Keep;
        }
        let prompt = format!(
            "The following C block is about {} tokens long and sits at loop depth {}. \
             Should it be translated to assembly as one unit (answer `keep`) or split into \
             smaller parts (answer `split`)? Answer with one word.\n```c\n{}\n```",
            block.tokens, block.loop_depth, block.text
        );
        match self.backend.complete(&prompt).map(|r| r.to_ascii_lowercase()) {
            Ok(r) if r.contains("split") => Decision::Split,
            Ok(r) if r.contains("keep") => Decision::Keep,
            _ => HeuristicPolicy.decide(block, config),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Serves the given (status, body) pairs, one per connection.
    fn serve(replies: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let (mut s, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                loop {
                    let n = s.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf);
                    if let Some(h) = text.find("\r\n\r\n") {
                        let len = text[..h]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if buf.len() >= h + 4 + len {
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                s.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    fn config(endpoint: String) -> LlmConfig {
        LlmConfig {
            endpoint,
            model: "m".into(),
            backoff_ms: 1,
            timeout_secs: 5,
            ..LlmConfig::default()
        }
    }

    fn reply(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let url = serve(vec![
            (500, "{}".into()),
            (200, reply("Sure:\n```asm\n\tmovq $0, %rax\n```")),
        ]);
        let b = LlmBackend::new(config(url)).unwrap();
        let text = b.complete("hi").unwrap();
        assert!(extract_assembly(&text).unwrap().text.contains("movq $0, %rax"));
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let url = serve(vec![(503, "{}".into()), (503, "{}".into()), (503, "{}".into())]);
        let b = LlmBackend::new(config(url)).unwrap();
        match b.complete("hi") {
            Err(TranslateError::Backend(m)) => assert!(m.contains("3 attempts"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_endpoint_is_a_config_error() {
        assert!(matches!(LlmBackend::new(LlmConfig::default()), Err(TranslateError::Config(_))));
    }
}
