use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::pipeio::encode_rgb_png;

/// One question about one image of one video.
#[derive(Clone, Debug)]
pub struct VlmQuery<'a> {
    pub video_id: &'a str,
    pub prompt: String,
    pub image: &'a RgbFrame,
}

/// A vision-language model reachable for single-turn questions.
///
/// Implementations are shared across worker threads and must not touch
/// pipeline state.
pub trait VlmClient: Send + Sync {
    fn ask(&self, query: &VlmQuery<'_>) -> Result<String>;
}

/// Canned answers keyed by video id, with an optional fallback. Records the
/// prompts it receives.
#[derive(Debug, Default)]
pub struct MockVlmClient {
    answers: BTreeMap<String, String>,
    fallback: Option<String>,
    seen: Mutex<Vec<(String, String)>>,
}

impl MockVlmClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers every video with `text`.
    pub fn always(text: impl Into<String>) -> Self {
        Self {
            fallback: Some(text.into()),
            ..Self::default()
        }
    }

    pub fn with_answer(mut self, video_id: impl Into<String>, text: impl Into<String>) -> Self {
        self.answers.insert(video_id.into(), text.into());
        self
    }

    /// `(video_id, prompt)` pairs received so far, in call order.
    pub fn queries(&self) -> Vec<(String, String)> {
        self.seen.lock().map(|v| v.clone()).unwrap_or_default()
    }
}

impl VlmClient for MockVlmClient {
    fn ask(&self, query: &VlmQuery<'_>) -> Result<String> {
        if let Ok(mut seen) = self.seen.lock() {
            seen.push((query.video_id.to_owned(), query.prompt.clone()));
        }
        self.answers
            .get(query.video_id)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| Error::Transport(format!("mock has no answer for {:?}", query.video_id)))
    }
}

#[derive(Serialize)]
struct AskBody<'a> {
    prompt: &'a str,
    image_base64: String,
}

#[derive(Deserialize)]
struct AskReply {
    text: String,
}

/// JSON-over-HTTP client: POSTs `{prompt, image_base64}` (PNG payload) and
/// expects `{text}` back.
#[derive(Debug)]
pub struct HttpVlmClient {
    endpoint: String,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpVlmClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            token,
            http,
        })
    }

    /// Reads the bearer token from environment variable `token_env`, if set.
    pub fn from_env(endpoint: impl Into<String>, token_env: &str, timeout: Duration) -> Result<Self> {
        Self::new(endpoint, std::env::var(token_env).ok(), timeout)
    }
}

impl VlmClient for HttpVlmClient {
    fn ask(&self, query: &VlmQuery<'_>) -> Result<String> {
        let png = encode_rgb_png(query.image)?;
        let body = AskBody {
            prompt: &query.prompt,
            image_base64: base64::engine::general_purpose::STANDARD.encode(png),
        };
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let reply: AskReply = req
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(reply.text)
    }
}
