// SPDX-License-Identifier: MIT OR Apache-2.0

//! Blocking client for OpenAI-compatible chat-completion endpoints.

use std::sync::LazyLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use crate::error::LlmError;
use crate::explanation::{LlmMetadata, Narrative};

/// Environment variable holding the bearer token, if the endpoint needs one.
pub const API_KEY_ENV: &str = "ROUTINECD_LLM_API_KEY";

const SYSTEM_PROMPT: &str = "You write short, factual summaries of daily behavior for clinicians.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    /// Base URL up to and including the API version, e.g. `http://localhost:11434/v1`.
    pub base_url: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Additional attempts after the first failure.
    pub retries: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:11434/v1".into(),
            model: "llama3".into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retries: 1,
            temperature: 0.0,
            seed: Some(0),
        }
    }
}

impl LlmConfig {
    /// Fills `api_key` from [`API_KEY_ENV`] when set.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency: Duration,
}

pub struct ChatClient {
    config: LlmConfig,
    agent: ureq::Agent,
}

fn map_err(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Timeout(_) => LlmError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => LlmError::Timeout,
        ureq::Error::Json(j) => LlmError::Malformed(j.to_string()),
        other => LlmError::Network(other.to_string()),
    }
}

impl ChatClient {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// One request, no retries.
    pub fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.config.temperature,
            "stream": false,
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        let mut request = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }

        let started = Instant::now();
        let mut response = request.send_json(&body).map_err(map_err)?;
        let status = response.status().as_u16();
        let payload: Value = response.body_mut().read_json().map_err(map_err)?;
        let latency = started.elapsed();
        if !(200..300).contains(&status) {
            return Err(LlmError::Network(format!("HTTP status {status}")));
        }
        let text = payload["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?
            .to_string();
        Ok(Completion {
            text,
            prompt_tokens: payload["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: payload["usage"]["completion_tokens"].as_u64(),
            latency,
        })
    }

    /// Runs `attempt` on fresh completions until it succeeds or retries run out.
    fn with_retries<T>(
        &self,
        prompt: &str,
        attempt: impl Fn(&Completion) -> Result<T, LlmError>,
    ) -> Result<(T, LlmMetadata), LlmError> {
        let mut last = LlmError::Network("no attempt made".into());
        for _ in 0..=self.config.retries {
            match self.complete(prompt).and_then(|c| attempt(&c).map(|v| (v, c))) {
                Ok((value, c)) => {
                    let meta = LlmMetadata {
                        model: self.config.model.clone(),
                        latency_ms: c.latency.as_millis() as u64,
                        prompt_tokens: c.prompt_tokens,
                        completion_tokens: c.completion_tokens,
                    };
                    return Ok((value, meta));
                }
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// Free-text answer, retried on transport failures and empty bodies.
    pub fn describe(&self, prompt: &str) -> Result<(String, LlmMetadata), LlmError> {
        self.with_retries(prompt, |c| {
            let t = c.text.trim();
            if t.is_empty() {
                Err(LlmError::Malformed("empty answer".into()))
            } else {
                Ok(t.to_string())
            }
        })
    }
}

static SECTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[\s*#_]*([ABC])\s*[).:]").unwrap());
static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s*_]*(global behavioral trend|habit dynamics|potential implications)[\s*_]*:?[\s*_]*").unwrap()
});

/// Splits an `A) ... B) ... C) ...` answer into its three parts.
pub fn parse_sections(text: &str) -> Result<Narrative, LlmError> {
    let mut starts: [Option<(usize, usize)>; 3] = [None; 3];
    for cap in SECTION.captures_iter(text) {
        let idx = (cap[1].as_bytes()[0] - b'A') as usize;
        let whole = cap.get(0).unwrap();
        if starts[idx].is_none() && starts[..idx].iter().all(Option::is_some) {
            starts[idx] = Some((whole.start(), whole.end()));
        }
    }
    for (i, s) in starts.iter().enumerate() {
        if s.is_none() {
            return Err(LlmError::MissingSection((b'A' + i as u8) as char));
        }
    }
    let starts = starts.map(Option::unwrap);
    let body = |i: usize| -> Result<String, LlmError> {
        let end = if i < 2 { starts[i + 1].0 } else { text.len() };
        let raw = &text[starts[i].1..end];
        let decor = |c: char| c.is_whitespace() || matches!(c, '*' | '_' | ':');
        let cleaned = HEADING
            .replace(raw.trim_start_matches(decor), "")
            .trim_start_matches(decor)
            .trim()
            .to_string();
        if cleaned.is_empty() {
            Err(LlmError::MissingSection((b'A' + i as u8) as char))
        } else {
            Ok(cleaned)
        }
    };
    Ok(Narrative {
        global_trend: body(0)?,
        habit_dynamics: body(1)?,
        implications: body(2)?,
    })
}

/// Requests the three-part interpretation; a missing section counts as a failed attempt.
pub fn llm_explain(prompt: &str, client: &ChatClient) -> Result<(Narrative, LlmMetadata), LlmError> {
    client.with_retries(prompt, |c| parse_sections(&c.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labeled_sections() {
        let text = "A) Global Behavioral Trend:\nLess walking.\n\nB) Habit Dynamics:\nMorning walks stopped.\n\nC) Potential Implications:\nMay reflect simplification.";
        let n = parse_sections(text).unwrap();
        assert_eq!(n.global_trend, "Less walking.");
        assert_eq!(n.habit_dynamics, "Morning walks stopped.");
        assert_eq!(n.implications, "May reflect simplification.");
    }

    #[test]
    fn parses_markdown_variants() {
        let text = "**A. Global Behavioral Trend**: one\n**B.** two\n### C: three";
        let n = parse_sections(text).unwrap();
        assert_eq!(
            (
                n.global_trend.as_str(),
                n.habit_dynamics.as_str(),
                n.implications.as_str()
            ),
            ("one", "two", "three")
        );
    }

    #[test]
    fn missing_section_reported() {
        assert!(matches!(
            parse_sections("A) one\nB) two"),
            Err(LlmError::MissingSection('C'))
        ));
        assert!(matches!(
            parse_sections("B) two\nC) three"),
            Err(LlmError::MissingSection('A'))
        ));
        assert!(matches!(
            parse_sections("A) one\nB)\nC) three"),
            Err(LlmError::MissingSection('B'))
        ));
    }

    #[test]
    fn unreachable_endpoint_is_network_error() {
        let client = ChatClient::new(LlmConfig {
            base_url: "http://127.0.0.1:9".into(),
            timeout: Duration::from_secs(2),
            retries: 0,
            ..Default::default()
        });
        assert!(matches!(
            client.complete("hi"),
            Err(LlmError::Network(_) | LlmError::Timeout)
        ));
    }
}
