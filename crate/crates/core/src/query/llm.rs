//! Client for an OpenAI-style chat-completion endpoint that turns free text
//! into SQL. The returned statement is never executed unvalidated.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_query, to_sql, validate_sql, QueryContext, ValidatedSelect};
use crate::error::{Error, Result};
use crate::replay::{FeatureSchema, TABLE};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            temperature: DEFAULT_TEMPERATURE,
            api_key_env: None,
            timeout_secs: 30,
        }
    }
}

impl LlmConfig {
    /// Overrides fields from `XRL_LLM_BASE_URL`, `XRL_LLM_MODEL`,
    /// `XRL_LLM_TEMPERATURE` and `XRL_LLM_API_KEY_ENV` when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(v) = std::env::var("XRL_LLM_BASE_URL") {
            self.base_url = v;
        }
        if let Ok(v) = std::env::var("XRL_LLM_MODEL") {
            self.model = v;
        }
        if let Some(t) = std::env::var("XRL_LLM_TEMPERATURE").ok().and_then(|v| v.parse().ok()) {
            self.temperature = t;
        }
        if let Ok(v) = std::env::var("XRL_LLM_API_KEY_ENV") {
            self.api_key_env = Some(v);
        }
        self
    }
}

/// Few-shot pairs shown to the model. Column names follow the database.
pub const FEW_SHOT: [(&str, &str); 4] = [
    ("when will you do push_left?", "SELECT * FROM replay WHERE action = 0"),
    (
        "what do you do when the position is above 0.4?",
        "SELECT * FROM replay WHERE f_position > 0.4",
    ),
    (
        "what happens if velocity is negative and position is below -0.5?",
        "SELECT * FROM replay WHERE f_position < -0.5 AND f_velocity < 0.0",
    ),
    (
        "when do you push right while moving left?",
        "SELECT * FROM replay WHERE action = 2 AND f_velocity < 0.0",
    ),
];

/// Chat messages for one question: system prompt with the table layout,
/// the few-shot pairs, then the question.
pub fn build_messages(question: &str, schema: &FeatureSchema, actions: &[String]) -> Vec<Value> {
    let cols: Vec<String> = schema
        .features()
        .iter()
        .map(|f| {
            if f.unit.is_empty() {
                format!("{} REAL", f.column())
            } else {
                format!("{} REAL -- {}", f.column(), f.unit)
            }
        })
        .collect();
    let acts: Vec<String> = actions.iter().enumerate().map(|(i, a)| format!("{i} = {a}")).collect();
    let system = format!(
        "Translate the user's question about an agent into one SQLite SELECT statement.\n\
         Table {TABLE}(episode INTEGER, step INTEGER, {}, action INTEGER, reward REAL, done INTEGER, truncated INTEGER).\n\
         Actions: {}.\n\
         Answer with the SQL statement only, using SELECT * FROM {TABLE} WHERE ...",
        cols.join(", "),
        acts.join(", ")
    );
    let mut msgs = vec![json!({"role": "system", "content": system})];
    for (q, a) in FEW_SHOT {
        msgs.push(json!({"role": "user", "content": q}));
        msgs.push(json!({"role": "assistant", "content": a}));
    }
    msgs.push(json!({"role": "user", "content": question}));
    msgs
}

/// Strips code fences and surrounding prose markers from a model reply.
pub fn extract_sql(reply: &str) -> String {
    let mut s = reply.trim();
    if let Some(rest) = s.strip_prefix("```") {
        s = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        s = s.rsplit_once("```").map_or(s, |(body, _)| body);
    }
    s.trim().to_string()
}

/// Sends the question and returns the model's raw SQL candidate.
pub fn llm_translate(question: &str, cfg: &LlmConfig, schema: &FeatureSchema, actions: &[String]) -> Result<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
        .build()
        .into();
    let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
    let body = json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": build_messages(question, schema, actions),
    });
    let mut req = agent.post(&url);
    if let Some(var) = &cfg.api_key_env {
        if let Ok(key) = std::env::var(var) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
    }
    let mut resp = req.send_json(&body).map_err(|e| Error::Unavailable(format!("{url}: {e}")))?;
    let v: Value = resp
        .body_mut()
        .read_json()
        .map_err(|e| Error::Unavailable(format!("bad response from {url}: {e}")))?;
    let content = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| Error::Unavailable(format!("response from {url} has no message content")))?;
    Ok(extract_sql(content))
}

/// Result of the free-text path. When the model's candidate is rejected the
/// structured parser is tried on the same text and both outcomes are kept.
#[derive(Debug)]
pub struct Translation {
    pub candidate: String,
    pub accepted: Option<ValidatedSelect>,
    pub rejection: Option<String>,
    pub fallback: Option<Result<ValidatedSelect>>,
}

impl Translation {
    /// The statement to run, if any path produced one.
    pub fn statement(&self) -> Option<&ValidatedSelect> {
        self.accepted
            .as_ref()
            .or_else(|| self.fallback.as_ref().and_then(|r| r.as_ref().ok()))
    }
}

pub fn translate(question: &str, cfg: &LlmConfig, ctx: QueryContext<'_>) -> Result<Translation> {
    let candidate = llm_translate(question, cfg, ctx.features, ctx.actions)?;
    Ok(check_candidate(question, candidate, ctx))
}

pub fn check_candidate(question: &str, candidate: String, ctx: QueryContext<'_>) -> Translation {
    match validate_sql(&candidate, ctx.features) {
        Ok(v) => Translation {
            candidate,
            accepted: Some(v),
            rejection: None,
            fallback: None,
        },
        Err(e) => {
            let fallback = parse_query(question, ctx).and_then(|ast| validate_sql(&to_sql(&ast, ctx.features), ctx.features));
            Translation {
                candidate,
                accepted: None,
                rejection: Some(e.to_string()),
                fallback: Some(fallback),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::from_names(&["position", "velocity"]).unwrap()
    }

    fn actions() -> Vec<String> {
        ["push_left", "no_push", "push_right"].map(String::from).to_vec()
    }

    /// One-shot HTTP server replying with `content`; returns the base URL and
    /// a handle yielding the request body it received.
    fn serve(content: &'static str) -> (String, thread::JoinHandle<Value>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let h = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
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
            let reply = json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            serde_json::from_slice(&body).unwrap()
        });
        (url, h)
    }

    #[test]
    fn prompt_has_schema_and_examples() {
        let msgs = build_messages("q", &schema(), &actions());
        assert!(msgs[0]["content"].as_str().unwrap().contains("f_velocity REAL"));
        assert!(msgs.len() >= 2 + 2 * 3);
        assert_eq!(msgs.last().unwrap()["content"], "q");
    }

    #[test]
    fn extract_strips_fences() {
        assert_eq!(extract_sql("```sql\nSELECT * FROM replay\n```"), "SELECT * FROM replay");
        assert_eq!(extract_sql("  SELECT 1 "), "SELECT 1");
    }

    #[test]
    fn round_trip_against_mock_endpoint() {
        let (url, h) = serve("```sql\nSELECT * FROM replay WHERE action = 0\n```");
        let cfg = LlmConfig {
            base_url: url,
            ..LlmConfig::default()
        };
        let s = schema();
        let a = actions();
        let ctx = QueryContext {
            features: &s,
            actions: &a,
            predicates: None,
        };
        let t = translate("when will you do push_left?", &cfg, ctx).unwrap();
        assert_eq!(t.statement().unwrap().sql(), "SELECT * FROM replay WHERE action = 0");
        let req = h.join().unwrap();
        assert_eq!(req["temperature"], 0.5);
        assert_eq!(req["model"], "default");
    }

    #[test]
    fn destructive_reply_is_rejected_with_fallback() {
        let s = schema();
        let a = actions();
        let ctx = QueryContext {
            features: &s,
            actions: &a,
            predicates: None,
        };
        let t = check_candidate("when action = push_left", "DROP TABLE replay".into(), ctx);
        assert!(t.accepted.is_none());
        assert!(t.rejection.is_some());
        assert_eq!(t.statement().unwrap().sql(), "SELECT * FROM replay WHERE action = 0");
    }

    #[test]
    fn endpoint_down_is_unavailable() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = LlmConfig {
            base_url: format!("http://127.0.0.1:{port}/v1"),
            timeout_secs: 2,
            ..LlmConfig::default()
        };
        let e = llm_translate("q", &cfg, &schema(), &actions()).unwrap_err();
        assert!(matches!(e, Error::Unavailable(_)), "{e:?}");
    }
}
