//! The generative side of the loop.
//!
//! A query is an ordered chat transcript; a response is the raw completion
//! plus the plan parsed out of it (or the reason none could be). Oracles are
//! session-scoped: one instance serves one problem's conversation.

mod http;
mod mock;
mod prompt;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Block, Problem};
use crate::plan::{parse_plan, Plan, PlanError};
use crate::semantics::Counterexample;

pub use http::{http_oracle_query, HttpConfig, HttpOracle};
pub use mock::{NoisyConfig, NoisyOracle, PerfectOracle, ScriptedOracle};
pub use prompt::{
    build_feedback_prompt, build_initial_prompt, build_unparsed_feedback, estimate_tokens, FeedbackMode,
    FewShotExample, PromptConfig, GOAL_GAP_SENTENCE, NO_PLAN_SENTENCE, RICH_PREFIX_SENTENCE, UNPARSEABLE_SENTENCE,
    WEAK_INVALID_SENTENCE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed API response: {0}")]
    MalformedApiResponse(String),
    #[error("scripted transcript exhausted after {served} responses")]
    TranscriptExhausted { served: usize },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("few-shot example {label} does not verify: {reason}")]
    InvalidFewShot { label: String, reason: String },
    #[error("reference solver failed: {0}")]
    NoReferencePlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleQuery {
    messages: Vec<Message>,
    pub problem_name: String,
    /// 1-based trial this query belongs to.
    pub trial: usize,
}

impl OracleQuery {
    pub fn new(messages: Vec<Message>, problem_name: impl Into<String>, trial: usize) -> Result<Self, OracleError> {
        match messages.first() {
            None => {
                return Err(OracleError::ContractViolation(
                    "a query needs at least one message".into(),
                ))
            }
            Some(m) if m.role == Role::Assistant => {
                return Err(OracleError::ContractViolation(
                    "the first message must come from the system or the user".into(),
                ))
            }
            Some(_) => {}
        }
        Ok(OracleQuery {
            messages,
            problem_name: problem_name.into(),
            trial,
        })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn total_chars(&self) -> usize {
        self.messages.iter().map(|m| m.content.chars().count()).sum()
    }

    pub fn token_estimate(&self) -> usize {
        self.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub raw_text: String,
    pub parsed: Option<Plan>,
    pub parse_error: Option<PlanError>,
    #[serde(default)]
    pub irregular_numbering: bool,
}

impl OracleResponse {
    /// Parses the plan block out of a raw completion.
    pub fn from_completion(raw_text: impl Into<String>, objects: &[Block]) -> Self {
        let raw_text = raw_text.into();
        match parse_plan(&raw_text, objects) {
            Ok(p) => OracleResponse {
                raw_text,
                parsed: Some(p.plan),
                parse_error: None,
                irregular_numbering: p.irregular_numbering,
            },
            Err(e) => OracleResponse {
                raw_text,
                parsed: None,
                parse_error: Some(e),
                irregular_numbering: false,
            },
        }
    }
}

/// A session with a solution oracle.
pub trait SolutionOracle: Send {
    fn query(&mut self, query: &OracleQuery, problem: &Problem) -> Result<OracleResponse, OracleError>;

    /// Called with each counterexample the verifier produced for this
    /// session's latest response.
    fn observe(&mut self, _counterexample: &Counterexample) {}

    fn describe(&self) -> String;
}

/// How to build a fresh oracle session for each problem.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Perfect,
    Noisy(NoisyConfig),
    Scripted(Vec<String>),
    Http(HttpConfig),
}

impl OracleSpec {
    pub fn session(&self, session_id: u64) -> Box<dyn SolutionOracle> {
        match self {
            OracleSpec::Perfect => Box::new(PerfectOracle),
            OracleSpec::Noisy(cfg) => Box::new(NoisyOracle::new(cfg.clone(), session_id)),
            OracleSpec::Scripted(responses) => Box::new(ScriptedOracle::new(responses.clone())),
            OracleSpec::Http(cfg) => Box::new(HttpOracle::new(cfg.clone())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            OracleSpec::Perfect => "perfect".into(),
            OracleSpec::Noisy(c) => format!(
                "noisy(p_err={}, seed={}, prefix_respecting={})",
                c.p_err, c.seed, c.prefix_respecting
            ),
            OracleSpec::Scripted(r) => format!("scripted({} responses)", r.len()),
            OracleSpec::Http(c) => format!("http({})", c.model),
        }
    }
}

/// Reads a transcript fixture: a JSON array of raw completion strings.
pub fn load_transcript(path: &Path) -> Result<Vec<String>, OracleError> {
    let text = std::fs::read_to_string(path).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))
}
