//! Deterministic replay judge for tests and offline runs.
//!
//! Fixture format:
//!
//! ```json
//! {
//!   "default": "NO",
//!   "replies": [
//!     {"judge": "outcome", "window_start": 10.0, "reply": "YES\nGoal"},
//!     {"contains": "goal", "reply": "YES\nGoal"},
//!     {"judge": "tactical", "match_id": "m1", "half": 2, "fail": true}
//!   ]
//! }
//! ```
//!
//! Every field except `reply`/`fail` is an optional filter; the first entry
//! whose filters all match answers. `contains` is a case-insensitive
//! substring test on the window text. `fail` simulates a transport timeout.

use serde::Deserialize;

use super::client::{
    CompletionClient, CompletionReply, CompletionRequest, FinishStatus, TransportError,
};
use super::JudgeKind;

const START_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(default)]
    pub judge: Option<JudgeKind>,
    #[serde(default)]
    pub match_id: Option<String>,
    #[serde(default)]
    pub half: Option<u8>,
    #[serde(default)]
    pub window_start: Option<f64>,
    #[serde(default)]
    pub contains: Option<String>,
    #[serde(default)]
    pub reply: String,
    #[serde(default)]
    pub fail: bool,
}

impl ScriptEntry {
    fn matches(&self, req: &CompletionRequest) -> bool {
        let ctx = &req.context;
        self.judge.is_none_or(|j| j == ctx.judge)
            && self.match_id.as_ref().is_none_or(|m| *m == ctx.match_id)
            && self.half.is_none_or(|h| h == ctx.half)
            && self
                .window_start
                .is_none_or(|s| (s - ctx.window_start_s).abs() <= START_TOLERANCE_S)
            && self.contains.as_ref().is_none_or(|needle| {
                ctx.window_text
                    .to_lowercase()
                    .contains(&needle.to_lowercase())
            })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFixture {
    #[serde(default = "default_reply")]
    pub default: String,
    #[serde(default)]
    pub replies: Vec<ScriptEntry>,
}

fn default_reply() -> String {
    "NO".into()
}

impl ScriptFixture {
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedClient {
    fixture: ScriptFixture,
}

impl ScriptedClient {
    pub fn new(fixture: ScriptFixture) -> Self {
        Self { fixture }
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, TransportError> {
        let entry = self.fixture.replies.iter().find(|e| e.matches(request));
        match entry {
            Some(e) if e.fail => Err(TransportError::timeout("scripted failure")),
            Some(e) => Ok(CompletionReply {
                text: e.reply.clone(),
                finish: FinishStatus::Stop,
            }),
            None => Ok(CompletionReply {
                text: self.fixture.default.clone(),
                finish: FinishStatus::Stop,
            }),
        }
    }
}
