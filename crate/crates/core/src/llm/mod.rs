//! Provider abstraction for every generative call, with retries and the
//! spec-level operations built on top of it.

pub mod http;
pub mod mock;
pub mod prompts;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::disagreement::{Disagreement, Predicate};
use crate::pool::QA;
use crate::question::template_question;
use crate::spec::{normalize_labels, parse_spec, Spec};

pub use http::{HttpProvider, ProviderConfig};
pub use mock::ScriptedProvider;

/// What a call is for. Providers may ignore it; the scripted mock keys its
/// replies on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    CandidateSpec,
    RepairSpec,
    PhraseQuestion,
    FinalSpec,
    OracleAnswer,
    BaselineQuestion,
    RankQuestions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    FreeText,
    JsonObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub response_format: ResponseFormat,
}

/// Failure reported by a provider for a single attempt.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("call budget of {0} requests exceeded")]
    BudgetExceeded(usize),
    #[error("malformed response: {reason}")]
    MalformedResponse { reason: String, reply: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no candidate reply could be parsed as a spec")]
    AllCandidatesUnparseable,
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, kind: CallKind, request: &ChatRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// No sleeping between attempts; used with in-process providers.
    pub fn immediate(max_retries: u32) -> Self {
        Self { max_retries, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.min(16)).min(self.max_delay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub candidate_temperature: f64,
    pub phrasing_temperature: f64,
    pub final_temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { candidate_temperature: 0.9, phrasing_temperature: 0.2, final_temperature: 0.2, max_tokens: 2048 }
    }
}

/// Outcome of the single final generation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalOutcome {
    pub spec: Spec,
    /// Set when no parseable spec could be obtained and `spec` is empty.
    pub flagged: bool,
}

/// Retrying front door to a [`ChatProvider`].
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
    generation: GenerationConfig,
    call_budget: Option<usize>,
    calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("retry", &self.retry)
            .field("generation", &self.generation)
            .field("call_budget", &self.call_budget)
            .finish_non_exhaustive()
    }
}

/// Strips a surrounding Markdown code fence, if any.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(inner) = t.strip_prefix("```") else { return t };
    let inner = inner.split_once('\n').map(|(_, rest)| rest).unwrap_or("");
    inner.trim_end().strip_suffix("```").unwrap_or(inner).trim()
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            retry: RetryPolicy::default(),
            generation: GenerationConfig::default(),
            call_budget: None,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_generation(mut self, generation: GenerationConfig) -> Self {
        self.generation = generation;
        self
    }

    /// Caps the number of provider requests this gateway (and its clones) may issue.
    pub fn with_call_budget(mut self, max_calls: usize) -> Self {
        self.call_budget = Some(max_calls);
        self
    }

    pub fn generation(&self) -> &GenerationConfig {
        &self.generation
    }

    pub fn calls_made(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, kind: CallKind, request: &ChatRequest) -> Result<String, LlmError> {
        if !(0.0..=2.0).contains(&request.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", request.temperature)));
        }
        if request.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        let mut last_error = String::new();
        for attempt in 0..=self.retry.max_retries {
            if let Some(budget) = self.call_budget {
                if self.calls.fetch_add(1, Ordering::SeqCst) >= budget {
                    return Err(LlmError::BudgetExceeded(budget));
                }
            } else {
                self.calls.fetch_add(1, Ordering::SeqCst);
            }
            match self.provider.complete(kind, request) {
                Ok(text) => return check_format(text, request.response_format),
                Err(ProviderError::Transient(msg)) => {
                    debug!(?kind, attempt, %msg, "transient provider failure");
                    last_error = msg;
                    if attempt < self.retry.max_retries {
                        let delay = self.retry.delay(attempt);
                        if !delay.is_zero() {
                            std::thread::sleep(delay);
                        }
                    }
                }
                Err(ProviderError::Fatal(msg)) => return Err(LlmError::ProviderUnavailable(msg)),
            }
        }
        Err(LlmError::ProviderUnavailable(format!(
            "gave up after {} attempts: {last_error}",
            self.retry.max_retries + 1
        )))
    }

    fn request(&self, system: &str, user: String, temperature: f64, format: ResponseFormat) -> ChatRequest {
        ChatRequest {
            system_prompt: system.to_string(),
            user_prompt: user,
            temperature,
            max_tokens: self.generation.max_tokens,
            response_format: format,
        }
    }

    pub fn candidate_request(&self, intent: &str, history: &[QA], temperature: f64) -> ChatRequest {
        let history = prompts::render_history(history);
        let user = prompts::render(prompts::CANDIDATE_USER, &[("intent", intent), ("history", &history)]);
        self.request(prompts::CANDIDATE_SYSTEM, user, temperature, ResponseFormat::JsonObject)
    }

    pub fn final_request(&self, intent: &str, history: &[QA]) -> ChatRequest {
        let history = prompts::render_history(history);
        let user = prompts::render(prompts::FINAL_USER, &[("intent", intent), ("history", &history)]);
        self.request(prompts::CANDIDATE_SYSTEM, user, self.generation.final_temperature, ResponseFormat::JsonObject)
    }

    pub fn question_request(&self, predicate: &Predicate) -> ChatRequest {
        let description = describe_predicate(predicate);
        let predicate_json = serde_json::to_string(predicate).expect("predicate serializes");
        let user = prompts::render(
            prompts::QUESTION_USER,
            &[("description", &description), ("predicate_json", &predicate_json)],
        );
        self.request(prompts::QUESTION_SYSTEM, user, self.generation.phrasing_temperature, ResponseFormat::FreeText)
    }

    /// Asks for one spec and parses it, with a single repair round-trip on
    /// malformed output. `Ok(None)` means both attempts were unusable.
    fn spec_call(&self, kind: CallKind, request: &ChatRequest) -> Result<Option<Spec>, LlmError> {
        let (reply, reason) = match self.complete(kind, request) {
            Ok(text) => match parse_spec(&text) {
                Ok(spec) => return Ok(Some(normalize_labels(&spec))),
                Err(e) => (text, e.to_string()),
            },
            Err(LlmError::MalformedResponse { reason, reply }) => (reply, reason),
            Err(e) => return Err(e),
        };
        debug!(?kind, %reason, "repairing malformed spec reply");
        let user = prompts::render(prompts::REPAIR_USER, &[("error", &reason), ("reply", &reply)]);
        let repair = self.request(prompts::CANDIDATE_SYSTEM, user, self.generation.final_temperature, ResponseFormat::JsonObject);
        match self.complete(CallKind::RepairSpec, &repair) {
            Ok(text) => Ok(parse_spec(&text).ok().map(|s| normalize_labels(&s))),
            Err(LlmError::MalformedResponse { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Samples `n` candidate specs conditioned on the intent and history.
    /// Replies that stay unparseable after one repair attempt are dropped.
    pub fn generate_candidate_specs(
        &self,
        intent: &str,
        history: &[QA],
        n: usize,
        temperature: f64,
    ) -> Result<Vec<Spec>, LlmError> {
        if n == 0 {
            return Err(LlmError::InvalidRequest("n must be at least 1".into()));
        }
        let request = self.candidate_request(intent, history, temperature);
        let mut specs = Vec::with_capacity(n);
        for _ in 0..n {
            if let Some(spec) = self.spec_call(CallKind::CandidateSpec, &request)? {
                specs.push(spec);
            }
        }
        if specs.is_empty() {
            return Err(LlmError::AllCandidatesUnparseable);
        }
        Ok(specs)
    }

    /// Phrases a disagreement as a yes/no question; falls back to the
    /// canonical template when the provider fails or replies with nothing.
    pub fn phrase_question(&self, d: &Disagreement) -> String {
        self.phrase_predicate(&d.predicate)
    }

    pub fn phrase_predicate(&self, predicate: &Predicate) -> String {
        let request = self.question_request(predicate);
        match self.complete(CallKind::PhraseQuestion, &request) {
            Ok(text) => match first_line(&text) {
                Some(line) => line,
                None => template_question(predicate),
            },
            Err(e) => {
                debug!(error = %e, "question phrasing fell back to template");
                template_question(predicate)
            }
        }
    }

    /// One final spec conditioned on the intent and the full history.
    pub fn final_generation(&self, intent: &str, history: &[QA]) -> FinalOutcome {
        let request = self.final_request(intent, history);
        match self.spec_call(CallKind::FinalSpec, &request) {
            Ok(Some(spec)) => FinalOutcome { spec, flagged: false },
            Ok(None) => FinalOutcome { spec: Spec::new(), flagged: true },
            Err(e) => {
                warn!(error = %e, "final generation failed");
                FinalOutcome { spec: Spec::new(), flagged: true }
            }
        }
    }

    /// Free-form yes/no question for the baselines.
    pub fn baseline_question(&self, intent: &str, history: &[QA]) -> Result<String, LlmError> {
        let history = prompts::render_history(history);
        let user = prompts::render(prompts::BASELINE_QUESTION_USER, &[("intent", intent), ("history", &history)]);
        let request =
            self.request(prompts::BASELINE_SYSTEM, user, self.generation.candidate_temperature, ResponseFormat::FreeText);
        let text = self.complete(CallKind::BaselineQuestion, &request)?;
        first_line(&text).ok_or_else(|| LlmError::MalformedResponse { reason: "empty question".into(), reply: text })
    }

    /// Asks a ranker to choose among numbered questions. Returns a 0-based
    /// index; unparseable or out-of-range replies choose the first question.
    pub fn rank_questions(&self, intent: &str, history: &[QA], questions: &[String]) -> Result<usize, LlmError> {
        let history = prompts::render_history(history);
        let list = prompts::render_numbered(questions);
        let user = prompts::render(
            prompts::RANK_USER,
            &[("intent", intent), ("history", &history), ("questions", &list)],
        );
        let request =
            self.request(prompts::BASELINE_SYSTEM, user, self.generation.phrasing_temperature, ResponseFormat::FreeText);
        let text = self.complete(CallKind::RankQuestions, &request)?;
        Ok(parse_index(&text, questions.len()).unwrap_or(0))
    }

    pub fn oracle_request(&self, reference: &Spec, question: &str) -> ChatRequest {
        let reference = crate::spec::serialize_spec(reference);
        let user = prompts::render(prompts::ORACLE_USER, &[("reference", &reference), ("question", question)]);
        ChatRequest {
            system_prompt: prompts::ORACLE_SYSTEM.to_string(),
            user_prompt: user,
            temperature: 0.0,
            max_tokens: 8,
            response_format: ResponseFormat::FreeText,
        }
    }
}

fn check_format(text: String, format: ResponseFormat) -> Result<String, LlmError> {
    match format {
        ResponseFormat::FreeText => Ok(text),
        ResponseFormat::JsonObject => {
            let body = strip_code_fence(&text);
            match serde_json::from_str::<serde_json::Value>(body) {
                Ok(v) if v.is_object() => Ok(body.to_string()),
                Ok(_) => Err(LlmError::MalformedResponse { reason: "reply is not a JSON object".into(), reply: text }),
                Err(e) => Err(LlmError::MalformedResponse { reason: e.to_string(), reply: text }),
            }
        }
    }
}

fn first_line(text: &str) -> Option<String> {
    text.lines().map(str::trim).find(|l| !l.is_empty()).map(str::to_string)
}

/// First integer in `text`, as a 0-based index, if it lies in `1..=n`.
pub fn parse_index(text: &str, n: usize) -> Option<usize> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let k: usize = digits.parse().ok()?;
    (1..=n).contains(&k).then(|| k - 1)
}

pub fn describe_predicate(predicate: &Predicate) -> String {
    match predicate {
        Predicate::Resource { resource_type } => {
            format!("some candidate designs include a {resource_type} resource and others do not")
        }
        Predicate::Topology { source_type, target_type } => format!(
            "some candidate designs make a {source_type} resource depend on a {target_type} resource and others do not"
        ),
        Predicate::Attribute { resource_type, key, value } => format!(
            "some candidate designs set attribute {key} of the {resource_type} resource to {value} and others do not"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{ScriptEntry, ScriptedProvider};
    use super::*;
    use crate::pool::Answer;
    use std::collections::BTreeSet;

    fn gateway(entries: Vec<ScriptEntry>) -> Gateway {
        Gateway::new(Arc::new(ScriptedProvider::new(entries))).with_retry(RetryPolicy::immediate(2))
    }

    fn text_request(format: ResponseFormat) -> ChatRequest {
        ChatRequest {
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 0.2,
            max_tokens: 16,
            response_format: format,
        }
    }

    const SPEC_A: &str = r#"{"resources":{"v":"aws_vpc.main"},"topology":{},"attributes":{}}"#;
    const SPEC_B: &str = r#"{"resources":{"v":"aws_vpc.main","n":"aws_nat_gateway.nat"},"topology":{"n":["v"]}}"#;
    const SPEC_C: &str = r#"{"resources":{"b":"aws_s3_bucket.logs"},"attributes":{"b":{"acl":"private"}}}"#;

    #[test]
    fn scripted_echo() {
        let gw = gateway(vec![ScriptEntry::reply(CallKind::OracleAnswer, "yes")]);
        assert_eq!(gw.complete(CallKind::OracleAnswer, &text_request(ResponseFormat::FreeText)).unwrap(), "yes");
    }

    #[test]
    fn retries_exhaust_to_provider_unavailable() {
        let gw = gateway(vec![
            ScriptEntry::transient(CallKind::OracleAnswer),
            ScriptEntry::transient(CallKind::OracleAnswer),
            ScriptEntry::transient(CallKind::OracleAnswer),
            ScriptEntry::reply(CallKind::OracleAnswer, "too late"),
        ]);
        let err = gw.complete(CallKind::OracleAnswer, &text_request(ResponseFormat::FreeText)).unwrap_err();
        assert!(matches!(err, LlmError::ProviderUnavailable(_)), "{err:?}");
        assert_eq!(gw.calls_made(), 3);
    }

    #[test]
    fn transient_failure_then_success() {
        let gw = gateway(vec![
            ScriptEntry::transient(CallKind::OracleAnswer),
            ScriptEntry::reply(CallKind::OracleAnswer, "no"),
        ]);
        assert_eq!(gw.complete(CallKind::OracleAnswer, &text_request(ResponseFormat::FreeText)).unwrap(), "no");
    }

    #[test]
    fn json_format_rejects_prose() {
        let gw = gateway(vec![ScriptEntry::reply(CallKind::FinalSpec, "Sure! Here is your config.")]);
        let err = gw.complete(CallKind::FinalSpec, &text_request(ResponseFormat::JsonObject)).unwrap_err();
        assert!(matches!(err, LlmError::MalformedResponse { .. }));
    }

    #[test]
    fn json_format_accepts_fenced_object() {
        let gw = gateway(vec![ScriptEntry::reply(CallKind::FinalSpec, "```json\n{\"a\":1}\n```")]);
        assert_eq!(gw.complete(CallKind::FinalSpec, &text_request(ResponseFormat::JsonObject)).unwrap(), "{\"a\":1}");
    }

    #[test]
    fn budget_is_enforced() {
        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::OracleAnswer, "yes"),
            ScriptEntry::reply(CallKind::OracleAnswer, "yes"),
        ])
        .with_call_budget(1);
        let req = text_request(ResponseFormat::FreeText);
        gw.complete(CallKind::OracleAnswer, &req).unwrap();
        assert_eq!(gw.complete(CallKind::OracleAnswer, &req), Err(LlmError::BudgetExceeded(1)));
    }

    #[test]
    fn invalid_temperature_is_rejected() {
        let gw = gateway(vec![]);
        let mut req = text_request(ResponseFormat::FreeText);
        req.temperature = 2.5;
        assert!(matches!(gw.complete(CallKind::OracleAnswer, &req), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn candidate_specs_from_script() {
        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::CandidateSpec, SPEC_A),
            ScriptEntry::reply(CallKind::CandidateSpec, SPEC_B),
            ScriptEntry::reply(CallKind::CandidateSpec, SPEC_C),
        ]);
        let specs = gw.generate_candidate_specs("vpc please", &[], 3, 0.9).unwrap();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[0], normalize_labels(&parse_spec(SPEC_A).unwrap()));
        assert_eq!(specs[2].attributes["logs"]["acl"], "private");
    }

    #[test]
    fn malformed_candidate_is_dropped_after_repair() {
        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::CandidateSpec, SPEC_A),
            ScriptEntry::reply(CallKind::CandidateSpec, "not json"),
            ScriptEntry::reply(CallKind::CandidateSpec, SPEC_C),
            ScriptEntry::reply(CallKind::RepairSpec, "still not json"),
        ]);
        let specs = gw.generate_candidate_specs("x", &[], 3, 0.9).unwrap();
        assert_eq!(specs.len(), 2);
    }

    #[test]
    fn repair_rescues_candidate() {
        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::CandidateSpec, r#"{"resources":{"a":"aws_vpc.a"},"topology":{"a":["zzz"]}}"#),
            ScriptEntry::reply(CallKind::RepairSpec, SPEC_A),
        ]);
        assert_eq!(gw.generate_candidate_specs("x", &[], 1, 0.9).unwrap().len(), 1);
    }

    #[test]
    fn all_unparseable() {
        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::CandidateSpec, "nope"),
            ScriptEntry::reply(CallKind::RepairSpec, "nope"),
        ]);
        assert_eq!(gw.generate_candidate_specs("x", &[], 1, 0.9), Err(LlmError::AllCandidatesUnparseable));
    }

    #[test]
    fn candidate_prompt_contains_history_verbatim() {
        let gw = gateway(vec![]);
        let history = vec![QA { question_text: "NAT gateway: yes".into(), predicate: None, answer: Answer::Yes, round: 1 }];
        let req = gw.candidate_request("Build a private network", &history, 0.9);
        assert!(req.user_prompt.contains("NAT gateway: yes"));
        assert_eq!(
            req.user_prompt,
            "Request:\nBuild a private network\n\nClarifications so far:\nQ1: NAT gateway: yes\nA1: yes\n\n\
             Propose one complete configuration that satisfies the request and is consistent with every \
             clarification above. Where the request leaves a choice open, make a plausible choice of your own.\n"
        );
        assert_eq!(req.response_format, ResponseFormat::JsonObject);
        assert!(!req.user_prompt.contains("{{"));
    }

    #[test]
    fn final_prompt_orders_history() {
        let gw = gateway(vec![]);
        let qa = |q: &str, a, r| QA { question_text: q.into(), predicate: None, answer: a, round: r };
        let req = gw.final_request("i", &[qa("first?", Answer::Yes, 1), qa("second?", Answer::No, 2)]);
        let q1 = req.user_prompt.find("Q1: first?\nA1: yes").unwrap();
        let q2 = req.user_prompt.find("Q2: second?\nA2: no").unwrap();
        assert!(q1 < q2);
    }

    #[test]
    fn final_generation_contract() {
        let gw = gateway(vec![ScriptEntry::reply(CallKind::FinalSpec, SPEC_B)]);
        let out = gw.final_generation("x", &[]);
        assert!(!out.flagged);
        assert_eq!(out.spec.len(), 2);

        let gw = gateway(vec![
            ScriptEntry::reply(CallKind::FinalSpec, "garbage"),
            ScriptEntry::reply(CallKind::RepairSpec, "garbage"),
        ]);
        let out = gw.final_generation("x", &[]);
        assert!(out.flagged);
        assert_eq!(out.spec, Spec::new());
    }

    fn disagreement(predicate: Predicate) -> Disagreement {
        Disagreement { predicate, yes_side: BTreeSet::from([0]), no_side: BTreeSet::from([1]), entropy_bits: 1.0 }
    }

    #[test]
    fn phrasing_uses_provider_then_falls_back() {
        let nat = disagreement(Predicate::Resource { resource_type: "aws_nat_gateway".into() });
        let gw = gateway(vec![ScriptEntry::reply(
            CallKind::PhraseQuestion,
            "Should private subnets reach the internet through a NAT gateway?\n",
        )]);
        assert_eq!(gw.phrase_question(&nat), "Should private subnets reach the internet through a NAT gateway?");

        let down = gateway(vec![ScriptEntry::fatal(CallKind::PhraseQuestion)]);
        assert_eq!(down.phrase_question(&nat), "Should the infrastructure include a aws_nat_gateway resource?");
        let attr = disagreement(Predicate::Attribute {
            resource_type: "aws_db_instance".into(),
            key: "instance_class".into(),
            value: "db.t3.micro".into(),
        });
        assert_eq!(down.phrase_question(&attr), "Should aws_db_instance attribute instance_class be db.t3.micro?");
    }

    #[test]
    fn question_prompt_carries_predicate() {
        let gw = gateway(vec![]);
        let req = gw.question_request(&Predicate::Resource { resource_type: "aws_nat_gateway".into() });
        assert!(req.user_prompt.contains(r#"predicate: {"axis":"resource","resource_type":"aws_nat_gateway"}"#));
    }

    #[test]
    fn ranker_index_parsing() {
        assert_eq!(parse_index("2", 3), Some(1));
        assert_eq!(parse_index("Question 3 is best.", 3), Some(2));
        assert_eq!(parse_index("7", 3), None);
        assert_eq!(parse_index("no idea", 3), None);

        let qs: Vec<String> = vec!["a?".into(), "b?".into(), "c?".into()];
        let gw = gateway(vec![ScriptEntry::reply(CallKind::RankQuestions, "2")]);
        assert_eq!(gw.rank_questions("i", &[], &qs).unwrap(), 1);
        let gw = gateway(vec![ScriptEntry::reply(CallKind::RankQuestions, "banana")]);
        assert_eq!(gw.rank_questions("i", &[], &qs).unwrap(), 0);
    }

    #[test]
    fn code_fence_stripping() {
        assert_eq!(strip_code_fence("```json\n{}\n```"), "{}");
        assert_eq!(strip_code_fence("  {}  "), "{}");
        assert_eq!(strip_code_fence("```\n{\"a\":1}```"), "{\"a\":1}");
    }
}
