//! The clarification loop: generate a candidate pool, diff it, ask about
//! the most informative disagreement, prune on the answer, and regenerate
//! when the pool runs dry, all under a fixed question budget.
//!
//! The loop is re-entrant: [`Clarifier::start`] runs up to the first
//! question and [`Clarifier::step`] applies one answer at a time, so a
//! human can drive a session over HTTP. [`Clarifier::run_session`] is the
//! same state machine driven by an [`Answerer`].

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::disagreement::{
    axis_counts, rank_and_select, Axis, CandidateId, Disagreement, Predicate, RoundRobinState,
    DEFAULT_MIN_ENTROPY_BITS,
};
use crate::harness::Task;
use crate::llm::{Gateway, LlmError};
use crate::oracle::{AnswerError, Answerer};
use crate::pool::{filter_against_history, Answer, Pool, DEFAULT_POOL_SIZE, QA};
use crate::spec::Spec;

pub const DEFAULT_MAX_REGENERATIONS: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("session is already finalized")]
    SessionFinalized,
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub budget_k: u32,
    pub pool_size: usize,
    pub rr_enabled: bool,
    pub min_entropy_bits: f64,
    pub max_regenerations: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            budget_k: 5,
            pool_size: DEFAULT_POOL_SIZE,
            rr_enabled: true,
            min_entropy_bits: DEFAULT_MIN_ENTROPY_BITS,
            max_regenerations: DEFAULT_MAX_REGENERATIONS,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.pool_size == 0 {
            return Err(SessionError::InvalidConfig("pool_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.min_entropy_bits) {
            return Err(SessionError::InvalidConfig("min_entropy_bits must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisCounts {
    pub resource: usize,
    pub topology: usize,
    pub attribute: usize,
}

impl AxisCounts {
    pub fn of(disagreements: &[Disagreement]) -> Self {
        let [resource, topology, attribute] = axis_counts(disagreements);
        Self { resource, topology, attribute }
    }

    pub fn get(&self, axis: Axis) -> usize {
        match axis {
            Axis::Resource => self.resource,
            Axis::Topology => self.topology,
            Axis::Attribute => self.attribute,
        }
    }
}

/// One answered round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentationRecord {
    pub round: u32,
    /// Pool size when the question was asked.
    pub pool_size: usize,
    /// Pool size after pruning on the answer.
    pub pool_size_after: usize,
    pub disagreement_counts: AxisCounts,
    pub asked_axis: Option<Axis>,
    pub asked: Option<Predicate>,
    /// A regeneration happened since the previous question.
    pub regenerated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub round: u32,
    pub text: String,
    pub disagreement: Disagreement,
    pub pool_size: usize,
    pub disagreement_counts: AxisCounts,
    pub regenerated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    /// Two consecutive regenerations produced no new structure.
    Stalled,
    RegenerationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FinalSource {
    Pool { candidate_id: CandidateId },
    FinalGeneration { flagged: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub spec: Spec,
    pub source: FinalSource,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub task_id: String,
    pub intent: String,
    pub config: SessionConfig,
    pub rounds_used: u32,
    pub pool: Pool,
    pub history: Vec<QA>,
    pub rr_state: RoundRobinState,
    pub regen_count: u32,
    pub trace: Vec<InstrumentationRecord>,
    pub status: SessionStatus,
    pub pending: Option<PendingQuestion>,
    pub result: Option<FinalResult>,
    barren_regens: u32,
    regenerated_since_question: bool,
}

impl Session {
    fn new(task_id: &str, intent: &str, config: SessionConfig) -> Self {
        Self {
            task_id: task_id.to_string(),
            intent: intent.to_string(),
            config,
            rounds_used: 0,
            pool: Pool::new(),
            history: Vec::new(),
            rr_state: RoundRobinState::default(),
            regen_count: 0,
            trace: Vec::new(),
            status: SessionStatus::Active,
            pending: None,
            result: None,
            barren_regens: 0,
            regenerated_since_question: false,
        }
    }

    pub fn final_spec(&self) -> Option<&Spec> {
        self.result.as_ref().map(|r| &r.spec)
    }
}

/// What the caller should do next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOutcome {
    Question(PendingQuestion),
    Finalized(FinalResult),
}

/// A session that failed part-way; the state up to the failure is kept.
#[derive(Debug, Clone, Error)]
#[error("session aborted: {error}")]
pub struct SessionAbort {
    pub error: SessionError,
    pub session: Box<Session>,
}

#[derive(Debug, Clone)]
pub struct Clarifier {
    gateway: Gateway,
    config: SessionConfig,
}

impl Clarifier {
    pub fn new(gateway: Gateway, config: SessionConfig) -> Self {
        Self { gateway, config }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Generates the initial pool and advances to the first question (or
    /// straight to finalization).
    pub fn start(&self, task_id: &str, intent: &str) -> Result<(Session, StepOutcome), SessionAbort> {
        let mut session = Session::new(task_id, intent, self.config.clone());
        let outcome = self
            .config
            .validate()
            .and_then(|_| {
                let specs = self.sample(&session)?;
                session.pool.dedup_insert(specs, 0);
                self.advance(&mut session)
            });
        match outcome {
            Ok(o) => Ok((session, o)),
            Err(error) => Err(SessionAbort { error, session: Box::new(session) }),
        }
    }

    /// Applies one answer to the pending question.
    pub fn step(&self, session: &mut Session, answer: Answer) -> Result<StepOutcome, SessionError> {
        if session.status == SessionStatus::Finalized {
            return Err(SessionError::SessionFinalized);
        }
        let pending = session.pending.take().ok_or(SessionError::NoPendingQuestion)?;
        let qa = QA {
            question_text: pending.text,
            predicate: Some(pending.disagreement.predicate.clone()),
            answer,
            round: pending.round,
        };
        session.pool.prune(&qa);
        session.trace.push(InstrumentationRecord {
            round: pending.round,
            pool_size: pending.pool_size,
            pool_size_after: session.pool.len(),
            disagreement_counts: pending.disagreement_counts,
            asked_axis: Some(pending.disagreement.axis()),
            asked: Some(pending.disagreement.predicate),
            regenerated: pending.regenerated,
        });
        debug!(round = qa.round, %answer, pool = session.pool.len(), "pruned");
        session.history.push(qa);
        session.rounds_used += 1;
        session.regenerated_since_question = false;
        session.barren_regens = 0;
        self.advance(session)
    }

    /// Runs a whole session with an automatic answerer.
    pub fn run_session(&self, task: &Task, answerer: &dyn Answerer) -> Result<(Spec, Session), SessionAbort> {
        let (mut session, mut outcome) = self.start(&task.id, &task.ambiguous_prompt)?;
        loop {
            match outcome {
                StepOutcome::Finalized(result) => return Ok((result.spec, session)),
                StepOutcome::Question(q) => {
                    let step = answerer
                        .answer(Some(&q.disagreement.predicate), &q.text)
                        .map_err(SessionError::from)
                        .and_then(|a| self.step(&mut session, a));
                    match step {
                        Ok(next) => outcome = next,
                        Err(error) => return Err(SessionAbort { error, session: Box::new(session) }),
                    }
                }
            }
        }
    }

    fn sample(&self, session: &Session) -> Result<Vec<Spec>, SessionError> {
        let temperature = self.gateway.generation().candidate_temperature;
        match self
            .gateway
            .generate_candidate_specs(&session.intent, &session.history, self.config.pool_size, temperature)
        {
            Ok(specs) => Ok(filter_against_history(specs, &session.history)),
            Err(LlmError::AllCandidatesUnparseable) => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn advance(&self, session: &mut Session) -> Result<StepOutcome, SessionError> {
        loop {
            if session.rounds_used >= session.config.budget_k {
                return Ok(self.finalize(session, Termination::BudgetExhausted));
            }
            let disagreements = session.pool.disagreements();
            if let Some(d) = rank_and_select(
                &disagreements,
                &mut session.rr_state,
                session.config.rr_enabled,
                session.config.min_entropy_bits,
            ) {
                let text = self.gateway.phrase_question(&d);
                let pending = PendingQuestion {
                    round: session.rounds_used + 1,
                    text,
                    disagreement: d,
                    pool_size: session.pool.len(),
                    disagreement_counts: AxisCounts::of(&disagreements),
                    regenerated: session.regenerated_since_question,
                };
                session.pending = Some(pending.clone());
                return Ok(StepOutcome::Question(pending));
            }

            if session.regen_count >= session.config.max_regenerations {
                return Ok(self.finalize(session, Termination::RegenerationLimit));
            }
            if session.barren_regens >= 2 {
                return Ok(self.finalize(session, Termination::Stalled));
            }
            let specs = self.sample(session)?;
            let created = session.pool.dedup_insert(specs, session.rounds_used);
            session.regen_count += 1;
            session.regenerated_since_question = true;
            if created == 0 {
                session.barren_regens += 1;
            } else {
                session.barren_regens = 0;
            }
            debug!(regen = session.regen_count, created, pool = session.pool.len(), "regenerated");
        }
    }

    fn finalize(&self, session: &mut Session, termination: Termination) -> StepOutcome {
        let result = match session.pool.select_best() {
            Some(best) => FinalResult {
                spec: best.spec().clone(),
                source: FinalSource::Pool { candidate_id: best.id },
                termination,
            },
            None => {
                let out = self.gateway.final_generation(&session.intent, &session.history);
                FinalResult { spec: out.spec, source: FinalSource::FinalGeneration { flagged: out.flagged }, termination }
            }
        };
        info!(task = %session.task_id, rounds = session.rounds_used, regens = session.regen_count, ?termination, "session finalized");
        session.status = SessionStatus::Finalized;
        session.pending = None;
        session.result = Some(result.clone());
        StepOutcome::Finalized(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::{ScriptEntry, ScriptedProvider};
    use crate::llm::{CallKind, RetryPolicy};
    use crate::oracle::Oracle;
    use crate::spec::serialize_spec;
    use std::sync::Arc;

    fn none() -> Vec<(String, String)> {
        Vec::new()
    }

    fn base() -> Spec {
        Spec::new()
            .with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), none())
            .with_resource("sub", "aws_subnet.sub", ["vpc"], none())
    }

    fn with_nat() -> Spec {
        base().with_resource("nat", "aws_nat_gateway.nat", ["vpc"], none())
    }

    fn clarifier(entries: Vec<ScriptEntry>, budget_k: u32) -> Clarifier {
        let gw = Gateway::new(Arc::new(ScriptedProvider::new(entries))).with_retry(RetryPolicy::immediate(0));
        Clarifier::new(gw, SessionConfig { budget_k, pool_size: 2, ..Default::default() })
    }

    fn cand(spec: &Spec) -> ScriptEntry {
        ScriptEntry::reply(CallKind::CandidateSpec, serialize_spec(spec))
    }

    fn task(reference: Spec) -> Task {
        Task { id: "t".into(), ambiguous_prompt: "network".into(), original_prompt: None, reference_spec: reference }
    }

    #[test]
    fn single_question_with_budget_one() {
        let c = clarifier(vec![cand(&with_nat()), cand(&base())], 1);
        let oracle = Oracle::rule_based(&with_nat());
        let (spec, session) = c.run_session(&task(with_nat()), &oracle).unwrap();
        assert_eq!(session.history.len(), 1);
        assert_eq!(session.rounds_used, 1);
        assert_eq!(session.pool.len(), 1);
        assert_eq!(session.trace.len(), 1);
        assert_eq!(session.trace[0].pool_size, 2);
        assert_eq!(session.trace[0].pool_size_after, 1);
        assert_eq!(spec, with_nat());
        assert_eq!(session.history[0].question_text, "Should the infrastructure include a aws_nat_gateway resource?");
    }

    #[test]
    fn zero_budget_finalizes_from_initial_pool() {
        let c = clarifier(vec![cand(&with_nat()), cand(&base())], 0);
        let (session, outcome) = c.start("t", "x").unwrap();
        assert!(matches!(outcome, StepOutcome::Finalized(FinalResult { source: FinalSource::Pool { candidate_id: 0 }, .. })));
        assert_eq!(session.status, SessionStatus::Finalized);
    }

    #[test]
    fn step_errors() {
        let c = clarifier(vec![cand(&with_nat()), cand(&base())], 1);
        let (mut session, outcome) = c.start("t", "x").unwrap();
        assert!(matches!(outcome, StepOutcome::Question(_)));
        assert!(matches!(c.step(&mut session, Answer::No).unwrap(), StepOutcome::Finalized(_)));
        assert_eq!(c.step(&mut session, Answer::No), Err(SessionError::SessionFinalized));

        let mut fresh = Session::new("t", "x", SessionConfig::default());
        assert_eq!(c.step(&mut fresh, Answer::No), Err(SessionError::NoPendingQuestion));
    }

    #[test]
    fn exhausted_pool_triggers_regeneration() {
        let db = |class: &str| base().with_resource("db", "aws_db_instance.db", ["sub"], [("instance_class", class)]);
        let reference = db("db.t3.micro");
        let c = clarifier(
            vec![
                cand(&with_nat()),
                cand(&base()),
                // regeneration after the NAT answer exhausts the split
                cand(&db("db.t3.micro")),
                cand(&db("db.r5.large")),
                // later regenerations only repeat the settled structure
                cand(&db("db.t3.micro")),
                cand(&db("db.t3.micro")),
                cand(&db("db.t3.micro")),
                cand(&db("db.t3.micro")),
            ],
            5,
        );
        let oracle = Oracle::rule_based(&reference);
        let (spec, session) = c.run_session(&task(reference.clone()), &oracle).unwrap();
        assert_eq!(spec, reference);
        assert!(session.regen_count >= 1);
        assert!(!session.trace[0].regenerated);
        assert!(session.trace[1].regenerated);
        assert_eq!(session.trace[0].asked_axis, Some(Axis::Resource));
        assert_eq!(session.trace[1].asked_axis, Some(Axis::Topology));
        assert_eq!(session.trace[2].asked_axis, Some(Axis::Attribute));
        assert_eq!(session.result.unwrap().termination, Termination::Stalled);
    }

    #[test]
    fn empty_pool_falls_back_to_final_generation() {
        // initial generation and two regenerations all unparseable: stall
        let mut entries = Vec::new();
        for _ in 0..6 {
            entries.push(ScriptEntry::reply(CallKind::CandidateSpec, "oops"));
            entries.push(ScriptEntry::reply(CallKind::RepairSpec, "still oops"));
        }
        entries.push(ScriptEntry::reply(CallKind::FinalSpec, serialize_spec(&base())));
        let c = clarifier(entries, 3);
        let (spec, session) = c.run_session(&task(base()), &Oracle::rule_based(&base())).unwrap();
        assert_eq!(spec, base());
        assert_eq!(session.regen_count, 2);
        let result = session.result.unwrap();
        assert_eq!(result.source, FinalSource::FinalGeneration { flagged: false });
        assert_eq!(result.termination, Termination::Stalled);
        assert!(session.history.is_empty());
    }

    #[test]
    fn barren_regenerations_stall() {
        // a consistent single-structure pool: every regeneration repeats it
        let entries = (0..6).map(|_| cand(&with_nat())).collect();
        let c = clarifier(entries, 5);
        let (spec, session) = c.run_session(&task(with_nat()), &Oracle::rule_based(&with_nat())).unwrap();
        assert_eq!(spec, with_nat());
        assert_eq!(session.regen_count, 2);
        assert_eq!(session.result.unwrap().termination, Termination::Stalled);
    }

    #[test]
    fn provider_failure_aborts_with_partial_state() {
        let c = clarifier(vec![cand(&with_nat()), cand(&base())], 5);
        let err = c.run_session(&task(with_nat()), &Oracle::rule_based(&with_nat())).unwrap_err();
        assert!(matches!(err.error, SessionError::Llm(LlmError::ProviderUnavailable(_))));
        assert_eq!(err.session.history.len(), 1);
        assert_eq!(err.session.trace.len(), 1);
    }
}
