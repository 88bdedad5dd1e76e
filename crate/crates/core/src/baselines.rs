//! Question-asking baselines that share the budget, answerer and final
//! generation step with the clarification loop but pick questions without
//! looking at a candidate pool.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::llm::{Gateway, LlmError};
use crate::metrics::embed::{cosine, l2_normalize, Embedder, EmbedderUnavailable};
use crate::oracle::{AnswerError, Answerer};
use crate::pool::QA;
use crate::session::{AxisCounts, InstrumentationRecord};
use crate::spec::Spec;

pub const DEFAULT_N_QUESTIONS: usize = 5;
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Direct,
    BestOfN,
    SelfConsistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub n_questions: usize,
    pub cluster_threshold: f64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self { method, n_questions: DEFAULT_N_QUESTIONS, cluster_threshold: DEFAULT_CLUSTER_THRESHOLD }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.method != BaselineMethod::Direct && self.n_questions == 0 {
            return Err(BaselineError::InvalidConfig("n_questions must be positive".into()));
        }
        if !(self.cluster_threshold > 0.0 && self.cluster_threshold < 1.0) {
            return Err(BaselineError::InvalidConfig("cluster_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid baseline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error(transparent)]
    Embedder(#[from] EmbedderUnavailable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub spec: Spec,
    /// Final generation produced no usable spec.
    pub flagged: bool,
    pub history: Vec<QA>,
    pub trace: Vec<InstrumentationRecord>,
}

/// A baseline run cut short by a failure. Questioning stopped at the
/// failure; the final generation still ran on the partial history.
#[derive(Debug, Clone, Error)]
#[error("baseline aborted: {error}")]
pub struct BaselineAbort {
    pub error: BaselineError,
    pub partial: Box<BaselineRun>,
}

pub fn run_direct(
    gateway: &Gateway,
    intent: &str,
    answerer: &dyn Answerer,
    k: u32,
) -> Result<BaselineRun, BaselineAbort> {
    run_loop(gateway, intent, answerer, k, |history| Ok(gateway.baseline_question(intent, history)?))
}

/// Samples `n` questions per round and lets a ranker call pick one.
pub fn run_best_of_n(
    gateway: &Gateway,
    intent: &str,
    answerer: &dyn Answerer,
    k: u32,
    n: usize,
) -> Result<BaselineRun, BaselineAbort> {
    if n <= 1 {
        return run_direct(gateway, intent, answerer, k);
    }
    run_loop(gateway, intent, answerer, k, |history| {
        let questions = sample_questions(gateway, intent, history, n)?;
        let i = gateway.rank_questions(intent, history, &questions)?;
        Ok(questions[i].clone())
    })
}

/// Samples `n` questions per round, clusters their embeddings and asks the
/// one closest to the centroid of the largest cluster.
pub fn run_self_consistency(
    gateway: &Gateway,
    embedder: &dyn Embedder,
    intent: &str,
    answerer: &dyn Answerer,
    k: u32,
    n: usize,
    threshold: f64,
) -> Result<BaselineRun, BaselineAbort> {
    run_loop(gateway, intent, answerer, k, |history| {
        let questions = sample_questions(gateway, intent, history, n.max(1))?;
        let embeddings = questions.iter().map(|q| embedder.embed(q)).collect::<Result<Vec<_>, _>>()?;
        Ok(questions[select_by_consensus(&embeddings, threshold)].clone())
    })
}

pub fn run_baseline(
    gateway: &Gateway,
    embedder: &dyn Embedder,
    config: &BaselineConfig,
    intent: &str,
    answerer: &dyn Answerer,
    k: u32,
) -> Result<BaselineRun, BaselineAbort> {
    if let Err(error) = config.validate() {
        return Err(BaselineAbort { error, partial: Box::new(empty_run()) });
    }
    match config.method {
        BaselineMethod::Direct => run_direct(gateway, intent, answerer, k),
        BaselineMethod::BestOfN => run_best_of_n(gateway, intent, answerer, k, config.n_questions),
        BaselineMethod::SelfConsistency => {
            run_self_consistency(gateway, embedder, intent, answerer, k, config.n_questions, config.cluster_threshold)
        }
    }
}

fn empty_run() -> BaselineRun {
    BaselineRun { spec: Spec::new(), flagged: true, history: Vec::new(), trace: Vec::new() }
}

fn sample_questions(gateway: &Gateway, intent: &str, history: &[QA], n: usize) -> Result<Vec<String>, LlmError> {
    (0..n).map(|_| gateway.baseline_question(intent, history)).collect()
}

fn run_loop(
    gateway: &Gateway,
    intent: &str,
    answerer: &dyn Answerer,
    k: u32,
    mut next_question: impl FnMut(&[QA]) -> Result<String, BaselineError>,
) -> Result<BaselineRun, BaselineAbort> {
    let mut history: Vec<QA> = Vec::new();
    let mut trace = Vec::new();
    let mut failure = None;
    for round in 1..=k {
        let asked = next_question(&history).and_then(|q| Ok((answerer.answer(None, &q)?, q)));
        let (answer, question) = match asked {
            Ok(v) => v,
            Err(e) => {
                warn!(round, error = %e, "baseline stopped asking");
                failure = Some(e);
                break;
            }
        };
        trace.push(InstrumentationRecord {
            round,
            pool_size: 0,
            pool_size_after: 0,
            disagreement_counts: AxisCounts::default(),
            asked_axis: None,
            asked: None,
            regenerated: false,
        });
        history.push(QA { question_text: question, predicate: None, answer, round });
    }
    let out = gateway.final_generation(intent, &history);
    let run = BaselineRun { spec: out.spec, flagged: out.flagged, history, trace };
    match failure {
        None => Ok(run),
        Some(error) => Err(BaselineAbort { error, partial: Box::new(run) }),
    }
}

struct Cluster {
    centroid: Vec<f64>,
    sum: Vec<f64>,
    members: Vec<usize>,
}

/// Greedy single-pass clustering in input order: each vector joins the
/// first cluster whose centroid it matches at `threshold` or better.
/// Returns the index of the member of the largest cluster (earliest cluster
/// on ties) closest to that cluster's centroid (earliest member on ties).
pub fn select_by_consensus(embeddings: &[Vec<f64>], threshold: f64) -> usize {
    let clusters = greedy_clusters(embeddings, threshold);
    let Some(largest) = clusters.iter().reduce(|best, c| if c.members.len() > best.members.len() { c } else { best })
    else {
        return 0;
    };
    let mut pick = largest.members[0];
    let mut best = f64::NEG_INFINITY;
    for &i in &largest.members {
        let sim = cosine(&embeddings[i], &largest.centroid);
        if sim > best {
            best = sim;
            pick = i;
        }
    }
    pick
}

pub fn cluster_sizes(embeddings: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    greedy_clusters(embeddings, threshold).iter().map(|c| c.members.len()).collect()
}

fn greedy_clusters(embeddings: &[Vec<f64>], threshold: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, e) in embeddings.iter().enumerate() {
        match clusters.iter_mut().find(|c| cosine(e, &c.centroid) >= threshold) {
            Some(c) => {
                c.members.push(i);
                c.sum.iter_mut().zip(e).for_each(|(s, x)| *s += x);
                c.centroid = c.sum.clone();
                l2_normalize(&mut c.centroid);
            }
            None => clusters.push(Cluster { centroid: e.clone(), sum: e.clone(), members: vec![i] }),
        }
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::{ScriptEntry, ScriptedProvider};
    use crate::llm::{CallKind, RetryPolicy};
    use crate::metrics::embed::FallbackEmbedder;
    use crate::oracle::Oracle;
    use crate::pool::Answer;
    use crate::spec::serialize_spec;
    use std::sync::Arc;

    const NONE: [(&str, &str); 0] = [];

    fn reference() -> Spec {
        Spec::new()
            .with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), NONE)
            .with_resource("nat", "aws_nat_gateway.nat", ["vpc"], NONE)
    }

    fn gateway(entries: Vec<ScriptEntry>) -> Gateway {
        Gateway::new(Arc::new(ScriptedProvider::new(entries))).with_retry(RetryPolicy::immediate(0))
    }

    fn q(text: &str) -> ScriptEntry {
        ScriptEntry::reply(CallKind::BaselineQuestion, text)
    }

    fn fin() -> ScriptEntry {
        ScriptEntry::reply(CallKind::FinalSpec, serialize_spec(&reference()))
    }

    const NAT_Q: &str = "Should the infrastructure include a aws_nat_gateway resource?";
    const EIP_Q: &str = "Should the infrastructure include a aws_eip resource?";

    #[test]
    fn direct_asks_k_questions_then_generates_once() {
        let gw = gateway(vec![q(NAT_Q), q(EIP_Q), q("Is it for production?"), fin()]);
        let oracle = Oracle::rule_based(&reference());
        let run = run_direct(&gw, "nat", &oracle, 3).unwrap();
        let answers: Vec<Answer> = run.history.iter().map(|h| h.answer).collect();
        assert_eq!(answers, vec![Answer::Yes, Answer::No, Answer::No]);
        assert_eq!(run.trace.len(), 3);
        assert!(run.trace.iter().all(|t| t.asked_axis.is_none()));
        assert_eq!(run.spec, reference());
        assert_eq!(gw.calls_made(), 4);
    }

    #[test]
    fn zero_budget_goes_straight_to_final() {
        let gw = gateway(vec![fin()]);
        let run = run_direct(&gw, "nat", &Oracle::rule_based(&reference()), 0).unwrap();
        assert!(run.history.is_empty());
        assert!(!run.flagged);
    }

    #[test]
    fn ranker_choice_and_fallback() {
        let oracle = Oracle::rule_based(&reference());
        let gw = gateway(vec![
            q("a?"),
            q(NAT_Q),
            q("c?"),
            ScriptEntry::reply(CallKind::RankQuestions, "2"),
            fin(),
        ]);
        let run = run_best_of_n(&gw, "nat", &oracle, 1, 3).unwrap();
        assert_eq!(run.history[0].question_text, NAT_Q);

        let gw = gateway(vec![
            q("a?"),
            q(NAT_Q),
            q("c?"),
            ScriptEntry::reply(CallKind::RankQuestions, "the best one"),
            fin(),
        ]);
        let run = run_best_of_n(&gw, "nat", &oracle, 1, 3).unwrap();
        assert_eq!(run.history[0].question_text, "a?");
    }

    #[test]
    fn best_of_one_is_direct() {
        let gw = gateway(vec![q(NAT_Q), fin()]);
        let run = run_best_of_n(&gw, "nat", &Oracle::rule_based(&reference()), 1, 1).unwrap();
        assert_eq!(run.history.len(), 1);
        assert_eq!(gw.calls_made(), 2);
    }

    #[test]
    fn consensus_picks_from_largest_cluster() {
        let gw = gateway(vec![q(EIP_Q), q(NAT_Q), q(EIP_Q), q(NAT_Q), q(NAT_Q), fin()]);
        let run =
            run_self_consistency(&gw, &FallbackEmbedder, "nat", &Oracle::rule_based(&reference()), 1, 5, 0.99).unwrap();
        assert_eq!(run.history[0].question_text, NAT_Q);
    }

    #[test]
    fn identical_questions_form_one_cluster() {
        let e = FallbackEmbedder.embed("same").unwrap();
        let v = vec![e.clone(), e.clone(), e];
        assert_eq!(cluster_sizes(&v, 0.85), vec![3]);
        assert_eq!(select_by_consensus(&v, 0.85), 0);
    }

    #[test]
    fn cluster_ties_prefer_earliest() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        let v = vec![b.clone(), a.clone(), a, b];
        assert_eq!(cluster_sizes(&v, 0.9), vec![2, 2]);
        assert_eq!(select_by_consensus(&v, 0.9), 0);
    }

    #[test]
    fn provider_failure_stops_questions_but_still_finalizes() {
        let gw = gateway(vec![q(NAT_Q), ScriptEntry::fatal(CallKind::BaselineQuestion), fin()]);
        let err = run_direct(&gw, "nat", &Oracle::rule_based(&reference()), 3).unwrap_err();
        assert_eq!(err.partial.history.len(), 1);
        assert_eq!(err.partial.spec, reference());
        assert!(matches!(err.error, BaselineError::Llm(_)));
    }

    #[test]
    fn config_validation() {
        assert!(BaselineConfig::new(BaselineMethod::BestOfN).validate().is_ok());
        let bad = BaselineConfig { n_questions: 0, ..BaselineConfig::new(BaselineMethod::SelfConsistency) };
        assert!(bad.validate().is_err());
        let bad = BaselineConfig { cluster_threshold: 1.0, ..BaselineConfig::new(BaselineMethod::Direct) };
        assert!(bad.validate().is_err());
    }
}
