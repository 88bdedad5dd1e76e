use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{HarnessError, Task};
use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod, DEFAULT_CLUSTER_THRESHOLD, DEFAULT_N_QUESTIONS};
use crate::llm::Gateway;
use crate::metrics::{score_specs, Embedder, DEFAULT_GED_TIMEOUT};
use crate::oracle::{Answerer, Oracle};
use crate::session::{Clarifier, InstrumentationRecord, SessionConfig};
use crate::spec::Spec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ours,
    Direct,
    BestOfN,
    SelfConsistency,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ours, Method::Direct, Method::BestOfN, Method::SelfConsistency];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Direct => "direct",
            Method::BestOfN => "best-of-n",
            Method::SelfConsistency => "self-consistency",
        }
    }

    fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::Ours => None,
            Method::Direct => Some(BaselineMethod::Direct),
            Method::BestOfN => Some(BaselineMethod::BestOfN),
            Method::SelfConsistency => Some(BaselineMethod::SelfConsistency),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected ours, direct, best-of-n or self-consistency)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Rule,
    Llm,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// `budget_k` here is overridden by the `k` passed to [`run_experiment`].
    pub session: SessionConfig,
    pub n_questions: usize,
    pub cluster_threshold: f64,
    pub oracle: OracleKind,
    pub concurrency: usize,
    pub ged_timeout: Duration,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            n_questions: DEFAULT_N_QUESTIONS,
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            oracle: OracleKind::Rule,
            concurrency: 4,
            ged_timeout: DEFAULT_GED_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task_id: String,
    pub method: Method,
    pub budget_k: u32,
    pub structure_score: f64,
    pub attribute_score: f64,
    pub ged: f64,
    pub ged_timed_out: bool,
    pub rounds_used: u32,
    pub regen_count: u32,
    /// The final spec came from a failed final generation.
    pub flagged: bool,
    pub trace: Vec<InstrumentationRecord>,
    pub final_spec: Spec,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub method: Method,
    pub budget_k: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub results: Vec<RunResult>,
    pub failures: Vec<TaskFailure>,
}

/// Builds the gateway a task talks to. Called once per task run.
pub type GatewayFactory = dyn Fn(&Task) -> Gateway + Send + Sync;

/// Runs one task with one method and scores the result.
pub fn run_task(
    task: &Task,
    method: Method,
    k: u32,
    config: &ExperimentConfig,
    gateway: Gateway,
    embedder: &dyn Embedder,
) -> Result<RunResult, TaskFailure> {
    let started = Instant::now();
    let fail = |error: String| TaskFailure { task_id: task.id.clone(), method, budget_k: k, error };
    let oracle = match config.oracle {
        OracleKind::Rule => Oracle::rule_based(&task.reference_spec),
        OracleKind::Llm => Oracle::llm_proxy(&task.reference_spec, gateway.clone()),
    };
    let answerer: &dyn Answerer = &oracle;

    let (spec, rounds_used, regen_count, flagged, trace) = match method.baseline() {
        None => {
            let session_config = SessionConfig { budget_k: k, ..config.session.clone() };
            let clarifier = Clarifier::new(gateway, session_config);
            let (spec, session) = clarifier.run_session(task, answerer).map_err(|e| fail(e.to_string()))?;
            let flagged = matches!(
                session.result.as_ref().map(|r| &r.source),
                Some(crate::session::FinalSource::FinalGeneration { flagged: true })
            );
            (spec, session.rounds_used, session.regen_count, flagged, session.trace)
        }
        Some(bm) => {
            let bc = BaselineConfig {
                method: bm,
                n_questions: config.n_questions,
                cluster_threshold: config.cluster_threshold,
            };
            let run = run_baseline(&gateway, embedder, &bc, &task.ambiguous_prompt, answerer, k)
                .map_err(|e| fail(e.to_string()))?;
            (run.spec, run.history.len() as u32, 0, run.flagged, run.trace)
        }
    };

    let report = score_specs(&task.reference_spec, &spec, config.ged_timeout, embedder).map_err(|e| fail(e.to_string()))?;
    Ok(RunResult {
        task_id: task.id.clone(),
        method,
        budget_k: k,
        structure_score: report.structure_score,
        attribute_score: report.attribute_score,
        ged: report.ged,
        ged_timed_out: report.timed_out,
        rounds_used,
        regen_count,
        flagged,
        trace,
        final_spec: spec,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

/// Runs every task through `method` at budget `k`, at most
/// `config.concurrency` at a time. Results keep task order; a failing task
/// is recorded and does not stop the others.
pub fn run_experiment(
    tasks: &[Task],
    method: Method,
    k: u32,
    config: &ExperimentConfig,
    gateways: &GatewayFactory,
    embedder: &dyn Embedder,
) -> Result<ExperimentOutput, HarnessError> {
    if config.concurrency == 0 {
        return Err(HarnessError::InvalidConfig("concurrency must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let outcomes: Vec<Result<RunResult, TaskFailure>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_task(task, method, k, config, gateways(task), embedder))
            .collect()
    });
    let mut out = ExperimentOutput::default();
    for outcome in outcomes {
        match outcome {
            Ok(r) => out.results.push(r),
            Err(f) => {
                warn!(task = %f.task_id, error = %f.error, "task failed");
                out.failures.push(f);
            }
        }
    }
    Ok(out)
}
