//! Disagreement-driven clarification of ambiguous infrastructure requests.
//!
//! An LLM samples a pool of candidate configurations for a request; the
//! structural differences between candidates become yes/no questions, the
//! answers prune the pool, and the surviving candidate is the result.
//! Generated configurations are scored against references by graph edit
//! distance and embedded attribute similarity.

pub mod baselines;
pub mod disagreement;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod oracle;
pub mod pool;
pub mod question;
pub mod session;
pub mod spec;
pub mod synthetic;

pub use disagreement::{
    compute_disagreements, entropy, rank_and_select, Axis, CandidateId, Disagreement, Predicate, RoundRobinState,
};
pub use harness::{Method, RunResult, Task};
pub use llm::{CallKind, ChatProvider, Gateway, LlmError};
pub use metrics::{score_specs, Embedder, FallbackEmbedder, ScoreReport};
pub use oracle::{Answerer, Oracle};
pub use pool::{Answer, Pool, QA};
pub use session::{Clarifier, Session, SessionConfig, StepOutcome};
pub use spec::{normalize_labels, parse_spec, serialize_spec, Spec, SpecError};
