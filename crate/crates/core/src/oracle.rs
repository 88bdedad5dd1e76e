//! Simulated users that answer yes/no questions from a reference spec.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::disagreement::Predicate;
use crate::llm::{CallKind, Gateway};
use crate::pool::Answer;
use crate::question::parse_template;
use crate::spec::{normalize_labels, Spec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("answerer failed: {0}")]
pub struct AnswerError(pub String);

/// Anything that can answer a clarification question: an oracle, a human
/// at a terminal, a test closure.
pub trait Answerer: Send + Sync {
    fn answer(&self, predicate: Option<&Predicate>, question: &str) -> Result<Answer, AnswerError>;
}

impl<F> Answerer for F
where
    F: Fn(Option<&Predicate>, &str) -> Result<Answer, AnswerError> + Send + Sync,
{
    fn answer(&self, predicate: Option<&Predicate>, question: &str) -> Result<Answer, AnswerError> {
        self(predicate, question)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    RuleBased,
    LlmProxy,
}

pub struct Oracle {
    reference: Spec,
    gateway: Option<Gateway>,
}

impl Oracle {
    /// Deterministic oracle that evaluates predicates on the reference.
    pub fn rule_based(reference: &Spec) -> Self {
        Self { reference: normalize_labels(reference), gateway: None }
    }

    /// Oracle that asks an LLM to answer strictly from the reference.
    pub fn llm_proxy(reference: &Spec, gateway: Gateway) -> Self {
        Self { reference: normalize_labels(reference), gateway: Some(gateway) }
    }

    pub fn mode(&self) -> OracleMode {
        if self.gateway.is_some() {
            OracleMode::LlmProxy
        } else {
            OracleMode::RuleBased
        }
    }

    pub fn reference(&self) -> &Spec {
        &self.reference
    }

    /// Rule-based answer. Without a structural predicate the question is
    /// matched against the canonical templates; anything unrecognized is "no".
    pub fn evaluate(&self, predicate: Option<&Predicate>, question: &str) -> Answer {
        let parsed;
        let predicate = match predicate {
            Some(p) => Some(p),
            None => {
                parsed = parse_template(question);
                parsed.as_ref()
            }
        };
        Answer::from_bool(predicate.is_some_and(|p| p.holds(&self.reference)))
    }

    fn ask_llm(&self, gateway: &Gateway, question: &str) -> Answer {
        let request = gateway.oracle_request(&self.reference, question);
        for attempt in 0..2 {
            match gateway.complete(CallKind::OracleAnswer, &request) {
                Ok(reply) => match parse_yes_no(&reply) {
                    Some(a) => return a,
                    None => debug!(attempt, %reply, "oracle reply is not yes/no"),
                },
                Err(e) => debug!(attempt, error = %e, "oracle call failed"),
            }
        }
        Answer::No
    }
}

impl Answerer for Oracle {
    fn answer(&self, predicate: Option<&Predicate>, question: &str) -> Result<Answer, AnswerError> {
        Ok(match &self.gateway {
            None => self.evaluate(predicate, question),
            Some(gw) => self.ask_llm(gw, question),
        })
    }
}

/// Reads a leading yes/no from a free-text reply.
pub fn parse_yes_no(reply: &str) -> Option<Answer> {
    let word: String = reply
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase();
    match word.as_str() {
        "yes" => Some(Answer::Yes),
        "no" => Some(Answer::No),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::{ScriptEntry, ScriptedProvider};
    use crate::llm::RetryPolicy;
    use std::sync::Arc;

    fn reference() -> Spec {
        Spec::new()
            .with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), [("cidr_block", "10.0.0.0/16")])
            .with_resource("sub", "aws_subnet.sub", ["vpc"], Vec::<(String, String)>::new())
            .with_resource("nat", "aws_nat_gateway.nat", ["sub"], Vec::<(String, String)>::new())
    }

    #[test]
    fn rule_based_resource_membership() {
        let o = Oracle::rule_based(&reference());
        let p = Predicate::Resource { resource_type: "aws_nat_gateway".into() };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::Yes);
        let p = Predicate::Resource { resource_type: "aws_eip".into() };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::No);
    }

    #[test]
    fn rule_based_missing_attribute_is_no() {
        let o = Oracle::rule_based(&reference());
        let p = Predicate::Attribute {
            resource_type: "aws_subnet".into(),
            key: "map_public_ip_on_launch".into(),
            value: "true".into(),
        };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::No);
        let p = Predicate::Attribute { resource_type: "aws_vpc".into(), key: "cidr_block".into(), value: "10.0.0.0/16".into() };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::Yes);
    }

    #[test]
    fn rule_based_topology_edge() {
        let o = Oracle::rule_based(&reference());
        let p = Predicate::Topology { source_type: "aws_subnet".into(), target_type: "aws_vpc".into() };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::Yes);
        let p = Predicate::Topology { source_type: "aws_vpc".into(), target_type: "aws_subnet".into() };
        assert_eq!(o.answer(Some(&p), "").unwrap(), Answer::No);
    }

    #[test]
    fn rule_based_reads_template_questions() {
        let o = Oracle::rule_based(&reference());
        assert_eq!(o.answer(None, "Should the infrastructure include a aws_nat_gateway resource?").unwrap(), Answer::Yes);
        assert_eq!(o.answer(None, "Do you want it to be fast?").unwrap(), Answer::No);
    }

    fn proxy(entries: Vec<ScriptEntry>) -> Oracle {
        let gw = Gateway::new(Arc::new(ScriptedProvider::new(entries))).with_retry(RetryPolicy::immediate(0));
        Oracle::llm_proxy(&reference(), gw)
    }

    #[test]
    fn llm_proxy_parses_reply() {
        let o = proxy(vec![ScriptEntry::reply(CallKind::OracleAnswer, "Yes.")]);
        assert_eq!(o.mode(), OracleMode::LlmProxy);
        assert_eq!(o.answer(None, "NAT?").unwrap(), Answer::Yes);
    }

    #[test]
    fn llm_proxy_retries_once_then_defaults_to_no() {
        let o = proxy(vec![
            ScriptEntry::reply(CallKind::OracleAnswer, "It depends"),
            ScriptEntry::reply(CallKind::OracleAnswer, "yes"),
        ]);
        assert_eq!(o.answer(None, "q").unwrap(), Answer::Yes);
        let o = proxy(vec![
            ScriptEntry::reply(CallKind::OracleAnswer, "maybe"),
            ScriptEntry::reply(CallKind::OracleAnswer, "perhaps"),
            ScriptEntry::reply(CallKind::OracleAnswer, "yes"),
        ]);
        assert_eq!(o.answer(None, "q").unwrap(), Answer::No);
    }

    #[test]
    fn yes_no_parsing() {
        assert_eq!(parse_yes_no("  NO, it does not"), Some(Answer::No));
        assert_eq!(parse_yes_no("yesterday"), None);
        assert_eq!(parse_yes_no(""), None);
    }
}
