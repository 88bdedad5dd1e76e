//! The live candidate pool of one clarification session.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::disagreement::{compute_disagreements_ref, CandidateId, Disagreement, Predicate};
use crate::spec::{fingerprint, Fingerprint, Spec};

/// Default number of specs requested per (re)generation.
pub const DEFAULT_POOL_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn is_yes(self) -> bool {
        self == Answer::Yes
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_yes() { "yes" } else { "no" })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("answer must be `yes` or `no`, got `{0}`")]
pub struct InvalidAnswer(pub String);

impl FromStr for Answer {
    type Err = InvalidAnswer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Answer::Yes),
            "no" | "n" => Ok(Answer::No),
            _ => Err(InvalidAnswer(s.to_string())),
        }
    }
}

/// One answered clarification question.
///
/// `predicate` is the structural predicate that was asked; free-form
/// baseline questions have none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QA {
    pub question_text: String,
    pub predicate: Option<Predicate>,
    pub answer: Answer,
    pub round: u32,
}

impl QA {
    /// Whether `spec` agrees with this answer. Questions without a
    /// structural predicate constrain nothing.
    pub fn consistent_with(&self, spec: &Spec) -> bool {
        match &self.predicate {
            Some(p) => p.holds(spec) == self.answer.is_yes(),
            None => true,
        }
    }
}

/// A distinct spec merged into a candidate, with the number of sampled copies.
/// Each variant has its own member id so attribute splits between variants
/// of one candidate stay disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub id: CandidateId,
    pub spec: Spec,
    pub copies: u32,
}

/// Structurally distinct candidate. Variants beyond the first are
/// attribute-level alternates ("shadows") that share its fingerprint and
/// only matter for attribute diffing and pruning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub fingerprint: Fingerprint,
    pub born_round: u32,
    variants: Vec<Variant>,
}

impl Candidate {
    /// Representative spec: the most sampled variant, earliest on ties.
    pub fn spec(&self) -> &Spec {
        let best = self
            .variants
            .iter()
            .min_by(|a, b| b.copies.cmp(&a.copies).then(a.id.cmp(&b.id)))
            .expect("candidate has at least one variant");
        &best.spec
    }

    pub fn shadows(&self) -> &[Variant] {
        &self.variants[1..]
    }

    pub fn variants(&self) -> &[Variant] {
        &self.variants
    }

    pub fn specs(&self) -> impl Iterator<Item = &Spec> {
        self.variants.iter().map(|v| &v.spec)
    }

    pub fn multiplicity(&self) -> u32 {
        self.variants.iter().map(|v| v.copies).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    candidates: Vec<Candidate>,
    next_id: CandidateId,
}

impl Pool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn get(&self, id: CandidateId) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    /// Merges specs into the pool by fingerprint. Returns how many new
    /// structurally distinct candidates were created.
    pub fn dedup_insert(&mut self, specs: impl IntoIterator<Item = Spec>, round: u32) -> usize {
        let mut created = 0;
        for spec in specs {
            let fp = fingerprint(&spec);
            if let Some(c) = self.candidates.iter_mut().find(|c| c.fingerprint == fp) {
                match c.variants.iter_mut().find(|v| v.spec == spec) {
                    Some(v) => v.copies += 1,
                    None => {
                        c.variants.push(Variant { id: self.next_id, spec, copies: 1 });
                        self.next_id += 1;
                    }
                }
                continue;
            }
            self.candidates.push(Candidate {
                id: self.next_id,
                fingerprint: fp,
                born_round: round,
                variants: vec![Variant { id: self.next_id, spec, copies: 1 }],
            });
            self.next_id += 1;
            created += 1;
        }
        created
    }

    /// Keeps only the candidates (and variants) consistent with the answer.
    pub fn prune(&mut self, qa: &QA) {
        if qa.predicate.is_none() {
            return;
        }
        for c in &mut self.candidates {
            c.variants.retain(|v| qa.consistent_with(&v.spec));
        }
        self.candidates.retain(|c| !c.variants.is_empty());
    }

    pub fn disagreements(&self) -> Vec<Disagreement> {
        if self.is_empty() {
            return Vec::new();
        }
        let members: Vec<(CandidateId, &Spec)> = self
            .candidates
            .iter()
            .flat_map(|c| c.variants.iter().map(|v| (v.id, &v.spec)))
            .collect();
        compute_disagreements_ref(&members).expect("pool is non-empty")
    }

    /// Highest multiplicity wins; ties go to the earliest generated candidate.
    pub fn select_best(&self) -> Option<&Candidate> {
        self.candidates
            .iter()
            .min_by(|a, b| b.multiplicity().cmp(&a.multiplicity()).then(a.id.cmp(&b.id)))
    }

    pub fn fingerprints(&self) -> Vec<(CandidateId, Fingerprint, u32)> {
        self.candidates
            .iter()
            .map(|c| (c.id, c.fingerprint.clone(), c.multiplicity()))
            .collect()
    }
}

/// Drops every spec that contradicts an answered question.
pub fn filter_against_history(specs: Vec<Spec>, history: &[QA]) -> Vec<Spec> {
    specs
        .into_iter()
        .filter(|s| history.iter().all(|qa| qa.consistent_with(s)))
        .collect()
}
