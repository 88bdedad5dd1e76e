//! Symbolic diffing of a candidate pool along the resource, topology and
//! attribute axes, entropy scoring of the resulting binary splits, and the
//! round-robin question scheduler.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::Spec;

pub type CandidateId = u64;

/// Default threshold below which a split is considered uninformative.
pub const DEFAULT_MIN_ENTROPY_BITS: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DisagreementError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("entropy of an empty split is undefined")]
    DegenerateSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Resource,
    Topology,
    Attribute,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Resource, Axis::Topology, Axis::Attribute];

    pub fn next(self) -> Axis {
        match self {
            Axis::Resource => Axis::Topology,
            Axis::Topology => Axis::Attribute,
            Axis::Attribute => Axis::Resource,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Resource => "resource",
            Axis::Topology => "topology",
            Axis::Attribute => "attribute",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A binary structural question about a spec.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Predicate {
    /// A spec contains a resource of this type.
    Resource { resource_type: String },
    /// A spec contains a dependency edge between resources of these types.
    Topology { source_type: String, target_type: String },
    /// Some resource of this type sets `key` to exactly `value`.
    Attribute { resource_type: String, key: String, value: String },
}

impl Predicate {
    pub fn axis(&self) -> Axis {
        match self {
            Predicate::Resource { .. } => Axis::Resource,
            Predicate::Topology { .. } => Axis::Topology,
            Predicate::Attribute { .. } => Axis::Attribute,
        }
    }

    pub fn holds(&self, spec: &Spec) -> bool {
        match self {
            Predicate::Resource { resource_type } => spec.resources_of_type(resource_type).next().is_some(),
            Predicate::Topology { source_type, target_type } => spec.edges().any(|(s, t)| {
                spec.type_of(s).as_deref() == Some(source_type.as_str())
                    && spec.type_of(t).as_deref() == Some(target_type.as_str())
            }),
            Predicate::Attribute { resource_type, key, value } => spec
                .resources_of_type(resource_type)
                .any(|(_, attrs)| attrs.and_then(|a| a.get(key)) == Some(value)),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Resource { resource_type } => write!(f, "resource {resource_type}"),
            Predicate::Topology { source_type, target_type } => {
                write!(f, "edge {source_type} -> {target_type}")
            }
            Predicate::Attribute { resource_type, key, value } => {
                write!(f, "{resource_type}.{key} = {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub predicate: Predicate,
    pub yes_side: BTreeSet<CandidateId>,
    pub no_side: BTreeSet<CandidateId>,
    pub entropy_bits: f64,
}

impl Disagreement {
    pub fn axis(&self) -> Axis {
        self.predicate.axis()
    }
}

/// Binary Shannon entropy (bits) of a yes/no split.
pub fn entropy(yes_count: usize, no_count: usize) -> Result<f64, DisagreementError> {
    let total = yes_count + no_count;
    if total == 0 {
        return Err(DisagreementError::DegenerateSplit);
    }
    // evaluate in a fixed order so entropy(a, b) and entropy(b, a) agree bitwise
    let (lo, hi) = if yes_count <= no_count { (yes_count, no_count) } else { (no_count, yes_count) };
    let term = |c: usize| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / total as f64;
            -p * p.log2()
        }
    };
    Ok(term(lo) + term(hi))
}

/// Diffs a pool of specs keyed by member id.
pub fn compute_disagreements(pool: &[(CandidateId, Spec)]) -> Result<Vec<Disagreement>, DisagreementError> {
    let members: Vec<(CandidateId, &Spec)> = pool.iter().map(|(id, s)| (*id, s)).collect();
    compute_disagreements_ref(&members)
}

pub fn compute_disagreements_ref(members: &[(CandidateId, &Spec)]) -> Result<Vec<Disagreement>, DisagreementError> {
    if members.is_empty() {
        return Err(DisagreementError::EmptyPool);
    }
    let mut out = Vec::new();

    let mut resource_types = BTreeSet::new();
    let mut typed_edges = BTreeSet::new();
    for (_, s) in members {
        resource_types.extend(s.resource_types());
        typed_edges.extend(s.typed_edges());
    }
    for resource_type in resource_types {
        push_split(&mut out, members, Predicate::Resource { resource_type });
    }
    for (source_type, target_type) in typed_edges {
        push_split(&mut out, members, Predicate::Topology { source_type, target_type });
    }
    out.extend(attribute_disagreements(members));
    out.sort_by(|a, b| a.predicate.cmp(&b.predicate));
    Ok(out)
}

fn split(members: &[(CandidateId, &Spec)], predicate: &Predicate) -> (BTreeSet<CandidateId>, BTreeSet<CandidateId>) {
    let mut yes = BTreeSet::new();
    let mut no = BTreeSet::new();
    for (id, spec) in members {
        if predicate.holds(spec) {
            yes.insert(*id);
        } else {
            no.insert(*id);
        }
    }
    (yes, no)
}

fn push_split(out: &mut Vec<Disagreement>, members: &[(CandidateId, &Spec)], predicate: Predicate) {
    let (yes_side, no_side) = split(members, &predicate);
    if yes_side.is_empty() || no_side.is_empty() {
        return;
    }
    let entropy_bits = entropy(yes_side.len(), no_side.len()).expect("non-empty split");
    out.push(Disagreement { predicate, yes_side, no_side, entropy_bits });
}

/// Per (type, key) context, the value assignments of each member that has
/// the type. `None` in the set marks an instance that leaves the key unset.
type Assignments = BTreeMap<CandidateId, BTreeSet<Option<String>>>;

fn attribute_disagreements(members: &[(CandidateId, &Spec)]) -> Vec<Disagreement> {
    let mut contexts: BTreeMap<(String, String), Assignments> = BTreeMap::new();
    // collect keys per type first so "key unset" can be recorded
    let mut keys_by_type: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (_, s) in members {
        for (label, address) in &s.resources {
            let Ok(ty) = crate::spec::extract_type(address) else { continue };
            let entry = keys_by_type.entry(ty).or_default();
            if let Some(attrs) = s.attributes.get(label) {
                entry.extend(attrs.keys().cloned());
            }
        }
    }
    for (id, s) in members {
        for (label, address) in &s.resources {
            let Ok(ty) = crate::spec::extract_type(address) else { continue };
            let attrs = s.attributes.get(label);
            for key in &keys_by_type[&ty] {
                contexts
                    .entry((ty.clone(), key.clone()))
                    .or_default()
                    .entry(*id)
                    .or_default()
                    .insert(attrs.and_then(|a| a.get(key)).cloned());
            }
        }
    }

    let mut out = Vec::new();
    for ((resource_type, key), assignments) in contexts {
        let first = assignments.values().next();
        if assignments.values().all(|v| Some(v) == first) {
            continue;
        }
        let mut value_freq: BTreeMap<&str, usize> = BTreeMap::new();
        for values in assignments.values() {
            for v in values.iter().flatten() {
                *value_freq.entry(v.as_str()).or_default() += 1;
            }
        }
        // most frequent first, then lexicographically smallest
        let mut pivots: Vec<(&str, usize)> = value_freq.into_iter().collect();
        pivots.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        let mut seen_partitions: BTreeSet<BTreeSet<CandidateId>> = BTreeSet::new();
        for (value, _) in pivots {
            let predicate = Predicate::Attribute {
                resource_type: resource_type.clone(),
                key: key.clone(),
                value: value.to_string(),
            };
            let (yes, no) = split(members, &predicate);
            if yes.is_empty() || no.is_empty() {
                continue;
            }
            // a split and its complement ask the same question
            let canonical = if yes.first() < no.first() { yes.clone() } else { no.clone() };
            if !seen_partitions.insert(canonical) {
                continue;
            }
            let entropy_bits = entropy(yes.len(), no.len()).expect("non-empty split");
            out.push(Disagreement { predicate, yes_side: yes, no_side: no, entropy_bits });
        }
    }
    out
}

/// Cursor of the round-robin scheduler: the axis to try first next time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRobinState {
    pub next: Axis,
}

impl Default for RoundRobinState {
    fn default() -> Self {
        Self { next: Axis::Resource }
    }
}

fn better<'a>(a: &'a Disagreement, b: &'a Disagreement) -> &'a Disagreement {
    match b.entropy_bits.total_cmp(&a.entropy_bits) {
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Equal => {
            if b.predicate < a.predicate {
                b
            } else {
                a
            }
        }
    }
}

/// Picks the next disagreement to ask about.
///
/// Splits under `min_entropy_bits` are dropped. With round-robin enabled the
/// best split on the next axis in Resource, Topology, Attribute order wins
/// (empty axes are skipped) and the cursor moves past it; otherwise the
/// global entropy maximum is returned and the cursor is left alone.
pub fn rank_and_select(
    disagreements: &[Disagreement],
    rr_state: &mut RoundRobinState,
    rr_enabled: bool,
    min_entropy_bits: f64,
) -> Option<Disagreement> {
    let survivors = disagreements.iter().filter(|d| d.entropy_bits >= min_entropy_bits);
    if !rr_enabled {
        return survivors.reduce(better).cloned();
    }
    let survivors: Vec<&Disagreement> = survivors.collect();
    let mut axis = rr_state.next;
    for _ in 0..3 {
        if let Some(best) = survivors.iter().copied().filter(|d| d.axis() == axis).reduce(better) {
            rr_state.next = axis.next();
            return Some(best.clone());
        }
        axis = axis.next();
    }
    None
}

/// Number of disagreements per axis, in Resource, Topology, Attribute order.
pub fn axis_counts(disagreements: &[Disagreement]) -> [usize; 3] {
    let mut counts = [0; 3];
    for d in disagreements {
        counts[d.axis() as usize] += 1;
    }
    counts
}
