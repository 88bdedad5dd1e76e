//! Structured resource specs: resources, topology and attributes.
//!
//! A [`Spec`] maps resource labels to Terraform-style addresses, lists each
//! label's dependencies, and carries per-resource attribute maps whose values
//! are canonicalized to strings when parsed.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("schema violation at label `{label}`: {reason}")]
    SchemaViolation { label: String, reason: String },
    #[error("malformed resource address `{0}`")]
    MalformedAddress(String),
}

pub type Attributes = BTreeMap<String, String>;

/// One candidate or reference configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spec {
    #[serde(default)]
    pub resources: BTreeMap<String, String>,
    #[serde(default)]
    pub topology: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub attributes: BTreeMap<String, Attributes>,
}

/// Deduplication key: the resource-type multiset plus the typed edge set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    pub resource_types: Vec<String>,
    pub typed_edges: BTreeSet<(String, String)>,
}

/// Returns the provider-type prefix of a resource address.
///
/// Data sources keep their `data.` prefix: `data.aws_iam_policy_document.p1`
/// yields `data.aws_iam_policy_document`.
pub fn extract_type(address: &str) -> Result<String, SpecError> {
    let malformed = || SpecError::MalformedAddress(address.to_string());
    if let Some(rest) = address.strip_prefix("data.") {
        let (ty, name) = rest.split_once('.').ok_or_else(malformed)?;
        if ty.is_empty() || name.is_empty() {
            return Err(malformed());
        }
        return Ok(format!("data.{ty}"));
    }
    let (ty, name) = address.split_once('.').ok_or_else(malformed)?;
    if ty.is_empty() || name.is_empty() {
        return Err(malformed());
    }
    Ok(ty.to_string())
}

fn instance_name(address: &str) -> &str {
    address.rsplit('.').next().unwrap_or(address)
}

impl Spec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    /// Adds a resource with its dependencies and attributes. Builder-style
    /// helper for tests and synthetic data.
    pub fn with_resource<I, A, K, V>(mut self, label: &str, address: &str, deps: I, attrs: A) -> Self
    where
        I: IntoIterator,
        I::Item: Into<String>,
        A: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        self.resources.insert(label.to_string(), address.to_string());
        let deps: Vec<String> = deps.into_iter().map(Into::into).collect();
        if !deps.is_empty() {
            self.topology.insert(label.to_string(), deps);
        }
        let attrs: Attributes = attrs.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        if !attrs.is_empty() {
            self.attributes.insert(label.to_string(), attrs);
        }
        self
    }

    /// Resource type of a label, if the label exists and its address is well formed.
    pub fn type_of(&self, label: &str) -> Option<String> {
        self.resources.get(label).and_then(|a| extract_type(a).ok())
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (label, address) in &self.resources {
            extract_type(address).map_err(|_| SpecError::SchemaViolation {
                label: label.clone(),
                reason: format!("malformed address `{address}`"),
            })?;
        }
        for (label, deps) in &self.topology {
            if !self.resources.contains_key(label) {
                return Err(SpecError::SchemaViolation {
                    label: label.clone(),
                    reason: "topology key is not a known resource".into(),
                });
            }
            if let Some(dep) = deps.iter().find(|d| !self.resources.contains_key(*d)) {
                return Err(SpecError::SchemaViolation {
                    label: dep.clone(),
                    reason: format!("dependency of `{label}` is not a known resource"),
                });
            }
        }
        if let Some(label) = self.attributes.keys().find(|l| !self.resources.contains_key(*l)) {
            return Err(SpecError::SchemaViolation {
                label: label.clone(),
                reason: "attributes key is not a known resource".into(),
            });
        }
        Ok(())
    }

    /// Directed dependency edges as (label, dependency label).
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.topology
            .iter()
            .flat_map(|(src, deps)| deps.iter().map(move |d| (src.as_str(), d.as_str())))
    }

    /// Set of resource types present.
    pub fn resource_types(&self) -> BTreeSet<String> {
        self.resources.values().filter_map(|a| extract_type(a).ok()).collect()
    }

    /// Set of (source type, target type) pairs over all dependency edges.
    pub fn typed_edges(&self) -> BTreeSet<(String, String)> {
        self.edges()
            .filter_map(|(s, t)| Some((self.type_of(s)?, self.type_of(t)?)))
            .collect()
    }

    /// Iterates `(label, attributes)` for every resource of the given type.
    pub fn resources_of_type<'a>(
        &'a self,
        ty: &'a str,
    ) -> impl Iterator<Item = (&'a str, Option<&'a Attributes>)> + 'a {
        self.resources
            .iter()
            .filter(move |(_, a)| extract_type(a).map(|t| t == ty).unwrap_or(false))
            .map(move |(l, _)| (l.as_str(), self.attributes.get(l)))
    }
}

/// Relabels every resource by the instance-name suffix of its address,
/// falling back to the full address for colliding suffixes.
pub fn normalize_labels(spec: &Spec) -> Spec {
    let mut suffix_count: HashMap<&str, usize> = HashMap::new();
    let mut address_count: HashMap<&str, usize> = HashMap::new();
    for address in spec.resources.values() {
        *suffix_count.entry(instance_name(address)).or_default() += 1;
        *address_count.entry(address.as_str()).or_default() += 1;
    }

    // Identical addresses under different labels cannot be told apart by
    // address alone; those get an ordinal suffix in label order.
    let mut address_seen: HashMap<&str, usize> = HashMap::new();
    let mut rename: BTreeMap<&str, String> = BTreeMap::new();
    for (label, address) in &spec.resources {
        let new_label = if suffix_count[instance_name(address)] == 1 {
            instance_name(address).to_string()
        } else if address_count[address.as_str()] == 1 {
            address.clone()
        } else {
            let n = address_seen.entry(address.as_str()).or_default();
            *n += 1;
            format!("{address}#{}", *n - 1)
        };
        rename.insert(label.as_str(), new_label);
    }

    let map = |l: &String| rename.get(l.as_str()).cloned().unwrap_or_else(|| l.clone());
    Spec {
        resources: spec.resources.iter().map(|(l, a)| (map(l), a.clone())).collect(),
        topology: spec
            .topology
            .iter()
            .map(|(l, deps)| (map(l), deps.iter().map(map).collect()))
            .collect(),
        attributes: spec.attributes.iter().map(|(l, a)| (map(l), a.clone())).collect(),
    }
}

pub fn fingerprint(spec: &Spec) -> Fingerprint {
    let mut resource_types: Vec<String> =
        spec.resources.values().filter_map(|a| extract_type(a).ok()).collect();
    resource_types.sort();
    Fingerprint {
        resource_types,
        typed_edges: spec.typed_edges(),
    }
}

/// Renders a JSON attribute value as a canonical string. Strings are taken
/// verbatim, everything else is compact JSON with sorted object keys.
pub fn canonical_value(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        // serde_json's default map is ordered, so nested keys come out sorted
        other => other.to_string(),
    }
}

#[derive(Deserialize)]
struct RawSpec {
    #[serde(default)]
    resources: BTreeMap<String, String>,
    #[serde(default)]
    topology: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    attributes: BTreeMap<String, BTreeMap<String, Value>>,
}

pub fn parse_spec(json_text: &str) -> Result<Spec, SpecError> {
    let value: Value =
        serde_json::from_str(json_text).map_err(|e| SpecError::InvalidJson(e.to_string()))?;
    spec_from_value(value)
}

pub fn spec_from_value(value: Value) -> Result<Spec, SpecError> {
    if !value.is_object() {
        return Err(SpecError::InvalidJson("top-level value is not an object".into()));
    }
    let raw: RawSpec = serde_json::from_value(value).map_err(|e| SpecError::SchemaViolation {
        label: String::new(),
        reason: e.to_string(),
    })?;
    let spec = Spec {
        resources: raw.resources,
        topology: raw.topology,
        attributes: raw
            .attributes
            .into_iter()
            .map(|(l, attrs)| (l, attrs.iter().map(|(k, v)| (k.clone(), canonical_value(v))).collect()))
            .collect(),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn serialize_spec(spec: &Spec) -> String {
    serde_json::to_string(spec).expect("spec serialization is infallible")
}
