use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::spec::Spec;

/// Labeled directed graph of a spec: one node per resource, typed by its
/// address, one edge per dependency.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceGraph {
    pub nodes: BTreeMap<String, String>,
    pub edges: BTreeSet<(String, String)>,
}

impl ResourceGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn add_node(&mut self, label: &str, ty: &str) -> &mut Self {
        self.nodes.insert(label.to_string(), ty.to_string());
        self
    }

    pub fn add_edge(&mut self, from: &str, to: &str) -> &mut Self {
        assert!(self.nodes.contains_key(from) && self.nodes.contains_key(to), "edge endpoints must be nodes");
        self.edges.insert((from.to_string(), to.to_string()));
        self
    }
}

pub fn build_graph(spec: &Spec) -> ResourceGraph {
    let nodes = spec
        .resources
        .iter()
        .map(|(label, address)| {
            let ty = crate::spec::extract_type(address).unwrap_or_else(|_| address.clone());
            (label.clone(), ty)
        })
        .collect();
    let edges = spec
        .edges()
        .filter(|(s, t)| spec.resources.contains_key(*s) && spec.resources.contains_key(*t))
        .map(|(s, t)| (s.to_string(), t.to_string()))
        .collect();
    ResourceGraph { nodes, edges }
}
