//! Anytime exact graph edit distance under the unit cost model.
//!
//! Node substitution is free between equal types and costs 1 otherwise;
//! node and edge insertions and deletions cost 1 each. An edge is matched
//! at no cost when both endpoints are substituted and the image edge exists.
//!
//! The search is a depth-first branch and bound over assignments of
//! reference nodes (to a generated node or to deletion). Children are
//! explored in order of their lower bound, so good complete paths are found
//! early and then improved until optimality is proven or the deadline hits.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::graph::ResourceGraph;

/// Default search deadline per graph pair.
pub const DEFAULT_GED_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditPath {
    pub node_matches: Vec<(String, String)>,
    pub node_deletions: Vec<String>,
    pub node_insertions: Vec<String>,
    pub edge_matches: Vec<((String, String), (String, String))>,
    pub edge_deletions: Vec<(String, String)>,
    pub edge_insertions: Vec<(String, String)>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GedResult {
    pub cost: f64,
    pub path: EditPath,
    /// The deadline passed before optimality was proven.
    pub timed_out: bool,
    /// Cost of every complete path the search yielded, in order.
    pub improvements: Vec<f64>,
}

struct Problem {
    n: usize,
    m: usize,
    /// reference nodes in search order
    ref_types: Vec<usize>,
    gen_types: Vec<usize>,
    ref_adj: Vec<Vec<bool>>,
    gen_adj: Vec<Vec<bool>>,
    gen_edges: Vec<(usize, usize)>,
    /// reference edges with an endpoint at search position >= d
    ref_edges_remaining: Vec<usize>,
    /// per depth, type counts of reference nodes not yet assigned
    ref_type_remaining: Vec<Vec<usize>>,
    type_count: usize,
}

struct Search<'a> {
    p: &'a Problem,
    mapping: Vec<Option<usize>>,
    used: Vec<bool>,
    gen_type_unused: Vec<usize>,
    best_cost: u32,
    best_mapping: Option<Vec<Option<usize>>>,
    improvements: Vec<f64>,
    deadline: Instant,
    expansions: u64,
    timed_out: bool,
}

impl Problem {
    fn new(reference: &ResourceGraph, generated: &ResourceGraph) -> (Self, Vec<String>, Vec<String>) {
        let mut type_ids: BTreeMap<&str, usize> = BTreeMap::new();
        for ty in reference.nodes.values().chain(generated.nodes.values()) {
            let next = type_ids.len();
            type_ids.entry(ty.as_str()).or_insert(next);
        }

        // high-degree reference nodes first: their edges constrain the bound earliest
        let mut degree: BTreeMap<&str, usize> = reference.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for (s, t) in &reference.edges {
            *degree.get_mut(s.as_str()).unwrap() += 1;
            *degree.get_mut(t.as_str()).unwrap() += 1;
        }
        let mut ref_labels: Vec<String> = reference.nodes.keys().cloned().collect();
        ref_labels.sort_by(|a, b| degree[b.as_str()].cmp(&degree[a.as_str()]).then(a.cmp(b)));
        let gen_labels: Vec<String> = generated.nodes.keys().cloned().collect();

        let ref_pos: BTreeMap<&str, usize> = ref_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let gen_pos: BTreeMap<&str, usize> = gen_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let n = ref_labels.len();
        let m = gen_labels.len();

        let mut ref_adj = vec![vec![false; n]; n];
        for (s, t) in &reference.edges {
            ref_adj[ref_pos[s.as_str()]][ref_pos[t.as_str()]] = true;
        }
        let mut gen_adj = vec![vec![false; m]; m];
        let mut gen_edges = Vec::with_capacity(generated.edges.len());
        for (s, t) in &generated.edges {
            let (a, b) = (gen_pos[s.as_str()], gen_pos[t.as_str()]);
            gen_adj[a][b] = true;
            gen_edges.push((a, b));
        }

        let mut ref_edges_remaining = vec![0; n + 1];
        for (s, t) in &reference.edges {
            let last = ref_pos[s.as_str()].max(ref_pos[t.as_str()]);
            for slot in ref_edges_remaining.iter_mut().take(last + 1) {
                *slot += 1;
            }
        }

        let type_count = type_ids.len();
        let ref_types: Vec<usize> = ref_labels.iter().map(|l| type_ids[reference.nodes[l].as_str()]).collect();
        let gen_types: Vec<usize> = gen_labels.iter().map(|l| type_ids[generated.nodes[l].as_str()]).collect();
        let mut ref_type_remaining = vec![vec![0; type_count]; n + 1];
        for d in (0..n).rev() {
            ref_type_remaining[d] = ref_type_remaining[d + 1].clone();
            ref_type_remaining[d][ref_types[d]] += 1;
        }

        let problem = Problem {
            n,
            m,
            ref_types,
            gen_types,
            ref_adj,
            gen_adj,
            gen_edges,
            ref_edges_remaining,
            ref_type_remaining,
            type_count,
        };
        (problem, ref_labels, gen_labels)
    }
}

impl Search<'_> {
    /// Cost added by assigning reference node `d` to `target`, given the
    /// assignments of nodes `0..d`.
    fn assign_cost(&self, d: usize, target: Option<usize>) -> u32 {
        let p = self.p;
        let mut cost = match target {
            None => 1,
            Some(g) => u32::from(p.ref_types[d] != p.gen_types[g]),
        };
        let gen_edge = |a: Option<usize>, b: Option<usize>| match (a, b) {
            (Some(a), Some(b)) => p.gen_adj[a][b],
            _ => false,
        };
        for w in 0..d {
            let mw = self.mapping[w];
            cost += u32::from(p.ref_adj[d][w] != gen_edge(target, mw));
            cost += u32::from(p.ref_adj[w][d] != gen_edge(mw, target));
        }
        cost += u32::from(p.ref_adj[d][d] != gen_edge(target, target));
        cost
    }

    /// Admissible bound on the cost of everything not yet decided, with
    /// nodes `0..d` assigned.
    fn lower_bound(&self, d: usize) -> u32 {
        let p = self.p;
        let ref_left = p.n - d;
        let gen_left = self.used.iter().filter(|u| !**u).count();
        let same_type: usize = (0..p.type_count)
            .map(|t| p.ref_type_remaining[d][t].min(self.gen_type_unused[t]))
            .sum();
        let node_lb = ref_left.max(gen_left) - same_type;

        let gen_edges_left = p.gen_edges.iter().filter(|(a, b)| !self.used[*a] || !self.used[*b]).count();
        let edge_lb = p.ref_edges_remaining[d].abs_diff(gen_edges_left);
        (node_lb + edge_lb) as u32
    }

    /// Cost of inserting every unused generated node and its incident edges.
    fn completion_cost(&self) -> u32 {
        let nodes = self.used.iter().filter(|u| !**u).count();
        let edges = self.p.gen_edges.iter().filter(|(a, b)| !self.used[*a] || !self.used[*b]).count();
        (nodes + edges) as u32
    }

    fn dfs(&mut self, d: usize, cost: u32) {
        if self.timed_out {
            return;
        }
        self.expansions += 1;
        if self.expansions.is_multiple_of(1024) && Instant::now() >= self.deadline {
            self.timed_out = true;
            return;
        }
        if d == self.p.n {
            let total = cost + self.completion_cost();
            if total < self.best_cost {
                self.best_cost = total;
                self.best_mapping = Some(self.mapping.clone());
                self.improvements.push(f64::from(total));
            }
            return;
        }

        let mut children: Vec<(u32, u32, Option<usize>)> = Vec::with_capacity(self.p.m + 1);
        let targets = (0..self.p.m).filter(|g| !self.used[*g]).map(Some).chain(std::iter::once(None));
        for target in targets.collect::<Vec<_>>() {
            let step = self.assign_cost(d, target);
            self.apply(d, target);
            let bound = cost + step + self.lower_bound(d + 1);
            self.undo(d, target);
            if bound < self.best_cost {
                children.push((bound, step, target));
            }
        }
        // stable: equal bounds keep generated-node order, deletion last
        children.sort_by_key(|c| c.0);
        for (bound, step, target) in children {
            if bound >= self.best_cost {
                break;
            }
            self.apply(d, target);
            self.dfs(d + 1, cost + step);
            self.undo(d, target);
            if self.timed_out {
                return;
            }
        }
    }

    fn apply(&mut self, d: usize, target: Option<usize>) {
        self.mapping[d] = target;
        if let Some(g) = target {
            self.used[g] = true;
            self.gen_type_unused[self.p.gen_types[g]] -= 1;
        }
    }

    fn undo(&mut self, d: usize, target: Option<usize>) {
        self.mapping[d] = None;
        if let Some(g) = target {
            self.used[g] = false;
            self.gen_type_unused[self.p.gen_types[g]] += 1;
        }
    }
}

/// Graph edit distance from `reference` to `generated`, searched until
/// optimal or until `timeout` elapses.
pub fn ged(reference: &ResourceGraph, generated: &ResourceGraph, timeout: Duration) -> GedResult {
    let (problem, ref_labels, gen_labels) = Problem::new(reference, generated);
    let mut gen_type_unused = vec![0; problem.type_count];
    for &t in &problem.gen_types {
        gen_type_unused[t] += 1;
    }
    let mut search = Search {
        p: &problem,
        mapping: vec![None; problem.n],
        used: vec![false; problem.m],
        gen_type_unused,
        best_cost: u32::MAX,
        best_mapping: None,
        improvements: Vec::new(),
        deadline: Instant::now() + timeout,
        expansions: 0,
        timed_out: false,
    };
    search.dfs(0, 0);

    // the first descent always completes unless the deadline hit before it
    let mapping = search.best_mapping.clone().unwrap_or_else(|| vec![None; problem.n]);
    let path = edit_path(reference, generated, &ref_labels, &gen_labels, &mapping);
    let cost = path.total_cost;
    let mut improvements = search.improvements;
    if improvements.last() != Some(&cost) {
        improvements.push(cost);
    }
    GedResult { cost, path, timed_out: search.timed_out, improvements }
}

fn edit_path(
    reference: &ResourceGraph,
    generated: &ResourceGraph,
    ref_labels: &[String],
    gen_labels: &[String],
    mapping: &[Option<usize>],
) -> EditPath {
    let mut path = EditPath::default();
    let mut image: BTreeMap<&str, &str> = BTreeMap::new();
    let mut cost = 0u32;
    for (i, target) in mapping.iter().enumerate() {
        let r = &ref_labels[i];
        match target {
            Some(g) => {
                let g = &gen_labels[*g];
                if reference.nodes[r] != generated.nodes[g] {
                    cost += 1;
                }
                image.insert(r.as_str(), g.as_str());
                path.node_matches.push((r.clone(), g.clone()));
            }
            None => {
                cost += 1;
                path.node_deletions.push(r.clone());
            }
        }
    }
    let matched_gen: std::collections::BTreeSet<&str> = image.values().copied().collect();
    for g in gen_labels {
        if !matched_gen.contains(g.as_str()) {
            cost += 1;
            path.node_insertions.push(g.clone());
        }
    }

    let mut covered = std::collections::BTreeSet::new();
    for (s, t) in &reference.edges {
        let mapped = image.get(s.as_str()).zip(image.get(t.as_str()));
        match mapped {
            Some((gs, gt)) if generated.edges.contains(&(gs.to_string(), gt.to_string())) => {
                covered.insert((gs.to_string(), gt.to_string()));
                path.edge_matches.push(((s.clone(), t.clone()), (gs.to_string(), gt.to_string())));
            }
            _ => {
                cost += 1;
                path.edge_deletions.push((s.clone(), t.clone()));
            }
        }
    }
    for e in &generated.edges {
        if !covered.contains(e) {
            cost += 1;
            path.edge_insertions.push(e.clone());
        }
    }
    path.node_matches.sort();
    path.node_deletions.sort();
    path.total_cost = f64::from(cost);
    path
}
