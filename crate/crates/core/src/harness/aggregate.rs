use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Method, RunResult};

/// Mean scores of one (method, budget) cell, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: Method,
    pub budget_k: u32,
    pub tasks: usize,
    pub mean_structure_pct: f64,
    pub mean_attribute_pct: f64,
    /// Difference to the reference method at the same budget.
    pub delta_structure_pct: Option<f64>,
    pub delta_attribute_pct: Option<f64>,
    pub mean_rounds_used: f64,
    pub mean_regen_count: f64,
    /// Pearson correlation of regen_count with each score; null when either
    /// side has zero variance.
    pub regen_structure_corr: Option<f64>,
    pub regen_attribute_corr: Option<f64>,
}

/// Mean per-round dynamics over the tasks that reached `round`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub method: Method,
    pub budget_k: u32,
    pub round: u32,
    pub tasks: usize,
    pub mean_resource: f64,
    pub mean_topology: f64,
    pub mean_attribute: f64,
    pub mean_pool_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenBucket {
    pub method: Method,
    pub budget_k: u32,
    pub regen_count: u32,
    pub tasks: usize,
    pub mean_structure_pct: f64,
    pub mean_attribute_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub reference_method: Method,
    pub groups: Vec<GroupSummary>,
    pub rounds: Vec<RoundStats>,
    pub regen_histogram: Vec<RegenBucket>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Sample Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs.iter().copied()), mean(ys.iter().copied()));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Summarizes results per (method, budget). Deltas are taken against
/// `reference` at the same budget when it is present.
pub fn aggregate(results: &[RunResult], reference: Method) -> Result<Summary, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut cells: BTreeMap<(Method, u32), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        cells.entry((r.method, r.budget_k)).or_default().push(r);
    }

    let mut groups = Vec::new();
    let mut rounds = Vec::new();
    let mut regen_histogram = Vec::new();
    for (&(method, budget_k), rs) in &cells {
        let structure: Vec<f64> = rs.iter().map(|r| r.structure_score).collect();
        let attribute: Vec<f64> = rs.iter().map(|r| r.attribute_score).collect();
        let regens: Vec<f64> = rs.iter().map(|r| f64::from(r.regen_count)).collect();
        groups.push(GroupSummary {
            method,
            budget_k,
            tasks: rs.len(),
            mean_structure_pct: 100.0 * mean(structure.iter().copied()),
            mean_attribute_pct: 100.0 * mean(attribute.iter().copied()),
            delta_structure_pct: None,
            delta_attribute_pct: None,
            mean_rounds_used: mean(rs.iter().map(|r| f64::from(r.rounds_used))),
            mean_regen_count: mean(regens.iter().copied()),
            regen_structure_corr: pearson(&regens, &structure),
            regen_attribute_corr: pearson(&regens, &attribute),
        });

        let mut per_round: BTreeMap<u32, Vec<&crate::session::InstrumentationRecord>> = BTreeMap::new();
        for r in rs {
            for rec in &r.trace {
                per_round.entry(rec.round).or_default().push(rec);
            }
        }
        for (round, recs) in per_round {
            rounds.push(RoundStats {
                method,
                budget_k,
                round,
                tasks: recs.len(),
                mean_resource: mean(recs.iter().map(|x| x.disagreement_counts.resource as f64)),
                mean_topology: mean(recs.iter().map(|x| x.disagreement_counts.topology as f64)),
                mean_attribute: mean(recs.iter().map(|x| x.disagreement_counts.attribute as f64)),
                mean_pool_size: mean(recs.iter().map(|x| x.pool_size as f64)),
            });
        }

        let mut by_regen: BTreeMap<u32, Vec<&RunResult>> = BTreeMap::new();
        for r in rs {
            by_regen.entry(r.regen_count).or_default().push(r);
        }
        for (regen_count, bucket) in by_regen {
            regen_histogram.push(RegenBucket {
                method,
                budget_k,
                regen_count,
                tasks: bucket.len(),
                mean_structure_pct: 100.0 * mean(bucket.iter().map(|r| r.structure_score)),
                mean_attribute_pct: 100.0 * mean(bucket.iter().map(|r| r.attribute_score)),
            });
        }
    }

    let reference_means: BTreeMap<u32, (f64, f64)> = groups
        .iter()
        .filter(|g| g.method == reference)
        .map(|g| (g.budget_k, (g.mean_structure_pct, g.mean_attribute_pct)))
        .collect();
    for g in &mut groups {
        if let Some(&(s, a)) = reference_means.get(&g.budget_k) {
            g.delta_structure_pct = Some(g.mean_structure_pct - s);
            g.delta_attribute_pct = Some(g.mean_attribute_pct - a);
        }
    }

    Ok(Summary { reference_method: reference, groups, rounds, regen_histogram })
}
