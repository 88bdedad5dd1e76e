use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::embed::{cosine, Embedder, EmbedderUnavailable};
use super::ged::{ged, EditPath};
use super::graph::{build_graph, ResourceGraph};
use crate::spec::{normalize_labels, Attributes, Spec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub structure_score: f64,
    pub attribute_score: f64,
    pub ged: f64,
    pub edit_path: EditPath,
    pub timed_out: bool,
}

/// `max(0, 1 - ged / (|Vr| + |Er| + |Vg| + |Eg|))`, with 1 for two empty graphs.
pub fn structure_score(reference: &ResourceGraph, generated: &ResourceGraph, ged_cost: f64) -> f64 {
    let denom = reference.node_count() + reference.edge_count() + generated.node_count() + generated.edge_count();
    if denom == 0 {
        return 1.0;
    }
    (1.0 - ged_cost / denom as f64).clamp(0.0, 1.0)
}

pub fn serialize_node(ty: &str, attributes: &Attributes) -> String {
    let mut out = format!("type={ty}");
    for (k, v) in attributes {
        out.push_str(&format!(", {k}={v}"));
    }
    out
}

fn node_text(spec: &Spec, label: &str) -> (String, bool) {
    let ty = spec.type_of(label).unwrap_or_default();
    let empty = Attributes::new();
    let attrs = spec.attributes.get(label).unwrap_or(&empty);
    (serialize_node(&ty, attrs), attrs.is_empty())
}

/// Mean node similarity over matched, deleted and inserted nodes.
pub fn attribute_score(
    reference: &Spec,
    generated: &Spec,
    path: &EditPath,
    embedder: &dyn Embedder,
) -> Result<f64, EmbedderUnavailable> {
    let total = path.node_matches.len() + path.node_deletions.len() + path.node_insertions.len();
    if total == 0 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    for (r, g) in &path.node_matches {
        let (rt, r_empty) = node_text(reference, r);
        let (gt, g_empty) = node_text(generated, g);
        sum += if r_empty && g_empty {
            1.0
        } else if rt == gt {
            // identical text embeds identically; skip float noise
            1.0
        } else {
            cosine(&embedder.embed(&rt)?, &embedder.embed(&gt)?).clamp(0.0, 1.0)
        };
    }
    Ok(sum / total as f64)
}

/// Full evaluation of a generated spec against a reference.
pub fn score_specs(
    reference: &Spec,
    generated: &Spec,
    timeout: Duration,
    embedder: &dyn Embedder,
) -> Result<ScoreReport, EmbedderUnavailable> {
    let reference = normalize_labels(reference);
    let generated = normalize_labels(generated);
    let rg = build_graph(&reference);
    let gg = build_graph(&generated);
    let result = ged(&rg, &gg, timeout);
    let structure = structure_score(&rg, &gg, result.cost);
    let attribute = attribute_score(&reference, &generated, &result.path, embedder)?;
    Ok(ScoreReport {
        structure_score: structure,
        attribute_score: attribute,
        ged: result.cost,
        edit_path: result.path,
        timed_out: result.timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::super::embed::FallbackEmbedder;
    use super::*;

    const T: Duration = Duration::from_secs(5);
    const NONE: [(&str, &str); 0] = [];

    #[test]
    fn serialization_sorts_keys() {
        let attrs: Attributes = [("cidr_block", "10.0.0.0/16")].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        assert_eq!(serialize_node("aws_vpc", &attrs), "type=aws_vpc, cidr_block=10.0.0.0/16");
        assert_eq!(serialize_node("aws_vpc", &Attributes::new()), "type=aws_vpc");
        let attrs: Attributes = [("b", "2"), ("a", "1")].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        assert_eq!(serialize_node("t", &attrs), "type=t, a=1, b=2");
    }

    #[test]
    fn half_structure_score() {
        let r = Spec::new()
            .with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), NONE)
            .with_resource("subnet", "aws_subnet.subnet", ["vpc"], NONE);
        let g = Spec::new().with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), NONE);
        let report = score_specs(&r, &g, T, &FallbackEmbedder).unwrap();
        assert_eq!(report.ged, 2.0);
        assert_eq!(report.structure_score, 0.5);
        // matched vpc pair has no attributes, subnet deleted
        assert_eq!(report.attribute_score, 0.5);
    }

    #[test]
    fn identical_and_empty_specs_score_one() {
        let s = Spec::new()
            .with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), [("cidr_block", "10.0.0.0/16")])
            .with_resource("subnet", "aws_subnet.subnet", ["vpc"], [("cidr_block", "10.0.1.0/24")]);
        let report = score_specs(&s, &s, T, &FallbackEmbedder).unwrap();
        assert_eq!((report.structure_score, report.attribute_score), (1.0, 1.0));
        let report = score_specs(&Spec::new(), &Spec::new(), T, &FallbackEmbedder).unwrap();
        assert_eq!((report.structure_score, report.attribute_score), (1.0, 1.0));
    }

    #[test]
    fn surplus_node_lowers_both_scores() {
        let s = Spec::new().with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), [("cidr_block", "10.0.0.0/16")]);
        let g = s.clone().with_resource("eip", "aws_eip.eip", Vec::<String>::new(), NONE);
        let report = score_specs(&s, &g, T, &FallbackEmbedder).unwrap();
        assert!(report.structure_score < 1.0);
        assert!(report.attribute_score < 1.0);
    }

    #[test]
    fn differing_attributes_score_between_zero_and_one() {
        let r = Spec::new().with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), [("cidr_block", "10.0.0.0/16")]);
        let g = Spec::new().with_resource("vpc", "aws_vpc.vpc", Vec::<String>::new(), [("cidr_block", "10.1.0.0/16")]);
        let report = score_specs(&r, &g, T, &FallbackEmbedder).unwrap();
        assert_eq!(report.structure_score, 1.0);
        assert!(report.attribute_score > 0.5 && report.attribute_score < 1.0);
    }
}
