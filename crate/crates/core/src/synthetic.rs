//! A small synthetic world for tests and demos: ten planted-target tasks
//! and a seeded stochastic provider that plays every LLM role.
//!
//! Each task is a base configuration plus independent choice points
//! (optional resources, alternative dependency targets, attribute values).
//! The reference spec fixes one option per choice point. The provider
//! samples candidates by drawing every choice at random, honouring the
//! yes/no answers it can read back from the prompt history, and
//! occasionally hallucinates an unrelated resource.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::disagreement::Predicate;
use crate::harness::Task;
use crate::llm::{CallKind, ChatProvider, ChatRequest, Gateway, ProviderError, RetryPolicy};
use crate::pool::Answer;
use crate::question::{parse_template, template_question};
use crate::spec::{parse_spec, serialize_spec, Spec};

/// Probability that a sampled spec carries one unrelated extra resource.
const HALLUCINATION_RATE: f64 = 0.05;
/// Share of baseline questions drawn from the task's real choice points.
const RELEVANT_QUESTION_RATE: f64 = 0.5;
/// Rejection-sampling attempts before giving up on the history.
const MAX_ATTEMPTS: usize = 64;

const DISTRACTOR_TYPES: [&str; 6] = [
    "aws_sns_topic",
    "aws_kms_key",
    "aws_cloudwatch_log_group",
    "aws_route53_zone",
    "aws_sqs_queue",
    "aws_iam_role",
];

#[derive(Debug, Clone)]
struct Res {
    address: &'static str,
    deps: &'static [&'static str],
    attrs: &'static [(&'static str, &'static str)],
}

impl Res {
    fn label(&self) -> &'static str {
        self.address.rsplit('.').next().unwrap()
    }

    fn ty(&self) -> &'static str {
        self.address.split_once('.').unwrap().0
    }
}

#[derive(Debug, Clone)]
enum Choice {
    /// Option 0 leaves the resource out, option 1 adds it.
    Optional(Res),
    /// `from` depends on `to[i]`.
    Edge { from: &'static str, to: &'static [&'static str] },
    /// Resource `label` gets `key = values[i]`.
    Attr { label: &'static str, key: &'static str, values: &'static [&'static str] },
}

impl Choice {
    fn options(&self) -> usize {
        match self {
            Choice::Optional(_) => 2,
            Choice::Edge { to, .. } => to.len(),
            Choice::Attr { values, .. } => values.len(),
        }
    }
}

#[derive(Debug, Clone)]
struct Blueprint {
    id: &'static str,
    intent: &'static str,
    original: &'static str,
    base: Vec<Res>,
    choices: Vec<Choice>,
    target: Vec<usize>,
}

const fn res(
    address: &'static str,
    deps: &'static [&'static str],
    attrs: &'static [(&'static str, &'static str)],
) -> Res {
    Res { address, deps, attrs }
}

fn blueprints() -> Vec<Blueprint> {
    use Choice::*;
    vec![
        Blueprint {
            id: "syn-01-vpc",
            intent: "Set up a VPC for a small web tier with a public and a private subnet.",
            original: "Set up a VPC with DNS hostnames, an internet gateway, a NAT gateway with an elastic IP, and a route table for the private subnet.",
            base: vec![
                res("aws_vpc.main", &[], &[("cidr_block", "10.0.0.0/16")]),
                res("aws_subnet.public", &["main"], &[("cidr_block", "10.0.1.0/24")]),
                res("aws_security_group.web", &["main"], &[]),
            ],
            choices: vec![
                Optional(res("aws_internet_gateway.igw", &["main"], &[])),
                Optional(res("aws_nat_gateway.nat", &["public"], &[])),
                Optional(res("aws_eip.nat_ip", &[], &[("domain", "vpc")])),
                Optional(res("aws_route_table.private_rt", &["main"], &[])),
                Attr { label: "main", key: "enable_dns_hostnames", values: &["true", "false"] },
                Attr { label: "public", key: "map_public_ip_on_launch", values: &["true", "false"] },
            ],
            target: vec![1, 1, 1, 0, 0, 1],
        },
        Blueprint {
            id: "syn-02-static-site",
            intent: "Host a static website on S3.",
            original: "Host a static website in a versioned S3 bucket behind CloudFront with an ACM certificate and a Route53 record.",
            base: vec![
                res("aws_s3_bucket.site", &[], &[]),
                res("aws_s3_bucket_policy.site_policy", &["site"], &[]),
            ],
            choices: vec![
                Optional(res("aws_cloudfront_distribution.cdn", &["site"], &[("price_class", "PriceClass_100")])),
                Optional(res("aws_acm_certificate.cert", &[], &[("validation_method", "DNS")])),
                Optional(res("aws_route53_record.www", &[], &[("type", "A")])),
                Optional(res("aws_s3_bucket_versioning.site_versioning", &["site"], &[])),
                Attr { label: "site", key: "force_destroy", values: &["false", "true"] },
                Attr { label: "site_policy", key: "public_read", values: &["true", "false"] },
            ],
            target: vec![1, 0, 1, 1, 0, 0],
        },
        Blueprint {
            id: "syn-03-web-app",
            intent: "Deploy a web application server that talks to a database.",
            original: "Deploy an EC2 web server in a private subnet behind an application load balancer, with a MySQL RDS instance.",
            base: vec![
                res("aws_vpc.app_vpc", &[], &[("cidr_block", "10.1.0.0/16")]),
                res("aws_subnet.app_subnet", &["app_vpc"], &[]),
                res("aws_instance.web", &["app_subnet"], &[]),
                res("aws_db_instance.db", &[], &[]),
                res("aws_security_group.app_sg", &["app_vpc"], &[]),
            ],
            choices: vec![
                Optional(res("aws_lb.alb", &["app_subnet"], &[("load_balancer_type", "application")])),
                Optional(res("aws_db_subnet_group.db_subnets", &["app_subnet"], &[])),
                Edge { from: "db", to: &["app_sg", "app_subnet"] },
                Optional(res("aws_eip.web_ip", &["web"], &[])),
                Attr { label: "db", key: "engine", values: &["mysql", "postgres"] },
                Attr { label: "web", key: "instance_type", values: &["t3.micro", "t3.small", "m5.large"] },
            ],
            target: vec![1, 1, 0, 0, 0, 1],
        },
        Blueprint {
            id: "syn-04-serverless-api",
            intent: "Build a serverless HTTP API.",
            original: "Build a REST API Gateway backed by a Python Lambda with an IAM role, storing items in a DynamoDB table.",
            base: vec![
                res("aws_lambda_function.handler", &[], &[]),
                res("aws_iam_role.lambda_role", &[], &[]),
            ],
            choices: vec![
                Optional(res("aws_api_gateway_rest_api.rest", &[], &[])),
                Optional(res("aws_apigatewayv2_api.http", &[], &[("protocol_type", "HTTP")])),
                Optional(res("aws_dynamodb_table.items", &[], &[("billing_mode", "PAY_PER_REQUEST")])),
                Edge { from: "handler", to: &["lambda_role", "handler_logs"] },
                Optional(res("aws_cloudwatch_log_group.handler_logs", &[], &[])),
                Attr { label: "handler", key: "runtime", values: &["python3.12", "nodejs20.x"] },
            ],
            target: vec![1, 0, 1, 0, 0, 0],
        },
        Blueprint {
            id: "syn-05-queue-worker",
            intent: "Process background jobs from a queue.",
            original: "Process background jobs from an SQS queue with a dead-letter queue using a Lambda consumer wired by an event source mapping.",
            base: vec![
                res("aws_sqs_queue.jobs", &[], &[]),
                res("aws_lambda_function.worker", &[], &[]),
            ],
            choices: vec![
                Optional(res("aws_sqs_queue.jobs_dlq", &[], &[])),
                Optional(res("aws_lambda_event_source_mapping.trigger", &["worker"], &[])),
                Optional(res("aws_sns_topic.alerts", &[], &[])),
                Edge { from: "worker", to: &["jobs", "worker_role"] },
                Optional(res("aws_iam_role.worker_role", &[], &[])),
                Attr { label: "jobs", key: "visibility_timeout_seconds", values: &["30", "300"] },
            ],
            target: vec![1, 1, 0, 0, 1, 1],
        },
        Blueprint {
            id: "syn-06-k8s",
            intent: "Provision a Kubernetes cluster on AWS.",
            original: "Provision an EKS cluster with a managed node group, an IAM role for the cluster, and a KMS key for secret encryption.",
            base: vec![
                res("aws_eks_cluster.cluster", &[], &[]),
                res("aws_iam_role.cluster_role", &[], &[]),
                res("aws_subnet.nodes", &[], &[]),
            ],
            choices: vec![
                Optional(res("aws_eks_node_group.workers", &["cluster", "nodes"], &[])),
                Optional(res("aws_kms_key.secrets", &[], &[("enable_key_rotation", "true")])),
                Edge { from: "cluster", to: &["cluster_role", "nodes"] },
                Optional(res("aws_eks_fargate_profile.fargate", &["cluster"], &[])),
                Attr { label: "cluster", key: "version", values: &["1.29", "1.30", "1.31"] },
                Attr { label: "cluster", key: "endpoint_public_access", values: &["true", "false"] },
            ],
            target: vec![1, 1, 0, 0, 1, 1],
        },
        Blueprint {
            id: "syn-07-data-lake",
            intent: "Create storage for analytics data.",
            original: "Create an encrypted S3 data lake with a Glue catalog database and crawler and an Athena workgroup for queries.",
            base: vec![
                res("aws_s3_bucket.lake", &[], &[]),
                res("aws_glue_catalog_database.catalog", &[], &[]),
            ],
            choices: vec![
                Optional(res("aws_glue_crawler.crawler", &["catalog"], &[])),
                Optional(res("aws_athena_workgroup.analysts", &[], &[])),
                Optional(res("aws_kinesis_firehose_delivery_stream.ingest", &["lake"], &[])),
                Optional(res("aws_s3_bucket_server_side_encryption_configuration.lake_sse", &["lake"], &[])),
                Edge { from: "catalog", to: &["lake", "lake_sse"] },
                Attr { label: "lake", key: "force_destroy", values: &["false", "true"] },
            ],
            target: vec![1, 1, 0, 1, 0, 0],
        },
        Blueprint {
            id: "syn-08-bastion",
            intent: "Give engineers SSH access to private instances.",
            original: "Run a bastion host in a public subnet with a key pair, an elastic IP and a security group allowing SSH.",
            base: vec![
                res("aws_vpc.ops", &[], &[]),
                res("aws_subnet.dmz", &["ops"], &[]),
                res("aws_instance.bastion", &["dmz"], &[]),
            ],
            choices: vec![
                Optional(res("aws_key_pair.deployer", &[], &[])),
                Optional(res("aws_eip.bastion_ip", &["bastion"], &[])),
                Optional(res("aws_security_group.ssh", &["ops"], &[("ingress_port", "22")])),
                Edge { from: "bastion", to: &["ssh", "deployer"] },
                Attr { label: "bastion", key: "instance_type", values: &["t3.nano", "t3.micro"] },
                Attr { label: "bastion", key: "associate_public_ip_address", values: &["true", "false"] },
            ],
            target: vec![1, 1, 1, 0, 0, 1],
        },
        Blueprint {
            id: "syn-09-monitoring",
            intent: "Alert the team when the application misbehaves.",
            original: "Create CloudWatch alarms on the application log group with a metric filter, notifying an SNS topic with an email subscription.",
            base: vec![
                res("aws_cloudwatch_log_group.app", &[], &[]),
                res("aws_cloudwatch_metric_alarm.errors", &[], &[]),
            ],
            choices: vec![
                Optional(res("aws_sns_topic.oncall", &[], &[])),
                Optional(res("aws_sns_topic_subscription.email", &[], &[("protocol", "email")])),
                Optional(res("aws_cloudwatch_log_metric_filter.error_filter", &["app"], &[])),
                Optional(res("aws_cloudwatch_dashboard.overview", &[], &[])),
                Edge { from: "errors", to: &["oncall", "app"] },
                Attr { label: "errors", key: "comparison_operator", values: &["GreaterThanThreshold", "GreaterThanOrEqualToThreshold"] },
            ],
            target: vec![1, 1, 1, 0, 0, 0],
        },
        Blueprint {
            id: "syn-10-container-service",
            intent: "Run a containerized service.",
            original: "Run a Fargate ECS service from an ECR repository behind a load balancer target group, logging to CloudWatch.",
            base: vec![
                res("aws_ecs_cluster.services", &[], &[]),
                res("aws_ecs_task_definition.api_task", &[], &[]),
                res("aws_ecs_service.api", &["services", "api_task"], &[]),
            ],
            choices: vec![
                Optional(res("aws_ecr_repository.api_repo", &[], &[])),
                Optional(res("aws_lb_target_group.api_tg", &[], &[("target_type", "ip")])),
                Optional(res("aws_cloudwatch_log_group.api_logs", &[], &[])),
                Edge { from: "api_task", to: &["api_logs", "api_repo"] },
                Attr { label: "api", key: "launch_type", values: &["FARGATE", "EC2"] },
                Attr { label: "api_task", key: "cpu", values: &["256", "512", "1024"] },
            ],
            target: vec![1, 1, 1, 0, 0, 0],
        },
    ]
}

impl Blueprint {
    fn build(&self, options: &[usize]) -> Spec {
        let mut parts: Vec<Res> = self.base.clone();
        for (choice, &o) in self.choices.iter().zip(options) {
            if let (Choice::Optional(r), 1) = (choice, o) {
                parts.push(r.clone());
            }
        }
        let mut spec = Spec::new();
        for r in &parts {
            spec = spec.with_resource(r.label(), r.address, r.deps.iter().copied(), r.attrs.iter().copied());
        }
        // deps onto absent optional resources are dropped
        for deps in spec.topology.values_mut() {
            deps.retain(|d| parts.iter().any(|r| r.label() == d));
        }
        spec.topology.retain(|_, deps| !deps.is_empty());
        for (choice, &o) in self.choices.iter().zip(options) {
            match choice {
                Choice::Optional(_) => {}
                Choice::Edge { from, to } => {
                    if spec.resources.contains_key(*from) && spec.resources.contains_key(to[o]) {
                        let deps = spec.topology.entry(from.to_string()).or_default();
                        if !deps.iter().any(|d| d == to[o]) {
                            deps.push(to[o].to_string());
                        }
                    }
                }
                Choice::Attr { label, key, values } => {
                    if spec.resources.contains_key(*label) {
                        spec.attributes.entry(label.to_string()).or_default().insert(key.to_string(), values[o].to_string());
                    }
                }
            }
        }
        spec
    }

    fn reference(&self) -> Spec {
        self.build(&self.target)
    }

    fn type_of(&self, label: &str) -> Option<&'static str> {
        self.base
            .iter()
            .chain(self.choices.iter().filter_map(|c| match c {
                Choice::Optional(r) => Some(r),
                _ => None,
            }))
            .find(|r| r.label() == label)
            .map(Res::ty)
    }

    /// Predicates that tell the options of some choice point apart.
    fn relevant_predicates(&self) -> Vec<Predicate> {
        let mut out = Vec::new();
        for choice in &self.choices {
            match choice {
                Choice::Optional(r) => out.push(Predicate::Resource { resource_type: r.ty().into() }),
                Choice::Edge { from, to } => {
                    for t in *to {
                        if let (Some(s), Some(t)) = (self.type_of(from), self.type_of(t)) {
                            out.push(Predicate::Topology { source_type: s.into(), target_type: t.into() });
                        }
                    }
                }
                Choice::Attr { label, key, values } => {
                    let ty = self.type_of(label).unwrap_or_default();
                    for v in *values {
                        out.push(Predicate::Attribute { resource_type: ty.into(), key: (*key).into(), value: (*v).into() });
                    }
                }
            }
        }
        out
    }

    /// Plausible-sounding predicates that carry no information about the
    /// planted target.
    fn distractor_predicates(&self) -> Vec<Predicate> {
        let mut out: Vec<Predicate> = DISTRACTOR_TYPES
            .iter()
            .filter(|t| self.type_of_any(t).is_none())
            .map(|t| Predicate::Resource { resource_type: (*t).into() })
            .collect();
        for r in &self.base {
            out.push(Predicate::Resource { resource_type: r.ty().into() });
            out.push(Predicate::Attribute { resource_type: r.ty().into(), key: "tags.Environment".into(), value: "production".into() });
        }
        out
    }

    fn type_of_any(&self, ty: &str) -> Option<()> {
        let in_base = self.base.iter().any(|r| r.ty() == ty);
        let in_choices = self.choices.iter().any(|c| matches!(c, Choice::Optional(r) if r.ty() == ty));
        (in_base || in_choices).then_some(())
    }
}

/// The ten planted-target tasks, references already normalized.
pub fn synthetic_tasks() -> Vec<Task> {
    blueprints()
        .into_iter()
        .map(|b| Task {
            id: b.id.to_string(),
            ambiguous_prompt: b.intent.to_string(),
            original_prompt: Some(b.original.to_string()),
            reference_spec: b.reference(),
        })
        .collect()
}

/// Seeded provider that answers every call kind for the synthetic tasks.
///
/// Each reply draws from its own RNG seeded by (seed, task, call kind,
/// per-kind call counter), so replies do not depend on how calls from
/// different tasks interleave.
pub struct SyntheticProvider {
    seed: u64,
    blueprints: Vec<Blueprint>,
    counters: Mutex<HashMap<(usize, CallKind), u64>>,
}

impl SyntheticProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed, blueprints: blueprints(), counters: Mutex::new(HashMap::new()) }
    }

    fn find(&self, text: &str) -> Option<usize> {
        self.blueprints.iter().position(|b| text.contains(b.intent))
    }

    fn rng(&self, task: usize, kind: CallKind) -> ChaCha8Rng {
        let n = {
            let mut counters = self.counters.lock().unwrap();
            let c = counters.entry((task, kind)).or_default();
            *c += 1;
            *c
        };
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.blueprints[task].id.as_bytes());
        h.update(format!("{kind:?}").as_bytes());
        h.update(n.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    fn sample_spec(&self, b: &Blueprint, history: &[(Predicate, Answer)], rng: &mut ChaCha8Rng) -> Spec {
        let mut spec = Spec::new();
        for _ in 0..MAX_ATTEMPTS {
            let options: Vec<usize> = b.choices.iter().map(|c| rng.random_range(0..c.options())).collect();
            spec = b.build(&options);
            if history.iter().all(|(p, a)| p.holds(&spec) == a.is_yes()) {
                break;
            }
        }
        if rng.random_bool(HALLUCINATION_RATE) {
            let ty = DISTRACTOR_TYPES.choose(rng).unwrap();
            if b.type_of_any(ty).is_none() {
                spec.resources.insert("extra".into(), format!("{ty}.extra"));
            }
        }
        spec
    }

    fn baseline_question(&self, b: &Blueprint, asked: &[String], rng: &mut ChaCha8Rng) -> String {
        let relevant = b.relevant_predicates();
        let distractors = b.distractor_predicates();
        for _ in 0..MAX_ATTEMPTS {
            let pool = if rng.random_bool(RELEVANT_QUESTION_RATE) { &relevant } else { &distractors };
            let q = template_question(pool.choose(rng).unwrap());
            if !asked.contains(&q) {
                return q;
            }
        }
        template_question(relevant.choose(rng).unwrap())
    }
}

/// Reads `Qn:` / `An:` pairs back out of a rendered history block.
fn parse_history(prompt: &str) -> Vec<(String, Option<Answer>)> {
    let mut out: Vec<(String, Option<Answer>)> = Vec::new();
    for line in prompt.lines() {
        let Some((tag, rest)) = line.split_once(": ") else { continue };
        let numbered = tag.len() > 1 && tag[1..].chars().all(|c| c.is_ascii_digit());
        if !numbered {
            continue;
        }
        match tag.as_bytes()[0] {
            b'Q' => out.push((rest.to_string(), None)),
            b'A' => {
                if let Some(last) = out.last_mut() {
                    last.1 = rest.parse().ok();
                }
            }
            _ => {}
        }
    }
    out
}

fn line_after<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(prefix))
}

impl ChatProvider for SyntheticProvider {
    fn complete(&self, kind: CallKind, request: &ChatRequest) -> Result<String, ProviderError> {
        let prompt = &request.user_prompt;
        match kind {
            CallKind::PhraseQuestion => {
                let json = line_after(prompt, "predicate: ").ok_or_else(|| ProviderError::Fatal("no predicate line".into()))?;
                let p: Predicate = serde_json::from_str(json).map_err(|e| ProviderError::Fatal(e.to_string()))?;
                return Ok(template_question(&p));
            }
            CallKind::OracleAnswer => {
                let reference = line_after(prompt, "Reference: ").and_then(|j| parse_spec(j).ok());
                let question = line_after(prompt, "Question: ").unwrap_or_default();
                let yes = match (reference, parse_template(question)) {
                    (Some(r), Some(p)) => p.holds(&r),
                    _ => false,
                };
                return Ok(if yes { "yes" } else { "no" }.to_string());
            }
            CallKind::RepairSpec => return Err(ProviderError::Fatal("synthetic provider never needs repair".into())),
            _ => {}
        }

        let task = self.find(prompt).ok_or_else(|| ProviderError::Fatal("prompt matches no synthetic task".into()))?;
        let b = &self.blueprints[task];
        let mut rng = self.rng(task, kind);
        let history = parse_history(prompt);
        match kind {
            CallKind::CandidateSpec | CallKind::FinalSpec => {
                let constraints: Vec<(Predicate, Answer)> =
                    history.iter().filter_map(|(q, a)| Some((parse_template(q)?, (*a)?))).collect();
                Ok(serialize_spec(&self.sample_spec(b, &constraints, &mut rng)))
            }
            CallKind::BaselineQuestion => {
                let asked: Vec<String> = history.into_iter().map(|(q, _)| q).collect();
                Ok(self.baseline_question(b, &asked, &mut rng))
            }
            CallKind::RankQuestions => {
                let n = prompt
                    .lines()
                    .filter(|l| l.split_once(". ").is_some_and(|(d, _)| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit())))
                    .count()
                    .max(1);
                Ok(rng.random_range(1..=n).to_string())
            }
            _ => unreachable!("handled above"),
        }
    }
}

/// Gateway over a fresh [`SyntheticProvider`], with no retry delays.
pub fn synthetic_gateway(seed: u64) -> Gateway {
    Gateway::new(Arc::new(SyntheticProvider::new(seed))).with_retry(RetryPolicy::immediate(0))
}
