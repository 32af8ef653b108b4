use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OracleSpec};
use super::dataset::{dataset_stats, load_jodie_csv, DatasetStats};
use super::instances::{select_instances, InstanceSpec, SelectedInstance};
use crate::ctdg::{candidate_events, TemporalGraph};
use crate::error::{Error, Result};
use crate::eval::{aggregate, fid_flags, sparsity, write_curves_csv, write_metrics_csv, InstanceRecord};
use crate::explainer::{cody_explain, greedy_explain, resolve_k, ExplainerKind};
use crate::model::{classify, PredictorSession, ReferenceParams};
use crate::policies::PolicyKind;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CURVES_CSV: &str = "curves.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedInstance {
    pub instance_id: usize,
    pub explainer: ExplainerKind,
    pub policy: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub created_unix_s: u64,
    pub config: ExperimentConfig,
    pub oracle: String,
    pub reference_params: Option<ReferenceParams>,
    pub resolved_k: u32,
    pub seed: u64,
    pub dataset: DatasetStats,
    pub test_start: usize,
    pub instances: Vec<SelectedInstance>,
    pub warnings: Vec<String>,
    pub skipped: Vec<SkippedInstance>,
    pub n_records: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<InstanceRecord>,
}

pub fn load_graph(config: &ExperimentConfig) -> Result<TemporalGraph> {
    let graph = load_jodie_csv(&config.dataset, config.bipartite)?;
    let stats = dataset_stats(&graph);
    for (what, expect, got) in [
        ("nodes", config.expect_nodes, stats.nodes),
        ("events", config.expect_edges, stats.events),
    ] {
        if let Some(n) = expect.filter(|&n| n != got) {
            return Err(Error::Config(format!(
                "{}: expected {n} {what}, loaded {got}",
                config.dataset.display()
            )));
        }
    }
    Ok(graph)
}

fn open_session(spec: &OracleSpec, graph: &TemporalGraph, config: &ExperimentConfig) -> Result<PredictorSession> {
    Ok(PredictorSession::from_boxed(spec.build(graph, &config.reference())?))
}

enum Outcome {
    Record(Box<InstanceRecord>),
    Skipped(String),
}

fn explain_one(
    session: &mut PredictorSession,
    graph: &TemporalGraph,
    config: &ExperimentConfig,
    dataset: &str,
    explainer: ExplainerKind,
    policy: PolicyKind,
    inst: &SelectedInstance,
) -> Result<Outcome> {
    // a fresh cache per job keeps call counts independent of scheduling
    session.clear_cache();
    let k = resolve_k(config.k, session);
    let candidates = candidate_events(graph, &inst.target, k, config.m_max)?;
    if candidates.is_empty() {
        return Ok(Outcome::Skipped("empty candidate set".into()));
    }
    let explanation = match explainer {
        ExplainerKind::Greedy => greedy_explain(session, graph, &inst.target, policy, &config.greedy())?,
        ExplainerKind::Cody => cody_explain(session, graph, &inst.target, policy, &config.cody())?,
    };
    let (fid_plus_flag, fid_minus_flag) =
        fid_flags(session, graph, &inst.target, &candidates, &explanation.events)?;
    Ok(Outcome::Record(Box::new(InstanceRecord {
        instance_id: inst.instance_id,
        dataset: dataset.to_string(),
        target: inst.target.clone(),
        original_logit: explanation.original_logit,
        original_class: classify(explanation.original_logit),
        ground_truth: inst.ground_truth,
        correctness: inst.correctness,
        sparsity: sparsity(explanation.events.len(), candidates.len()),
        candidate_size: candidates.len(),
        explanation,
        fid_plus_flag,
        fid_minus_flag,
    })))
}

/// Run every (explainer, policy) pair over one shared instance pool and
/// write the run directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let graph = load_graph(config)?;
    let descriptor = config.descriptor();
    let dataset = descriptor.name.clone();
    let spec = config.oracle_spec()?;
    let policies = config.policy_kinds()?;

    let mut session = open_session(&spec, &graph, config)?;
    let resolved_k = resolve_k(config.k, &mut session);
    let oracle_name = session.oracle_name();
    let test_start = descriptor.test_start(&graph);
    let selection = select_instances(
        &graph,
        &mut session,
        &InstanceSpec {
            per_bucket: config.instances_per_bucket,
            seed: config.seed,
            test_start,
        },
    )?;
    drop(session);

    let jobs: Vec<(ExplainerKind, PolicyKind, &SelectedInstance)> = config
        .explainers
        .iter()
        .flat_map(|&e| policies.iter().map(move |&p| (e, p)))
        .flat_map(|(e, p)| selection.instances.iter().map(move |i| (e, p, i)))
        .collect();

    let work = || {
        jobs.par_iter()
            .map_init(
                || open_session(&spec, &graph, config),
                |session, &(explainer, policy, inst)| {
                    let outcome = match session {
                        Ok(s) => explain_one(s, &graph, config, &dataset, explainer, policy, inst),
                        Err(e) => Err(Error::Config(format!("oracle unavailable: {e}"))),
                    };
                    (explainer, policy, inst.instance_id, outcome)
                },
            )
            .collect::<Vec<_>>()
    };
    let outcomes = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut failures = 0usize;
    for (explainer, policy, instance_id, outcome) in outcomes {
        let reason = match outcome {
            Ok(Outcome::Record(r)) => {
                records.push(*r);
                continue;
            }
            Ok(Outcome::Skipped(reason)) => reason,
            Err(e) => {
                failures += 1;
                format!("failed: {e}")
            }
        };
        skipped.push(SkippedInstance {
            instance_id,
            explainer,
            policy: policy.name().to_string(),
            reason,
        });
    }
    if records.is_empty() && failures > 0 {
        return Err(Error::Config(format!(
            "all {failures} explanation jobs failed; first: {}",
            skipped.iter().map(|s| s.reason.as_str()).next().unwrap_or_default()
        )));
    }
    records.sort_by(|a, b| {
        (a.explanation.explainer.name(), &a.explanation.policy, a.instance_id).cmp(&(
            b.explanation.explainer.name(),
            &b.explanation.policy,
            b.instance_id,
        ))
    });
    skipped.sort_by(|a, b| {
        (a.explainer.name(), &a.policy, a.instance_id).cmp(&(b.explainer.name(), &b.policy, b.instance_id))
    });

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        config: config.clone(),
        oracle: oracle_name,
        reference_params: matches!(spec, OracleSpec::Reference).then(|| config.reference().resolve(&graph)),
        resolved_k,
        seed: config.seed,
        dataset: dataset_stats(&graph),
        test_start,
        instances: selection.instances,
        warnings: selection.warnings,
        skipped,
        n_records: records.len(),
    };
    write_run(&config.output_dir, &manifest, &records)?;
    Ok(RunOutput {
        dir: config.output_dir.clone(),
        manifest,
        records,
    })
}

pub fn write_run(dir: &Path, manifest: &Manifest, records: &[InstanceRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(MANIFEST_FILE))?), manifest)?;

    let mut out = BufWriter::new(File::create(dir.join(RECORDS_FILE))?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;

    let reports = aggregate(records);
    write_metrics_csv(File::create(dir.join(METRICS_CSV))?, &reports)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(METRICS_JSON))?), &reports)?;
    write_curves_csv(File::create(dir.join(CURVES_CSV))?, &reports)?;
    Ok(())
}

pub fn read_records(dir: &Path) -> Result<Vec<InstanceRecord>> {
    let path = dir.join(RECORDS_FILE);
    let text = fs::read_to_string(&path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let file = File::open(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
