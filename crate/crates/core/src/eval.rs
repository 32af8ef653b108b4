//! Fidelity, sparsity and characterization metrics over explanation runs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ctdg::{CandidateSet, Event, EventId, TemporalGraph};
use crate::error::{Error, Result};
use crate::explainer::ExplanationResult;
use crate::model::{classify, Logit, PredictorSession};

pub const DEFAULT_W_PLUS: f64 = 0.5;
pub const DEFAULT_W_MINUS: f64 = 0.5;
/// Sparsity grid used for exported curve samples.
pub const CURVE_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correctness {
    Correct,
    Incorrect,
}

impl Correctness {
    pub fn of(original_class: u8, ground_truth: u8) -> Self {
        if original_class == ground_truth {
            Correctness::Correct
        } else {
            Correctness::Incorrect
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Correctness::Correct => "correct",
            Correctness::Incorrect => "incorrect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

/// Everything measured for one explained instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: usize,
    pub dataset: String,
    pub target: Event,
    pub original_logit: Logit,
    pub original_class: u8,
    pub ground_truth: u8,
    pub correctness: Correctness,
    pub explanation: ExplanationResult,
    pub candidate_size: usize,
    pub fid_plus_flag: u8,
    pub fid_minus_flag: u8,
    pub sparsity: f64,
}

impl InstanceRecord {
    pub fn flag(&self, direction: Direction) -> bool {
        match direction {
            Direction::Plus => self.fid_plus_flag == 1,
            Direction::Minus => self.fid_minus_flag == 1,
        }
    }

    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            dataset: self.dataset.clone(),
            explainer: self.explainer_name().to_string(),
            policy: self.explanation.policy.clone(),
            correctness: self.correctness,
        }
    }

    fn explainer_name(&self) -> &'static str {
        self.explanation.explainer.name()
    }
}

/// Necessity and sufficiency indicators for one explanation.
///
/// `fid_plus` is set when omitting the explanation flips the prediction.
/// `fid_minus` is set when the explanation alone preserves it: the evaluated
/// history keeps the explanation plus everything outside the candidate set.
/// An empty explanation never counts as necessary.
pub fn fid_flags(
    session: &mut PredictorSession,
    graph: &TemporalGraph,
    target: &Event,
    candidates: &CandidateSet,
    explanation: &[EventId],
) -> Result<(u8, u8)> {
    if let Some(&stray) = explanation.iter().find(|id| !candidates.contains(**id)) {
        return Err(Error::InvalidTarget {
            event_id: target.event_id,
            reason: format!("explanation event {stray} is not a candidate"),
        });
    }
    let full = graph.temporal_view(target, std::iter::empty())?;
    let original = classify(session.predict(&full, target)?);

    let fid_plus = if explanation.is_empty() {
        0
    } else {
        let without = full.with_excluded(explanation.iter().copied())?;
        u8::from(classify(session.predict(&without, target)?) != original)
    };

    let keep: BTreeSet<EventId> = explanation.iter().copied().collect();
    let only = full.with_excluded(
        candidates
            .events
            .iter()
            .map(|c| c.event_id)
            .filter(|id| !keep.contains(id)),
    )?;
    let fid_minus = u8::from(classify(session.predict(&only, target)?) == original);
    Ok((fid_plus, fid_minus))
}

/// Mean of `|explanation| / |candidates|`.
pub fn sparsity(explanation_size: usize, candidate_size: usize) -> f64 {
    if candidate_size == 0 {
        0.0
    } else {
        explanation_size as f64 / candidate_size as f64
    }
}

/// Cumulative fidelity at sparsity limit `s`: the fraction of instances that
/// are flagged and have sparsity at most `s`.
pub fn fidelity_curve(points: &[(bool, f64)], s: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hits = points.iter().filter(|(f, sp)| *f && *sp <= s).count();
    hits as f64 / points.len() as f64
}

/// Exact area under the fidelity-sparsity step curve on `[0, 1]`.
pub fn aufsc_points(points: &[(bool, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let area = points
        .iter()
        .filter(|(flag, _)| *flag)
        .fold(0.0, |acc, (_, s)| acc + (1.0 - s.clamp(0.0, 1.0)));
    Ok(area / points.len() as f64)
}

pub fn aufsc(records: &[InstanceRecord], direction: Direction) -> Result<f64> {
    let points: Vec<_> = records
        .iter()
        .map(|r| (r.flag(direction), r.sparsity))
        .collect();
    aufsc_points(&points)
}

/// Weighted harmonic mean of the two fidelities; 0 if either is 0.
pub fn char_score(fid_plus: f64, fid_minus: f64, w_plus: f64, w_minus: f64) -> f64 {
    if fid_plus <= 0.0 || fid_minus <= 0.0 {
        return 0.0;
    }
    (w_plus + w_minus) / (w_plus / fid_plus + w_minus / fid_minus)
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as identical.
pub fn jaccard(a: &[EventId], b: &[EventId]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub dataset: String,
    pub explainer: String,
    pub policy: String,
    pub correctness: Correctness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub group: GroupKey,
    pub n_instances: usize,
    pub sparsity: f64,
    pub fid_plus: f64,
    pub fid_minus: f64,
    pub aufsc_plus: f64,
    pub aufsc_minus: f64,
    pub char: f64,
    pub oracle_calls: f64,
    pub wall_time_s: f64,
    pub curve: Vec<CurvePoint>,
}

impl MetricReport {
    pub fn from_records(group: GroupKey, records: &[&InstanceRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&InstanceRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
        let plus: Vec<_> = records.iter().map(|r| (r.flag(Direction::Plus), r.sparsity)).collect();
        let minus: Vec<_> = records.iter().map(|r| (r.flag(Direction::Minus), r.sparsity)).collect();
        let fid_plus = mean(&|r| f64::from(r.fid_plus_flag));
        let fid_minus = mean(&|r| f64::from(r.fid_minus_flag));
        let curve = (0..CURVE_POINTS)
            .map(|i| {
                let s = i as f64 / (CURVE_POINTS - 1) as f64;
                CurvePoint {
                    s,
                    f_plus: fidelity_curve(&plus, s),
                    f_minus: fidelity_curve(&minus, s),
                }
            })
            .collect();
        Ok(Self {
            group,
            n_instances: records.len(),
            sparsity: mean(&|r| r.sparsity),
            fid_plus,
            fid_minus,
            aufsc_plus: aufsc_points(&plus)?,
            aufsc_minus: aufsc_points(&minus)?,
            char: char_score(fid_plus, fid_minus, DEFAULT_W_PLUS, DEFAULT_W_MINUS),
            oracle_calls: mean(&|r| r.explanation.oracle_calls as f64),
            wall_time_s: mean(&|r| r.explanation.wall_time.as_secs_f64()),
            curve,
        })
    }
}

/// One report per (dataset, explainer, policy, correctness), in key order.
pub fn aggregate(records: &[InstanceRecord]) -> Vec<MetricReport> {
    let mut groups: BTreeMap<GroupKey, Vec<&InstanceRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group_key()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| MetricReport::from_records(key, &rs).expect("groups are non-empty"))
        .collect()
}

pub const METRIC_COLUMNS: [&str; 13] = [
    "dataset",
    "explainer",
    "policy",
    "correctness",
    "n",
    "sparsity",
    "fid_plus",
    "fid_minus",
    "aufsc_plus",
    "aufsc_minus",
    "char",
    "oracle_calls",
    "wall_time_s",
];

pub fn write_metrics_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_COLUMNS).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.group.dataset.clone(),
            r.group.explainer.clone(),
            r.group.policy.clone(),
            r.group.correctness.name().to_string(),
            r.n_instances.to_string(),
            r.sparsity.to_string(),
            r.fid_plus.to_string(),
            r.fid_minus.to_string(),
            r.aufsc_plus.to_string(),
            r.aufsc_minus.to_string(),
            r.char.to_string(),
            r.oracle_calls.to_string(),
            r.wall_time_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "explainer",
        "policy",
        "correctness",
        "s",
        "F_plus",
        "F_minus",
    ])
    .map_err(csv_err)?;
    for r in reports {
        for p in &r.curve {
            w.write_record([
                r.group.dataset.clone(),
                r.group.explainer.clone(),
                r.group.policy.clone(),
                r.group.correctness.name().to_string(),
                p.s.to_string(),
                p.f_plus.to_string(),
                p.f_minus.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
