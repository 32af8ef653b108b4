//! Side-by-side comparison of two run directories.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::read_records;
use crate::ctdg::{EventId, NodeId};
use crate::error::Result;
use crate::eval::{aggregate, jaccard, GroupKey, InstanceRecord, MetricReport};

/// Mean Jaccard similarity between two explainer configurations over the
/// instances both explained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardCell {
    pub row: String,
    pub col: String,
    pub mean: Option<f64>,
    pub shared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDiff {
    pub group: GroupKey,
    pub a: Option<MetricReport>,
    pub b: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub jaccard: Vec<JaccardCell>,
    pub metrics: Vec<MetricDiff>,
}

type InstanceKey = (usize, EventId, NodeId, NodeId);
type Metric = fn(&MetricReport) -> f64;

fn by_config(records: &[InstanceRecord]) -> BTreeMap<String, HashMap<InstanceKey, Vec<EventId>>> {
    let mut out: BTreeMap<String, HashMap<_, _>> = BTreeMap::new();
    for r in records {
        let label = format!("{}/{}", r.explanation.explainer.name(), r.explanation.policy);
        let key = (r.instance_id, r.target.event_id, r.target.src, r.target.dst);
        out.entry(label).or_default().insert(key, r.explanation.events.clone());
    }
    out
}

pub fn compare_records(a: &[InstanceRecord], b: &[InstanceRecord]) -> ComparisonReport {
    let ga = by_config(a);
    let gb = by_config(b);
    let mut jaccard_cells = Vec::new();
    for (row, ea) in &ga {
        for (col, eb) in &gb {
            let sims: Vec<f64> = ea
                .iter()
                .filter_map(|(k, x)| eb.get(k).map(|y| jaccard(x, y)))
                .collect();
            jaccard_cells.push(JaccardCell {
                row: row.clone(),
                col: col.clone(),
                mean: (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64),
                shared: sims.len(),
            });
        }
    }

    let mut metrics: BTreeMap<GroupKey, MetricDiff> = BTreeMap::new();
    for (side, reports) in [(0, aggregate(a)), (1, aggregate(b))] {
        for r in reports {
            let entry = metrics.entry(r.group.clone()).or_insert_with(|| MetricDiff {
                group: r.group.clone(),
                a: None,
                b: None,
            });
            if side == 0 {
                entry.a = Some(r);
            } else {
                entry.b = Some(r);
            }
        }
    }

    ComparisonReport {
        rows: ga.keys().cloned().collect(),
        cols: gb.keys().cloned().collect(),
        jaccard: jaccard_cells,
        metrics: metrics.into_values().collect(),
    }
}

pub fn compare_runs(a: &Path, b: &Path) -> Result<ComparisonReport> {
    Ok(compare_records(&read_records(a)?, &read_records(b)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Jaccard similarity (rows: A, columns: B)")?;
        let width = self.rows.iter().chain(&self.cols).map(String::len).max().unwrap_or(4).max(4);
        write!(f, "{:width$}", "")?;
        for c in &self.cols {
            write!(f, "  {c:>width$}")?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{r:width$}")?;
            for c in &self.cols {
                let cell = self.jaccard.iter().find(|x| &x.row == r && &x.col == c);
                write!(f, "  {:>width$}", fmt_opt(cell.and_then(|x| x.mean)))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "Metrics (A / B / B-A)")?;
        for d in &self.metrics {
            let g = &d.group;
            writeln!(
                f,
                "{} {} {} {}",
                g.dataset,
                g.explainer,
                g.policy,
                g.correctness.name()
            )?;
            let pick = |r: &Option<MetricReport>, m: Metric| r.as_ref().map(m);
            let rows: [(&str, Metric); 8] = [
                ("sparsity", |r| r.sparsity),
                ("fid_plus", |r| r.fid_plus),
                ("fid_minus", |r| r.fid_minus),
                ("aufsc_plus", |r| r.aufsc_plus),
                ("aufsc_minus", |r| r.aufsc_minus),
                ("char", |r| r.char),
                ("oracle_calls", |r| r.oracle_calls),
                ("wall_time_s", |r| r.wall_time_s),
            ];
            for (name, m) in rows {
                let (x, y) = (pick(&d.a, m), pick(&d.b, m));
                let diff = x.zip(y).map(|(x, y)| y - x);
                writeln!(f, "  {name:<13} {:>10} {:>10} {:>10}", fmt_opt(x), fmt_opt(y), fmt_opt(diff))?;
            }
        }
        Ok(())
    }
}
