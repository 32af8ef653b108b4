//! Jodie-format event CSVs: `user_id,item_id,timestamp,state_label,feat_1,...,feat_d`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ctdg::{Event, NodeId, Partition, TemporalGraph};
use crate::error::{Error, Result};

/// Timestamps may run backwards by at most this much before the file is
/// rejected as unsorted.
pub const TIMESTAMP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub path: PathBuf,
    pub bipartite: bool,
    pub expect_nodes: Option<usize>,
    pub expect_edges: Option<usize>,
    /// Chronological train/validation/test fractions.
    pub splits: [f64; 3],
}

impl DatasetDescriptor {
    pub fn new(name: impl Into<String>, path: impl Into<PathBuf>, bipartite: bool) -> Self {
        Self {
            name: name.into(),
            path: path.into(),
            bipartite,
            expect_nodes: None,
            expect_edges: None,
            splits: [0.70, 0.15, 0.15],
        }
    }

    pub fn validate_splits(&self) -> Result<()> {
        let sum: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|f| *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.splits
            )));
        }
        Ok(())
    }

    /// Index of the first test event in time order.
    pub fn test_start(&self, graph: &TemporalGraph) -> usize {
        let n = graph.len();
        let before = self.splits[0] + self.splits[1];
        ((before * n as f64).round() as usize).min(n)
    }
}

pub fn load_jodie_csv(path: &Path, bipartite: bool) -> Result<TemporalGraph> {
    let file = File::open(path)?;
    read_jodie_csv(BufReader::new(file), path, bipartite)
}

struct RawRow {
    user: u64,
    item: u64,
    timestamp: f64,
    features: Vec<f32>,
}

fn parse_id(field: &str) -> Option<u64> {
    field.parse::<u64>().ok().or_else(|| {
        let f = field.parse::<f64>().ok()?;
        (f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64).then_some(f as u64)
    })
}

pub fn read_jodie_csv<R: Read>(reader: R, path: &Path, bipartite: bool) -> Result<TemporalGraph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows = Vec::new();
    let mut feature_dim: Option<usize> = None;
    let mut latest = f64::NEG_INFINITY;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 4 {
            return Err(parse_err(
                line,
                format!("expected at least 4 fields, found {}", record.len()),
            ));
        }
        let user = parse_id(&record[0])
            .ok_or_else(|| parse_err(line, format!("bad user id {:?}", &record[0])))?;
        let item = parse_id(&record[1])
            .ok_or_else(|| parse_err(line, format!("bad item id {:?}", &record[1])))?;
        let timestamp: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp {:?}", &record[2])))?;
        if !(timestamp.is_finite() && timestamp >= 0.0) {
            return Err(parse_err(line, format!("timestamp {timestamp} out of range")));
        }
        if timestamp < latest - TIMESTAMP_TOLERANCE {
            return Err(parse_err(
                line,
                format!("timestamp {timestamp} precedes earlier {latest}"),
            ));
        }
        latest = latest.max(timestamp);
        let features = record
            .iter()
            .skip(4)
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, format!("bad feature value: {e}")))?;
        match feature_dim {
            None => feature_dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(parse_err(
                    line,
                    format!("ragged row: {} features, expected {d}", features.len()),
                ))
            }
            _ => {}
        }
        rows.push(RawRow {
            user,
            item,
            timestamp,
            features,
        });
    }

    let (map_user, map_item, node_count, partition) = if bipartite {
        let users: BTreeSet<u64> = rows.iter().map(|r| r.user).collect();
        let items: BTreeSet<u64> = rows.iter().map(|r| r.item).collect();
        let offset = users.len();
        let mu: BTreeMap<u64, NodeId> = users.iter().enumerate().map(|(i, &u)| (u, i as NodeId)).collect();
        let mi: BTreeMap<u64, NodeId> = items
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (offset + i) as NodeId))
            .collect();
        let n = offset + items.len();
        (mu, mi, n, Partition::Bipartite { sources: offset })
    } else {
        let all: BTreeSet<u64> = rows.iter().flat_map(|r| [r.user, r.item]).collect();
        let m: BTreeMap<u64, NodeId> = all.iter().enumerate().map(|(i, &u)| (u, i as NodeId)).collect();
        let n = m.len();
        (m.clone(), m, n, Partition::Unipartite)
    };

    let events = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| Event {
            event_id: i as u64,
            src: map_user[&r.user],
            dst: map_item[&r.item],
            timestamp: r.timestamp,
            features: r.features,
        })
        .collect();
    TemporalGraph::new(events, node_count, partition)
}

/// Write `graph` back in the same schema (state labels are written as 0).
pub fn write_jodie_csv<W: Write>(graph: &TemporalGraph, out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    write!(w, "user_id,item_id,timestamp,state_label")?;
    for i in 0..graph.feature_dim() {
        write!(w, ",feat_{}", i + 1)?;
    }
    writeln!(w)?;
    let offset = match graph.partition() {
        Partition::Bipartite { sources } => sources as NodeId,
        Partition::Unipartite => 0,
    };
    for e in graph.events() {
        write!(w, "{},{},{},0", e.src, e.dst - offset, e.timestamp)?;
        for f in &e.features {
            write!(w, ",{f}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub nodes: usize,
    pub events: usize,
    pub unique_edges: usize,
    pub bipartite: bool,
    pub feature_dim: usize,
    pub timespan: f64,
}

pub fn dataset_stats(graph: &TemporalGraph) -> DatasetStats {
    let unique: HashSet<(NodeId, NodeId)> = graph.events().iter().map(|e| (e.src, e.dst)).collect();
    let timespan = match (graph.events().first(), graph.events().last()) {
        (Some(a), Some(b)) => b.timestamp - a.timestamp,
        _ => 0.0,
    };
    DatasetStats {
        nodes: graph.node_count(),
        events: graph.len(),
        unique_edges: unique.len(),
        bipartite: graph.is_bipartite(),
        feature_dim: graph.feature_dim(),
        timespan,
    }
}
