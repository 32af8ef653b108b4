//! Continuous-time dynamic graph storage.
//!
//! A [`TemporalGraph`] is an immutable, time-ordered sequence of interaction
//! events with a per-node adjacency index. Everything an oracle sees is a
//! [`GraphView`]: the history strictly before a target event, minus an
//! exclusion set. Candidate sets for the explainers are built here too.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EventId = u64;
pub type NodeId = u32;

/// One timestamped interaction between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: EventId,
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<f32>,
}

impl Event {
    pub fn new(event_id: EventId, src: NodeId, dst: NodeId, timestamp: f64) -> Self {
        Self {
            event_id,
            src,
            dst,
            timestamp,
            features: Vec::new(),
        }
    }

    /// Lexicographic `(timestamp, event_id)` key used for every ordering decision.
    pub fn order_key(&self) -> (f64, EventId) {
        (self.timestamp, self.event_id)
    }

    fn precedes(&self, time: f64, id: EventId) -> bool {
        self.timestamp < time || (self.timestamp == time && self.event_id < id)
    }
}

/// How node ids are split between the two sides of an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Unipartite,
    /// Sources occupy ids `0..sources`, destinations the rest.
    Bipartite { sources: usize },
}

#[derive(Debug, Clone)]
pub struct TemporalGraph {
    events: Vec<Event>,
    node_count: usize,
    partition: Partition,
    feature_dim: usize,
    position: HashMap<EventId, usize>,
    // positions into `events`, ascending
    adjacency: Vec<Vec<u32>>,
}

impl TemporalGraph {
    pub fn new(mut events: Vec<Event>, node_count: usize, partition: Partition) -> Result<Self> {
        events.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then(a.event_id.cmp(&b.event_id))
        });
        let feature_dim = events.first().map_or(0, |e| e.features.len());
        let mut position = HashMap::with_capacity(events.len());
        let mut adjacency = vec![Vec::new(); node_count];
        for (pos, e) in events.iter().enumerate() {
            if !(e.timestamp.is_finite() && e.timestamp >= 0.0) {
                return Err(Error::InvalidTarget {
                    event_id: e.event_id,
                    reason: format!("timestamp {} must be finite and non-negative", e.timestamp),
                });
            }
            if e.src as usize >= node_count || e.dst as usize >= node_count {
                return Err(Error::InvalidTarget {
                    event_id: e.event_id,
                    reason: format!("node id out of range 0..{node_count}"),
                });
            }
            if e.features.len() != feature_dim {
                return Err(Error::InvalidTarget {
                    event_id: e.event_id,
                    reason: format!(
                        "feature length {} differs from {feature_dim}",
                        e.features.len()
                    ),
                });
            }
            if position.insert(e.event_id, pos).is_some() {
                return Err(Error::InvalidTarget {
                    event_id: e.event_id,
                    reason: "duplicate event id".into(),
                });
            }
            adjacency[e.src as usize].push(pos as u32);
            if e.dst != e.src {
                adjacency[e.dst as usize].push(pos as u32);
            }
        }
        if let Partition::Bipartite { sources } = partition {
            if sources > node_count {
                return Err(Error::Config(format!(
                    "source partition {sources} exceeds node count {node_count}"
                )));
            }
        }
        Ok(Self {
            events,
            node_count,
            partition,
            feature_dim,
            position,
            adjacency,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn is_bipartite(&self) -> bool {
        matches!(self.partition, Partition::Bipartite { .. })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn event(&self, id: EventId) -> Option<&Event> {
        self.position.get(&id).map(|&p| &self.events[p])
    }

    pub fn contains_event(&self, id: EventId) -> bool {
        self.position.contains_key(&id)
    }

    /// Valid destination ids for a source, used by negative sampling.
    pub fn destination_range(&self) -> std::ops::Range<usize> {
        match self.partition {
            Partition::Unipartite => 0..self.node_count,
            Partition::Bipartite { sources } => sources..self.node_count,
        }
    }

    /// Index of the first event not strictly before `(time, id)`.
    fn cutoff_position(&self, time: f64, id: EventId) -> usize {
        self.events.partition_point(|e| e.precedes(time, id))
    }

    fn check_target(&self, target: &Event) -> Result<()> {
        let n = self.node_count;
        if target.src as usize >= n || target.dst as usize >= n {
            return Err(Error::InvalidTarget {
                event_id: target.event_id,
                reason: format!("node id out of range 0..{n}"),
            });
        }
        if !target.timestamp.is_finite() {
            return Err(Error::InvalidTarget {
                event_id: target.event_id,
                reason: "non-finite timestamp".into(),
            });
        }
        Ok(())
    }

    /// The history `G(t)` before `target`, with `excluded` removed.
    pub fn temporal_view<I>(&self, target: &Event, excluded: I) -> Result<GraphView<'_>>
    where
        I: IntoIterator<Item = EventId>,
    {
        self.check_target(target)?;
        let mut excluded: Vec<EventId> = excluded.into_iter().collect();
        excluded.sort_unstable();
        excluded.dedup();
        if let Some(&bad) = excluded.iter().find(|id| !self.contains_event(**id)) {
            return Err(Error::UnknownEvent(bad));
        }
        Ok(GraphView {
            graph: self,
            cutoff_time: target.timestamp,
            cutoff_event_id: target.event_id,
            cutoff_pos: self.cutoff_position(target.timestamp, target.event_id),
            excluded,
        })
    }
}

/// Read-only history of a [`TemporalGraph`] before a cutoff, minus excluded events.
#[derive(Debug, Clone)]
pub struct GraphView<'g> {
    graph: &'g TemporalGraph,
    cutoff_time: f64,
    cutoff_event_id: EventId,
    cutoff_pos: usize,
    excluded: Vec<EventId>,
}

impl<'g> GraphView<'g> {
    pub fn graph(&self) -> &'g TemporalGraph {
        self.graph
    }

    pub fn cutoff(&self) -> (f64, EventId) {
        (self.cutoff_time, self.cutoff_event_id)
    }

    /// Sorted ascending, deduplicated.
    pub fn excluded(&self) -> &[EventId] {
        &self.excluded
    }

    pub fn is_excluded(&self, id: EventId) -> bool {
        self.excluded.binary_search(&id).is_ok()
    }

    /// Same cutoff, different exclusion set.
    pub fn with_excluded<I>(&self, excluded: I) -> Result<GraphView<'g>>
    where
        I: IntoIterator<Item = EventId>,
    {
        let mut excluded: Vec<EventId> = excluded.into_iter().collect();
        excluded.sort_unstable();
        excluded.dedup();
        if let Some(&bad) = excluded.iter().find(|id| !self.graph.contains_event(**id)) {
            return Err(Error::UnknownEvent(bad));
        }
        Ok(GraphView {
            excluded,
            ..self.clone()
        })
    }

    pub fn contains(&self, id: EventId) -> bool {
        match self.graph.position.get(&id) {
            Some(&p) => p < self.cutoff_pos && !self.is_excluded(id),
            None => false,
        }
    }

    /// Visible events in `(timestamp, event_id)` order.
    pub fn events(&self) -> impl Iterator<Item = &'g Event> + '_ {
        self.graph.events[..self.cutoff_pos]
            .iter()
            .filter(move |e| !self.is_excluded(e.event_id))
    }

    /// Visible events incident to `node`, oldest first.
    pub fn node_events(&self, node: NodeId) -> impl Iterator<Item = &'g Event> + '_ {
        let graph = self.graph;
        let adj = graph
            .adjacency
            .get(node as usize)
            .map_or(&[][..], |v| v.as_slice());
        let end = adj.partition_point(|&p| (p as usize) < self.cutoff_pos);
        adj[..end]
            .iter()
            .map(move |&p| &graph.events[p as usize])
            .filter(move |e| !self.is_excluded(e.event_id))
    }

    /// Unweighted hop distances from `sources` on the undirected static
    /// graph induced by the view. `None` marks unreachable nodes; the search
    /// stops expanding past `max_depth` when given.
    pub fn hop_distances(&self, sources: &[NodeId], max_depth: Option<u32>) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.graph.node_count];
        let mut queue = VecDeque::new();
        for &s in sources {
            if (s as usize) < dist.len() && dist[s as usize].is_none() {
                dist[s as usize] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].expect("queued nodes have a distance");
            if max_depth.is_some_and(|m| du >= m) {
                continue;
            }
            for e in self.node_events(u) {
                let w = if e.src == u { e.dst } else { e.src };
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest-path hops between two nodes, `None` if disconnected.
    pub fn node_distance(&self, a: NodeId, b: NodeId) -> Option<u32> {
        self.hop_distances(&[a], None)[b as usize]
    }
}

/// Hop distance of `event` from `target`: the farthest of the event's
/// endpoints, each measured to its nearest target endpoint. `None` is infinite.
pub fn spatial_distance(view: &GraphView<'_>, event: &Event, target: &Event) -> Option<u32> {
    let dist = view.hop_distances(&[target.src, target.dst], None);
    event_hop(&dist, event)
}

pub(crate) fn event_hop(dist: &[Option<u32>], event: &Event) -> Option<u32> {
    let a = dist.get(event.src as usize).copied().flatten()?;
    let b = dist.get(event.dst as usize).copied().flatten()?;
    Some(a.max(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub event_id: EventId,
    pub hop: u32,
    pub timestamp: f64,
}

/// The removable events for one target: within `k` hops, the `m_max` most recent.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub target: Event,
    pub k: u32,
    pub m_max: usize,
    /// Most recent first.
    pub events: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn ids(&self) -> Vec<EventId> {
        self.events.iter().map(|c| c.event_id).collect()
    }

    pub fn contains(&self, id: EventId) -> bool {
        self.events.iter().any(|c| c.event_id == id)
    }

    pub fn get(&self, id: EventId) -> Option<&Candidate> {
        self.events.iter().find(|c| c.event_id == id)
    }
}

pub fn candidate_events(
    graph: &TemporalGraph,
    target: &Event,
    k: u32,
    m_max: usize,
) -> Result<CandidateSet> {
    if k == 0 || m_max == 0 {
        return Err(Error::Config(format!(
            "candidate set needs k >= 1 and m_max >= 1 (got k={k}, m_max={m_max})"
        )));
    }
    let view = graph.temporal_view(target, std::iter::empty())?;
    let dist = view.hop_distances(&[target.src, target.dst], Some(k));

    let mut found: Vec<(&Event, u32)> = Vec::new();
    for (node, d) in dist.iter().enumerate() {
        if d.is_none() {
            continue;
        }
        for e in view.node_events(node as NodeId) {
            // visit each event from its lower endpoint only
            let other = if e.src as usize == node { e.dst } else { e.src };
            if (other as usize) < node && dist[other as usize].is_some() {
                continue;
            }
            if let Some(hop) = event_hop(&dist, e) {
                if hop <= k {
                    found.push((e, hop));
                }
            }
        }
    }
    found.sort_by(|(a, _), (b, _)| {
        b.timestamp
            .total_cmp(&a.timestamp)
            .then(b.event_id.cmp(&a.event_id))
    });
    found.truncate(m_max);

    Ok(CandidateSet {
        target: target.clone(),
        k,
        m_max,
        events: found
            .into_iter()
            .map(|(e, hop)| Candidate {
                event_id: e.event_id,
                hop,
                timestamp: e.timestamp,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // A=0, B=1, C=2, D=3, E=4
    fn chain() -> TemporalGraph {
        let events = vec![
            Event::new(1, 0, 1, 1.0),
            Event::new(2, 1, 2, 2.0),
            Event::new(3, 2, 3, 3.0),
            Event::new(4, 3, 4, 4.0),
        ];
        TemporalGraph::new(events, 6, Partition::Unipartite).unwrap()
    }

    #[test]
    fn view_cuts_before_target() {
        let g = chain();
        let target = g.event(4).unwrap().clone();
        let view = g.temporal_view(&target, []).unwrap();
        let ids: Vec<_> = view.events().map(|e| e.event_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);

        let view = g.temporal_view(&target, [2]).unwrap();
        let ids: Vec<_> = view.events().map(|e| e.event_id).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn unknown_exclusion_is_rejected() {
        let g = chain();
        let target = g.event(4).unwrap().clone();
        assert!(matches!(
            g.temporal_view(&target, [9]),
            Err(Error::UnknownEvent(9))
        ));
    }

    #[test]
    fn invalid_target_node() {
        let g = chain();
        let target = Event::new(99, 0, 17, 5.0);
        assert!(matches!(
            g.temporal_view(&target, []),
            Err(Error::InvalidTarget { .. })
        ));
    }

    #[test]
    fn simultaneous_events_ordered_by_id() {
        let events = vec![
            Event::new(7, 0, 1, 1.0),
            Event::new(3, 1, 2, 1.0),
            Event::new(5, 2, 0, 1.0),
        ];
        let g = TemporalGraph::new(events, 3, Partition::Unipartite).unwrap();
        let ids: Vec<_> = g.events().iter().map(|e| e.event_id).collect();
        assert_eq!(ids, vec![3, 5, 7]);
        let target = g.event(5).unwrap().clone();
        let view = g.temporal_view(&target, []).unwrap();
        let ids: Vec<_> = view.events().map(|e| e.event_id).collect();
        assert_eq!(ids, vec![3]);
    }

    #[test]
    fn chain_distances() {
        let g = chain();
        let target = Event::new(100, 0, 1, 5.0);
        let view = g.temporal_view(&target, []).unwrap();
        let hop = |id| spatial_distance(&view, g.event(id).unwrap(), &target);
        assert_eq!(hop(1), Some(0));
        assert_eq!(hop(2), Some(1));
        assert_eq!(hop(3), Some(2));
        assert_eq!(hop(4), Some(3));
    }

    #[test]
    fn isolated_component_is_unreachable() {
        let events = vec![Event::new(1, 0, 1, 1.0), Event::new(2, 2, 3, 2.0)];
        let g = TemporalGraph::new(events, 4, Partition::Unipartite).unwrap();
        let target = Event::new(10, 0, 1, 3.0);
        let view = g.temporal_view(&target, []).unwrap();
        assert_eq!(spatial_distance(&view, g.event(2).unwrap(), &target), None);
    }

    #[test]
    fn chain_candidates() {
        let g = chain();
        let target = Event::new(100, 0, 1, 5.0);
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        assert_eq!(c.ids(), vec![3, 2, 1]);
        let hops: Vec<_> = c.events.iter().map(|c| c.hop).collect();
        assert_eq!(hops, vec![2, 1, 0]);

        let c = candidate_events(&g, &target, 2, 2).unwrap();
        assert_eq!(c.ids(), vec![3, 2]);
    }

    #[test]
    fn fresh_nodes_have_no_candidates() {
        let g = chain();
        let target = Event::new(100, 5, 5, 5.0);
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn candidates_exclude_target_and_future() {
        let g = chain();
        let target = g.event(3).unwrap().clone();
        let c = candidate_events(&g, &target, 3, 64).unwrap();
        assert_eq!(c.ids(), vec![2, 1]);
    }
}
