//! Selection policies: total rankings over candidate events.
//!
//! Every ranking breaks ties by descending event id, so the most recent of
//! two equally ranked events comes first.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctdg::{event_hop, CandidateSet, Event, EventId, GraphView};
use crate::error::{Error, Result};
use crate::model::{delta, Logit, PredictorSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    Random { seed: u64 },
    Temporal,
    SpatioTemporal,
    EventImpact,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Random { .. } => "random",
            PolicyKind::Temporal => "temporal",
            PolicyKind::SpatioTemporal => "spatio-temporal",
            PolicyKind::EventImpact => "event-impact",
        }
    }

    /// Parse a CLI policy name; `seed` is used by the random policy.
    pub fn parse_with_seed(name: &str, seed: u64) -> Result<Self> {
        match name {
            "random" => Ok(PolicyKind::Random { seed }),
            "temporal" => Ok(PolicyKind::Temporal),
            "spatio-temporal" => Ok(PolicyKind::SpatioTemporal),
            "event-impact" => Ok(PolicyKind::EventImpact),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected random, temporal, spatio-temporal or event-impact)"
            ))),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_seed(s, 0)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankKey {
    /// Position in the shuffled order.
    Random(usize),
    /// `|t_i - t_j|`
    Temporal(f64),
    /// Hop distance (`None` = unreachable), then `|t_i - t_j|`.
    SpatioTemporal(Option<u32>, f64),
    /// Impact of removing the event alone.
    EventImpact(f64),
}

/// Candidate events ordered best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    entries: Vec<(EventId, RankKey)>,
    position: HashMap<EventId, usize>,
}

impl Ranking {
    fn from_entries(entries: Vec<(EventId, RankKey)>) -> Self {
        let position = entries
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (*id, i))
            .collect();
        Self { entries, position }
    }

    pub fn entries(&self) -> &[(EventId, RankKey)] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<EventId> {
        self.entries.iter().map(|(id, _)| *id).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 0 is best. `None` for events outside the ranking.
    pub fn position(&self, id: EventId) -> Option<usize> {
        self.position.get(&id).copied()
    }
}

fn by_key_then_recent<K, F>(mut keyed: Vec<(EventId, K)>, cmp: F) -> Vec<(EventId, K)>
where
    F: Fn(&K, &K) -> Ordering,
{
    keyed.sort_by(|(ia, ka), (ib, kb)| cmp(ka, kb).then(ib.cmp(ia)));
    keyed
}

/// Seed for the random policy: the 32-byte ChaCha8 key holds `seed` and the
/// target id as little-endian words, rest zero.
fn policy_rng(seed: u64, target_id: EventId) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&target_id.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform permutation of the candidates (most-recent-first input order),
/// by a descending Fisher-Yates pass. Each draw maps one 64-bit output to
/// `0..=i` with a widening multiply: `(x * (i + 1)) >> 64`.
pub fn rank_random(candidates: &CandidateSet, seed: u64) -> Ranking {
    let mut ids = candidates.ids();
    let mut rng = policy_rng(seed, candidates.target.event_id);
    for i in (1..ids.len()).rev() {
        let x = rng.next_u64();
        let j = ((u128::from(x) * (i as u128 + 1)) >> 64) as usize;
        ids.swap(i, j);
    }
    Ranking::from_entries(
        ids.into_iter()
            .enumerate()
            .map(|(i, id)| (id, RankKey::Random(i)))
            .collect(),
    )
}

pub fn rank_temporal(candidates: &CandidateSet, target: &Event) -> Ranking {
    let keyed = candidates
        .events
        .iter()
        .map(|c| (c.event_id, (target.timestamp - c.timestamp).abs()))
        .collect();
    let sorted = by_key_then_recent(keyed, |a: &f64, b| a.total_cmp(b));
    Ranking::from_entries(
        sorted
            .into_iter()
            .map(|(id, k)| (id, RankKey::Temporal(k)))
            .collect(),
    )
}

pub fn rank_spatio_temporal(
    candidates: &CandidateSet,
    view: &GraphView<'_>,
    target: &Event,
) -> Result<Ranking> {
    let graph = view.graph();
    let dist = view.hop_distances(&[target.src, target.dst], None);
    let mut keyed = Vec::with_capacity(candidates.len());
    for c in &candidates.events {
        let event = graph.event(c.event_id).ok_or(Error::UnknownEvent(c.event_id))?;
        let hop = event_hop(&dist, event);
        keyed.push((c.event_id, (hop, (target.timestamp - c.timestamp).abs())));
    }
    let sorted = by_key_then_recent(keyed, |a: &(Option<u32>, f64), b| {
        let hop = |h: Option<u32>| h.unwrap_or(u32::MAX);
        hop(a.0).cmp(&hop(b.0)).then(a.1.total_cmp(&b.1))
    });
    Ok(Ranking::from_entries(
        sorted
            .into_iter()
            .map(|(id, (h, dt))| (id, RankKey::SpatioTemporal(h, dt)))
            .collect(),
    ))
}

/// Ranks by the impact of removing each candidate alone, largest first.
/// Costs one oracle evaluation per candidate (modulo cache).
pub fn rank_event_impact(
    candidates: &CandidateSet,
    session: &mut PredictorSession,
    view: &GraphView<'_>,
    target: &Event,
    p_orig: Logit,
) -> Result<Ranking> {
    let mut keyed = Vec::with_capacity(candidates.len());
    for c in &candidates.events {
        let single = view.with_excluded([c.event_id])?;
        let p = session.score(&single, target)?.logit;
        keyed.push((c.event_id, delta(p_orig, p)));
    }
    let sorted = by_key_then_recent(keyed, |a: &f64, b| b.total_cmp(a));
    Ok(Ranking::from_entries(
        sorted
            .into_iter()
            .map(|(id, d)| (id, RankKey::EventImpact(d)))
            .collect(),
    ))
}

/// Ranks `candidates` under `policy`. `view` must be the unperturbed history.
pub fn rank(
    policy: PolicyKind,
    candidates: &CandidateSet,
    session: &mut PredictorSession,
    view: &GraphView<'_>,
    p_orig: Logit,
) -> Result<Ranking> {
    let target = &candidates.target;
    match policy {
        PolicyKind::Random { seed } => Ok(rank_random(candidates, seed)),
        PolicyKind::Temporal => Ok(rank_temporal(candidates, target)),
        PolicyKind::SpatioTemporal => rank_spatio_temporal(candidates, view, target),
        PolicyKind::EventImpact => rank_event_impact(candidates, session, view, target, p_orig),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctdg::{candidate_events, Candidate, Partition, TemporalGraph};
    use crate::model::{ScriptedEntry, ScriptedFixture, ScriptedOracle};

    fn set_of(target: Event, items: &[(EventId, f64)]) -> CandidateSet {
        CandidateSet {
            target,
            k: 2,
            m_max: 64,
            events: items
                .iter()
                .map(|&(event_id, timestamp)| Candidate {
                    event_id,
                    hop: 0,
                    timestamp,
                })
                .collect(),
        }
    }

    #[test]
    fn temporal_order() {
        let c = set_of(Event::new(99, 0, 1, 5.0), &[(1, 1.0), (2, 4.0), (3, 3.0)]);
        assert_eq!(rank_temporal(&c, &c.target).ids(), vec![2, 3, 1]);
    }

    #[test]
    fn temporal_tie_prefers_higher_id() {
        let c = set_of(Event::new(99, 0, 1, 5.0), &[(4, 2.0), (9, 2.0)]);
        assert_eq!(rank_temporal(&c, &c.target).ids(), vec![9, 4]);
    }

    fn chain() -> TemporalGraph {
        let events = vec![
            Event::new(1, 0, 1, 1.0),
            Event::new(2, 1, 2, 2.0),
            Event::new(3, 2, 3, 3.0),
            Event::new(4, 3, 4, 4.0),
        ];
        TemporalGraph::new(events, 5, Partition::Unipartite).unwrap()
    }

    #[test]
    fn chain_rankings() {
        let g = chain();
        let target = Event::new(100, 0, 1, 5.0);
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        assert_eq!(rank_temporal(&c, &target).ids(), vec![3, 2, 1]);
        let view = g.temporal_view(&target, []).unwrap();
        assert_eq!(
            rank_spatio_temporal(&c, &view, &target).unwrap().ids(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn closer_older_event_beats_farther_recent_one() {
        // event 1 touches the target (hop 0 via both endpoints), event 2 is one hop out
        let events = vec![Event::new(1, 0, 1, 1.0), Event::new(2, 1, 2, 2.0)];
        let g = TemporalGraph::new(events, 3, Partition::Unipartite).unwrap();
        let target = Event::new(10, 0, 1, 3.0);
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        let view = g.temporal_view(&target, []).unwrap();
        assert_eq!(
            rank_spatio_temporal(&c, &view, &target).unwrap().ids(),
            vec![1, 2]
        );
    }

    #[test]
    fn random_is_seeded_and_pinned() {
        let items: Vec<(EventId, f64)> = (1..=6).map(|i| (i, i as f64)).collect();
        let c = set_of(Event::new(42, 0, 1, 10.0), &items);
        let a = rank_random(&c, 7).ids();
        assert_eq!(a, rank_random(&c, 7).ids());
        let b = rank_random(&c, 8).ids();
        assert_ne!(a, b);
        assert_eq!(a, vec![3, 1, 4, 2, 6, 5]);
        assert_eq!(b, vec![1, 6, 5, 2, 4, 3]);

        let single = set_of(Event::new(42, 0, 1, 10.0), &[(3, 1.0)]);
        assert_eq!(rank_random(&single, 1).ids(), vec![3]);
    }

    #[test]
    fn event_impact_orders_by_delta() {
        let events = vec![
            Event::new(1, 0, 1, 1.0),
            Event::new(2, 0, 1, 2.0),
            Event::new(3, 0, 1, 3.0),
        ];
        let g = TemporalGraph::new(events, 2, Partition::Unipartite).unwrap();
        let target = Event::new(10, 0, 1, 4.0);
        let entry = |id, logit| ScriptedEntry {
            target: None,
            excluded: vec![id],
            logit,
        };
        let fixture = ScriptedFixture {
            default_logit: Some(2.854),
            num_layers: None,
            // deltas 0.858, 0.12, -0.3
            predictions: vec![entry(1, 3.154), entry(2, 1.996), entry(3, 2.734)],
        };
        let mut session = PredictorSession::new(ScriptedOracle::new(fixture));
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        let view = g.temporal_view(&target, []).unwrap();
        let p_orig = session.predict(&view, &target).unwrap();
        let r = rank_event_impact(&c, &mut session, &view, &target, p_orig).unwrap();
        assert_eq!(r.ids(), vec![2, 3, 1]);
        assert_eq!(session.oracle_calls(), 1 + 3);
    }

    #[test]
    fn event_impact_full_tie_falls_back_to_ids() {
        let events = vec![Event::new(1, 0, 1, 1.0), Event::new(2, 0, 1, 2.0)];
        let g = TemporalGraph::new(events, 2, Partition::Unipartite).unwrap();
        let target = Event::new(10, 0, 1, 4.0);
        let mut session = PredictorSession::new(ScriptedOracle::constant(1.0));
        let c = candidate_events(&g, &target, 2, 64).unwrap();
        let view = g.temporal_view(&target, []).unwrap();
        let p = session.predict(&view, &target).unwrap();
        let r = rank_event_impact(&c, &mut session, &view, &target, p).unwrap();
        assert_eq!(r.ids(), vec![2, 1]);
    }

    #[test]
    fn policy_names_round_trip() {
        for name in ["random", "temporal", "spatio-temporal", "event-impact"] {
            assert_eq!(name.parse::<PolicyKind>().unwrap().name(), name);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
