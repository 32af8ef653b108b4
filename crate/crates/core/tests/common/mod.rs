#![allow(dead_code)]

use std::path::PathBuf;

use cody::ctdg::{candidate_events, CandidateSet, Event, EventId, NodeId, Partition, TemporalGraph};
use cody::model::{ReferenceParams, ReferencePredictor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Unipartite graph with `events` uniformly random interactions at unit
/// spacing plus jitter.
pub fn random_graph(rng: &mut ChaCha8Rng, nodes: usize, events: usize) -> TemporalGraph {
    let mut t = 0.0;
    let list = (0..events as u64)
        .map(|id| {
            t += 0.5 + rng.gen::<f64>();
            let u = rng.gen_range(0..nodes) as NodeId;
            let mut v = rng.gen_range(0..nodes - 1) as NodeId;
            if v >= u {
                v += 1;
            }
            Event::new(id, u, v, t)
        })
        .collect();
    TemporalGraph::new(list, nodes, Partition::Unipartite).unwrap()
}

/// Bursty bipartite interaction log: sources revisit the same destination
/// several times in quick succession.
pub fn bursty_bipartite(seed: u64, sources: usize, dests: usize, events: usize) -> TemporalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(events);
    let mut t = 0.0;
    while raw.len() < events {
        t += rng.gen_range(0.5..8.0);
        let u = rng.gen_range(0..sources);
        // skewed destination popularity
        let d = ((rng.gen::<f64>().powi(3)) * dests as f64) as usize;
        let burst = rng.gen_range(1..=5);
        let mut bt = t;
        for _ in 0..burst {
            bt += rng.gen_range(0.05..1.0);
            raw.push((u, d.min(dests - 1), bt));
        }
    }
    raw.truncate(events);
    raw.sort_by(|a, b| a.2.total_cmp(&b.2));
    let list = raw
        .into_iter()
        .enumerate()
        .map(|(i, (u, d, t))| Event::new(i as u64, u as NodeId, (sources + d) as NodeId, t))
        .collect();
    TemporalGraph::new(list, sources + dests, Partition::Bipartite { sources }).unwrap()
}

/// One brute-force-checkable explanation problem.
pub struct BruteInstance {
    pub seed: u64,
    pub graph: TemporalGraph,
    pub target: Event,
    pub params: ReferenceParams,
    pub m_max: usize,
    pub candidates: CandidateSet,
}

/// Seeded instances over small unipartite graphs (at most 500 events) whose
/// candidate sets hold between 8 and 12 events.
pub fn brute_instances(count: usize, base_seed: u64) -> Vec<BruteInstance> {
    let mut out = Vec::with_capacity(count);
    let mut seed = base_seed;
    while out.len() < count {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = rng.gen_range(6..=14);
        let n_events = rng.gen_range(20..=120);
        let graph = random_graph(&mut rng, nodes, n_events);
        let pick = rng.gen_range(n_events / 2..n_events);
        let target = graph.events()[pick].clone();
        let mut params = ReferenceParams {
            a: rng.gen_range(0.5..1.5),
            b: rng.gen_range(0.0..1.0),
            c: 0.0,
            lambda: rng.gen_range(0.0..0.08),
        };
        let m_max = rng.gen_range(8..=12);
        let candidates = candidate_events(&graph, &target, 2, m_max).unwrap();
        if candidates.len() < 8 {
            continue;
        }
        // place the bias so that most instances flip somewhere in the lattice
        let unbiased = ReferencePredictor::new(params).unwrap();
        let full = unbiased.score(&graph.temporal_view(&target, []).unwrap(), &target);
        let bare = unbiased.score(
            &graph.temporal_view(&target, candidates.ids()).unwrap(),
            &target,
        );
        let span = (full - bare).max(0.1);
        params.c = match rng.gen_range(0..10) {
            0 | 1 => bare - rng.gen_range(0.05..0.5) * span,
            2 | 3 => full + rng.gen_range(0.05..0.5) * span,
            _ => rng.gen_range(bare..=full.max(bare + 1e-9)),
        };
        if full - params.c == 0.0 {
            continue;
        }
        out.push(BruteInstance {
            seed,
            graph,
            target,
            params,
            m_max,
            candidates,
        });
    }
    out
}

/// Logit with `excluded` removed, evaluated directly from the scoring rule.
pub fn direct_logit(inst: &BruteInstance, excluded: &[EventId]) -> f64 {
    let view = inst
        .graph
        .temporal_view(&inst.target, excluded.iter().copied())
        .unwrap();
    ReferencePredictor::new(inst.params).unwrap().score(&view, &inst.target)
}

pub fn flips(p_orig: f64, p: f64) -> bool {
    (p_orig > 0.0 && p < 0.0) || (p_orig < 0.0 && p > 0.0)
}

/// Smallest counterfactual size by exhaustive enumeration, or `None`.
pub fn brute_force_min(inst: &BruteInstance) -> Option<usize> {
    let ids = inst.candidates.ids();
    let n = ids.len();
    let p_orig = direct_logit(inst, &[]);
    let mut best: Option<usize> = None;
    for mask in 1u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let set: Vec<EventId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ids[i]).collect();
        if flips(p_orig, direct_logit(inst, &set)) {
            best = Some(size);
        }
    }
    best
}
