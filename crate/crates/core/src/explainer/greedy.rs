//! Greedy hill-climbing over perturbation sets.
//!
//! Each iteration extends the current best set by one of the `l` best-ranked
//! unused candidates, keeping the extension that moves the prediction
//! furthest towards the opposite class. The search stops at the first
//! counterfactual, when no sampled extension improves on the current best,
//! or when every candidate has been used.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{resolve_k, ExplainerKind, ExplanationResult, Instance, DEFAULT_M_MAX};
use crate::ctdg::{Event, EventId, TemporalGraph};
use crate::error::{Error, Result};
use crate::model::{delta, Logit, PredictorSession};
use crate::policies::{self, PolicyKind};

pub const DEFAULT_L: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Children sampled per iteration.
    pub l: usize,
    /// Hop radius; `None` uses the oracle's layer count.
    pub k: Option<u32>,
    pub m_max: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            l: DEFAULT_L,
            k: None,
            m_max: DEFAULT_M_MAX,
        }
    }
}

pub fn greedy_explain(
    session: &mut PredictorSession,
    graph: &TemporalGraph,
    target: &Event,
    policy: PolicyKind,
    config: &GreedyConfig,
) -> Result<ExplanationResult> {
    if config.l == 0 {
        return Err(Error::Config("greedy needs l >= 1".into()));
    }
    let started = Instant::now();
    let k = resolve_k(config.k, session);
    let inst = Instance::prepare(session, graph, target, k, config.m_max)?;
    let ranking = policies::rank(policy, &inst.candidates, session, &inst.view, inst.p_orig)?;
    let ranked = ranking.ids();

    let mut best: Vec<EventId> = Vec::new();
    let mut p_best: Logit = inst.p_orig;
    let mut iterations = 0u64;

    while best.len() < ranked.len() {
        iterations += 1;
        let sampled = ranked
            .iter()
            .filter(|id| !best.contains(id))
            .take(config.l)
            .copied();

        // argmax over impact; iterating in rank order keeps the better-ranked child on ties
        let mut best_child: Option<(EventId, Logit, f64)> = None;
        for id in sampled {
            let mut set = best.clone();
            set.push(id);
            let p = inst.score(session, &set)?.logit;
            let impact = delta(inst.p_orig, p);
            if best_child.is_none_or(|(_, _, d)| impact > d) {
                best_child = Some((id, p, impact));
            }
        }
        let Some((id, p_child, _)) = best_child else {
            break;
        };
        if delta(p_best, p_child) <= 0.0 {
            break;
        }
        best.push(id);
        p_best = p_child;
        if inst.is_counterfactual(p_best) {
            // approximate scores are confirmed before a counterfactual is reported
            p_best = inst.exact(session, &best)?;
            if inst.is_counterfactual(p_best) {
                break;
            }
        }
    }

    let achieved = inst.exact(session, &best)?;
    let is_cf = inst.is_counterfactual(achieved);
    Ok(inst.finish(
        session,
        ExplainerKind::Greedy,
        policy,
        best,
        achieved,
        is_cf,
        iterations,
        started.elapsed(),
    ))
}
