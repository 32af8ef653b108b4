//! Tree search for minimal counterfactual perturbation sets.
//!
//! Every tree node proposes a set of events to omit; a child adds exactly one
//! more candidate event. One iteration selects an unexplored node (UCB-style
//! descent, ties broken by the selection policy), simulates it with a single
//! oracle call, expands it unless it is already a counterfactual, and
//! backpropagates the aggregated score to the root.
//!
//! Two constraints keep the tree small:
//!
//! * once a counterfactual of size `d` is known, nodes at depth `>= d` are
//!   never selected and never created;
//! * with `prune_duplicates`, a perturbation set appears at most once in the
//!   tree, so the tree is a spanning tree of the subset lattice.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{resolve_k, ExplainerKind, ExplanationResult, Instance, DEFAULT_M_MAX};
use crate::ctdg::{Event, EventId, TemporalGraph};
use crate::error::{Error, Result};
use crate::model::{delta, Logit, PredictorSession};
use crate::policies::{self, PolicyKind, Ranking};

pub const DEFAULT_IT_MAX: u64 = 300;
pub const DEFAULT_ALPHA: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodyConfig {
    pub it_max: u64,
    /// Weight of exploitation against the UCB1 exploration bonus.
    pub alpha: f64,
    pub m_max: usize,
    /// Hop radius; `None` uses the oracle's layer count.
    pub k: Option<u32>,
    /// Stop at the first counterfactual found.
    pub best_first_stop: bool,
    pub prune_duplicates: bool,
}

impl Default for CodyConfig {
    fn default() -> Self {
        Self {
            it_max: DEFAULT_IT_MAX,
            alpha: DEFAULT_ALPHA,
            m_max: DEFAULT_M_MAX,
            k: None,
            best_first_stop: false,
            prune_duplicates: true,
        }
    }
}

impl CodyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.it_max == 0 {
            return Err(Error::Config("it_max must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.m_max == 0 {
            return Err(Error::Config("m_max must be >= 1".into()));
        }
        Ok(())
    }
}

pub type NodeId = usize;

/// One perturbation set in the search tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    /// Omitted events in the order they were added along the path.
    pub set: Vec<EventId>,
    pub logit: Option<Logit>,
    /// Whether `logit` came from the exact predictor.
    pub exact: bool,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub selections: u64,
    pub score: Option<f64>,
    pub selectable: bool,
    pub expanded: bool,
}

impl SearchNode {
    fn new(set: Vec<EventId>, parent: Option<NodeId>) -> Self {
        Self {
            set,
            logit: None,
            exact: false,
            parent,
            children: Vec::new(),
            selections: 0,
            score: None,
            selectable: true,
            expanded: false,
        }
    }

    pub fn depth(&self) -> usize {
        self.set.len()
    }

    /// The event distinguishing this node from its parent.
    pub fn last_event(&self) -> Option<EventId> {
        self.set.last().copied()
    }
}

/// `alpha * score + (1 - alpha) * sqrt(2 ln(parent_selections) / selections)`.
pub fn sel_score(score: f64, selections: u64, parent_selections: u64, alpha: f64) -> f64 {
    let explore = (2.0 * (parent_selections as f64).ln() / selections as f64).sqrt();
    alpha * score + (1.0 - alpha) * explore
}

/// Normalised impact, clamped at zero. Above 1 means counterfactual.
pub fn node_score(p_orig: Logit, p: Logit) -> f64 {
    (delta(p_orig, p) / p_orig.value().abs()).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub node: NodeId,
    pub set: Vec<EventId>,
    pub logit: Logit,
    pub delta: f64,
}

/// Search tree state. Exposed so the individual steps can be driven and
/// inspected directly.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    p_orig: Logit,
    alpha: f64,
    /// Candidate events in policy order.
    ranked: Vec<EventId>,
    ranking: Ranking,
    prune_duplicates: bool,
    seen: HashSet<Vec<EventId>>,
    depth_limit: Option<usize>,
    cf_list: Vec<Counterfactual>,
    best_fallback: Option<(NodeId, f64)>,
}

impl SearchTree {
    pub const ROOT: NodeId = 0;

    /// Fails for `p_orig == 0`, where score normalisation is undefined.
    pub fn new(
        p_orig: Logit,
        ranking: Ranking,
        alpha: f64,
        prune_duplicates: bool,
        target: EventId,
    ) -> Result<Self> {
        if p_orig.value() == 0.0 {
            return Err(Error::DegenerateInstance(target));
        }
        let mut seen = HashSet::new();
        seen.insert(Vec::new());
        Ok(Self {
            nodes: vec![SearchNode::new(Vec::new(), None)],
            p_orig,
            alpha,
            ranked: ranking.ids(),
            ranking,
            prune_duplicates,
            seen,
            depth_limit: None,
            cf_list: Vec::new(),
            best_fallback: None,
        })
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[Self::ROOT]
    }

    pub fn counterfactuals(&self) -> &[Counterfactual] {
        &self.cf_list
    }

    pub fn depth_limit(&self) -> Option<usize> {
        self.depth_limit
    }

    fn within_limit(&self, depth: usize) -> bool {
        self.depth_limit.is_none_or(|d| depth < d)
    }

    fn is_selectable(&self, id: NodeId) -> bool {
        let n = &self.nodes[id];
        n.selectable && self.within_limit(n.depth())
    }

    fn policy_position(&self, id: NodeId) -> usize {
        self.nodes[id]
            .last_event()
            .and_then(|e| self.ranking.position(e))
            .unwrap_or(usize::MAX)
    }

    /// Best selectable child: unsimulated children first, then the highest
    /// selection score; remaining ties go to the better policy rank.
    fn best_child(&self, id: NodeId) -> Option<NodeId> {
        let parent_sel = self.nodes[id].selections;
        let mut best: Option<(NodeId, f64, usize)> = None;
        for &c in &self.nodes[id].children {
            if !self.is_selectable(c) {
                continue;
            }
            let child = &self.nodes[c];
            let value = match child.score {
                None => f64::INFINITY,
                Some(s) => sel_score(s, child.selections, parent_sel, self.alpha),
            };
            let pos = self.policy_position(c);
            let better = match best {
                None => true,
                Some((_, v, p)) => value > v || (value == v && pos < p),
            };
            if better {
                best = Some((c, value, pos));
            }
        }
        best.map(|(c, _, _)| c)
    }

    /// Descend from the root to the first unexpanded node. Dead ends are
    /// marked unselectable and the descent restarts; `None` once the root
    /// itself has nothing left to offer.
    pub fn select(&mut self) -> Option<NodeId> {
        loop {
            if !self.is_selectable(Self::ROOT) {
                self.nodes[Self::ROOT].selectable = false;
                return None;
            }
            let mut node = Self::ROOT;
            loop {
                if !self.nodes[node].expanded {
                    return Some(node);
                }
                match self.best_child(node) {
                    Some(child) => node = child,
                    None => {
                        self.nodes[node].selectable = false;
                        break;
                    }
                }
            }
        }
    }

    /// Record a prediction for `node`.
    pub fn set_prediction(&mut self, node: NodeId, logit: Logit, exact: bool) {
        let impact = delta(self.p_orig, logit);
        let n = &mut self.nodes[node];
        n.logit = Some(logit);
        n.exact = exact;
        if self.best_fallback.is_none_or(|(_, d)| impact > d) {
            self.best_fallback = Some((node, impact));
        }
    }

    /// Omit the node's events and query the oracle.
    pub(crate) fn simulate(
        &mut self,
        node: NodeId,
        inst: &Instance<'_>,
        session: &mut PredictorSession,
    ) -> Result<Logit> {
        let prediction = inst.score(session, &self.nodes[node].set)?;
        self.set_prediction(node, prediction.logit, prediction.exact);
        Ok(prediction.logit)
    }

    /// Score a simulated node, record it if counterfactual, otherwise create
    /// its children. Returns whether the node is a counterfactual.
    ///
    /// `confirm` re-evaluates an approximate prediction exactly before a
    /// counterfactual is recorded.
    pub fn expand<F>(&mut self, node: NodeId, mut confirm: F) -> Result<bool>
    where
        F: FnMut(&[EventId]) -> Result<Logit>,
    {
        let mut logit = self.nodes[node]
            .logit
            .expect("expand requires a simulated node");
        let mut score = node_score(self.p_orig, logit);
        if score > 1.0 && !self.nodes[node].exact {
            logit = confirm(&self.nodes[node].set)?;
            self.set_prediction(node, logit, true);
            score = node_score(self.p_orig, logit);
        }
        {
            let n = &mut self.nodes[node];
            n.selections = 1;
            n.score = Some(score);
            n.expanded = true;
        }
        if score > 1.0 {
            self.nodes[node].selectable = false;
            let depth = self.nodes[node].depth();
            self.cf_list.push(Counterfactual {
                node,
                set: self.nodes[node].set.clone(),
                logit,
                delta: delta(self.p_orig, logit),
            });
            self.depth_limit = Some(self.depth_limit.map_or(depth, |d| d.min(depth)));
            return Ok(true);
        }

        if self.within_limit(self.nodes[node].depth() + 1) {
            let parent_set = self.nodes[node].set.clone();
            for &event in &self.ranked {
                if parent_set.contains(&event) {
                    continue;
                }
                let mut set = parent_set.clone();
                set.push(event);
                if self.prune_duplicates {
                    let mut key = set.clone();
                    key.sort_unstable();
                    if !self.seen.insert(key) {
                        continue;
                    }
                }
                let id = self.nodes.len();
                self.nodes.push(SearchNode::new(set, Some(node)));
                self.nodes[node].children.push(id);
            }
        }
        if self.nodes[node].children.is_empty() {
            self.nodes[node].selectable = false;
        }
        Ok(false)
    }

    /// Update selections, aggregated score and selectability from `start`
    /// up to the root.
    pub fn backpropagate(&mut self, start: Option<NodeId>) {
        let mut current = start;
        while let Some(id) = current {
            let own = self.nodes[id]
                .logit
                .map_or(0.0, |p| node_score(self.p_orig, p));
            let children_sum: f64 = self.nodes[id]
                .children
                .iter()
                .map(|&c| {
                    let child = &self.nodes[c];
                    child.score.unwrap_or(0.0) * child.selections as f64
                })
                .sum();
            let any_selectable = self.nodes[id]
                .children
                .iter()
                .any(|&c| self.is_selectable(c));
            let n = &mut self.nodes[id];
            n.selections += 1;
            n.score = Some((own + children_sum) / n.selections as f64);
            if !any_selectable {
                n.selectable = false;
            }
            current = n.parent;
        }
    }

    /// Smallest counterfactual (largest impact among equals, then earliest),
    /// else the simulated set with the largest impact.
    pub fn select_best(&self) -> (Vec<EventId>, Logit, bool) {
        let best_cf = self.cf_list.iter().enumerate().min_by(|(ia, a), (ib, b)| {
            a.set
                .len()
                .cmp(&b.set.len())
                .then(b.delta.total_cmp(&a.delta))
                .then(ia.cmp(ib))
        });
        if let Some((_, cf)) = best_cf {
            return (cf.set.clone(), cf.logit, true);
        }
        match self.best_fallback {
            Some((node, _)) => {
                let n = &self.nodes[node];
                (n.set.clone(), n.logit.expect("tracked nodes are simulated"), false)
            }
            None => (Vec::new(), self.p_orig, false),
        }
    }
}

pub fn cody_explain(
    session: &mut PredictorSession,
    graph: &TemporalGraph,
    target: &Event,
    policy: PolicyKind,
    config: &CodyConfig,
) -> Result<ExplanationResult> {
    config.validate()?;
    let started = Instant::now();
    let k = resolve_k(config.k, session);
    let inst = Instance::prepare(session, graph, target, k, config.m_max)?;
    if inst.candidates.is_empty() {
        return Ok(inst.finish(
            session,
            ExplainerKind::Cody,
            policy,
            Vec::new(),
            inst.p_orig,
            false,
            0,
            started.elapsed(),
        ));
    }
    if inst.p_orig.value() == 0.0 {
        return Err(Error::DegenerateInstance(target.event_id));
    }
    let ranking = policies::rank(policy, &inst.candidates, session, &inst.view, inst.p_orig)?;
    let mut tree = SearchTree::new(
        inst.p_orig,
        ranking,
        config.alpha,
        config.prune_duplicates,
        target.event_id,
    )?;

    // the root is the unperturbed input; expanding it costs no iteration
    tree.set_prediction(SearchTree::ROOT, inst.p_orig, true);
    tree.expand(SearchTree::ROOT, |_| Ok(inst.p_orig))?;

    let mut iterations = 0u64;
    while iterations < config.it_max && tree.root().selectable {
        let Some(node) = tree.select() else {
            break;
        };
        tree.simulate(node, &inst, session)?;
        let found = tree.expand(node, |set| inst.exact(session, set))?;
        let parent = tree.node(node).parent;
        tree.backpropagate(parent);
        iterations += 1;
        if found && config.best_first_stop {
            break;
        }
    }

    let (set, mut achieved, is_cf) = tree.select_best();
    if !is_cf {
        achieved = inst.exact(session, &set)?;
    }
    Ok(inst.finish(
        session,
        ExplainerKind::Cody,
        policy,
        set,
        achieved,
        is_cf,
        iterations,
        started.elapsed(),
    ))
}
