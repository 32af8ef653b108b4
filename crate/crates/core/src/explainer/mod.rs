//! Counterfactual search over perturbation sets: the greedy baseline and the
//! tree search.

pub mod cody;
pub mod greedy;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ctdg::{candidate_events, CandidateSet, Event, EventId, GraphView, TemporalGraph};
use crate::error::Result;
use crate::model::{delta, Logit, PredictorSession};
use crate::policies::PolicyKind;

pub use cody::{cody_explain, CodyConfig};
pub use greedy::{greedy_explain, GreedyConfig};

pub const DEFAULT_K: u32 = 2;
pub const DEFAULT_M_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainerKind {
    Greedy,
    Cody,
}

impl ExplainerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExplainerKind::Greedy => "greedy",
            ExplainerKind::Cody => "cody",
        }
    }
}

impl std::str::FromStr for ExplainerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(ExplainerKind::Greedy),
            "cody" => Ok(ExplainerKind::Cody),
            other => Err(crate::Error::Config(format!(
                "unknown explainer {other:?} (expected greedy or cody)"
            ))),
        }
    }
}

/// Output of one explanation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationResult {
    pub target_event_id: EventId,
    pub explainer: ExplainerKind,
    pub policy: String,
    /// Chosen events in the order they were omitted.
    pub events: Vec<EventId>,
    pub is_counterfactual: bool,
    pub original_logit: Logit,
    pub achieved_logit: Logit,
    pub candidate_size: usize,
    pub oracle_calls: u64,
    pub iterations: u64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

impl ExplanationResult {
    pub fn delta(&self) -> f64 {
        delta(self.original_logit, self.achieved_logit)
    }

    pub fn sorted_events(&self) -> Vec<EventId> {
        let mut v = self.events.clone();
        v.sort_unstable();
        v
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Hop radius: explicit value, else the oracle's layer count, else 2.
pub fn resolve_k(explicit: Option<u32>, session: &mut PredictorSession) -> u32 {
    explicit
        .or_else(|| session.num_layers())
        .unwrap_or(DEFAULT_K)
        .max(1)
}

/// Per-instance state shared by both explainers.
pub(crate) struct Instance<'g> {
    pub target: Event,
    pub view: GraphView<'g>,
    pub candidates: CandidateSet,
    pub p_orig: Logit,
    pub calls_before: u64,
}

impl<'g> Instance<'g> {
    pub fn prepare(
        session: &mut PredictorSession,
        graph: &'g TemporalGraph,
        target: &Event,
        k: u32,
        m_max: usize,
    ) -> Result<Self> {
        let calls_before = session.oracle_calls();
        let candidates = candidate_events(graph, target, k, m_max)?;
        let view = graph.temporal_view(target, std::iter::empty())?;
        let p_orig = session.predict(&view, target)?;
        Ok(Self {
            target: target.clone(),
            view,
            candidates,
            p_orig,
            calls_before,
        })
    }

    /// Prediction with `set` omitted, for search-time scoring.
    pub fn score(
        &self,
        session: &mut PredictorSession,
        set: &[EventId],
    ) -> Result<crate::model::Prediction> {
        let view = self.view.with_excluded(set.iter().copied())?;
        session.score(&view, &self.target)
    }

    pub fn exact(&self, session: &mut PredictorSession, set: &[EventId]) -> Result<Logit> {
        let view = self.view.with_excluded(set.iter().copied())?;
        session.predict(&view, &self.target)
    }

    pub fn is_counterfactual(&self, p: Logit) -> bool {
        delta(self.p_orig, p) > self.p_orig.value().abs()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        &self,
        session: &PredictorSession,
        explainer: ExplainerKind,
        policy: PolicyKind,
        events: Vec<EventId>,
        achieved: Logit,
        is_counterfactual: bool,
        iterations: u64,
        wall_time: Duration,
    ) -> ExplanationResult {
        ExplanationResult {
            target_event_id: self.target.event_id,
            explainer,
            policy: policy.name().to_string(),
            events,
            is_counterfactual,
            original_logit: self.p_orig,
            achieved_logit: achieved,
            candidate_size: self.candidates.len(),
            oracle_calls: session.oracle_calls() - self.calls_before,
            iterations,
            wall_time,
        }
    }
}
