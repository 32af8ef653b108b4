use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError};
use crate::ctdg::{Event, GraphView, NodeId, TemporalGraph};
use crate::error::{Error, Result};

/// Weights of the built-in reference predictor.
///
/// The logit for a target `(u, v, t)` is
///
/// ```text
/// a * sum over prior u-v events e of exp(-lambda (t - t_e))
///   + b * sum over common neighbours w of exp(-lambda (t - last(u,w))) * exp(-lambda (t - last(v,w)))
///   - c
/// ```
///
/// Direct interactions are matched in either direction. Features are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
}

impl ReferenceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a.is_finite()
            && self.a > 0.0
            && self.b.is_finite()
            && self.b >= 0.0
            && self.c.is_finite()
            && self.lambda.is_finite()
            && self.lambda >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "reference predictor needs a > 0, b >= 0, finite c, lambda >= 0; got {self:?}"
            )))
        }
    }

    /// Defaults with the decay rate set to the inverse mean inter-event gap.
    pub fn for_graph(graph: &TemporalGraph) -> Self {
        let events = graph.events();
        let lambda = match (events.first(), events.last()) {
            (Some(first), Some(last)) if events.len() > 1 && last.timestamp > first.timestamp => {
                (events.len() - 1) as f64 / (last.timestamp - first.timestamp)
            }
            _ => 1.0,
        };
        Self {
            lambda,
            ..Self::default()
        }
    }
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.5,
            c: 1.0,
            lambda: 1.0,
        }
    }
}

/// Deterministic recency/common-neighbour link scorer.
#[derive(Debug, Clone)]
pub struct ReferencePredictor {
    params: ReferenceParams,
}

impl ReferencePredictor {
    pub fn new(params: ReferenceParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ReferenceParams {
        &self.params
    }

    pub fn score(&self, view: &GraphView<'_>, target: &Event) -> f64 {
        let ReferenceParams { a, b, c, lambda } = self.params;
        let (u, v, t) = (target.src, target.dst, target.timestamp);
        let decay = |te: f64| (-lambda * (t - te)).exp();

        let direct: f64 = view
            .node_events(u)
            .filter(|e| (e.src == u && e.dst == v) || (e.src == v && e.dst == u))
            .map(|e| decay(e.timestamp))
            .sum();

        let mut common = 0.0;
        if b > 0.0 {
            let last_u = last_contact(view, u, v);
            let last_v = last_contact(view, v, u);
            for (w, tu) in &last_u {
                if let Some(tv) = last_v.get(w) {
                    common += decay(*tu) * decay(*tv);
                }
            }
        }
        a * direct + b * common - c
    }
}

// Most recent interaction time between `x` and each neighbour, skipping `x` and `other`.
fn last_contact(view: &GraphView<'_>, x: NodeId, other: NodeId) -> BTreeMap<NodeId, f64> {
    let mut last = BTreeMap::new();
    for e in view.node_events(x) {
        let w = if e.src == x { e.dst } else { e.src };
        if w != x && w != other {
            last.insert(w, e.timestamp);
        }
    }
    last
}

impl Oracle for ReferencePredictor {
    fn predict(&mut self, view: &GraphView<'_>, target: &Event) -> Result<f64, OracleError> {
        Ok(self.score(view, target))
    }

    fn num_layers(&mut self) -> Option<u32> {
        Some(2)
    }

    fn name(&self) -> String {
        "reference".into()
    }
}
