//! The black-box prediction oracle and everything the explainers need around it.

mod bridge;
mod reference;
mod scripted;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use bridge::{BridgeClient, BridgeInfo, BridgeRequest, BridgeResponse, QueryEndpoints};
pub use reference::{ReferenceParams, ReferencePredictor};
pub use scripted::{ScriptedEntry, ScriptedFixture, ScriptedOracle};

use crate::ctdg::{Event, EventId, GraphView, NodeId};
use crate::error::{Error, Result};

/// A finite prediction on the log-odds scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Logit(f64);

impl Logit {
    pub fn new(value: f64) -> Option<Self> {
        value.is_finite().then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn class(self) -> u8 {
        classify(self)
    }
}

impl TryFrom<f64> for Logit {
    type Error = String;

    fn try_from(value: f64) -> std::result::Result<Self, Self::Error> {
        Logit::new(value).ok_or_else(|| format!("non-finite logit {value}"))
    }
}

impl From<Logit> for f64 {
    fn from(l: Logit) -> f64 {
        l.0
    }
}

impl fmt::Display for Logit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary link prediction. Log-odds of exactly zero count as positive.
pub fn classify(logit: Logit) -> u8 {
    u8::from(logit.0 >= 0.0)
}

/// Signed shift of `p_j` away from `p_orig`, towards the opposite class.
pub fn delta(p_orig: Logit, p_j: Logit) -> f64 {
    if p_orig.0 >= 0.0 {
        p_orig.0 - p_j.0
    } else {
        p_j.0 - p_orig.0
    }
}

/// Failure reported by an oracle implementation.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct OracleError(pub String);

/// A future-link predictor evaluated on arbitrary event histories.
pub trait Oracle: Send {
    fn predict(&mut self, view: &GraphView<'_>, target: &Event) -> Result<f64, OracleError>;

    /// Cheap approximate prediction used for scoring during search. Oracles
    /// without a fast path return `None` and the exact value is used.
    fn predict_approx(
        &mut self,
        _view: &GraphView<'_>,
        _target: &Event,
    ) -> Option<Result<f64, OracleError>> {
        None
    }

    /// Number of message-passing layers, which sets the default hop radius.
    fn num_layers(&mut self) -> Option<u32> {
        None
    }

    fn name(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    target: EventId,
    src: NodeId,
    dst: NodeId,
    excluded: Vec<EventId>,
}

impl CacheKey {
    fn new(view: &GraphView<'_>, target: &Event) -> Self {
        Self {
            target: target.event_id,
            src: target.src,
            dst: target.dst,
            excluded: view.excluded().to_vec(),
        }
    }
}

/// Outcome of a search-time evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logit: Logit,
    /// False when the value came from the oracle's approximate path.
    pub exact: bool,
}

/// Caching, call-counting wrapper around one oracle. One per search.
pub struct PredictorSession {
    oracle: Box<dyn Oracle>,
    cache: HashMap<CacheKey, Logit>,
    approx_cache: HashMap<CacheKey, Logit>,
    calls: u64,
    approx_calls: u64,
}

impl fmt::Debug for PredictorSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictorSession")
            .field("oracle", &self.oracle.name())
            .field("cached", &self.cache.len())
            .field("calls", &self.calls)
            .finish()
    }
}

impl PredictorSession {
    pub fn new(oracle: impl Oracle + 'static) -> Self {
        Self::from_boxed(Box::new(oracle))
    }

    pub fn from_boxed(oracle: Box<dyn Oracle>) -> Self {
        Self {
            oracle,
            cache: HashMap::new(),
            approx_cache: HashMap::new(),
            calls: 0,
            approx_calls: 0,
        }
    }

    /// True oracle invocations of the exact path (cache misses).
    pub fn oracle_calls(&self) -> u64 {
        self.calls
    }

    pub fn approx_calls(&self) -> u64 {
        self.approx_calls
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
        self.approx_cache.clear();
    }

    pub fn num_layers(&mut self) -> Option<u32> {
        self.oracle.num_layers()
    }

    pub fn oracle_name(&self) -> String {
        self.oracle.name()
    }

    fn check_cutoff(view: &GraphView<'_>, target: &Event) -> Result<()> {
        if view.cutoff() != (target.timestamp, target.event_id) {
            return Err(Error::InvalidTarget {
                event_id: target.event_id,
                reason: format!(
                    "view cutoff {:?} does not match the target",
                    view.cutoff()
                ),
            });
        }
        Ok(())
    }

    fn wrap(key: &CacheKey, raw: Result<f64, OracleError>) -> Result<Logit> {
        let value = raw.map_err(|e| Error::Oracle {
            target: key.target,
            excluded: key.excluded.clone(),
            message: e.0,
        })?;
        Logit::new(value).ok_or_else(|| Error::Oracle {
            target: key.target,
            excluded: key.excluded.clone(),
            message: format!("non-finite logit {value}"),
        })
    }

    /// Exact prediction for `target` given the history in `view`.
    pub fn predict(&mut self, view: &GraphView<'_>, target: &Event) -> Result<Logit> {
        Self::check_cutoff(view, target)?;
        let key = CacheKey::new(view, target);
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let logit = Self::wrap(&key, self.oracle.predict(view, target))?;
        self.calls += 1;
        self.cache.insert(key, logit);
        Ok(logit)
    }

    /// Search-time scoring: the approximate path when the oracle has one,
    /// otherwise (or once an exact value is cached) the exact prediction.
    pub fn score(&mut self, view: &GraphView<'_>, target: &Event) -> Result<Prediction> {
        Self::check_cutoff(view, target)?;
        let key = CacheKey::new(view, target);
        if let Some(&hit) = self.cache.get(&key) {
            return Ok(Prediction {
                logit: hit,
                exact: true,
            });
        }
        if let Some(&hit) = self.approx_cache.get(&key) {
            return Ok(Prediction {
                logit: hit,
                exact: false,
            });
        }
        match self.oracle.predict_approx(view, target) {
            Some(raw) => {
                let logit = Self::wrap(&key, raw)?;
                self.approx_calls += 1;
                self.approx_cache.insert(key, logit);
                Ok(Prediction {
                    logit,
                    exact: false,
                })
            }
            None => Ok(Prediction {
                logit: self.predict(view, target)?,
                exact: true,
            }),
        }
    }
}
