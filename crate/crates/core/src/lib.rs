//! Counterfactual explanations for future-link predictions on continuous-time
//! dynamic graphs.
//!
//! A prediction for a target interaction is explained by a small set of past
//! events whose removal flips the predicted class. Two searches are provided:
//! [`explainer::greedy_explain`] and the tree search [`explainer::cody_explain`].

pub mod ctdg;
pub mod error;
pub mod eval;
pub mod explainer;
pub mod harness;
pub mod model;
pub mod policies;

pub use ctdg::{Event, EventId, NodeId, Partition, TemporalGraph};
pub use error::{Error, Result};
pub use explainer::{
    cody_explain, greedy_explain, CodyConfig, ExplainerKind, ExplanationResult, GreedyConfig,
};
pub use model::{Logit, Oracle, PredictorSession};
pub use policies::PolicyKind;
