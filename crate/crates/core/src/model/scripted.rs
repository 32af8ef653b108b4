use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError};
use crate::ctdg::{Event, EventId, GraphView};
use crate::error::{Error, Result};

/// One scripted answer. Without `target` it applies to every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<EventId>,
    pub excluded: Vec<EventId>,
    pub logit: f64,
}

/// JSON fixture format for [`ScriptedOracle`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFixture {
    /// Answer for unscripted exclusion sets; unscripted queries fail without one.
    #[serde(default)]
    pub default_logit: Option<f64>,
    #[serde(default)]
    pub num_layers: Option<u32>,
    #[serde(default)]
    pub predictions: Vec<ScriptedEntry>,
}

/// Oracle answering from a lookup table keyed by exclusion set.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    table: HashMap<(Option<EventId>, Vec<EventId>), f64>,
    default_logit: Option<f64>,
    num_layers: Option<u32>,
}

impl ScriptedOracle {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let table = fixture
            .predictions
            .into_iter()
            .map(|mut entry| {
                entry.excluded.sort_unstable();
                entry.excluded.dedup();
                ((entry.target, entry.excluded), entry.logit)
            })
            .collect();
        Self {
            table,
            default_logit: fixture.default_logit,
            num_layers: fixture.num_layers,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fixture: ScriptedFixture = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Self::new(fixture))
    }

    /// Constant oracle that ignores the history entirely.
    pub fn constant(logit: f64) -> Self {
        Self::new(ScriptedFixture {
            default_logit: Some(logit),
            ..ScriptedFixture::default()
        })
    }
}

impl Oracle for ScriptedOracle {
    fn predict(&mut self, view: &GraphView<'_>, target: &Event) -> Result<f64, OracleError> {
        let excluded = view.excluded().to_vec();
        let specific = (Some(target.event_id), excluded);
        if let Some(&v) = self.table.get(&specific) {
            return Ok(v);
        }
        let generic = (None, specific.1);
        self.table
            .get(&generic)
            .copied()
            .or(self.default_logit)
            .ok_or_else(|| OracleError(format!("no scripted logit for excluded {:?}", generic.1)))
    }

    fn num_layers(&mut self) -> Option<u32> {
        self.num_layers
    }

    fn name(&self) -> String {
        "fixture".into()
    }
}
