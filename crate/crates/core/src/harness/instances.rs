//! Explained instances: test-split positives plus resampled negatives,
//! bucketed by whether the oracle classifies them correctly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctdg::{Event, NodeId, TemporalGraph};
use crate::error::{Error, Result};
use crate::eval::Correctness;
use crate::model::{classify, Logit, PredictorSession};

pub const DEFAULT_PER_BUCKET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub per_bucket: usize,
    pub seed: u64,
    /// Index of the first test-split event in time order.
    pub test_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedInstance {
    pub instance_id: usize,
    pub target: Event,
    pub ground_truth: u8,
    pub original_logit: Logit,
    pub correctness: Correctness,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceSelection {
    pub instances: Vec<SelectedInstance>,
    pub warnings: Vec<String>,
}

impl InstanceSelection {
    pub fn count(&self, c: Correctness) -> usize {
        self.instances.iter().filter(|i| i.correctness == c).count()
    }
}

/// Negative twin of `positive`: same source, time and id, destination drawn
/// uniformly from the destination partition minus the true destination.
pub fn resample_destination<R: Rng>(
    graph: &TemporalGraph,
    positive: &Event,
    rng: &mut R,
) -> Option<Event> {
    let range = graph.destination_range();
    let span = range.len();
    let true_dst = positive.dst as usize;
    let own = range.contains(&true_dst);
    if span <= usize::from(own) {
        return None;
    }
    // draw from the span with the true destination removed
    let mut pick = range.start + rng.gen_range(0..span - usize::from(own));
    if own && pick >= true_dst {
        pick += 1;
    }
    Some(Event {
        event_id: positive.event_id,
        src: positive.src,
        dst: pick as NodeId,
        timestamp: positive.timestamp,
        features: positive.features.clone(),
    })
}

pub fn select_instances(
    graph: &TemporalGraph,
    session: &mut PredictorSession,
    spec: &InstanceSpec,
) -> Result<InstanceSelection> {
    let test = graph.events().get(spec.test_start..).unwrap_or(&[]);
    if test.is_empty() {
        return Err(Error::Config("test split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.shuffle(&mut rng);

    let mut out = InstanceSelection::default();
    let (mut n_correct, mut n_incorrect) = (0usize, 0usize);
    let mut push = |out: &mut InstanceSelection, target: Event, truth: u8, logit: Logit| {
        let correctness = Correctness::of(classify(logit), truth);
        let slot = match correctness {
            Correctness::Correct => &mut n_correct,
            Correctness::Incorrect => &mut n_incorrect,
        };
        if *slot < spec.per_bucket {
            *slot += 1;
            out.instances.push(SelectedInstance {
                instance_id: out.instances.len(),
                target,
                ground_truth: truth,
                original_logit: logit,
                correctness,
            });
        }
    };

    for &i in &order {
        if out.instances.len() >= 2 * spec.per_bucket {
            break;
        }
        let positive = test[i].clone();
        let negative = resample_destination(graph, &positive, &mut rng);
        let view = graph.temporal_view(&positive, std::iter::empty())?;
        let p = session.predict(&view, &positive)?;
        push(&mut out, positive, 1, p);
        if let Some(neg) = negative {
            let view = graph.temporal_view(&neg, std::iter::empty())?;
            let p = session.predict(&view, &neg)?;
            push(&mut out, neg, 0, p);
        }
    }

    for c in [Correctness::Correct, Correctness::Incorrect] {
        let have = out.count(c);
        if have == 0 {
            out.warnings
                .push(format!("bucket {} is empty", c.name()));
        } else if have < spec.per_bucket {
            out.warnings.push(format!(
                "bucket {} short: {have} of {} requested",
                c.name(),
                spec.per_bucket
            ));
        }
    }
    Ok(out)
}
