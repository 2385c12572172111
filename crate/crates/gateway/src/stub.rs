//! Stand-in model executor: sleeps for a draw from the model's true latency
//! and returns a synthetic label.

use std::time::Duration;

use rand::Rng;
use slasel_core::registry::ModelSpec;

pub const DEFAULT_LABEL: &str = "class_0";

#[derive(Debug, Clone, PartialEq)]
pub struct StubResult {
    pub latency_ms: f64,
    pub label: String,
    /// Set only when the caller supplied a ground-truth label.
    pub correct: Option<bool>,
}

/// Draws latency and label without sleeping.
///
/// With a truth label the answer is right with probability equal to the
/// model's accuracy; a wrong answer is any label other than the truth.
pub fn draw<R: Rng + ?Sized>(spec: &ModelSpec, truth_label: Option<&str>, rng: &mut R) -> StubResult {
    let latency_ms = spec.true_latency.sample(rng);
    match truth_label {
        None => StubResult {
            latency_ms,
            label: DEFAULT_LABEL.to_string(),
            correct: None,
        },
        Some(truth) => {
            let correct = rng.random::<f64>() < spec.accuracy;
            let label = if correct {
                truth.to_string()
            } else if truth == DEFAULT_LABEL {
                "class_1".to_string()
            } else {
                DEFAULT_LABEL.to_string()
            };
            StubResult {
                latency_ms,
                label,
                correct: Some(correct),
            }
        }
    }
}

/// Sleeps for `latency_ms` of wall time without blocking the runtime.
pub async fn execute(latency_ms: f64) {
    tokio::time::sleep(Duration::from_secs_f64(latency_ms.max(0.0) / 1000.0)).await;
}
