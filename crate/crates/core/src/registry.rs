//! Model pool with live latency profiles.
//!
//! Each registered model carries a static [`ModelSpec`] (accuracy plus the
//! hidden ground-truth latency law) and a [`ModelProfile`] holding what the
//! selector currently believes about its latency. Profiles are refreshed from
//! observed executions with an exponentially weighted moving average.
//!
//! Mutation goes through `&mut Registry`; readers work on immutable
//! [`ProfileSnapshot`]s, which share nothing with the live registry.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::LatencyDistribution;

pub const DEFAULT_EWMA_ALPHA: f64 = 0.1;
pub const DEFAULT_STALENESS_WINDOW_MS: f64 = 10_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("model {0:?} is already registered")]
    DuplicateId(String),
    #[error("model {0:?} is not registered")]
    UnknownModel(String),
    #[error("accuracy for {id:?} must lie in [0, 1], got {value}")]
    AccuracyOutOfRange { id: String, value: f64 },
    #[error("model id must not be empty")]
    EmptyId,
    #[error("{name} must be a finite nonnegative number, got {value}")]
    NegativeValue { name: &'static str, value: f64 },
    #[error("EWMA smoothing factor must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
}

/// Static description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    /// Top-1 accuracy as a fraction.
    pub accuracy: f64,
    /// Ground truth used by executors; never consulted by selection.
    pub true_latency: LatencyDistribution,
}

impl ModelSpec {
    pub fn new(id: impl Into<String>, accuracy: f64, true_latency: LatencyDistribution) -> Self {
        Self {
            id: id.into(),
            accuracy,
            true_latency,
        }
    }
}

/// Believed latency statistics for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model_id: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub sample_count: u64,
    /// Logical time (ms since experiment start) of the last execution.
    pub last_selected_at: f64,
    /// True when the profile started from a configured prior.
    pub seeded: bool,
}

impl ModelProfile {
    fn unseeded(model_id: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            mean_ms: 0.0,
            std_ms: 0.0,
            sample_count: 0,
            last_selected_at: 0.0,
            seeded: false,
        }
    }

    /// Whether μ and σ carry information (a prior or at least one observation).
    pub fn is_estimated(&self) -> bool {
        self.seeded || self.sample_count > 0
    }

    /// Folds one latency observation into the profile.
    ///
    /// The first observation of an unseeded profile replaces it outright.
    /// Afterwards `μ ← (1−α)μ + αx` and `s² ← (1−α)s² + α(x − μ_prev)²`.
    pub fn observe(&mut self, latency_ms: f64, alpha: f64) {
        if !self.is_estimated() {
            self.mean_ms = latency_ms;
            self.std_ms = 0.0;
        } else {
            let prev = self.mean_ms;
            let var = self.std_ms * self.std_ms;
            let dev = latency_ms - prev;
            self.mean_ms = (1.0 - alpha) * prev + alpha * latency_ms;
            self.std_ms = ((1.0 - alpha) * var + alpha * dev * dev).sqrt();
        }
        self.sample_count += 1;
    }
}

/// One model as seen by a selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub spec: ModelSpec,
    pub profile: ModelProfile,
}

impl ModelEntry {
    pub fn id(&self) -> &str {
        &self.spec.id
    }
}

/// Immutable point-in-time copy of the registry, in registration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    entries: Arc<[ModelEntry]>,
    pub taken_at: f64,
}

impl ProfileSnapshot {
    pub fn new(entries: Vec<ModelEntry>, taken_at: f64) -> Self {
        Self {
            entries: entries.into(),
            taken_at,
        }
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.spec.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.spec.id == id)
    }

    /// Copy of the snapshot with `f` applied to every entry.
    pub fn map_entries(&self, mut f: impl FnMut(&mut ModelEntry)) -> Self {
        let entries: Vec<ModelEntry> = self
            .entries
            .iter()
            .cloned()
            .map(|mut e| {
                f(&mut e);
                e
            })
            .collect();
        Self::new(entries, self.taken_at)
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    alpha: f64,
    entries: Vec<ModelEntry>,
    index: HashMap<String, usize>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self {
            alpha: DEFAULT_EWMA_ALPHA,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn with_alpha(alpha: f64) -> Result<Self, RegistryError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RegistryError::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha,
            ..Self::new()
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn register_model(
        &mut self,
        spec: ModelSpec,
        seed_profile: Option<(f64, f64)>,
    ) -> Result<String, RegistryError> {
        if spec.id.is_empty() {
            return Err(RegistryError::EmptyId);
        }
        if !(0.0..=1.0).contains(&spec.accuracy) {
            return Err(RegistryError::AccuracyOutOfRange {
                id: spec.id.clone(),
                value: spec.accuracy,
            });
        }
        if self.index.contains_key(&spec.id) {
            return Err(RegistryError::DuplicateId(spec.id));
        }
        let mut profile = ModelProfile::unseeded(&spec.id);
        if let Some((mean, std)) = seed_profile {
            for (name, value) in [("seed_mean_ms", mean), ("seed_std_ms", std)] {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(RegistryError::NegativeValue { name, value });
                }
            }
            profile.mean_ms = mean;
            profile.std_ms = std;
            profile.seeded = true;
        }
        let id = spec.id.clone();
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push(ModelEntry { spec, profile });
        Ok(id)
    }

    pub fn entry(&self, id: &str) -> Option<&ModelEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    /// Updates the model's profile with one latency measurement taken at `now`.
    /// Observations also count as a use for staleness purposes.
    pub fn record_observation(
        &mut self,
        id: &str,
        observed_latency_ms: f64,
        now: f64,
    ) -> Result<&ModelProfile, RegistryError> {
        if !(observed_latency_ms.is_finite() && observed_latency_ms >= 0.0) {
            return Err(RegistryError::NegativeValue {
                name: "observed_latency_ms",
                value: observed_latency_ms,
            });
        }
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| RegistryError::UnknownModel(id.to_string()))?;
        let profile = &mut self.entries[i].profile;
        profile.observe(observed_latency_ms, self.alpha);
        profile.last_selected_at = now;
        Ok(profile)
    }

    pub fn mark_selected(&mut self, id: &str, now: f64) -> Result<(), RegistryError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| RegistryError::UnknownModel(id.to_string()))?;
        self.entries[i].profile.last_selected_at = now;
        Ok(())
    }

    /// Ids (registration order) with `now − last_selected_at > window_ms`.
    /// An infinite window never reports anything.
    pub fn stale_models(&self, now: f64, window_ms: f64) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| now - e.profile.last_selected_at > window_ms)
            .map(|e| e.spec.id.clone())
            .collect()
    }

    /// Ids of models without a usable profile.
    pub fn unseeded_models(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !e.profile.is_estimated())
            .map(|e| e.spec.id.clone())
            .collect()
    }

    /// Forgets all observations, returning each profile to its configured prior.
    pub fn reset_profiles(&mut self, seeds: &HashMap<String, (f64, f64)>) {
        for e in &mut self.entries {
            let mut p = ModelProfile::unseeded(&e.spec.id);
            if let Some(&(mean, std)) = seeds.get(&e.spec.id) {
                p.mean_ms = mean;
                p.std_ms = std;
                p.seeded = true;
            }
            e.profile = p;
        }
    }

    pub fn snapshot(&self, now: f64) -> ProfileSnapshot {
        ProfileSnapshot::new(self.entries.clone(), now)
    }
}
