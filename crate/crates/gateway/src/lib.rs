//! HTTP front door for SLA-aware model selection.
//!
//! Requests carry their SLA and a client start timestamp. The gateway turns
//! those into a time budget, picks a model with the three-stage selector,
//! runs a stub executor that sleeps for the model's sampled latency, and
//! folds the measured latency back into the model's profile.

pub mod http;
pub mod stub;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use slasel_core::budget::{BudgetConfig, BudgetError, TimeBudget};
use slasel_core::config::{ModelConfig, PoolError, DEFAULT_WARMUP};
use slasel_core::policy::{self, PolicyError, SelectionPath};
use slasel_core::registry::{Registry, RegistryError, DEFAULT_EWMA_ALPHA, DEFAULT_STALENESS_WINDOW_MS};

pub use http::{router, serve};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> f64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() * 1000.0)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub budget: BudgetConfig,
    /// Synthetic probe executions for each model registered without a seed.
    pub warmup: usize,
    pub alpha: f64,
    pub seed: u64,
    pub staleness_window_ms: f64,
    /// Use this uplink estimate instead of trusting client clocks.
    pub fixed_t_input_ms: Option<f64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            budget: BudgetConfig::default(),
            warmup: DEFAULT_WARMUP,
            alpha: DEFAULT_EWMA_ALPHA,
            seed: 0,
            staleness_window_ms: DEFAULT_STALENESS_WINDOW_MS,
            fixed_t_input_ms: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("invalid field {field:?}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("malformed request body: {0}")]
    MalformedBody(String),
    #[error("no models are registered")]
    EmptyRegistry,
    #[error("no model has a latency profile yet")]
    NotWarmedUp,
    #[error("model {0:?} is already registered")]
    Duplicate(String),
    #[error("model {0:?} is not registered")]
    UnknownModel(String),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("selection failed: {0}")]
    Policy(PolicyError),
    #[error(transparent)]
    Registry(RegistryError),
}

impl From<RegistryError> for GatewayError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::DuplicateId(id) => GatewayError::Duplicate(id),
            RegistryError::UnknownModel(id) => GatewayError::UnknownModel(id),
            other => GatewayError::Registry(other),
        }
    }
}

impl From<PolicyError> for GatewayError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::EmptySnapshot => GatewayError::EmptyRegistry,
            PolicyError::NoProfiledModels => GatewayError::NotWarmedUp,
            other => GatewayError::Policy(other),
        }
    }
}

impl From<PoolError> for GatewayError {
    fn from(e: PoolError) -> Self {
        match e {
            PoolError::Registry(r) => r.into(),
            PoolError::Latency { id, source } => GatewayError::InvalidField {
                field: "true_std_ms",
                reason: format!("model {id:?}: {source}"),
            },
        }
    }
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::MissingField(_) => "missing_field",
            GatewayError::InvalidField { .. } => "invalid_field",
            GatewayError::MalformedBody(_) => "malformed_body",
            GatewayError::EmptyRegistry => "empty_registry",
            GatewayError::NotWarmedUp => "not_warmed_up",
            GatewayError::Duplicate(_) => "duplicate_model",
            GatewayError::UnknownModel(_) => "unknown_model",
            GatewayError::Budget(_) => "invalid_budget",
            GatewayError::Policy(_) => "selection_failed",
            GatewayError::Registry(_) => "invalid_model",
        }
    }
}

/// Validated inference request.
#[derive(Debug, Clone, PartialEq)]
pub struct InferRequest {
    pub sla_ms: f64,
    pub client_start_ts_ms: f64,
    pub payload_bytes: usize,
    pub request_id: Option<String>,
    pub truth_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferResponse {
    pub request_id: String,
    pub model_used: String,
    pub label: String,
    pub path: SelectionPath,
    pub server_exec_ms: f64,
    pub t_input_est_ms: f64,
    pub t_budget_ms: f64,
    pub t_upper_ms: f64,
    pub t_lower_ms: f64,
    /// Believed profile of `model_used` when it was selected.
    pub profile_mean_ms: f64,
    pub profile_std_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl InferResponse {
    /// Normal-path selections must have cleared the hard limit.
    pub fn passes_safety_audit(&self) -> bool {
        self.path == SelectionPath::FallbackFastest || self.profile_mean_ms + self.profile_std_ms < self.t_upper_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelView {
    pub id: String,
    pub accuracy: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub sample_count: u64,
    pub usage_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub per_model: BTreeMap<String, ModelMetrics>,
    pub total_requests: u64,
    pub sla_met: u64,
    pub sla_missed: u64,
}

#[derive(Debug, Default)]
struct Counters {
    usage: HashMap<String, u64>,
    total: u64,
    sla_met: u64,
    sla_missed: u64,
}

pub struct Gateway {
    config: GatewayConfig,
    registry: RwLock<Registry>,
    seeds: Mutex<HashMap<String, (f64, f64)>>,
    rng: Mutex<ChaCha8Rng>,
    counters: Mutex<Counters>,
    clock: Arc<dyn Clock>,
    started_at_ms: f64,
    next_id: AtomicU64,
}

impl Gateway {
    pub fn new(config: GatewayConfig, clock: Arc<dyn Clock>) -> Result<Self, GatewayError> {
        config.budget.validate()?;
        let registry = Registry::with_alpha(config.alpha)?;
        let started_at_ms = clock.now_ms();
        Ok(Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
            registry: RwLock::new(registry),
            seeds: Mutex::new(HashMap::new()),
            counters: Mutex::new(Counters::default()),
            clock,
            started_at_ms,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn with_pool(config: GatewayConfig, models: &[ModelConfig]) -> Result<Self, GatewayError> {
        let gw = Self::new(config, Arc::new(SystemClock))?;
        for m in models {
            gw.register_model(m)?;
        }
        Ok(gw)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Logical registry time: ms since the gateway started.
    fn elapsed_ms(&self) -> f64 {
        (self.clock.now_ms() - self.started_at_ms).max(0.0)
    }

    /// Registers a model; unseeded models are warmed with synthetic probes.
    pub fn register_model(&self, model: &ModelConfig) -> Result<ModelView, GatewayError> {
        let spec = model.to_spec().map_err(|source| PoolError::Latency {
            id: model.id.clone(),
            source,
        })?;
        let now = self.elapsed_ms();
        let mut registry = self.registry.write();
        registry.register_model(spec.clone(), model.seed())?;
        if let Some(seed) = model.seed() {
            self.seeds.lock().insert(model.id.clone(), seed);
        } else {
            let mut rng = self.rng.lock();
            for _ in 0..self.config.warmup {
                let x = spec.true_latency.sample(&mut *rng);
                registry.record_observation(&model.id, x, now)?;
            }
        }
        let e = registry.entry(&model.id).expect("just registered");
        Ok(ModelView {
            id: e.spec.id.clone(),
            accuracy: e.spec.accuracy,
            mean_ms: e.profile.mean_ms,
            std_ms: e.profile.std_ms,
            sample_count: e.profile.sample_count,
        })
    }

    pub fn list_models(&self) -> Vec<ModelView> {
        self.registry
            .read()
            .entries()
            .iter()
            .map(|e| ModelView {
                id: e.spec.id.clone(),
                accuracy: e.spec.accuracy,
                mean_ms: e.profile.mean_ms,
                std_ms: e.profile.std_ms,
                sample_count: e.profile.sample_count,
            })
            .collect()
    }

    pub fn metrics(&self) -> MetricsView {
        let registry = self.registry.read();
        let counters = self.counters.lock();
        let per_model = registry
            .entries()
            .iter()
            .map(|e| {
                (
                    e.spec.id.clone(),
                    ModelMetrics {
                        mean_ms: e.profile.mean_ms,
                        std_ms: e.profile.std_ms,
                        sample_count: e.profile.sample_count,
                        usage_count: counters.usage.get(&e.spec.id).copied().unwrap_or(0),
                    },
                )
            })
            .collect();
        MetricsView {
            per_model,
            total_requests: counters.total,
            sla_met: counters.sla_met,
            sla_missed: counters.sla_missed,
        }
    }

    /// Drops learned profiles back to configured seeds (re-warming the rest)
    /// and clears request counters.
    pub fn reset_profiles(&self) {
        let now = self.elapsed_ms();
        let mut registry = self.registry.write();
        registry.reset_profiles(&self.seeds.lock());
        let specs: Vec<_> = registry
            .entries()
            .iter()
            .filter(|e| !e.profile.is_estimated())
            .map(|e| e.spec.clone())
            .collect();
        let mut rng = self.rng.lock();
        for spec in specs {
            for _ in 0..self.config.warmup {
                let x = spec.true_latency.sample(&mut *rng);
                let _ = registry.record_observation(&spec.id, x, now);
            }
        }
        *self.counters.lock() = Counters::default();
    }

    /// Draws a stub execution for `model_id` (no sleeping).
    pub fn stub_execute(&self, model_id: &str, truth_label: Option<&str>) -> Result<stub::StubResult, GatewayError> {
        let spec = self
            .registry
            .read()
            .entry(model_id)
            .map(|e| e.spec.clone())
            .ok_or_else(|| GatewayError::UnknownModel(model_id.to_string()))?;
        Ok(stub::draw(&spec, truth_label, &mut *self.rng.lock()))
    }

    /// Serves one request end to end, including the stub's sleep.
    pub async fn handle_infer(&self, req: InferRequest) -> Result<InferResponse, GatewayError> {
        if !(req.sla_ms > 0.0 && req.sla_ms.is_finite()) {
            return Err(GatewayError::InvalidField {
                field: "sla_ms",
                reason: "must be a positive number".into(),
            });
        }
        if !(req.client_start_ts_ms > 0.0 && req.client_start_ts_ms.is_finite()) {
            return Err(GatewayError::InvalidField {
                field: "client_start_ts_ms",
                reason: "must be a positive epoch timestamp in ms".into(),
            });
        }
        let arrival = self.clock.now_ms();
        let t_input = self
            .config
            .fixed_t_input_ms
            .unwrap_or_else(|| (arrival - req.client_start_ts_ms).max(0.0));
        let budget = TimeBudget::from_input(req.sla_ms, t_input, &self.config.budget)?;

        let snapshot = self.registry.read().snapshot(self.elapsed_ms());
        let decision = {
            let mut rng = self.rng.lock();
            policy::select_modipick(&snapshot, &budget, &mut *rng)?
        };
        let entry = snapshot
            .get(&decision.chosen)
            .ok_or_else(|| GatewayError::UnknownModel(decision.chosen.clone()))?;
        let result = stub::draw(&entry.spec, req.truth_label.as_deref(), &mut *self.rng.lock());

        stub::execute(result.latency_ms).await;

        let done = self.elapsed_ms();
        self.registry
            .write()
            .record_observation(&decision.chosen, result.latency_ms, done)?;

        // Downlink is assumed to take as long as the uplink did.
        let est_end_to_end = self.clock.now_ms() - req.client_start_ts_ms + t_input;
        {
            let mut c = self.counters.lock();
            *c.usage.entry(decision.chosen.clone()).or_default() += 1;
            c.total += 1;
            if est_end_to_end <= req.sla_ms {
                c.sla_met += 1;
            } else {
                c.sla_missed += 1;
            }
        }

        let request_id = req
            .request_id
            .unwrap_or_else(|| format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed)));
        Ok(InferResponse {
            request_id,
            model_used: decision.chosen,
            label: result.label,
            path: decision.path,
            server_exec_ms: result.latency_ms,
            t_input_est_ms: budget.t_input_ms,
            t_budget_ms: budget.t_budget_ms,
            t_upper_ms: budget.t_upper_ms,
            t_lower_ms: budget.t_lower_ms,
            profile_mean_ms: entry.profile.mean_ms,
            profile_std_ms: entry.profile.std_ms,
            correct: result.correct,
        })
    }

    /// Re-measures every model idle for longer than the staleness window.
    /// Probes run concurrently and never touch request counters.
    pub async fn probe_stale(self: &Arc<Self>) -> usize {
        let stale = self
            .registry
            .read()
            .stale_models(self.elapsed_ms(), self.config.staleness_window_ms);
        let mut tasks = Vec::with_capacity(stale.len());
        for id in stale {
            let gw = Arc::clone(self);
            tasks.push(tokio::spawn(async move {
                let Ok(r) = gw.stub_execute(&id, None) else {
                    return false;
                };
                stub::execute(r.latency_ms).await;
                let now = gw.elapsed_ms();
                gw.registry.write().record_observation(&id, r.latency_ms, now).is_ok()
            }));
        }
        let mut probed = 0;
        for t in tasks {
            if matches!(t.await, Ok(true)) {
                probed += 1;
            }
        }
        probed
    }

    /// Runs [`Gateway::probe_stale`] on a fixed cadence until the task is dropped.
    pub fn spawn_probe_loop(self: &Arc<Self>) -> Option<tokio::task::JoinHandle<()>> {
        if !self.config.staleness_window_ms.is_finite() {
            return None;
        }
        let gw = Arc::clone(self);
        let period = Duration::from_secs_f64((self.config.staleness_window_ms / 2000.0).max(0.01));
        Some(tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.tick().await;
            loop {
                tick.tick().await;
                let probed = gw.probe_stale().await;
                if probed > 0 {
                    tracing::debug!(probed, "refreshed stale model profiles");
                }
            }
        }))
    }
}
