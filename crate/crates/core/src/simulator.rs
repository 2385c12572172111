//! Deterministic request-loop experiments.
//!
//! A run processes requests one after another on a simulated clock. Each
//! request draws an uplink time, derives its budget, asks the configured
//! policy for a model, executes that model's ground-truth latency, feeds the
//! observation back into the profile, and draws correctness and downlink time.
//!
//! Every source of randomness has its own ChaCha stream derived from the run
//! seed, so two policies given the same seed see the same network and the
//! same correctness coins.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetConfig, BudgetError, RequestTiming, TimeBudget};
use crate::config::{build_registry, ModelConfig, PoolError};
use crate::netmodel::{LatencyDistribution, NetModelError, NetworkProfile};
use crate::policy::{self, PolicyError, PolicyKind, SelectionPath};
use crate::registry::{RegistryError, DEFAULT_EWMA_ALPHA, DEFAULT_STALENESS_WINDOW_MS};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Network(#[from] NetModelError),
    #[error("cannot aggregate an empty outcome log")]
    EmptyLog,
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub models: Vec<ModelConfig>,
    pub network: NetworkProfile,
    pub policy: PolicyKind,
    pub sla_ms: f64,
    pub budget: BudgetConfig,
    pub request_count: usize,
    /// Probe executions per unseeded model before the first request.
    pub warmup_count: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Models idle for longer than this get one out-of-band probe.
    pub staleness_window_ms: f64,
}

impl SimulationConfig {
    pub fn new(models: Vec<ModelConfig>, network: NetworkProfile, policy: PolicyKind, sla_ms: f64) -> Self {
        Self {
            models,
            network,
            policy,
            sla_ms,
            budget: BudgetConfig::default(),
            request_count: 10_000,
            warmup_count: 1000,
            seed: 0,
            alpha: DEFAULT_EWMA_ALPHA,
            staleness_window_ms: DEFAULT_STALENESS_WINDOW_MS,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.request_count == 0 {
            return Err(SimError::Config("request_count must be positive".into()));
        }
        if !(self.sla_ms > 0.0 && self.sla_ms.is_finite()) {
            return Err(SimError::Config(format!("sla_ms must be positive, got {}", self.sla_ms)));
        }
        if self.models.is_empty() {
            return Err(SimError::Config("model pool is empty".into()));
        }
        if !(self.staleness_window_ms > 0.0) {
            return Err(SimError::Config("staleness window must be positive".into()));
        }
        self.budget.validate()?;
        Ok(())
    }
}

/// One served request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub index: usize,
    pub model: String,
    pub path: SelectionPath,
    pub t_input_actual_ms: f64,
    pub t_input_estimated_ms: f64,
    pub exec_ms: f64,
    pub t_output_ms: f64,
    pub end_to_end_ms: f64,
    pub sla_met: bool,
    pub correct: bool,
    pub sla_ms: f64,
    pub policy: PolicyKind,
    pub t_upper_ms: f64,
    pub t_lower_ms: f64,
    /// Believed profile of the chosen model at selection time.
    pub profile_mean_ms: f64,
    pub profile_std_ms: f64,
}

impl RequestOutcome {
    /// A normal-path decision must have cleared the hard limit when it was made.
    pub fn passes_safety_audit(&self) -> bool {
        self.path == SelectionPath::FallbackFastest
            || self.policy == PolicyKind::StaticGreedy
            || self.policy == PolicyKind::DynamicGreedy
            || self.policy == PolicyKind::PureRandom
            || self.profile_mean_ms + self.profile_std_ms < self.t_upper_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub model: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub policy: PolicyKind,
    pub sla_ms: f64,
    /// Network coefficient of variation, when the network is parametric.
    pub cv: Option<f64>,
    pub seed: u64,
    pub requests: usize,
    pub sla_attainment: f64,
    /// Correct responses over all requests.
    pub effective_accuracy: f64,
    /// Correct responses over SLA-meeting requests; `None` when none met it.
    pub accuracy_sla_met: Option<f64>,
    pub mean_latency_ms: f64,
    pub std_latency_ms: f64,
    pub usage: Vec<ModelUsage>,
    pub fallback_frac: f64,
}

impl Report {
    pub fn usage_of(&self, model: &str) -> f64 {
        self.usage
            .iter()
            .find(|u| u.model == model)
            .map_or(0.0, |u| u.fraction)
    }

    /// Number of models used for at least `min_fraction` of requests.
    pub fn models_used(&self, min_fraction: f64) -> usize {
        self.usage.iter().filter(|u| u.fraction >= min_fraction).count()
    }
}

/// Summarises a log. Usage lists models in order of first appearance.
pub fn aggregate(outcomes: &[RequestOutcome]) -> Result<Report, SimError> {
    let mut order: Vec<String> = Vec::new();
    for o in outcomes {
        if !order.contains(&o.model) {
            order.push(o.model.clone());
        }
    }
    aggregate_over(outcomes, &order)
}

/// Summarises a log with usage listed for exactly `models` (zeros included).
pub fn aggregate_over(outcomes: &[RequestOutcome], models: &[String]) -> Result<Report, SimError> {
    let first = outcomes.first().ok_or(SimError::EmptyLog)?;
    let n = outcomes.len() as f64;
    let met = outcomes.iter().filter(|o| o.sla_met).count();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let correct_met = outcomes.iter().filter(|o| o.correct && o.sla_met).count();
    let fallback = outcomes
        .iter()
        .filter(|o| o.path == SelectionPath::FallbackFastest)
        .count();
    let mean = outcomes.iter().map(|o| o.end_to_end_ms).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|o| (o.end_to_end_ms - mean).powi(2))
        .sum::<f64>()
        / n;
    let usage = models
        .iter()
        .map(|m| ModelUsage {
            model: m.clone(),
            fraction: outcomes.iter().filter(|o| &o.model == m).count() as f64 / n,
        })
        .collect();
    Ok(Report {
        policy: first.policy,
        sla_ms: first.sla_ms,
        cv: None,
        seed: 0,
        requests: outcomes.len(),
        sla_attainment: met as f64 / n,
        effective_accuracy: correct as f64 / n,
        accuracy_sla_met: (met > 0).then(|| correct_met as f64 / met as f64),
        mean_latency_ms: mean,
        std_latency_ms: var.sqrt(),
        usage,
        fallback_frac: fallback as f64 / n,
    })
}

/// Report plus the per-request log it summarises.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: Report,
    pub outcomes: Vec<RequestOutcome>,
}

const STREAM_UPLINK: u64 = 1;
const STREAM_DOWNLINK: u64 = 2;
const STREAM_CORRECTNESS: u64 = 3;
const STREAM_POLICY: u64 = 4;
const STREAM_EXEC_BASE: u64 = 1 << 16;
const STREAM_PROBE_BASE: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed for the `index`-th point of a sweep (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run(config: &SimulationConfig) -> Result<RunResult, SimError> {
    config.validate()?;
    let mut registry = build_registry(&config.models, config.alpha)?;
    let specs: Vec<_> = registry.entries().iter().map(|e| e.spec.clone()).collect();
    let ids: Vec<String> = specs.iter().map(|s| s.id.clone()).collect();

    let mut uplink = stream(config.seed, STREAM_UPLINK);
    let mut downlink = stream(config.seed, STREAM_DOWNLINK);
    let mut coins = stream(config.seed, STREAM_CORRECTNESS);
    let mut draws = stream(config.seed, STREAM_POLICY);
    let mut exec: Vec<ChaCha8Rng> = (0..specs.len())
        .map(|i| stream(config.seed, STREAM_EXEC_BASE + i as u64))
        .collect();
    let mut probes: Vec<ChaCha8Rng> = (0..specs.len())
        .map(|i| stream(config.seed, STREAM_PROBE_BASE + i as u64))
        .collect();

    for id in registry.unseeded_models() {
        let i = ids.iter().position(|x| *x == id).expect("registered id");
        for _ in 0..config.warmup_count {
            let x = specs[i].true_latency.sample(&mut probes[i]);
            registry.record_observation(&id, x, 0.0)?;
        }
    }

    let mut clock = 0.0f64;
    let mut outcomes = Vec::with_capacity(config.request_count);
    for index in 0..config.request_count {
        if config.staleness_window_ms.is_finite() {
            for id in registry.stale_models(clock, config.staleness_window_ms) {
                let i = ids.iter().position(|x| *x == id).expect("registered id");
                let x = specs[i].true_latency.sample(&mut probes[i]);
                registry.record_observation(&id, x, clock)?;
            }
        }

        let t_in = config.network.uplink.sample(&mut uplink);
        let timing = RequestTiming {
            t_start_ms: clock,
            t_arrival_ms: clock + t_in,
            sla_ms: config.sla_ms,
            input_bytes: 0,
        };
        let budget = TimeBudget::from_timing(&timing, &config.budget)?;
        let snapshot = registry.snapshot(clock);
        let decision = policy::select(config.policy, &snapshot, config.sla_ms, &budget, &mut draws)?;
        let i = ids
            .iter()
            .position(|x| *x == decision.chosen)
            .ok_or_else(|| PolicyError::UnknownModel(decision.chosen.clone()))?;
        let believed = &snapshot.entries()[i].profile;
        let (profile_mean_ms, profile_std_ms) = (believed.mean_ms, believed.std_ms);

        let exec_ms = specs[i].true_latency.sample(&mut exec[i]);
        registry.record_observation(&decision.chosen, exec_ms, clock + t_in + exec_ms)?;
        let correct = coins.random::<f64>() < specs[i].accuracy;
        let t_out = config.network.downlink.sample(&mut downlink);
        let end_to_end_ms = t_in + exec_ms + t_out;

        outcomes.push(RequestOutcome {
            index,
            model: decision.chosen,
            path: decision.path,
            t_input_actual_ms: t_in,
            t_input_estimated_ms: budget.t_input_ms,
            exec_ms,
            t_output_ms: t_out,
            end_to_end_ms,
            sla_met: end_to_end_ms <= config.sla_ms,
            correct,
            sla_ms: config.sla_ms,
            policy: config.policy,
            t_upper_ms: budget.t_upper_ms,
            t_lower_ms: budget.t_lower_ms,
            profile_mean_ms,
            profile_std_ms,
        });
        clock += end_to_end_ms;
    }

    let mut report = aggregate_over(&outcomes, &ids)?;
    report.cv = config.network.cv();
    report.seed = config.seed;
    Ok(RunResult { report, outcomes })
}

/// Runs independent configurations in parallel, returning results in input order.
pub fn run_many(configs: &[SimulationConfig]) -> Result<Vec<RunResult>, SimError> {
    configs.par_iter().map(run).collect()
}

/// One run per SLA, each with its own derived seed.
pub fn sweep_sla(config: &SimulationConfig, slas: &[f64]) -> Result<Vec<RunResult>, SimError> {
    run_many(&sla_grid(config, slas)?)
}

pub fn sla_grid(config: &SimulationConfig, slas: &[f64]) -> Result<Vec<SimulationConfig>, SimError> {
    if slas.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    Ok(slas
        .iter()
        .enumerate()
        .map(|(k, &sla)| SimulationConfig {
            sla_ms: sla,
            seed: derive_seed(config.seed, k as u64),
            ..config.clone()
        })
        .collect())
}

/// One run per network coefficient of variation around a fixed mean.
pub fn sweep_cv(config: &SimulationConfig, mean_ms: f64, cvs: &[f64]) -> Result<Vec<RunResult>, SimError> {
    run_many(&cv_grid(config, mean_ms, cvs)?)
}

pub fn cv_grid(config: &SimulationConfig, mean_ms: f64, cvs: &[f64]) -> Result<Vec<SimulationConfig>, SimError> {
    if cvs.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    cvs.iter()
        .enumerate()
        .map(|(k, &cv)| {
            Ok(SimulationConfig {
                network: NetworkProfile::symmetric(LatencyDistribution::from_mean_cv(mean_ms, cv)?),
                seed: derive_seed(config.seed, k as u64),
                ..config.clone()
            })
        })
        .collect()
}

/// Every policy on the same seed, hence the same environment streams.
pub fn compare_policies(
    config: &SimulationConfig,
    policies: &[PolicyKind],
) -> Result<Vec<(PolicyKind, RunResult)>, SimError> {
    if policies.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    let configs: Vec<_> = policies
        .iter()
        .map(|&policy| SimulationConfig {
            policy,
            ..config.clone()
        })
        .collect();
    Ok(policies.iter().copied().zip(run_many(&configs)?).collect())
}

pub const OUTCOME_HEADER: [&str; 10] = [
    "idx",
    "model",
    "path",
    "t_in_actual",
    "t_in_est",
    "exec",
    "t_out",
    "end_to_end",
    "sla_met",
    "correct",
];

pub const REPORT_HEADER: [&str; 8] = [
    "sla_ms",
    "cv",
    "policy",
    "attainment",
    "effective_accuracy",
    "mean_latency_ms",
    "std_latency_ms",
    "fallback_frac",
];

pub const USAGE_HEADER: [&str; 5] = ["sla_ms", "cv", "policy", "model", "usage_frac"];

fn ms(x: f64) -> String {
    format!("{x:.4}")
}

fn cv_field(cv: Option<f64>) -> String {
    cv.map(|c| format!("{c:.4}")).unwrap_or_default()
}

pub fn write_outcomes<W: Write>(out: W, outcomes: &[RequestOutcome]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOME_HEADER)?;
    for o in outcomes {
        w.write_record([
            o.index.to_string(),
            o.model.clone(),
            o.path.to_string(),
            ms(o.t_input_actual_ms),
            ms(o.t_input_estimated_ms),
            ms(o.exec_ms),
            ms(o.t_output_ms),
            ms(o.end_to_end_ms),
            o.sla_met.to_string(),
            o.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports<W: Write>(out: W, reports: &[Report]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            ms(r.sla_ms),
            cv_field(r.cv),
            r.policy.to_string(),
            format!("{:.6}", r.sla_attainment),
            format!("{:.6}", r.effective_accuracy),
            ms(r.mean_latency_ms),
            ms(r.std_latency_ms),
            format!("{:.6}", r.fallback_frac),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_usage<W: Write>(out: W, reports: &[Report]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(USAGE_HEADER)?;
    for r in reports {
        for u in &r.usage {
            w.write_record([
                ms(r.sla_ms),
                cv_field(r.cv),
                r.policy.to_string(),
                u.model.clone(),
                format!("{:.6}", u.fraction),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
