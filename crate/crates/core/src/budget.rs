//! Request timing to inference-time budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Expected on-device inference time; upper bound for the threshold.
pub const DEFAULT_ON_DEVICE_MS: f64 = 150.0;
pub const DEFAULT_THRESHOLD_MS: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum BudgetError {
    #[error("threshold {threshold_ms} ms must lie in [0, {on_device_ms}] (the on-device inference time)")]
    ThresholdOutOfRange { threshold_ms: f64, on_device_ms: f64 },
    #[error("SLA must be positive, got {0} ms")]
    NonPositiveSla(f64),
}

/// Timing metadata carried by one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestTiming {
    /// Client-stamped start, epoch ms.
    pub t_start_ms: f64,
    /// Server arrival, epoch ms.
    pub t_arrival_ms: f64,
    pub sla_ms: f64,
    pub input_bytes: u64,
}

/// Threshold configuration shared by every request of a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub t_threshold_ms: f64,
    pub t_on_device_ms: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            t_threshold_ms: DEFAULT_THRESHOLD_MS,
            t_on_device_ms: DEFAULT_ON_DEVICE_MS,
        }
    }
}

impl BudgetConfig {
    pub fn new(t_threshold_ms: f64, t_on_device_ms: f64) -> Result<Self, BudgetError> {
        let cfg = Self {
            t_threshold_ms,
            t_on_device_ms,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        let ok = self.t_threshold_ms.is_finite()
            && self.t_on_device_ms.is_finite()
            && self.t_threshold_ms >= 0.0
            && self.t_threshold_ms <= self.t_on_device_ms;
        if ok {
            Ok(())
        } else {
            Err(BudgetError::ThresholdOutOfRange {
                threshold_ms: self.t_threshold_ms,
                on_device_ms: self.t_on_device_ms,
            })
        }
    }
}

/// Per-request derived timing. `t_upper_ms` is the hard limit, `t_lower_ms`
/// the soft limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub t_input_ms: f64,
    pub t_nw_ms: f64,
    pub t_budget_ms: f64,
    pub t_threshold_ms: f64,
    pub t_upper_ms: f64,
    pub t_lower_ms: f64,
}

impl TimeBudget {
    pub fn from_input(sla_ms: f64, t_input_ms: f64, cfg: &BudgetConfig) -> Result<Self, BudgetError> {
        if !(sla_ms > 0.0) {
            return Err(BudgetError::NonPositiveSla(sla_ms));
        }
        let t_input_ms = t_input_ms.max(0.0);
        let t_budget_ms = compute_budget(sla_ms, t_input_ms);
        let (t_upper_ms, t_lower_ms) = budget_range(t_budget_ms, cfg.t_threshold_ms, cfg.t_on_device_ms)?;
        Ok(Self {
            t_input_ms,
            t_nw_ms: 2.0 * t_input_ms,
            t_budget_ms,
            t_threshold_ms: cfg.t_threshold_ms,
            t_upper_ms,
            t_lower_ms,
        })
    }

    pub fn from_timing(timing: &RequestTiming, cfg: &BudgetConfig) -> Result<Self, BudgetError> {
        Self::from_input(timing.sla_ms, estimate_input_transfer(timing), cfg)
    }

    /// Explicit limits, bypassing the network estimate.
    pub fn from_limits(t_upper_ms: f64, t_lower_ms: f64) -> Self {
        Self {
            t_input_ms: 0.0,
            t_nw_ms: 0.0,
            t_budget_ms: t_upper_ms,
            t_threshold_ms: t_upper_ms - t_lower_ms,
            t_upper_ms,
            t_lower_ms,
        }
    }
}

/// Uplink transfer estimate from client/server timestamps; clock skew clamps to 0.
pub fn estimate_input_transfer(timing: &RequestTiming) -> f64 {
    (timing.t_arrival_ms - timing.t_start_ms).max(0.0)
}

/// Time left for server-side inference once the round trip is paid for.
/// The output transfer is assumed no slower than the input, so the round trip
/// is bounded by twice the input transfer. Negative results are preserved.
pub fn compute_budget(sla_ms: f64, t_input_ms: f64) -> f64 {
    sla_ms - 2.0 * t_input_ms
}

/// Returns the (hard, soft) limit pair.
pub fn budget_range(
    t_budget_ms: f64,
    t_threshold_ms: f64,
    t_on_device_ms: f64,
) -> Result<(f64, f64), BudgetError> {
    BudgetConfig {
        t_threshold_ms,
        t_on_device_ms,
    }
    .validate()?;
    Ok((t_budget_ms, t_budget_ms - t_threshold_ms))
}
