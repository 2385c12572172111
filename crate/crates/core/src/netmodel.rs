//! Stochastic latency sources for network transfers and ground-truth model
//! execution times.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rejection attempts before a truncated-normal draw is clamped to zero.
const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum NetModelError {
    #[error("{name} must be a finite nonnegative number, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("empirical distribution needs at least one sample")]
    EmptyTrace,
    #[error("trace {path}: line {line}: {reason}")]
    TraceParse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("trace {path}: {reason}")]
    TraceIo { path: String, reason: String },
}

/// Ground-truth latency model, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyDistribution {
    Degenerate { value_ms: f64 },
    /// Normal(mean, std) conditioned on being nonnegative.
    TruncatedNormal { mean_ms: f64, std_ms: f64 },
    /// Uniform choice, with replacement, among recorded samples.
    Empirical { samples_ms: Vec<f64> },
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), NetModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(NetModelError::Negative { name, value })
    }
}

impl LatencyDistribution {
    pub fn degenerate(value_ms: f64) -> Result<Self, NetModelError> {
        check_nonneg("value_ms", value_ms)?;
        Ok(Self::Degenerate { value_ms })
    }

    /// A zero standard deviation collapses to [`LatencyDistribution::Degenerate`].
    pub fn truncated_normal(mean_ms: f64, std_ms: f64) -> Result<Self, NetModelError> {
        check_nonneg("mean_ms", mean_ms)?;
        check_nonneg("std_ms", std_ms)?;
        if std_ms == 0.0 {
            return Ok(Self::Degenerate { value_ms: mean_ms });
        }
        Ok(Self::TruncatedNormal { mean_ms, std_ms })
    }

    pub fn empirical(samples_ms: Vec<f64>) -> Result<Self, NetModelError> {
        if samples_ms.is_empty() {
            return Err(NetModelError::EmptyTrace);
        }
        for &s in &samples_ms {
            check_nonneg("sample", s)?;
        }
        Ok(Self::Empirical { samples_ms })
    }

    /// Builds a distribution with standard deviation `cv * mean`.
    pub fn from_mean_cv(mean_ms: f64, cv: f64) -> Result<Self, NetModelError> {
        check_nonneg("mean_ms", mean_ms)?;
        check_nonneg("cv", cv)?;
        if cv == 0.0 {
            Ok(Self::Degenerate { value_ms: mean_ms })
        } else {
            Self::truncated_normal(mean_ms, cv * mean_ms)
        }
    }

    /// Parses a trace: one nonnegative decimal millisecond value per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_trace(text: &str, origin: &str) -> Result<Self, NetModelError> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| NetModelError::TraceParse {
                path: origin.to_string(),
                line: i + 1,
                reason: format!("not a number: {line:?}"),
            })?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(NetModelError::TraceParse {
                    path: origin.to_string(),
                    line: i + 1,
                    reason: format!("latency must be nonnegative, got {value}"),
                });
            }
            samples.push(value);
        }
        Self::empirical(samples)
    }

    pub fn from_trace_file(path: impl AsRef<Path>) -> Result<Self, NetModelError> {
        let path = path.as_ref();
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| NetModelError::TraceIo {
            path: origin.clone(),
            reason: e.to_string(),
        })?;
        Self::parse_trace(&text, &origin)
    }

    /// Nominal mean parameter (not the mean of the truncated law).
    pub fn mean_ms(&self) -> f64 {
        match self {
            Self::Degenerate { value_ms } => *value_ms,
            Self::TruncatedNormal { mean_ms, .. } => *mean_ms,
            Self::Empirical { samples_ms } => {
                samples_ms.iter().sum::<f64>() / samples_ms.len() as f64
            }
        }
    }

    /// Coefficient of variation of the parametric forms; `None` for traces.
    pub fn cv(&self) -> Option<f64> {
        match self {
            Self::Degenerate { .. } => Some(0.0),
            Self::TruncatedNormal { mean_ms, std_ms } => {
                if *mean_ms > 0.0 {
                    Some(std_ms / mean_ms)
                } else {
                    None
                }
            }
            Self::Empirical { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Degenerate { value_ms } => *value_ms,
            Self::TruncatedNormal { mean_ms, std_ms } => {
                // Parameters are validated at construction, so this cannot fail.
                let normal = Normal::new(*mean_ms, *std_ms).expect("valid normal parameters");
                for _ in 0..MAX_REJECTIONS {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
                0.0
            }
            Self::Empirical { samples_ms } => samples_ms[rng.random_range(0..samples_ms.len())],
        }
    }
}

impl fmt::Display for LatencyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Degenerate { value_ms } => write!(f, "degenerate({value_ms})"),
            Self::TruncatedNormal { mean_ms, std_ms } => {
                write!(f, "truncated_normal({mean_ms}, {std_ms})")
            }
            Self::Empirical { samples_ms } => write!(f, "empirical(n={})", samples_ms.len()),
        }
    }
}

/// Ground truth for the two transfer legs of a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub uplink: LatencyDistribution,
    pub downlink: LatencyDistribution,
}

impl NetworkProfile {
    /// Downlink drawn independently from the same law as the uplink.
    pub fn symmetric(dist: LatencyDistribution) -> Self {
        Self {
            uplink: dist.clone(),
            downlink: dist,
        }
    }

    pub fn cv(&self) -> Option<f64> {
        self.uplink.cv()
    }
}
