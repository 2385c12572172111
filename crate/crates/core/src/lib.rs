//! SLA-aware model selection for cloud-hosted inference.
//!
//! Given the time a request has already spent on the network and its
//! end-to-end SLA, pick the model from a pool that maximises expected
//! accuracy while keeping the response inside the SLA.
//!
//! - [`registry`]: model pool and EWMA latency profiles
//! - [`budget`]: request timing to hard/soft time limits
//! - [`policy`]: the three-stage selector and its baselines
//! - [`netmodel`]: latency distributions for networks and executors
//! - [`simulator`]: seeded request-loop experiments and sweeps
//! - [`config`]: experiment and model-pool files

pub mod budget;
pub mod config;
pub mod netmodel;
pub mod policy;
pub mod registry;
pub mod simulator;

pub use budget::{BudgetConfig, RequestTiming, TimeBudget};
pub use config::{ExperimentConfig, ModelConfig};
pub use netmodel::{LatencyDistribution, NetworkProfile};
pub use policy::{PolicyKind, SelectionDecision, SelectionPath};
pub use registry::{ModelProfile, ModelSpec, ProfileSnapshot, Registry};
pub use simulator::{Report, RequestOutcome, SimulationConfig};
