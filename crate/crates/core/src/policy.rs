//! Model-selection policies.
//!
//! The main policy runs in three stages over a [`ProfileSnapshot`]:
//!
//! 1. pick a *base* model: the most accurate model with `μ+σ < T_U` and
//!    `μ−σ < T_L`, falling back to the fastest model when none qualifies;
//! 2. build an exploration set of models whose mean latency lies in a window
//!    centred on the soft limit `T_L`, half-width `|T_L − μ(base)| + σ(base)`,
//!    and whose `μ+σ` stays below the hard limit `T_U`;
//! 3. weight each member by `A·(T_U − (μ+σ)) / |T_L − μ|`, normalise, and draw.
//!
//! The greedy baselines and the ablation selectors (uniform over the whole
//! pool, uniform over the exploration set, most accurate in the set) share
//! the same tie-breaking: higher accuracy, then lower mean latency, then id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::TimeBudget;
use crate::registry::{ModelEntry, ProfileSnapshot};

/// Floor for the utility denominator, in ms.
pub const UTILITY_EPSILON_MS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("no models registered")]
    EmptySnapshot,
    #[error("no model has a latency profile yet; warm up first")]
    NoProfiledModels,
    #[error("empty exploration set")]
    EmptySet,
    #[error("model {0:?} not in snapshot")]
    UnknownModel(String),
    #[error("utility requires mean+std ({load}) below the hard limit ({upper})")]
    UtilityPrecondition { load: f64, upper: f64 },
    #[error("unknown policy {0:?}; expected one of static_greedy, dynamic_greedy, modipick, pure_random, related_random, related_accurate")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    StaticGreedy,
    DynamicGreedy,
    Modipick,
    PureRandom,
    RelatedRandom,
    RelatedAccurate,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::StaticGreedy,
        PolicyKind::DynamicGreedy,
        PolicyKind::Modipick,
        PolicyKind::PureRandom,
        PolicyKind::RelatedRandom,
        PolicyKind::RelatedAccurate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::StaticGreedy => "static_greedy",
            PolicyKind::DynamicGreedy => "dynamic_greedy",
            PolicyKind::Modipick => "modipick",
            PolicyKind::PureRandom => "pure_random",
            PolicyKind::RelatedRandom => "related_random",
            PolicyKind::RelatedAccurate => "related_accurate",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPath {
    Normal,
    FallbackFastest,
}

impl SelectionPath {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionPath::Normal => "normal",
            SelectionPath::FallbackFastest => "fallback_fastest",
        }
    }
}

impl fmt::Display for SelectionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed interval of mean latencies worth exploring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationWindow {
    pub center_ms: f64,
    pub half_width_ms: f64,
}

impl ExplorationWindow {
    pub fn around(t_lower_ms: f64, base_mean_ms: f64, base_std_ms: f64) -> Self {
        Self {
            center_ms: t_lower_ms,
            half_width_ms: (t_lower_ms - base_mean_ms).abs() + base_std_ms,
        }
    }

    pub fn lower_ms(&self) -> f64 {
        self.center_ms - self.half_width_ms
    }

    pub fn upper_ms(&self) -> f64 {
        self.center_ms + self.half_width_ms
    }

    pub fn contains(&self, mean_ms: f64) -> bool {
        mean_ms >= self.lower_ms() && mean_ms <= self.upper_ms()
    }
}

/// One exploration candidate with the profile values it was scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationMember {
    pub model_id: String,
    pub accuracy: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub utility: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSet {
    pub base: String,
    pub window: ExplorationWindow,
    pub t_upper_ms: f64,
    pub t_lower_ms: f64,
    /// Snapshot (registration) order.
    pub members: Vec<ExplorationMember>,
}

impl ExplorationSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.iter().any(|m| m.model_id == id)
    }

    pub fn probability_of(&self, id: &str) -> Option<f64> {
        self.members
            .iter()
            .find(|m| m.model_id == id)
            .map(|m| m.probability)
    }

    /// Sets `probability = utility / Σ utility`. A set whose utilities sum to
    /// zero (every member has zero accuracy) is weighted uniformly.
    pub fn normalize(&mut self) {
        let total: f64 = self.members.iter().map(|m| m.utility).sum();
        let n = self.members.len() as f64;
        for m in &mut self.members {
            m.probability = if total > 0.0 { m.utility / total } else { 1.0 / n };
        }
    }

    /// Inverse-CDF lookup of a uniform draw in `[0, 1)` over member order.
    pub fn member_at(&self, u: f64) -> &ExplorationMember {
        let mut cumulative = 0.0;
        for m in &self.members {
            cumulative += m.probability;
            if u < cumulative {
                return m;
            }
        }
        // Rounding can leave the cumulative sum a hair under 1.
        self.members
            .iter()
            .rev()
            .find(|m| m.probability > 0.0)
            .unwrap_or(&self.members[self.members.len() - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub chosen: String,
    pub policy: PolicyKind,
    pub path: SelectionPath,
    pub exploration: Option<ExplorationSet>,
    /// Uniform draw consumed by randomized policies.
    pub draw: Option<f64>,
}

impl SelectionDecision {
    fn deterministic(chosen: &ModelEntry, policy: PolicyKind, path: SelectionPath) -> Self {
        Self {
            chosen: chosen.spec.id.clone(),
            policy,
            path,
            exploration: None,
            draw: None,
        }
    }

    pub fn base(&self) -> Option<&str> {
        self.exploration.as_ref().map(|s| s.base.as_str())
    }
}

/// Higher accuracy first, then lower mean latency, then lexicographic id.
fn preference(a: &ModelEntry, b: &ModelEntry) -> Ordering {
    b.spec
        .accuracy
        .total_cmp(&a.spec.accuracy)
        .then(a.profile.mean_ms.total_cmp(&b.profile.mean_ms))
        .then_with(|| a.spec.id.cmp(&b.spec.id))
}

fn most_accurate<'a>(candidates: impl Iterator<Item = &'a ModelEntry>) -> Option<&'a ModelEntry> {
    candidates.min_by(|a, b| preference(a, b))
}

fn profiled(snapshot: &ProfileSnapshot) -> Result<impl Iterator<Item = &ModelEntry>, PolicyError> {
    if snapshot.is_empty() {
        return Err(PolicyError::EmptySnapshot);
    }
    if !snapshot.entries().iter().any(|e| e.profile.is_estimated()) {
        return Err(PolicyError::NoProfiledModels);
    }
    Ok(snapshot.entries().iter().filter(|e| e.profile.is_estimated()))
}

/// The profiled model with the lowest believed mean latency.
pub fn fastest(snapshot: &ProfileSnapshot) -> Result<&ModelEntry, PolicyError> {
    profiled(snapshot)?
        .min_by(|a, b| {
            a.profile
                .mean_ms
                .total_cmp(&b.profile.mean_ms)
                .then(b.spec.accuracy.total_cmp(&a.spec.accuracy))
                .then_with(|| a.spec.id.cmp(&b.spec.id))
        })
        .ok_or(PolicyError::NoProfiledModels)
}

fn greedy_under(
    snapshot: &ProfileSnapshot,
    limit_ms: f64,
    policy: PolicyKind,
) -> Result<SelectionDecision, PolicyError> {
    let fits = most_accurate(profiled(snapshot)?.filter(|e| e.profile.mean_ms <= limit_ms));
    match fits {
        Some(e) if limit_ms > 0.0 => Ok(SelectionDecision::deterministic(e, policy, SelectionPath::Normal)),
        _ => Ok(SelectionDecision::deterministic(
            fastest(snapshot)?,
            policy,
            SelectionPath::FallbackFastest,
        )),
    }
}

/// Most accurate model whose mean latency fits the whole SLA, ignoring the network.
pub fn select_static_greedy(snapshot: &ProfileSnapshot, sla_ms: f64) -> Result<SelectionDecision, PolicyError> {
    greedy_under(snapshot, sla_ms, PolicyKind::StaticGreedy)
}

/// Most accurate model whose mean latency fits the per-request budget.
pub fn select_dynamic_greedy(
    snapshot: &ProfileSnapshot,
    t_budget_ms: f64,
) -> Result<SelectionDecision, PolicyError> {
    greedy_under(snapshot, t_budget_ms, PolicyKind::DynamicGreedy)
}

/// Stage one. Returns the snapshot index of the base model and the path taken.
pub fn select_base(
    snapshot: &ProfileSnapshot,
    t_upper_ms: f64,
    t_lower_ms: f64,
) -> Result<(usize, SelectionPath), PolicyError> {
    let feasible = most_accurate(profiled(snapshot)?.filter(|e| {
        let p = &e.profile;
        p.mean_ms + p.std_ms < t_upper_ms && p.mean_ms - p.std_ms < t_lower_ms
    }));
    let (entry, path) = match feasible {
        Some(e) => (e, SelectionPath::Normal),
        None => (fastest(snapshot)?, SelectionPath::FallbackFastest),
    };
    let idx = snapshot
        .position(&entry.spec.id)
        .ok_or_else(|| PolicyError::UnknownModel(entry.spec.id.clone()))?;
    Ok((idx, path))
}

/// Eq-style utility of one candidate: `A·(T_U − (μ+σ)) / max(|T_L − μ|, ε)`.
pub fn utility(
    mean_ms: f64,
    std_ms: f64,
    accuracy: f64,
    t_upper_ms: f64,
    t_lower_ms: f64,
) -> Result<f64, PolicyError> {
    let load = mean_ms + std_ms;
    if !(load < t_upper_ms) {
        return Err(PolicyError::UtilityPrecondition {
            load,
            upper: t_upper_ms,
        });
    }
    let distance = (t_lower_ms - mean_ms).abs().max(UTILITY_EPSILON_MS);
    Ok(accuracy * (t_upper_ms - load) / distance)
}

/// Stage two, with stage-three utilities and probabilities filled in.
///
/// The base model is always a member. Other models join when their mean lies
/// in the (closed) window and `μ+σ < T_U`; a zero-utility non-base model is
/// left out.
pub fn build_exploration_set(
    snapshot: &ProfileSnapshot,
    base_idx: usize,
    t_upper_ms: f64,
    t_lower_ms: f64,
) -> Result<ExplorationSet, PolicyError> {
    let base = snapshot
        .entries()
        .get(base_idx)
        .ok_or(PolicyError::EmptySet)?;
    let window = ExplorationWindow::around(t_lower_ms, base.profile.mean_ms, base.profile.std_ms);
    let mut members = Vec::new();
    for (i, e) in snapshot.entries().iter().enumerate() {
        let p = &e.profile;
        let is_base = i == base_idx;
        if !is_base
            && !(p.is_estimated() && window.contains(p.mean_ms) && p.mean_ms + p.std_ms < t_upper_ms)
        {
            continue;
        }
        let u = utility(p.mean_ms, p.std_ms, e.spec.accuracy, t_upper_ms, t_lower_ms)?;
        if !is_base && u <= 0.0 {
            continue;
        }
        members.push(ExplorationMember {
            model_id: e.spec.id.clone(),
            accuracy: e.spec.accuracy,
            mean_ms: p.mean_ms,
            std_ms: p.std_ms,
            utility: u,
            probability: 0.0,
        });
    }
    let mut set = ExplorationSet {
        base: base.spec.id.clone(),
        window,
        t_upper_ms,
        t_lower_ms,
        members,
    };
    set.normalize();
    Ok(set)
}

/// Draws one member proportionally to its probability. Returns the member id
/// and the uniform draw used.
pub fn normalize_and_sample<R: Rng + ?Sized>(
    set: &mut ExplorationSet,
    rng: &mut R,
) -> Result<(String, f64), PolicyError> {
    if set.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    set.normalize();
    let u: f64 = rng.random();
    Ok((set.member_at(u).model_id.clone(), u))
}

fn stage_two(
    snapshot: &ProfileSnapshot,
    budget: &TimeBudget,
) -> Result<Result<ExplorationSet, SelectionPath>, PolicyError> {
    let (base_idx, path) = select_base(snapshot, budget.t_upper_ms, budget.t_lower_ms)?;
    if path == SelectionPath::FallbackFastest {
        return Ok(Err(path));
    }
    build_exploration_set(snapshot, base_idx, budget.t_upper_ms, budget.t_lower_ms).map(Ok)
}

fn fallback(snapshot: &ProfileSnapshot, policy: PolicyKind) -> Result<SelectionDecision, PolicyError> {
    Ok(SelectionDecision::deterministic(
        fastest(snapshot)?,
        policy,
        SelectionPath::FallbackFastest,
    ))
}

/// The full three-stage selector.
pub fn select_modipick<R: Rng + ?Sized>(
    snapshot: &ProfileSnapshot,
    budget: &TimeBudget,
    rng: &mut R,
) -> Result<SelectionDecision, PolicyError> {
    let mut set = match stage_two(snapshot, budget)? {
        Ok(set) => set,
        Err(_) => return fallback(snapshot, PolicyKind::Modipick),
    };
    let (chosen, u) = normalize_and_sample(&mut set, rng)?;
    Ok(SelectionDecision {
        chosen,
        policy: PolicyKind::Modipick,
        path: SelectionPath::Normal,
        exploration: Some(set),
        draw: Some(u),
    })
}

/// Stops after stage one and serves the base model.
pub fn select_modipick_anytime(
    snapshot: &ProfileSnapshot,
    budget: &TimeBudget,
) -> Result<SelectionDecision, PolicyError> {
    let (idx, path) = select_base(snapshot, budget.t_upper_ms, budget.t_lower_ms)?;
    Ok(SelectionDecision::deterministic(
        &snapshot.entries()[idx],
        PolicyKind::Modipick,
        path,
    ))
}

/// Uniform over every registered model.
pub fn select_pure_random<R: Rng + ?Sized>(
    snapshot: &ProfileSnapshot,
    rng: &mut R,
) -> Result<SelectionDecision, PolicyError> {
    if snapshot.is_empty() {
        return Err(PolicyError::EmptySnapshot);
    }
    let u: f64 = rng.random();
    let idx = ((u * snapshot.len() as f64) as usize).min(snapshot.len() - 1);
    Ok(SelectionDecision {
        chosen: snapshot.entries()[idx].spec.id.clone(),
        policy: PolicyKind::PureRandom,
        path: SelectionPath::Normal,
        exploration: None,
        draw: Some(u),
    })
}

/// Uniform over the members of an exploration set.
pub fn select_related_random<R: Rng + ?Sized>(
    set: &ExplorationSet,
    rng: &mut R,
) -> Result<SelectionDecision, PolicyError> {
    if set.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    let u: f64 = rng.random();
    let idx = ((u * set.len() as f64) as usize).min(set.len() - 1);
    Ok(SelectionDecision {
        chosen: set.members[idx].model_id.clone(),
        policy: PolicyKind::RelatedRandom,
        path: SelectionPath::Normal,
        exploration: Some(set.clone()),
        draw: Some(u),
    })
}

/// Most accurate member of an exploration set.
pub fn select_related_accurate(set: &ExplorationSet) -> Result<SelectionDecision, PolicyError> {
    let best = set
        .members
        .iter()
        .min_by(|a, b| {
            b.accuracy
                .total_cmp(&a.accuracy)
                .then(a.mean_ms.total_cmp(&b.mean_ms))
                .then_with(|| a.model_id.cmp(&b.model_id))
        })
        .ok_or(PolicyError::EmptySet)?;
    Ok(SelectionDecision {
        chosen: best.model_id.clone(),
        policy: PolicyKind::RelatedAccurate,
        path: SelectionPath::Normal,
        exploration: Some(set.clone()),
        draw: None,
    })
}

/// Runs the named policy for one request.
pub fn select<R: Rng + ?Sized>(
    kind: PolicyKind,
    snapshot: &ProfileSnapshot,
    sla_ms: f64,
    budget: &TimeBudget,
    rng: &mut R,
) -> Result<SelectionDecision, PolicyError> {
    match kind {
        PolicyKind::StaticGreedy => select_static_greedy(snapshot, sla_ms),
        PolicyKind::DynamicGreedy => select_dynamic_greedy(snapshot, budget.t_budget_ms),
        PolicyKind::Modipick => select_modipick(snapshot, budget, rng),
        PolicyKind::PureRandom => select_pure_random(snapshot, rng),
        PolicyKind::RelatedRandom => match stage_two(snapshot, budget)? {
            Ok(set) => select_related_random(&set, rng),
            Err(_) => fallback(snapshot, kind),
        },
        PolicyKind::RelatedAccurate => match stage_two(snapshot, budget)? {
            Ok(set) => select_related_accurate(&set),
            Err(_) => fallback(snapshot, kind),
        },
    }
}
