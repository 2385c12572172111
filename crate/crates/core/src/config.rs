//! Experiment and model-pool configuration files.
//!
//! Flat `key = value` text. Keys before the first section header belong to
//! the experiment; `[network]` holds the network form; each `[model]` opens a
//! new model block. `[experiment]` switches back to top-level keys. `#` starts
//! a comment line. List values are comma separated.
//!
//! ```text
//! policies = modipick, static_greedy
//! sla_grid = 100, 150, 200
//! threshold_ms = 20
//!
//! [network]
//! mean_ms = 57.87
//! std_ms = 30.78
//!
//! [model]
//! id = InceptionV3
//! accuracy = 0.779
//! true_mean_ms = 31.11
//! true_std_ms = 0.19
//! ```

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetConfig, DEFAULT_ON_DEVICE_MS, DEFAULT_THRESHOLD_MS};
use crate::netmodel::{LatencyDistribution, NetModelError, NetworkProfile};
use crate::policy::PolicyKind;
use crate::registry::{ModelSpec, Registry, RegistryError, DEFAULT_EWMA_ALPHA, DEFAULT_STALENESS_WINDOW_MS};

pub const DEFAULT_WARMUP: usize = 1000;
pub const DEFAULT_REQUESTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("{path}: file not found")]
    NotFound { path: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    fn syntax(origin: &str, line: usize, message: impl Into<String>) -> Self {
        Self::Syntax {
            origin: origin.to_string(),
            line,
            message: message.into(),
        }
    }

    fn invalid(origin: &str, message: impl Into<String>) -> Self {
        Self::Invalid {
            origin: origin.to_string(),
            message: message.into(),
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ConfigError::NotFound {
                path: path.display().to_string(),
            }
        } else {
            ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            }
        }
    })
}

/// One `[model]` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub id: String,
    pub accuracy: f64,
    pub true_mean_ms: f64,
    pub true_std_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_mean_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_std_ms: Option<f64>,
}

impl ModelConfig {
    pub fn new(id: &str, accuracy: f64, true_mean_ms: f64, true_std_ms: f64) -> Self {
        Self {
            id: id.to_string(),
            accuracy,
            true_mean_ms,
            true_std_ms,
            seed_mean_ms: None,
            seed_std_ms: None,
        }
    }

    pub fn with_seed(mut self, mean_ms: f64, std_ms: f64) -> Self {
        self.seed_mean_ms = Some(mean_ms);
        self.seed_std_ms = Some(std_ms);
        self
    }

    pub fn seed(&self) -> Option<(f64, f64)> {
        match (self.seed_mean_ms, self.seed_std_ms) {
            (Some(m), s) => Some((m, s.unwrap_or(0.0))),
            (None, _) => None,
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec, NetModelError> {
        Ok(ModelSpec::new(
            self.id.clone(),
            self.accuracy,
            LatencyDistribution::truncated_normal(self.true_mean_ms, self.true_std_ms)?,
        ))
    }
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("model {id:?}: {source}")]
    Latency { id: String, source: NetModelError },
}

/// Registers every model of a pool, in order.
pub fn build_registry(models: &[ModelConfig], alpha: f64) -> Result<Registry, PoolError> {
    let mut registry = Registry::with_alpha(alpha)?;
    for m in models {
        let spec = m.to_spec().map_err(|source| PoolError::Latency {
            id: m.id.clone(),
            source,
        })?;
        registry.register_model(spec, m.seed())?;
    }
    Ok(registry)
}

/// The measured model pool: (id, top-1 accuracy %, mean ms, std ms).
pub const MEASURED_POOL: [(&str, f64, f64, f64); 11] = [
    ("SqueezeNet", 49.0, 4.91, 0.06),
    ("MobileNetV1 0.25", 49.7, 3.21, 0.08),
    ("MobileNetV1 0.5", 63.2, 4.21, 0.06),
    ("DenseNet", 64.2, 25.49, 0.14),
    ("MobileNetV1 0.75", 68.3, 4.67, 0.07),
    ("MobileNetV1 1.0", 71.0, 5.43, 0.11),
    ("NasNet Mobile", 73.9, 21.18, 0.17),
    ("InceptionResNetV2", 77.5, 50.85, 0.33),
    ("InceptionV3", 77.9, 31.11, 0.19),
    ("InceptionV4", 80.1, 59.21, 0.22),
    ("NasNet Large", 82.6, 112.61, 0.36),
];

/// Same latency as NasNet Large at a much lower accuracy.
pub const FICTIONAL_MODEL: (&str, f64, f64, f64) = ("NasNet Fictional", 50.0, 112.61, 0.36);

/// The measured pool, optionally with the fictional low-accuracy twin appended.
pub fn measured_pool(include_fictional: bool) -> Vec<ModelConfig> {
    let mut rows: Vec<_> = MEASURED_POOL.to_vec();
    if include_fictional {
        rows.push(FICTIONAL_MODEL);
    }
    rows.into_iter()
        .map(|(id, acc, mean, std)| ModelConfig::new(id, acc / 100.0, mean, std))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum NetworkConfig {
    MeanStd { mean_ms: f64, std_ms: f64 },
    MeanCv { mean_ms: f64, cv: f64 },
    Trace { trace_file: PathBuf },
}

impl NetworkConfig {
    pub fn mean_ms(&self) -> Option<f64> {
        match self {
            Self::MeanStd { mean_ms, .. } | Self::MeanCv { mean_ms, .. } => Some(*mean_ms),
            Self::Trace { .. } => None,
        }
    }

    /// Builds the network law; trace paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<NetworkProfile, NetModelError> {
        let dist = match self {
            Self::MeanStd { mean_ms, std_ms } => LatencyDistribution::truncated_normal(*mean_ms, *std_ms)?,
            Self::MeanCv { mean_ms, cv } => LatencyDistribution::from_mean_cv(*mean_ms, *cv)?,
            Self::Trace { trace_file } => LatencyDistribution::from_trace_file(base_dir.join(trace_file))?,
        };
        Ok(NetworkProfile::symmetric(dist))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<ModelConfig>,
    pub models_file: Option<PathBuf>,
    pub network: NetworkConfig,
    pub policies: Vec<PolicyKind>,
    pub sla_ms: Option<f64>,
    pub sla_grid: Vec<f64>,
    pub cv_grid: Vec<f64>,
    pub threshold_ms: f64,
    pub t_on_device_ms: f64,
    pub requests: usize,
    pub warmup: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub alpha: f64,
    pub staleness_window_ms: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            models_file: None,
            network: NetworkConfig::MeanCv {
                mean_ms: 0.0,
                cv: 0.0,
            },
            policies: vec![PolicyKind::Modipick],
            sla_ms: None,
            sla_grid: Vec::new(),
            cv_grid: Vec::new(),
            threshold_ms: DEFAULT_THRESHOLD_MS,
            t_on_device_ms: DEFAULT_ON_DEVICE_MS,
            requests: DEFAULT_REQUESTS,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            output_dir: PathBuf::from("out"),
            alpha: DEFAULT_EWMA_ALPHA,
            staleness_window_ms: DEFAULT_STALENESS_WINDOW_MS,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Experiment,
    Network,
    Model,
}

/// Raw `key = value` pairs of one block, with their line numbers.
#[derive(Default)]
struct Block {
    start: usize,
    pairs: Vec<(usize, String, String)>,
}

impl Block {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let i = self.pairs.iter().position(|(_, k, _)| k == key)?;
        let (line, _, v) = self.pairs.remove(i);
        Some((line, v))
    }
}

struct Parsed {
    top: Block,
    network: Option<Block>,
    models: Vec<Block>,
}

fn tokenize(text: &str, origin: &str) -> Result<Parsed, ConfigError> {
    let mut top = Block { start: 1, ..Block::default() };
    let mut network: Option<Block> = None;
    let mut models: Vec<Block> = Vec::new();
    let mut section = Section::Experiment;
    let mut seen: HashSet<(usize, String)> = HashSet::new();
    // Block identity for duplicate detection: 0 = top, 1 = network, 2.. = models.
    let mut block_no = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::syntax(origin, line_no, "unterminated section header"))?
                .trim();
            match name {
                "experiment" => {
                    section = Section::Experiment;
                    block_no = 0;
                }
                "network" => {
                    if network.is_some() {
                        return Err(ConfigError::syntax(origin, line_no, "duplicate [network] section"));
                    }
                    network = Some(Block {
                        start: line_no,
                        ..Block::default()
                    });
                    section = Section::Network;
                    block_no = 1;
                }
                "model" => {
                    models.push(Block {
                        start: line_no,
                        ..Block::default()
                    });
                    section = Section::Model;
                    block_no = 1 + models.len();
                }
                other => {
                    return Err(ConfigError::syntax(
                        origin,
                        line_no,
                        format!("unknown section [{other}]; expected [experiment], [network] or [model]"),
                    ))
                }
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::syntax(origin, line_no, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::syntax(origin, line_no, "empty key"));
        }
        if !seen.insert((block_no, key.clone())) {
            return Err(ConfigError::syntax(origin, line_no, format!("duplicate key {key:?}")));
        }
        let block = match section {
            Section::Experiment => &mut top,
            Section::Network => network.as_mut().expect("network block open"),
            Section::Model => models.last_mut().expect("model block open"),
        };
        block.pairs.push((line_no, key, value));
    }
    Ok(Parsed { top, network, models })
}

fn parse_f64(origin: &str, line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .parse()
        .map_err(|_| ConfigError::syntax(origin, line, format!("{key}: expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(ConfigError::syntax(origin, line, format!("{key}: must be finite")));
    }
    Ok(x)
}

fn parse_nonneg(origin: &str, line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = parse_f64(origin, line, key, v)?;
    if x < 0.0 {
        return Err(ConfigError::syntax(origin, line, format!("{key}: must be nonnegative, got {x}")));
    }
    Ok(x)
}

fn parse_positive(origin: &str, line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = parse_f64(origin, line, key, v)?;
    if x <= 0.0 {
        return Err(ConfigError::syntax(origin, line, format!("{key}: must be positive, got {x}")));
    }
    Ok(x)
}

fn parse_usize(origin: &str, line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::syntax(origin, line, format!("{key}: expected a nonnegative integer, got {v:?}")))
}

fn parse_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_grid(origin: &str, line: usize, key: &str, v: &str, allow_zero: bool) -> Result<Vec<f64>, ConfigError> {
    let mut out: Vec<f64> = Vec::new();
    for item in parse_list(v) {
        let x = parse_f64(origin, line, key, item)?;
        if x < 0.0 || (!allow_zero && x == 0.0) {
            return Err(ConfigError::syntax(
                origin,
                line,
                format!("{key}: values must be {}, got {x}", if allow_zero { "nonnegative" } else { "positive" }),
            ));
        }
        if let Some(&prev) = out.last() {
            if x <= prev {
                return Err(ConfigError::syntax(
                    origin,
                    line,
                    format!("{key}: values must be strictly increasing ({prev} then {x})"),
                ));
            }
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(ConfigError::syntax(origin, line, format!("{key}: empty list")));
    }
    Ok(out)
}

fn reject_leftovers(origin: &str, block: &Block, what: &str) -> Result<(), ConfigError> {
    match block.pairs.first() {
        Some((line, key, _)) => Err(ConfigError::syntax(origin, *line, format!("unknown {what} key {key:?}"))),
        None => Ok(()),
    }
}

fn parse_model(origin: &str, mut b: Block) -> Result<ModelConfig, ConfigError> {
    let start = b.start;
    let mut required = |key: &str| {
        b.take(key)
            .ok_or_else(|| ConfigError::syntax(origin, start, format!("[model] block is missing {key:?}")))
    };
    let (_, id) = required("id")?;
    let (l, acc) = required("accuracy")?;
    let accuracy = parse_f64(origin, l, "accuracy", &acc)?;
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(ConfigError::syntax(origin, l, format!("accuracy must lie in [0, 1], got {accuracy}")));
    }
    let (l, m) = required("true_mean_ms")?;
    let true_mean_ms = parse_nonneg(origin, l, "true_mean_ms", &m)?;
    let (l, s) = required("true_std_ms")?;
    let true_std_ms = parse_nonneg(origin, l, "true_std_ms", &s)?;
    let seed_mean_ms = b
        .take("seed_mean_ms")
        .map(|(l, v)| parse_nonneg(origin, l, "seed_mean_ms", &v))
        .transpose()?;
    let seed_std_ms = match b.take("seed_std_ms") {
        Some((l, v)) => {
            if seed_mean_ms.is_none() {
                return Err(ConfigError::syntax(origin, l, "seed_std_ms given without seed_mean_ms"));
            }
            Some(parse_nonneg(origin, l, "seed_std_ms", &v)?)
        }
        None => None,
    };
    reject_leftovers(origin, &b, "[model]")?;
    Ok(ModelConfig {
        id,
        accuracy,
        true_mean_ms,
        true_std_ms,
        seed_mean_ms,
        seed_std_ms,
    })
}

fn parse_models(origin: &str, blocks: Vec<Block>) -> Result<Vec<ModelConfig>, ConfigError> {
    let mut ids = HashSet::new();
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let start = b.start;
        let m = parse_model(origin, b)?;
        if !ids.insert(m.id.clone()) {
            return Err(ConfigError::syntax(origin, start, format!("duplicate model id {:?}", m.id)));
        }
        out.push(m);
    }
    Ok(out)
}

fn parse_network(origin: &str, mut b: Block) -> Result<NetworkConfig, ConfigError> {
    let mean = b.take("mean_ms");
    let std = b.take("std_ms");
    let cv = b.take("cv");
    let trace = b.take("trace_file");
    reject_leftovers(origin, &b, "[network]")?;
    match (mean, std, cv, trace) {
        (_, Some(_), Some((l, _)), _) => Err(ConfigError::syntax(
            origin,
            l,
            "[network] sets both std_ms and cv; give exactly one of {mean_ms, std_ms}, {mean_ms, cv} or {trace_file}",
        )),
        (Some((l, _)), _, _, Some(_)) | (_, Some((l, _)), _, Some(_)) | (_, _, Some((l, _)), Some(_)) => {
            Err(ConfigError::syntax(
                origin,
                l,
                "[network] mixes trace_file with parametric keys; give exactly one network form",
            ))
        }
        (Some((lm, m)), Some((ls, s)), None, None) => Ok(NetworkConfig::MeanStd {
            mean_ms: parse_nonneg(origin, lm, "mean_ms", &m)?,
            std_ms: parse_nonneg(origin, ls, "std_ms", &s)?,
        }),
        (Some((lm, m)), None, Some((lc, c)), None) => Ok(NetworkConfig::MeanCv {
            mean_ms: parse_nonneg(origin, lm, "mean_ms", &m)?,
            cv: parse_nonneg(origin, lc, "cv", &c)?,
        }),
        (None, None, None, Some((_, t))) => Ok(NetworkConfig::Trace {
            trace_file: PathBuf::from(t),
        }),
        _ => Err(ConfigError::syntax(
            origin,
            b.start,
            "[network] needs {mean_ms, std_ms}, {mean_ms, cv} or {trace_file}",
        )),
    }
}

impl ExperimentConfig {
    /// Parses configuration text. `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let Parsed {
            mut top,
            network,
            models,
        } = tokenize(text, origin)?;
        let mut cfg = ExperimentConfig {
            models: parse_models(origin, models)?,
            ..ExperimentConfig::default()
        };
        cfg.network = match network {
            Some(b) => parse_network(origin, b)?,
            None => return Err(ConfigError::invalid(origin, "missing [network] section")),
        };

        let policy = top.take("policy");
        let policies = top.take("policies");
        match (policy, policies) {
            (Some((l, _)), Some(_)) => {
                return Err(ConfigError::syntax(origin, l, "set either `policy` or `policies`, not both"))
            }
            (Some((l, v)), None) | (None, Some((l, v))) => {
                let mut kinds = Vec::new();
                for name in parse_list(&v) {
                    let k: PolicyKind = name
                        .parse()
                        .map_err(|e: crate::policy::PolicyError| ConfigError::syntax(origin, l, e.to_string()))?;
                    if kinds.contains(&k) {
                        return Err(ConfigError::syntax(origin, l, format!("policy {name} listed twice")));
                    }
                    kinds.push(k);
                }
                if kinds.is_empty() {
                    return Err(ConfigError::syntax(origin, l, "empty policy list"));
                }
                cfg.policies = kinds;
            }
            (None, None) => {}
        }
        if let Some((l, v)) = top.take("sla_ms") {
            cfg.sla_ms = Some(parse_positive(origin, l, "sla_ms", &v)?);
        }
        if let Some((l, v)) = top.take("sla_grid") {
            cfg.sla_grid = parse_grid(origin, l, "sla_grid", &v, false)?;
        }
        if let Some((l, v)) = top.take("cv_grid") {
            cfg.cv_grid = parse_grid(origin, l, "cv_grid", &v, true)?;
        }
        if let Some((l, v)) = top.take("threshold_ms") {
            cfg.threshold_ms = parse_nonneg(origin, l, "threshold_ms", &v)?;
        }
        if let Some((l, v)) = top.take("t_on_device_ms") {
            cfg.t_on_device_ms = parse_nonneg(origin, l, "t_on_device_ms", &v)?;
        }
        if let Some((l, v)) = top.take("requests") {
            cfg.requests = parse_usize(origin, l, "requests", &v)?;
            if cfg.requests == 0 {
                return Err(ConfigError::syntax(origin, l, "requests must be positive"));
            }
        }
        if let Some((l, v)) = top.take("warmup") {
            cfg.warmup = parse_usize(origin, l, "warmup", &v)?;
        }
        if let Some((l, v)) = top.take("seed") {
            cfg.seed = v
                .parse()
                .map_err(|_| ConfigError::syntax(origin, l, format!("seed: expected an unsigned integer, got {v:?}")))?;
        }
        if let Some((_, v)) = top.take("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some((_, v)) = top.take("models_file") {
            cfg.models_file = Some(PathBuf::from(v));
        }
        if let Some((l, v)) = top.take("alpha") {
            let a = parse_f64(origin, l, "alpha", &v)?;
            if !(a > 0.0 && a <= 1.0) {
                return Err(ConfigError::syntax(origin, l, format!("alpha must lie in (0, 1], got {a}")));
            }
            cfg.alpha = a;
        }
        if let Some((l, v)) = top.take("staleness_window_ms") {
            cfg.staleness_window_ms = if v == "inf" {
                f64::INFINITY
            } else {
                parse_positive(origin, l, "staleness_window_ms", &v)?
            };
        }
        reject_leftovers(origin, &top, "experiment")?;

        if cfg.threshold_ms > cfg.t_on_device_ms {
            return Err(ConfigError::invalid(
                origin,
                format!(
                    "threshold_ms {} exceeds t_on_device_ms {}; the threshold must lie in [0, t_on_device_ms]",
                    cfg.threshold_ms, cfg.t_on_device_ms
                ),
            ));
        }
        Ok(cfg)
    }

    /// Reads a config file and inlines its `models_file`, if any.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_file(path)?;
        let origin = path.display().to_string();
        let mut cfg = Self::parse(&text, &origin)?;
        if let Some(rel) = cfg.models_file.take() {
            let pool_path = base_dir(path).join(&rel);
            let mut pool = load_model_pool(&pool_path)?;
            let ids: HashSet<String> = pool.iter().map(|m| m.id.clone()).collect();
            if let Some(dup) = cfg.models.iter().find(|m| ids.contains(&m.id)) {
                return Err(ConfigError::invalid(
                    &origin,
                    format!("model {:?} defined both inline and in {}", dup.id, pool_path.display()),
                ));
            }
            pool.append(&mut cfg.models);
            cfg.models = pool;
        }
        if cfg.models.is_empty() {
            return Err(ConfigError::invalid(&origin, "no models configured"));
        }
        Ok(cfg)
    }

    pub fn budget(&self) -> BudgetConfig {
        BudgetConfig {
            t_threshold_ms: self.threshold_ms,
            t_on_device_ms: self.t_on_device_ms,
        }
    }

    /// Serializes to the text grammar; `parse` of the output yields `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let policies = self.policies.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(out, "policies = {policies}");
        if let Some(s) = self.sla_ms {
            let _ = writeln!(out, "sla_ms = {s}");
        }
        if !self.sla_grid.is_empty() {
            let _ = writeln!(out, "sla_grid = {}", list(&self.sla_grid));
        }
        if !self.cv_grid.is_empty() {
            let _ = writeln!(out, "cv_grid = {}", list(&self.cv_grid));
        }
        let _ = writeln!(out, "threshold_ms = {}", self.threshold_ms);
        let _ = writeln!(out, "t_on_device_ms = {}", self.t_on_device_ms);
        let _ = writeln!(out, "requests = {}", self.requests);
        let _ = writeln!(out, "warmup = {}", self.warmup);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        if let Some(p) = &self.models_file {
            let _ = writeln!(out, "models_file = {}", p.display());
        }
        let _ = writeln!(out, "alpha = {}", self.alpha);
        if self.staleness_window_ms.is_infinite() {
            let _ = writeln!(out, "staleness_window_ms = inf");
        } else {
            let _ = writeln!(out, "staleness_window_ms = {}", self.staleness_window_ms);
        }
        out.push_str("\n[network]\n");
        match &self.network {
            NetworkConfig::MeanStd { mean_ms, std_ms } => {
                let _ = writeln!(out, "mean_ms = {mean_ms}\nstd_ms = {std_ms}");
            }
            NetworkConfig::MeanCv { mean_ms, cv } => {
                let _ = writeln!(out, "mean_ms = {mean_ms}\ncv = {cv}");
            }
            NetworkConfig::Trace { trace_file } => {
                let _ = writeln!(out, "trace_file = {}", trace_file.display());
            }
        }
        out.push_str(&models_to_text(&self.models));
        out
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Serializes model blocks.
pub fn models_to_text(models: &[ModelConfig]) -> String {
    let mut out = String::new();
    for m in models {
        let _ = writeln!(
            out,
            "\n[model]\nid = {}\naccuracy = {}\ntrue_mean_ms = {}\ntrue_std_ms = {}",
            m.id, m.accuracy, m.true_mean_ms, m.true_std_ms
        );
        if let Some(s) = m.seed_mean_ms {
            let _ = writeln!(out, "seed_mean_ms = {s}");
        }
        if let Some(s) = m.seed_std_ms {
            let _ = writeln!(out, "seed_std_ms = {s}");
        }
    }
    out
}

/// Parses a pool file containing only `[model]` blocks.
pub fn parse_model_pool(text: &str, origin: &str) -> Result<Vec<ModelConfig>, ConfigError> {
    let parsed = tokenize(text, origin)?;
    if let Some((line, key, _)) = parsed.top.pairs.first() {
        return Err(ConfigError::syntax(
            origin,
            *line,
            format!("key {key:?} outside a [model] block"),
        ));
    }
    if let Some(b) = parsed.network {
        return Err(ConfigError::syntax(origin, b.start, "a model pool file cannot hold [network]"));
    }
    let models = parse_models(origin, parsed.models)?;
    if models.is_empty() {
        return Err(ConfigError::invalid(origin, "no [model] blocks"));
    }
    Ok(models)
}

pub fn load_model_pool(path: &Path) -> Result<Vec<ModelConfig>, ConfigError> {
    let text = read_file(path)?;
    parse_model_pool(&text, &path.display().to_string())
}

/// Directory that relative paths inside `config_path` resolve against.
pub fn config_dir(config_path: &Path) -> PathBuf {
    base_dir(config_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "\
# experiment
policy = modipick
sla_ms = 250
threshold_ms = 20
requests = 1000
seed = 7

[network]
mean_ms = 57.87
std_ms = 30.78

[model]
id = InceptionV3
accuracy = 0.779
true_mean_ms = 31.11
true_std_ms = 0.19
seed_mean_ms = 31
seed_std_ms = 0.2

[model]
id = NasNet Large
accuracy = 0.826
true_mean_ms = 112.61
true_std_ms = 0.36
";

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::parse(SAMPLE, "sample").unwrap();
        assert_eq!(cfg.policies, vec![PolicyKind::Modipick]);
        assert_eq!(cfg.sla_ms, Some(250.0));
        assert_eq!(cfg.requests, 1000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.models[0].seed(), Some((31.0, 0.2)));
        assert_eq!(cfg.models[1].id, "NasNet Large");
        assert_eq!(
            cfg.network,
            NetworkConfig::MeanStd {
                mean_ms: 57.87,
                std_ms: 30.78
            }
        );
    }

    #[test]
    fn rejects_conflicting_network_forms() {
        let text = SAMPLE.replace("std_ms = 30.78", "std_ms = 30.78\ncv = 0.5");
        let err = ExperimentConfig::parse(&text, "c.cfg").unwrap_err().to_string();
        assert!(err.contains("both std_ms and cv"), "{err}");
        assert!(err.starts_with("c.cfg:11:"), "{err}");
    }

    #[test]
    fn errors_are_line_anchored() {
        let text = SAMPLE.replace("requests = 1000", "requests = many");
        let err = ExperimentConfig::parse(&text, "x").unwrap_err().to_string();
        assert!(err.starts_with("x:5:"), "{err}");
        let err = ExperimentConfig::parse("bogus = 1\n[network]\ncv=0\nmean_ms=1\n", "y")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("y:1:") && err.contains("bogus"), "{err}");
        let err = ExperimentConfig::parse("sla_grid = 100, 50\n[network]\ncv=0\nmean_ms=1\n", "z")
            .unwrap_err()
            .to_string();
        assert!(err.contains("increasing"), "{err}");
    }

    #[test]
    fn rejects_threshold_above_on_device_time() {
        let text = SAMPLE.replace("threshold_ms = 20", "threshold_ms = 500\nt_on_device_ms = 150");
        let err = ExperimentConfig::parse(&text, "x").unwrap_err().to_string();
        assert!(err.contains("exceeds t_on_device_ms"), "{err}");
    }

    #[test]
    fn duplicate_models_rejected() {
        let text = format!("{SAMPLE}\n[model]\nid = InceptionV3\naccuracy = 0.1\ntrue_mean_ms = 1\ntrue_std_ms = 0\n");
        assert!(ExperimentConfig::parse(&text, "x").unwrap_err().to_string().contains("duplicate model id"));
    }

    #[test]
    fn missing_models_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("exp.cfg");
        std::fs::write(&cfg_path, "models_file = nope.cfg\n[network]\nmean_ms = 1\ncv = 0\n").unwrap();
        let err = ExperimentConfig::load(&cfg_path).unwrap_err();
        assert!(matches!(err, ConfigError::NotFound { .. }), "{err}");
        assert!(err.to_string().contains("file not found"));
    }

    #[test]
    fn models_file_is_inlined() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pool.cfg"), models_to_text(&measured_pool(false))).unwrap();
        let cfg_path = dir.path().join("exp.cfg");
        std::fs::write(&cfg_path, "models_file = pool.cfg\nsla_ms = 100\n[network]\nmean_ms = 1\ncv = 0\n").unwrap();
        let cfg = ExperimentConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.models.len(), 11);
        assert_eq!(cfg.models_file, None);
    }

    #[test]
    fn pool_file_round_trip() {
        let pool = measured_pool(true);
        let parsed = parse_model_pool(&models_to_text(&pool), "pool").unwrap();
        assert_eq!(parsed, pool);
        assert!(parse_model_pool("sla_ms = 1\n", "p").is_err());
    }

    fn arb_model() -> impl Strategy<Value = ModelConfig> {
        (
            "[A-Za-z][A-Za-z0-9 ._-]{0,12}[A-Za-z0-9]",
            0.0f64..=1.0,
            0.0f64..500.0,
            0.0f64..50.0,
            proptest::option::of((0.0f64..500.0, 0.0f64..50.0)),
        )
            .prop_map(|(id, acc, m, s, seed)| {
                let mut c = ModelConfig::new(&id, acc, m, s);
                if let Some((sm, ss)) = seed {
                    c = c.with_seed(sm, ss);
                }
                c
            })
    }

    fn arb_network() -> impl Strategy<Value = NetworkConfig> {
        prop_oneof![
            (0.0f64..200.0, 0.0f64..100.0).prop_map(|(mean_ms, std_ms)| NetworkConfig::MeanStd { mean_ms, std_ms }),
            (0.0f64..200.0, 0.0f64..2.0).prop_map(|(mean_ms, cv)| NetworkConfig::MeanCv { mean_ms, cv }),
            "[a-z]{1,8}\\.txt".prop_map(|t| NetworkConfig::Trace { trace_file: PathBuf::from(t) }),
        ]
    }

    proptest! {
        #[test]
        fn config_round_trips(
            models in proptest::collection::vec(arb_model(), 0..5),
            network in arb_network(),
            policies in proptest::sample::subsequence(PolicyKind::ALL.to_vec(), 1..=6),
            sla in proptest::option::of(1.0f64..1000.0),
            grid_len in 0usize..6,
            threshold in 0.0f64..150.0,
            requests in 1usize..100_000,
            warmup in 0usize..5000,
            seed in any::<u64>(),
            stale in prop_oneof![Just(f64::INFINITY), 1.0f64..1e6],
        ) {
            let mut seen = HashSet::new();
            let models: Vec<_> = models.into_iter().filter(|m| seen.insert(m.id.clone())).collect();
            let cfg = ExperimentConfig {
                models,
                network,
                policies,
                sla_ms: sla,
                sla_grid: (1..=grid_len).map(|i| i as f64 * 25.5).collect(),
                cv_grid: (0..grid_len).map(|i| i as f64 / 10.0).collect(),
                threshold_ms: threshold,
                requests,
                warmup,
                seed,
                staleness_window_ms: stale,
                ..ExperimentConfig::default()
            };
            let text = cfg.to_text();
            let back = ExperimentConfig::parse(&text, "rt").unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
