use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use slasel_core::config::{self, ConfigError, ExperimentConfig, ModelConfig};
use slasel_core::simulator::{self, RunResult, SimError, SimulationConfig};
use slasel_core::{BudgetConfig, PolicyKind};
use slasel_gateway::{Gateway, GatewayConfig};

#[derive(Parser)]
#[command(name = "slasel", version, about = "SLA-aware model selection: simulator, sweeps and gateway")]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every configured policy at `sla_ms`.
    Simulate,
    /// Every configured policy over `sla_grid`.
    SweepSla,
    /// Every configured policy over `cv_grid` at `sla_ms`, around the network mean.
    SweepCv,
    /// Policies side by side on shared seeds, at `sla_ms` or over `sla_grid`.
    Compare,
    /// Runs the HTTP gateway until interrupted.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Model pool file (`[model]` blocks only). Falls back to --config's models.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long)]
    threshold_ms: Option<f64>,
    #[arg(long)]
    t_on_device_ms: Option<f64>,
    /// Synthetic probe executions per unseeded model.
    #[arg(long)]
    warmup: Option<usize>,
    /// Use a fixed uplink estimate instead of client timestamps.
    #[arg(long)]
    fixed_t_input_ms: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_)
            | SimError::Budget(_)
            | SimError::Registry(_)
            | SimError::Pool(_)
            | SimError::Network(_)
            | SimError::EmptyGrid => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Command::Serve(args) = &cli.command {
        return serve(cli, args);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let name = match cli.command {
        Command::Simulate => "simulate",
        Command::SweepSla => "sweep-sla",
        Command::SweepCv => "sweep-cv",
        Command::Compare => "compare",
        Command::Serve(_) => unreachable!(),
    };
    let points = plan(name, &cfg, &config::config_dir(path))?;
    let results = simulator::run_many(&points)?;
    write_outputs(name, &cfg, &points, &results)
}

fn base_config(cfg: &ExperimentConfig, base_dir: &Path, sla_ms: f64) -> Result<SimulationConfig, Failure> {
    let network = cfg
        .network
        .build(base_dir)
        .map_err(|e| Failure::Config(format!("[network]: {e}")))?;
    let mut sim = SimulationConfig::new(cfg.models.clone(), network, PolicyKind::Modipick, sla_ms);
    sim.budget = BudgetConfig::new(cfg.threshold_ms, cfg.t_on_device_ms).map_err(|e| Failure::Config(e.to_string()))?;
    sim.request_count = cfg.requests;
    sim.warmup_count = cfg.warmup;
    sim.seed = cfg.seed;
    sim.alpha = cfg.alpha;
    sim.staleness_window_ms = cfg.staleness_window_ms;
    Ok(sim)
}

fn require_sla(cfg: &ExperimentConfig, cmd: &str) -> Result<f64, Failure> {
    cfg.sla_ms
        .ok_or_else(|| Failure::Config(format!("{cmd} needs sla_ms")))
}

fn require_grid<'a>(grid: &'a [f64], key: &str, cmd: &str) -> Result<&'a [f64], Failure> {
    if grid.is_empty() {
        Err(Failure::Config(format!("{cmd} needs a non-empty {key}")))
    } else {
        Ok(grid)
    }
}

/// Expands the config into simulation points, grid-major then policy order.
/// Policies at the same grid point share a seed.
fn plan(cmd: &str, cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<SimulationConfig>, Failure> {
    let grid: Vec<SimulationConfig> = match cmd {
        "simulate" => vec![base_config(cfg, base_dir, require_sla(cfg, cmd)?)?],
        "sweep-sla" => {
            let slas = require_grid(&cfg.sla_grid, "sla_grid", cmd)?;
            simulator::sla_grid(&base_config(cfg, base_dir, slas[0])?, slas)?
        }
        "sweep-cv" => {
            let sla = require_sla(cfg, cmd)?;
            let cvs = require_grid(&cfg.cv_grid, "cv_grid", cmd)?;
            let mean = cfg
                .network
                .mean_ms()
                .ok_or_else(|| Failure::Config("sweep-cv needs a parametric [network] mean_ms".into()))?;
            simulator::cv_grid(&base_config(cfg, base_dir, sla)?, mean, cvs)?
        }
        "compare" => match (cfg.sla_grid.is_empty(), cfg.sla_ms) {
            (false, _) => simulator::sla_grid(&base_config(cfg, base_dir, cfg.sla_grid[0])?, &cfg.sla_grid)?,
            (true, Some(sla)) => vec![base_config(cfg, base_dir, sla)?],
            (true, None) => return Err(Failure::Config("compare needs sla_ms or sla_grid".into())),
        },
        _ => unreachable!("unknown command {cmd}"),
    };
    Ok(grid
        .iter()
        .flat_map(|point| {
            cfg.policies.iter().map(move |&policy| SimulationConfig {
                policy,
                ..point.clone()
            })
        })
        .collect())
}

fn outcome_name(point: &SimulationConfig, with_cv: bool) -> String {
    let mut name = format!("{}_sla{}", point.policy, point.sla_ms);
    if with_cv {
        if let Some(cv) = point.network.cv() {
            let _ = write!(name, "_cv{cv}");
        }
    }
    name + ".csv"
}

fn write_outputs(
    cmd: &str,
    cfg: &ExperimentConfig,
    points: &[SimulationConfig],
    results: &[RunResult],
) -> Result<(), Failure> {
    let dir = &cfg.output_dir;
    let outcomes_dir = dir.join("outcomes");
    fs::create_dir_all(&outcomes_dir).map_err(|e| io_err(&outcomes_dir, e))?;
    let create = |p: PathBuf| File::create(&p).map(BufWriter::new).map_err(|e| io_err(&p, e));

    let reports: Vec<_> = results.iter().map(|r| r.report.clone()).collect();
    simulator::write_reports(create(dir.join("report.csv"))?, &reports)?;
    simulator::write_usage(create(dir.join("usage.csv"))?, &reports)?;

    let with_cv = cmd == "sweep-cv";
    let mut manifest = format!(
        "# slasel {}\n# command: {cmd}\n",
        env!("CARGO_PKG_VERSION")
    );
    for (point, result) in points.iter().zip(results) {
        let name = outcome_name(point, with_cv);
        simulator::write_outcomes(create(outcomes_dir.join(&name))?, &result.outcomes)?;
        let cv = point.network.cv().map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            manifest,
            "# point policy={} sla_ms={} cv={cv} seed={} outcomes=outcomes/{name}",
            point.policy, point.sla_ms, point.seed
        );
        let r = &result.report;
        tracing::info!(
            policy = %point.policy,
            sla_ms = point.sla_ms,
            attainment = r.sla_attainment,
            accuracy = r.effective_accuracy,
            mean_ms = r.mean_latency_ms,
            "point done"
        );
    }
    manifest.push('\n');
    manifest.push_str(&cfg.to_text());
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))?;
    println!("wrote {} report rows to {}", reports.len(), dir.display());
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> Result<(), Failure> {
    let experiment = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let defaults = experiment.clone().unwrap_or_default();
    let models: Vec<ModelConfig> = match (&args.models, &experiment) {
        (Some(p), _) => config::load_model_pool(p)?,
        (None, Some(e)) => e.models.clone(),
        (None, None) => return Err(Failure::Config("serve needs --models or --config".into())),
    };
    let budget = BudgetConfig::new(
        args.threshold_ms.unwrap_or(defaults.threshold_ms),
        args.t_on_device_ms.unwrap_or(defaults.t_on_device_ms),
    )
    .map_err(|e| Failure::Config(e.to_string()))?;
    let gw_config = GatewayConfig {
        budget,
        warmup: args.warmup.unwrap_or(defaults.warmup),
        alpha: defaults.alpha,
        seed: cli.seed.unwrap_or(defaults.seed),
        staleness_window_ms: defaults.staleness_window_ms,
        fixed_t_input_ms: args.fixed_t_input_ms,
    };
    let gateway = Gateway::with_pool(gw_config, &models).map_err(|e| Failure::Config(e.to_string()))?;

    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot bind {}: {e}", args.listen)))?;
        let addr = listener.local_addr().map_err(|e| Failure::Runtime(e.to_string()))?;
        tracing::info!(%addr, models = models.len(), "gateway listening");
        println!("listening on {addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        slasel_gateway::serve(listener, Arc::new(gateway), shutdown)
            .await
            .map_err(|e| Failure::Runtime(e.to_string()))
    })
}
