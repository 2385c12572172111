//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p slasel-cli --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slasel_core::config::{measured_pool, MEASURED_POOL};
use slasel_core::netmodel::{LatencyDistribution, NetworkProfile};
use slasel_core::policy::{self, SelectionPath};
use slasel_core::registry::{ModelSpec, ProfileSnapshot, Registry};
use slasel_core::simulator::{self, Report, SimulationConfig};
use slasel_core::{BudgetConfig, PolicyKind, TimeBudget};
use slasel_gateway::{Gateway, GatewayConfig, InferResponse, MetricsView};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.2}s/{limit_s}s"))
}

/// Measured pool with seeded profiles, optionally forcing σ to zero.
fn seeded_snapshot(zero_std: bool) -> ProfileSnapshot {
    let mut reg = Registry::new();
    for (id, acc, mean, std) in MEASURED_POOL {
        let std = if zero_std { 0.0 } else { std };
        let spec = ModelSpec::new(id, acc / 100.0, LatencyDistribution::truncated_normal(mean, std).unwrap());
        reg.register_model(spec, Some((mean, std))).unwrap();
    }
    reg.snapshot(0.0)
}

fn greedy_equivalence() -> Verdict {
    let t = Instant::now();
    let snap = seeded_snapshot(true);
    let cfg = BudgetConfig::new(0.0, 150.0).unwrap();
    let means: Vec<f64> = MEASURED_POOL.iter().map(|r| r.2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut cases, mut chosen_eq, mut base_eq) = (0, 0, 0);
    let mut first_miss = None;
    for b in 0..=200 {
        let b = b as f64;
        if means.contains(&b) {
            continue;
        }
        cases += 1;
        let greedy = policy::select_dynamic_greedy(&snap, b).unwrap().chosen;
        let budget = if b > 0.0 {
            TimeBudget::from_input(b, 0.0, &cfg).unwrap()
        } else {
            TimeBudget::from_limits(0.0, 0.0)
        };
        let full = policy::select_modipick(&snap, &budget, &mut rng).unwrap();
        let base = full.base().map(str::to_string).unwrap_or_else(|| full.chosen.clone());
        let anytime = policy::select_modipick_anytime(&snap, &budget).unwrap().chosen;
        if full.chosen == greedy {
            chosen_eq += 1;
        } else if first_miss.is_none() {
            first_miss = Some(format!("b={b}: drew {:?}, greedy {greedy:?}", full.chosen));
        }
        if base == greedy && anytime == greedy {
            base_eq += 1;
        }
    }
    let (fast, time) = within(t.elapsed(), 1.0);
    verdict(
        cases == 201 && chosen_eq == cases && fast,
        format!(
            "chosen id matches greedy {chosen_eq}/{cases}; stage-one base matches {base_eq}/{cases}; first mismatch: {}; {time}",
            first_miss.unwrap_or_else(|| "none".into())
        ),
    )
}

/// Straight-line utility/probability evaluation, independent of the library.
fn oracle_probabilities(upper: f64, lower: f64) -> (String, Vec<(String, f64)>) {
    let rows: Vec<(&str, f64, f64, f64)> = MEASURED_POOL
        .iter()
        .map(|&(id, acc, m, s)| (id, acc / 100.0, m, s))
        .collect();
    let mut base = None::<(&str, f64, f64, f64)>;
    for &r in &rows {
        if r.2 + r.3 < upper && r.2 - r.3 < lower {
            let better = match base {
                None => true,
                Some(b) => r.1 > b.1 || (r.1 == b.1 && r.2 < b.2),
            };
            if better {
                base = Some(r);
            }
        }
    }
    let base = base.expect("example has a feasible base");
    let d = (lower - base.2).abs() + base.3;
    let mut utils = Vec::new();
    for &(id, acc, m, s) in &rows {
        if id == base.0 || (m >= lower - d && m <= lower + d && m + s < upper) {
            let u = acc * (upper - (m + s)) / (lower - m).abs().max(1e-6);
            utils.push((id.to_string(), u));
        }
    }
    let total: f64 = utils.iter().map(|(_, u)| u).sum();
    (
        base.0.to_string(),
        utils.into_iter().map(|(id, u)| (id, u / total)).collect(),
    )
}

fn worked_example() -> Verdict {
    let t = Instant::now();
    let snap = seeded_snapshot(false);
    let (base_idx, path) = policy::select_base(&snap, 70.0, 50.0).unwrap();
    let set = policy::build_exploration_set(&snap, base_idx, 70.0, 50.0).unwrap();
    let (oracle_base, oracle) = oracle_probabilities(70.0, 50.0);
    let expected = [("InceptionV3", 0.081), ("InceptionResNetV2", 0.872), ("InceptionV4", 0.047)];

    let mut ok = path == SelectionPath::Normal && set.base == "InceptionV3" && oracle_base == "InceptionV3";
    ok &= set.len() == 3 && oracle.len() == 3;
    let mut parts = Vec::new();
    for (id, p) in expected {
        let lib = set.probability_of(id).unwrap_or(f64::NAN);
        let orc = oracle.iter().find(|(o, _)| o == id).map(|(_, p)| *p).unwrap_or(f64::NAN);
        ok &= (lib - p).abs() <= 1e-3 && (lib - orc).abs() <= 1e-3;
        parts.push(format!("{id}={lib:.4} (oracle {orc:.4}, expected {p})"));
    }
    let (fast, time) = within(t.elapsed(), 1.0);
    verdict(ok && fast, format!("base {}; {}; {time}", set.base, parts.join(", ")))
}

fn probabilistic_laws() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut normal, mut violations) = (0, Vec::new());
    for case in 0..10_000 {
        let n = rng.random_range(1..=12);
        let mut reg = Registry::new();
        for i in 0..n {
            let mean = rng.random_range(0.5..200.0);
            let std = rng.random_range(0.0..20.0);
            let acc = rng.random_range(0.01..=1.0);
            let spec = ModelSpec::new(format!("m{i}"), acc, LatencyDistribution::degenerate(mean).unwrap());
            reg.register_model(spec, Some((mean, std))).unwrap();
        }
        let snap = reg.snapshot(0.0);
        let upper: f64 = rng.random_range(1.0..250.0);
        let lower = upper - rng.random_range(0.0..upper.min(150.0));
        let (base_idx, path) = policy::select_base(&snap, upper, lower).unwrap();
        if path != SelectionPath::Normal {
            continue;
        }
        normal += 1;
        let set = policy::build_exploration_set(&snap, base_idx, upper, lower).unwrap();
        let sum: f64 = set.members.iter().map(|m| m.probability).sum();
        let mut bad = Vec::new();
        if (sum - 1.0).abs() > 1e-9 {
            bad.push(format!("ΣPr={sum}"));
        }
        if !set.contains(&set.base) {
            bad.push("base missing".into());
        }
        for m in &set.members {
            if !(m.utility > 0.0) {
                bad.push(format!("U({})={}", m.model_id, m.utility));
            }
            if !(m.mean_ms + m.std_ms < upper) {
                bad.push(format!("{} breaks hard limit", m.model_id));
            }
            if !set.window.contains(m.mean_ms) {
                bad.push(format!("{} outside window", m.model_id));
            }
        }
        if !bad.is_empty() && violations.len() < 3 {
            violations.push(format!("case {case}: {}", bad.join(", ")));
        }
    }
    let (fast, time) = within(t.elapsed(), 5.0);
    verdict(
        violations.is_empty() && fast,
        format!(
            "10000 cases, {normal} on the normal path; violations: {}; {time}",
            if violations.is_empty() { "none".into() } else { violations.join("; ") }
        ),
    )
}

fn sampling_fidelity() -> Verdict {
    let t = Instant::now();
    let snap = seeded_snapshot(false);
    let (base_idx, _) = policy::select_base(&snap, 70.0, 50.0).unwrap();
    let mut set = policy::build_exploration_set(&snap, base_idx, 70.0, 50.0).unwrap();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..n {
        let (id, _) = policy::normalize_and_sample(&mut set, &mut rng).unwrap();
        *counts.entry(id).or_default() += 1;
    }
    let mut ok = counts.len() == set.len();
    let mut parts = Vec::new();
    for m in &set.members {
        let f = counts.get(&m.model_id).copied().unwrap_or(0) as f64 / n as f64;
        let tol = 3.0 * (m.probability * (1.0 - m.probability) / n as f64).sqrt();
        ok &= (f - m.probability).abs() <= tol;
        parts.push(format!("{} {f:.4} vs {:.4}±{tol:.4}", m.model_id, m.probability));
    }
    let (fast, time) = within(t.elapsed(), 2.0);
    verdict(ok && fast, format!("{}; {time}", parts.join(", ")))
}

fn wifi() -> NetworkProfile {
    NetworkProfile::symmetric(LatencyDistribution::truncated_normal(57.87, 30.78).unwrap())
}

/// Runs every policy over the SLA grid; policies at one SLA share a seed.
fn sla_sweep(
    models: Vec<slasel_core::ModelConfig>,
    network: NetworkProfile,
    threshold: f64,
    seed: u64,
    policies: &[PolicyKind],
    slas: &[f64],
) -> BTreeMap<(PolicyKind, u64), Report> {
    let mut base = SimulationConfig::new(models, network, PolicyKind::Modipick, slas[0]);
    base.budget = BudgetConfig::new(threshold, 150.0).unwrap();
    base.seed = seed;
    let grid = simulator::sla_grid(&base, slas).unwrap();
    let points: Vec<_> = grid
        .iter()
        .flat_map(|p| policies.iter().map(move |&policy| SimulationConfig { policy, ..p.clone() }))
        .collect();
    simulator::run_many(&points)
        .unwrap()
        .into_iter()
        .map(|r| ((r.report.policy, r.report.sla_ms as u64), r.report))
        .collect()
}

fn wifi_sweep() -> BTreeMap<(PolicyKind, u64), Report> {
    let mut slas: Vec<f64> = (100..=250).step_by(10).map(f64::from).collect();
    slas.push(400.0);
    sla_sweep(
        measured_pool(false),
        wifi(),
        20.0,
        1,
        &[PolicyKind::Modipick, PolicyKind::StaticGreedy],
        &slas,
    )
}

fn wifi_comparison(reports: &BTreeMap<(PolicyKind, u64), Report>, elapsed: Duration) -> Verdict {
    let get = |p, s| &reports[&(p, s)];
    let (m150, g150) = (get(PolicyKind::Modipick, 150), get(PolicyKind::StaticGreedy, 150));
    let a = m150.sla_attainment >= 0.60 && g150.sla_attainment <= 0.10;
    let mut worse = Vec::new();
    for sla in (100..=250).step_by(10) {
        let (m, g) = (get(PolicyKind::Modipick, sla), get(PolicyKind::StaticGreedy, sla));
        if m.mean_latency_ms > g.mean_latency_ms {
            worse.push(format!("{sla}: {:.1}>{:.1}", m.mean_latency_ms, g.mean_latency_ms));
        }
    }
    let b = worse.is_empty();
    let m400 = get(PolicyKind::Modipick, 400);
    let c = m400.effective_accuracy >= 0.78;
    let (fast, time) = within(elapsed, 30.0);
    let tag = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        a && b && c && fast,
        format!(
            "(a) {}: attainment@150 modipick {:.3} (≥0.60), static_greedy {:.3} (≤0.10); \
             (b) {}: mean latency modipick ≤ static_greedy at 100..250 [{}]; \
             (c) {}: accuracy@400 modipick {:.3} (≥0.78); {time}",
            tag(a),
            m150.sla_attainment,
            g150.sla_attainment,
            tag(b),
            if b { "all".into() } else { worse.join(", ") },
            tag(c),
            m400.effective_accuracy,
        ),
    )
}

fn attainment_gain(reports: &BTreeMap<(PolicyKind, u64), Report>) -> Verdict {
    let m = reports[&(PolicyKind::Modipick, 150)].sla_attainment;
    let g = reports[&(PolicyKind::StaticGreedy, 150)].sla_attainment;
    verdict(
        m - g >= 0.50,
        format!("attainment@150 modipick {m:.3} − static_greedy {g:.3} = {:.1} points (≥50)", (m - g) * 100.0),
    )
}

fn network_variability() -> Verdict {
    let t = Instant::now();
    let mut base = SimulationConfig::new(
        measured_pool(false),
        NetworkProfile::symmetric(LatencyDistribution::degenerate(50.0).unwrap()),
        PolicyKind::Modipick,
        100.0,
    );
    base.budget = BudgetConfig::new(0.0, 150.0).unwrap();
    base.seed = 2;
    let run = |sla: f64| {
        let cfg = SimulationConfig { sla_ms: sla, ..base.clone() };
        let r = simulator::sweep_cv(&cfg, 50.0, &[0.0, 1.0]).unwrap();
        (r[0].report.clone(), r[1].report.clone())
    };
    let (lo0, lo1) = run(100.0);
    let (hi0, hi1) = run(250.0);

    let small = "MobileNetV1 0.25";
    let a = lo0.sla_attainment <= 0.05 && lo0.usage_of(small) >= 0.99 && (lo0.effective_accuracy - 0.497).abs() <= 0.02;
    let b = lo1.effective_accuracy - lo0.effective_accuracy >= 0.03;
    let c = hi0.usage_of("NasNet Large") >= 0.99
        && hi0.sla_attainment >= 0.99
        && (hi0.effective_accuracy - 0.826).abs() <= 0.02;
    let (n0, n1) = (hi0.models_used(0.01), hi1.models_used(0.01));
    let d = n1 >= 3 && n1 > n0;
    let (fast, time) = within(t.elapsed(), 60.0);
    let tag = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        a && b && c && d && fast,
        format!(
            "(a) {}: sla100 cv0 attainment {:.3}, {small} usage {:.3}, accuracy {:.3}; \
             (b) {}: sla100 accuracy cv1 {:.3} vs cv0 {:.3}; \
             (c) {}: sla250 cv0 NasNet Large usage {:.3}, attainment {:.3}, accuracy {:.3}; \
             (d) {}: sla250 models ≥1% usage cv1 {n1} vs cv0 {n0}; {time}",
            tag(a),
            lo0.sla_attainment,
            lo0.usage_of(small),
            lo0.effective_accuracy,
            tag(b),
            lo1.effective_accuracy,
            lo0.effective_accuracy,
            tag(c),
            hi0.usage_of("NasNet Large"),
            hi0.sla_attainment,
            hi0.effective_accuracy,
            tag(d),
        ),
    )
}

fn decomposition() -> Verdict {
    let t = Instant::now();
    let slas = [150.0, 190.0, 230.0, 270.0, 310.0, 350.0, 400.0];
    let policies = [
        PolicyKind::Modipick,
        PolicyKind::PureRandom,
        PolicyKind::RelatedRandom,
        PolicyKind::RelatedAccurate,
    ];
    let net = NetworkProfile::symmetric(LatencyDistribution::from_mean_cv(50.0, 0.5).unwrap());
    let reports = sla_sweep(measured_pool(true), net, 20.0, 3, &policies, &slas);
    let acc = |p, s: f64| reports[&(p, s as u64)].effective_accuracy;

    let (mut a, mut b, mut c, mut d) = (true, true, true, true);
    let mut rows = Vec::new();
    for &s in &slas {
        let (m, pr, rr, ra) = (
            acc(PolicyKind::Modipick, s),
            acc(PolicyKind::PureRandom, s),
            acc(PolicyKind::RelatedRandom, s),
            acc(PolicyKind::RelatedAccurate, s),
        );
        let fict = reports[&(PolicyKind::Modipick, s as u64)].usage_of("NasNet Fictional");
        a &= (pr - 0.673).abs() <= 0.02;
        c &= m >= ra - 0.03;
        if s >= 230.0 {
            b &= rr <= m - 0.05;
            d &= fict > 0.0 && fict < 0.15;
        }
        rows.push(format!(
            "{s}: modipick {m:.3} pure {pr:.3} related_random {rr:.3} related_accurate {ra:.3} fictional {fict:.3}"
        ));
    }
    let (fast, time) = within(t.elapsed(), 60.0);
    let tag = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        a && b && c && d && fast,
        format!(
            "(a) {} pure_random 0.673±0.02; (b) {} related_random ≤ modipick−0.05 at ≥230; \
             (c) {} modipick ≥ related_accurate−0.03; (d) {} fictional usage in (0, 0.15) at ≥230; [{}]; {time}",
            tag(a),
            tag(b),
            tag(c),
            tag(d),
            rows.join(" | ")
        ),
    )
}

fn run_cli(args: &[&str], config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_slasel"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let pool = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/table2.cfg");
    let cfg = tmp.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "models_file = {}\npolicies = modipick, static_greedy, pure_random\nsla_ms = 200\n\
             sla_grid = 120, 200, 300\ncv_grid = 0, 0.5, 1\nrequests = 2000\nseed = 9\n\n[network]\nmean_ms = 57.87\ncv = 0.53\n",
            pool.display()
        ),
    )
    .unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for cmd in ["simulate", "sweep-sla", "sweep-cv", "compare"] {
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        if let Err(e) = run_cli(&[cmd], &cfg, &a).and_then(|_| run_cli(&[cmd], &cfg, &b)) {
            ok = false;
            parts.push(format!("{cmd}: failed: {}", e.trim()));
            continue;
        }
        // The manifest echoes --out, which necessarily differs between the two runs.
        let strip = |mut files: BTreeMap<String, Vec<u8>>| {
            if let Some(m) = files.get_mut("manifest.txt") {
                let text = String::from_utf8_lossy(m).into_owned();
                *m = text
                    .lines()
                    .filter(|l| !l.starts_with("output_dir = "))
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            files
        };
        let (fa, fb) = (strip(files_under(&a)), strip(files_under(&b)));
        let outcomes = fa.keys().filter(|k| k.starts_with("outcomes")).count();
        let same = fa == fb && outcomes > 0;
        ok &= same;
        parts.push(format!(
            "{cmd}: {} files ({outcomes} outcome logs) {}",
            fa.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn epoch_ms() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs_f64() * 1000.0
}

fn gateway_integration() -> Verdict {
    let t = Instant::now();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(async {
        let gateway = Arc::new(
            Gateway::with_pool(GatewayConfig::default(), &measured_pool(false)).map_err(|e| e.to_string())?,
        );
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(slasel_gateway::serve(listener, gateway, async {
            let _ = stop_rx.await;
        }));
        let client = reqwest::Client::new();
        let base = format!("http://{addr}");

        let n = 100;
        let (mut met, mut audited) = (0, 0);
        let mut models = BTreeMap::<String, usize>::new();
        for i in 0..n {
            let start = Instant::now();
            let body = serde_json::json!({
                "sla_ms": 250.0,
                "client_start_ts_ms": epoch_ms(),
                "payload_b64": "AAAA",
                "request_id": format!("acc-{i}"),
            });
            let resp = client
                .post(format!("{base}/v1/infer"))
                .json(&body)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            if !resp.status().is_success() {
                return Err(format!("request {i}: HTTP {}", resp.status()));
            }
            let r: InferResponse = resp.json().await.map_err(|e| e.to_string())?;
            if start.elapsed().as_secs_f64() * 1000.0 <= 250.0 {
                met += 1;
            }
            if r.passes_safety_audit() && r.server_exec_ms >= 0.0 {
                audited += 1;
            }
            *models.entry(r.model_used).or_default() += 1;
        }
        let metrics: MetricsView = client
            .get(format!("{base}/v1/metrics"))
            .send()
            .await
            .map_err(|e| e.to_string())?
            .json()
            .await
            .map_err(|e| e.to_string())?;
        let _ = stop_tx.send(());
        let _ = server.await;
        let usage: u64 = metrics.per_model.values().map(|m| m.usage_count).sum();
        Ok::<_, String>((n, met, audited, usage, models))
    });
    let (fast, time) = within(t.elapsed(), 60.0);
    match result {
        Err(e) => verdict(false, format!("gateway run failed: {e}")),
        Ok((n, met, audited, usage, models)) => {
            let attainment = met as f64 / n as f64;
            verdict(
                attainment >= 0.90 && usage == n as u64 && audited == n && fast,
                format!(
                    "client attainment {attainment:.2} (≥0.90); usage counts sum {usage}/{n}; safety audit {audited}/{n}; models {models:?}; {time}"
                ),
            )
        }
    }
}

fn performance() -> Verdict {
    let mut cfg = SimulationConfig::new(measured_pool(false), wifi(), PolicyKind::Modipick, 250.0);
    cfg.seed = 11;
    let t = Instant::now();
    let r = simulator::run(&cfg).unwrap();
    let (fast, time) = within(t.elapsed(), 1.0);
    verdict(
        fast && r.outcomes.len() == 10_000,
        format!("{} requests (plus warmup) in {time}", r.outcomes.len()),
    )
}

fn main() {
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n, name, v: Verdict| {
        println!("criterion {n:>2} {name}: {} — {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((n, name, v));
    };
    record(1, "greedy equivalence", greedy_equivalence());
    record(2, "worked example", worked_example());
    record(3, "probabilistic laws", probabilistic_laws());
    record(4, "sampling fidelity", sampling_fidelity());
    let t = Instant::now();
    let wifi_reports = wifi_sweep();
    let elapsed = t.elapsed();
    record(5, "wifi sla sweep vs static greedy", wifi_comparison(&wifi_reports, elapsed));
    record(6, "attainment gain over static greedy", attainment_gain(&wifi_reports));
    record(7, "network variability", network_variability());
    record(8, "benefit decomposition", decomposition());
    record(9, "determinism", determinism());
    record(10, "gateway integration", gateway_integration());
    record(11, "performance", performance());

    let failed: Vec<_> = verdicts.iter().filter(|(_, _, v)| !v.pass).map(|(n, _, _)| n.to_string()).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
